use serde::{Deserialize, Serialize};

use super::head::{loss_and_gradients, predict, AttributorHead, Gradients};
use super::optim::{adamw_step, lr_at, TrainConfig};
use crate::error::{Error, Result};
use crate::features::Embedding;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,train_acc,val_acc\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{:e},{},{},{}\n", r.epoch, r.lr, r.train_loss, r.train_acc, r.val_acc));
        }
        out
    }
}

pub fn accuracy(h: &AttributorHead, set: &[(Embedding, usize)]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (e, y) in set {
        if predict(h, e)?.class_index == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

// Fixed-order pairwise reduction so the summed gradient does not depend on
// how per-sample work is scheduled.
fn tree_sum(mut parts: Vec<Gradients>) -> Gradients {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add_assign(&b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().expect("nonempty batch")
}

/// Trains `head` in place for `cfg.epochs` and returns the parameters of the
/// epoch with the best validation accuracy (earliest on ties).
pub fn train(
    mut head: AttributorHead,
    train_set: &[(Embedding, usize)],
    val_set: &[(Embedding, usize)],
    cfg: &TrainConfig,
) -> Result<(AttributorHead, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::validation("training and validation sets must be nonempty"));
    }
    for (e, y) in train_set.iter().chain(val_set) {
        if e.dim() != head.config.input_dim {
            return Err(Error::validation(format!(
                "embedding dim {} does not match head input dim {}",
                e.dim(),
                head.config.input_dim
            )));
        }
        if *y >= head.num_classes() {
            return Err(Error::validation(format!("label {y} out of range")));
        }
    }
    let opt = cfg.optimizer();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, AttributorHead)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg, epoch)?;
        order.sort_unstable();
        SplitMix64::new(derive_seed(&[cfg.shuffle_seed, epoch as u64])).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut parts = Vec::with_capacity(batch.len());
            for &i in batch {
                let (e, y) = &train_set[i];
                let (loss, g, logits) = loss_and_gradients(&head, e, *y)?;
                loss_sum += loss;
                let mut arg = 0;
                for (k, l) in logits.iter().enumerate() {
                    if *l > logits[arg] {
                        arg = k;
                    }
                }
                if arg == *y {
                    correct += 1;
                }
                parts.push(g);
            }
            let mut g = tree_sum(parts);
            g.scale(1.0 / batch.len() as f64);
            adamw_step(&mut head, &g, lr, &opt)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let val_acc = accuracy(&head, val_set)?;
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, head.clone()));
        }
    }
    let (_, best_epoch, best_head) = best.expect("at least one epoch");
    Ok((
        best_head,
        TrainHistory {
            epochs: records,
            best_epoch,
        },
    ))
}
