use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Embedding;
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub num_classes: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_hidden() -> usize {
    256
}

impl HeadConfig {
    pub fn linear(input_dim: usize, num_classes: usize, init_seed: u64) -> Self {
        Self {
            kind: HeadKind::Linear,
            input_dim,
            num_classes,
            hidden_dim: default_hidden(),
            init_seed,
        }
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden_dim: usize, init_seed: u64) -> Self {
        Self {
            kind: HeadKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::validation("head dimensions must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::validation(format!(
                "a head needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// `(out, in)` shapes of the layers.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match self.kind {
            HeadKind::Linear => vec![(self.num_classes, self.input_dim)],
            HeadKind::Mlp => vec![
                (self.hidden_dim, self.input_dim),
                (self.hidden_dim, self.hidden_dim),
                (self.num_classes, self.hidden_dim),
            ],
        }
    }
}

/// Fully connected layer; `weight` is `out x in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Moments {
    pub m_weight: Vec<f64>,
    pub v_weight: Vec<f64>,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct OptimizerState {
    pub step: u64,
    pub moments: Vec<Moments>,
}

impl OptimizerState {
    pub(crate) fn zeros(layers: &[Dense]) -> Self {
        Self {
            step: 0,
            moments: layers
                .iter()
                .map(|l| Moments {
                    m_weight: vec![0.0; l.weight.len()],
                    v_weight: vec![0.0; l.weight.len()],
                    m_bias: vec![0.0; l.bias.len()],
                    v_bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributorHead {
    pub config: HeadConfig,
    pub layers: Vec<Dense>,
    pub class_names: Vec<String>,
    pub(crate) state: OptimizerState,
}

impl AttributorHead {
    pub(crate) fn from_parts(config: HeadConfig, layers: Vec<Dense>, class_names: Vec<String>) -> Result<Self> {
        config.validate()?;
        if class_names.len() != config.num_classes {
            return Err(Error::validation(format!(
                "{} class names for {} classes",
                class_names.len(),
                config.num_classes
            )));
        }
        let shapes = config.layer_shapes();
        if shapes.len() != layers.len()
            || shapes.iter().zip(&layers).any(|(&(o, i), l)| {
                l.out_dim != o || l.in_dim != i || l.weight.len() != o * i || l.bias.len() != o
            })
        {
            return Err(Error::validation("layer shapes do not match head config"));
        }
        let state = OptimizerState::zeros(&layers);
        Ok(Self {
            config,
            layers,
            class_names,
            state,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn optimizer_step(&self) -> u64 {
        self.state.step
    }

    /// Drops optimizer moments, as stored in inference checkpoints.
    pub fn reset_optimizer(&mut self) {
        self.state = OptimizerState::zeros(&self.layers);
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }
}

/// Xavier-uniform weights from `SplitMix64(init_seed)`, zero biases.
pub fn init_head(cfg: &HeadConfig, class_names: Vec<String>) -> Result<AttributorHead> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.init_seed);
    let layers = cfg
        .layer_shapes()
        .into_iter()
        .map(|(out_dim, in_dim)| {
            let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
            Dense {
                out_dim,
                in_dim,
                weight: (0..out_dim * in_dim).map(|_| rng.uniform(-a, a)).collect(),
                bias: vec![0.0; out_dim],
            }
        })
        .collect();
    AttributorHead::from_parts(cfg.clone(), layers, class_names)
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// Inputs to each layer; the last entry is the logits.
fn forward_trace(h: &AttributorHead, x: &[f64]) -> Vec<Vec<f64>> {
    let mut trace = Vec::with_capacity(h.layers.len() + 1);
    trace.push(x.to_vec());
    let last = h.layers.len() - 1;
    for (i, layer) in h.layers.iter().enumerate() {
        let mut out = Vec::with_capacity(layer.out_dim);
        layer.apply(trace.last().unwrap(), &mut out);
        if i < last {
            for v in &mut out {
                *v = logistic(*v);
            }
        }
        trace.push(out);
    }
    trace
}

fn check_dim(h: &AttributorHead, e: &Embedding) -> Result<()> {
    if e.dim() != h.config.input_dim {
        return Err(Error::validation(format!(
            "embedding dim {} does not match head input dim {}",
            e.dim(),
            h.config.input_dim
        )));
    }
    Ok(())
}

pub fn forward(h: &AttributorHead, e: &Embedding) -> Result<Vec<f64>> {
    check_dim(h, e)?;
    Ok(forward_trace(h, &e.data).pop().unwrap())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy in nats and its gradient `softmax - one_hot`.
pub fn softmax_ce(logits: &[f64], true_class: usize) -> Result<(f64, Vec<f64>)> {
    if true_class >= logits.len() {
        return Err(Error::validation(format!(
            "class index {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[true_class];
    let mut grad = softmax(logits);
    grad[true_class] -= 1.0;
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(h: &AttributorHead) -> Self {
        Self {
            layers: h
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

/// Loss, analytic parameter gradients and logits for one sample.
pub fn loss_and_gradients(h: &AttributorHead, e: &Embedding, true_class: usize) -> Result<(f64, Gradients, Vec<f64>)> {
    check_dim(h, e)?;
    let trace = forward_trace(h, &e.data);
    let logits = trace.last().unwrap().clone();
    let (loss, mut delta) = softmax_ce(&logits, true_class)?;
    let mut grads: Vec<LayerGrad> = Vec::with_capacity(h.layers.len());
    for (i, layer) in h.layers.iter().enumerate().rev() {
        let input = &trace[i];
        let mut gw = vec![0.0; layer.weight.len()];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (g, x) in row.iter_mut().zip(input) {
                *g = d * x;
            }
        }
        let gb = delta.clone();
        if i > 0 {
            // Back through W, then through the logistic that produced `input`.
            let mut next = vec![0.0; layer.in_dim];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                *n *= a * (1.0 - a);
            }
            delta = next;
        }
        grads.push(LayerGrad { weight: gw, bias: gb });
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }, logits))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub class_name: String,
    pub probabilities: Vec<f64>,
}

/// Argmax of the softmax; ties go to the lowest class index.
pub fn predict(h: &AttributorHead, e: &Embedding) -> Result<Prediction> {
    let probs = softmax(&forward(h, e)?);
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Ok(Prediction {
        class_index: best,
        class_name: h.class_names[best].clone(),
        probabilities: probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EmbeddingKind;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn emb(v: Vec<f64>) -> Embedding {
        Embedding::new(EmbeddingKind::Image, v).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let cfg = HeadConfig::linear(8, 3, 5);
        let a = init_head(&cfg, names(3)).unwrap();
        assert_eq!(a, init_head(&cfg, names(3)).unwrap());
        assert_eq!(a.layers.len(), 1);
        assert_eq!((a.layers[0].out_dim, a.layers[0].in_dim), (3, 8));
        assert_eq!(a.layers[0].bias, vec![0.0; 3]);

        let m = init_head(&HeadConfig::mlp(8, 3, 256, 1), names(3)).unwrap();
        let shapes: Vec<_> = m.layers.iter().map(|l| (l.out_dim, l.in_dim)).collect();
        assert_eq!(shapes, [(256, 8), (256, 256), (3, 256)]);
        let bound = (6.0f64 / (256.0 + 8.0)).sqrt();
        assert!(m.layers[0].weight.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(init_head(&HeadConfig::linear(8, 1, 0), names(1)).is_err());
        assert!(init_head(&HeadConfig::linear(0, 2, 0), names(2)).is_err());
        assert!(init_head(&HeadConfig::linear(4, 2, 0), names(3)).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let mut h = init_head(&HeadConfig::linear(4, 3, 0), names(3)).unwrap();
        h.layers[0].weight.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(forward(&h, &emb(vec![1.0, -2.0, 3.0, 4.0])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_forward_picks_weight_column() {
        let mut h = init_head(&HeadConfig::linear(2, 2, 0), names(2)).unwrap();
        h.layers[0].weight = vec![1.0, 2.0, 3.0, 4.0];
        h.layers[0].bias = vec![0.5, -0.5];
        assert_eq!(forward(&h, &emb(vec![1.0, 0.0])).unwrap(), vec![1.5, 2.5]);
        assert!(forward(&h, &emb(vec![1.0])).is_err());
    }

    #[test]
    fn mlp_with_zero_hidden_weights() {
        let mut h = init_head(&HeadConfig::mlp(3, 2, 4, 9), names(2)).unwrap();
        for l in &mut h.layers[..2] {
            l.weight.iter_mut().for_each(|w| *w = 0.0);
        }
        h.layers[2].bias = vec![0.25, -1.0];
        let logits = forward(&h, &emb(vec![0.3, -0.7, 2.0])).unwrap();
        for (o, l) in logits.iter().enumerate() {
            let row = &h.layers[2].weight[o * 4..(o + 1) * 4];
            let expect = 0.5 * row.iter().sum::<f64>() + h.layers[2].bias[o];
            assert!((l - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_ce_basics() {
        let (loss, grad) = softmax_ce(&[0.7; 5], 2).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!(grad.iter().sum::<f64>().abs() <= 1e-9);
        assert!(softmax_ce(&[0.0, 1.0], 2).is_err());
        let (big, _) = softmax_ce(&[1000.0, 0.0], 1).unwrap();
        assert!((big - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_ce_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.5, 0.0, -0.4];
        let (_, grad) = softmax_ce(&logits, 3).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            let mut p = logits;
            let mut m = logits;
            p[i] += h;
            m[i] -= h;
            let fd = (softmax_ce(&p, 3).unwrap().0 - softmax_ce(&m, 3).unwrap().0) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5);
        }
    }

    #[test]
    fn predict_ties_and_shift_invariance() {
        let mut h = init_head(&HeadConfig::linear(1, 3, 0), names(3)).unwrap();
        h.layers[0].weight = vec![0.0; 3];
        let p = predict(&h, &emb(vec![1.0])).unwrap();
        assert_eq!(p.class_index, 0);
        assert!(p.probabilities.iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-12));

        h.layers[0].bias = vec![2.0, 1.0, 0.0];
        let p = predict(&h, &emb(vec![1.0])).unwrap();
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        let expect = [1.0 / z, (-1.0f64).exp() / z, (-2.0f64).exp() / z];
        for (a, b) in p.probabilities.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-9);
        }
        h.layers[0].bias = vec![12.0, 11.0, 10.0];
        let q = predict(&h, &emb(vec![1.0])).unwrap();
        assert_eq!(q.class_index, p.class_index);
        for (a, b) in p.probabilities.iter().zip(&q.probabilities) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}
