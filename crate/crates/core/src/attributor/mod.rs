//! Attribution heads over frozen embeddings.
//!
//! A head is either a single linear layer (linear probe) or an MLP of three
//! linear layers with logistic hidden activations. Training uses softmax
//! cross-entropy, AdamW with decoupled weight decay, a linear warmup
//! followed by cosine annealing, and keeps the parameters of the epoch with
//! the best validation accuracy.

mod checkpoint;
mod head;
mod optim;
mod train;

pub use checkpoint::{decode_head, encode_head, load_head, save_head, HEAD_MAGIC, HEAD_VERSION};
pub use head::{
    forward, init_head, loss_and_gradients, predict, softmax, softmax_ce, AttributorHead, Dense, Gradients,
    HeadConfig, HeadKind, LayerGrad, Prediction,
};
pub use optim::{adamw_step, lr_at, AdamWParams, TrainConfig};
pub use train::{accuracy, train, EpochRecord, TrainHistory};
