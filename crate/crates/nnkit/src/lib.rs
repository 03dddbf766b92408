//! A deliberately small neural-network kit operating on row-major `f64` tensors.
//!
//! Everything runs per sample on the CPU. Layers are pure on the forward path
//! (`&self`) and accumulate parameter gradients on the backward path, recomputing
//! whatever intermediates they need from the layer input. That keeps inference
//! shareable across threads and the training loop free of hidden caches.
//!
//! The pieces:
//!
//! - [`Tensor`]: shape plus row-major data.
//! - [`layers`]: dense, 1-D convolution, max pooling, flatten, embeddings,
//!   multi-head attention, layer norm, transformer encoder blocks.
//! - [`loss`]: mean squared error (with the 1/2N factor) and binary cross-entropy.
//! - [`optim`]: bias-corrected Adam.
//! - [`train`]: seeded mini-batch loop with per-epoch validation tracking.
//! - [`gradcheck`]: central finite differences against the analytic backward pass.
//! - [`checkpoint`]: the `HJNN` portable binary parameter file.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{NnError, Result};
pub use layers::{Activation, Layer, LayerKind, Param};
pub use loss::LossKind;
pub use network::Network;
pub use optim::{AdamConfig, AdamState};
pub use tensor::Tensor;
pub use train::{train, train_split, EpochStats, EpochTrace, Sample, TrainConfig};
