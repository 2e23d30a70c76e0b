//! Self-supervised knowledge transfer (SSKT).
//!
//! A target network with a shared convolutional trunk carries one primary
//! head for its own task and one auxiliary head per frozen source network.
//! Each auxiliary head is trained to reproduce the source's softmax output on
//! the target's own training images, and the auxiliary losses are added to
//! the primary loss with a single balance weight `alpha`.
//!
//! Module map:
//!
//! - [`autodiff`]: tensors on a tape, reverse-mode gradients, finite-difference checks
//! - [`losses`]: CE / soft CE / KD / BCE, the total objective, mean AP
//! - [`models`]: trunk, heads, transfer module, checkpoints
//! - [`source`]: frozen source tasks and input transforms
//! - [`training`]: SGD, learning-rate schedules, the training loop, evaluation
//! - [`data`]: datasets and the seeded synthetic task-pair generator
//! - [`experiment`]: config files, source pretraining, runs and comparisons

pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod models;
pub mod source;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
