//! Tape-based reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of one forward pass. Leaves are added
//! with [`Tape::param`] (gradient-enabled) or [`Tape::constant`]; every other
//! node is produced by an operator method and refers only to earlier nodes, so
//! the node list is already in topological order. [`Tape::backward`] walks it
//! in reverse and returns a [`Gradients`] map keyed by leaf handles.
//!
//! ```
//! use sskt::autodiff::Tape;
//! use sskt::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::new(vec![3], vec![1.0, -2.0, 3.0]).unwrap());
//! let sq = tape.mul(x, x).unwrap();
//! let half = tape.scale(sq, 0.5).unwrap();
//! let loss = tape.sum(half).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, -2.0, 3.0]);
//! ```

mod gradcheck;
mod kernels;
mod tape;

pub use gradcheck::{finite_diff_check, numeric_gradient};
pub use kernels::{conv_output_dim, log_softmax_rows, sigmoid, softmax_rows};
pub use tape::{Gradients, Tape, Var};
