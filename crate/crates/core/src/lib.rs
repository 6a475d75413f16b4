//! Discrete-aware low-rank tensor completion with matrix and tensor baselines.
//!
//! Tensors are dense, row-major `f64` arrays. Modes are numbered from zero.
//! The mode-`n` unfolding keeps mode `n` on the rows and the remaining modes,
//! in increasing order, on the columns.

pub mod bench;
pub mod data;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod solvers;
pub mod tensor;

pub use discrete::Alphabet;
pub use error::{Error, ErrorClass, Result};
pub use solvers::{dalrtc, Completion, ConvergenceTrace, SolverConfig, TraceOptions};
pub use tensor::{fold, unfold, DenseTensor, ModeMatrix, ObservationMask, Shape};
