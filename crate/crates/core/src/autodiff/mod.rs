//! Define-by-run reverse-mode differentiation over dense `f64` tensors.
//!
//! Parameters live in a [`ParamStore`]; each forward pass records onto a
//! fresh [`Tape`] that borrows the store, and [`Tape::backward`] walks the
//! recorded nodes in reverse insertion order, which is a reverse topological
//! order because every node is appended after its parents.

mod gradcheck;
mod param;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{central_difference, grad_check, grad_check_fn, GradCheckReport, DEFAULT_STEP};
pub use param::{ParamId, ParamStore};
pub use rng::{derive_seed, fnv1a64, keyed_uniform, mix64, splitmix64, RngState, ALGORITHM};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
