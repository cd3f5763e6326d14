//! Reverse-mode automatic differentiation over small dense graphs.
//!
//! A [`Tape`] is built eagerly: every primitive evaluates immediately in
//! 64-bit floats and appends a node, so node order is topological by
//! construction. Parameters live in a [`ParamStore`] outside the tape and
//! gradients come back in a [`Gradients`] buffer with the store's layout.
//!
//! The primitive set is closed: affine map, tanh, sigmoid, elementwise
//! add/multiply, concatenation, slicing and the sum/mean-of-squares
//! reductions. Layers compose these.

mod check;
mod params;
mod tape;

pub use check::{compare_gradients, grad_check, GradCheckReport, GradEntry};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
