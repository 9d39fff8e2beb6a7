//! Reverse-mode differentiation over the model's primitives, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod check;
mod ops;
mod tape;

pub use adam::{adam_step, AdamState};
pub use check::{grad_check, grad_check_coords, GradCheck};
pub use ops::{Eval, Ops};
pub use tape::{Gradients, Tape, Var};

pub(crate) use ops::{log_gaussian2_value, softmax_values};
