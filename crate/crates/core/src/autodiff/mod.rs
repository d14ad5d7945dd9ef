//! Dense matrices, a reverse-mode tape, and a finite-difference checker.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, ABSOLUTE_FLOOR};
pub use matrix::DenseMatrix;
pub use tape::{Gradients, ScalarFunction, Tape, Var};
