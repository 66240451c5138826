#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod basis;
mod dense;
pub mod error;
pub mod expr;
pub mod fd;
pub mod problem;
pub mod report;
pub mod kkt;
pub mod scheme;
pub mod verify;

pub use basis::{Basis, BasisSpec, BasisVector, Side};
pub use error::{Error, Result};
pub use expr::{Expr, Var};
pub use problem::{builtin_example, load_problem, manufacture_from, EdgeSpec, NormalizedProblem, StarProblem};
pub use scheme::{Collocation, EdgeMatrices};
