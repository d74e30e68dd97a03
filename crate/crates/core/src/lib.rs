//! Mixed-integer nonlinear programming for hybrid optimal control.

pub mod alm;
pub mod baselines;
pub mod convex;
pub mod error;
pub mod inner;
pub mod milp;
pub mod milset;
pub mod model;
pub mod problems;
pub mod qp;
pub mod sparse;
pub mod transcription;

pub use convex::BoxSet;
pub use error::{Error, EvalError, Result};
pub use milset::{BallNorm, MilSet};
pub use model::Minlp;
pub use sparse::CsrMatrix;
