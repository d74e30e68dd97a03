//! Reference methods and warm starts: grid dynamic programming, sum-up
//! rounding, continuous relaxation and fixed-integer refinement.

mod cia;
mod dp;
mod relax;

pub use cia::{cia_sur, sum_up_rounding};
pub use dp::{dp_solve, enumerate_modes, DpConfig, DpGrid, DpSolution, ValueTable};
pub use relax::{refine_fixed_integers, relax_then_project, Refinement, Relaxation};
