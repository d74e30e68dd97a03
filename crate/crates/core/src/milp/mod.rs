//! Mixed-integer linear programming: `min cᵀx` subject to
//! `row_lower <= A x <= row_upper`, `lower <= x <= upper`, `x_i` integer for
//! `i` in `integers`.
//!
//! Rows are ranged, so an equality is a single row with equal sides and a
//! one-sided inequality `a x <= b` has `row_lower = -inf`.

mod bnb;
mod dump;
mod lu;
mod simplex;

pub use dump::write_lp;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub cost: Vec<f64>,
    pub rows: CsrMatrix,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Sorted, deduplicated indices of integer variables.
    pub integers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit hit; `x` holds the best incumbent if one was found.
    NodeLimit,
    /// A relaxation exceeded its simplex iteration cap.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Empty when no feasible point is known.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Lower bound on the optimal value proven by the search.
    pub best_bound: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn has_point(&self) -> bool {
        !self.x.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Absolute optimality gap at which a node is pruned.
    pub gap_tol: f64,
    /// Among optimal solutions return the one whose integer part is
    /// lexicographically smallest. Costs one extra search per integer variable.
    pub lex_tiebreak: bool,
    /// Tighten bounds by activity-based propagation before the search.
    pub presolve: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: 200_000,
            int_tol: 1e-6,
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            gap_tol: 1e-6,
            lex_tiebreak: true,
            presolve: false,
        }
    }
}

impl MilpOptions {
    /// Settings used when the kernel serves as an inner engine: no
    /// lexicographic post-pass.
    pub fn engine() -> Self {
        MilpOptions {
            lex_tiebreak: false,
            ..Self::default()
        }
    }
}

impl MilpProblem {
    /// Problem with `n` variables, no rows, zero cost and free bounds.
    pub fn new(n: usize) -> Self {
        MilpProblem {
            cost: vec![0.0; n],
            rows: CsrMatrix::zeros(0, n),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            integers: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cost.len();
        let m = self.rows.nrows();
        let dim = |what: &'static str, expected: usize, found: usize| -> Result<()> {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Dimension {
                    what,
                    expected,
                    found,
                })
            }
        };
        dim("row matrix columns", n, self.rows.ncols())?;
        dim("row_lower", m, self.row_lower.len())?;
        dim("row_upper", m, self.row_upper.len())?;
        dim("lower", n, self.lower.len())?;
        dim("upper", n, self.upper.len())?;
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(Error::InvalidInput(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
            if !self.cost[j].is_finite() {
                return Err(Error::InvalidInput(format!("cost of variable {j} is not finite")));
            }
        }
        for i in 0..m {
            if self.row_lower[i].is_nan() || self.row_upper[i].is_nan() || self.row_lower[i] > self.row_upper[i] {
                return Err(Error::InvalidInput(format!(
                    "row {i} has bounds [{}, {}]",
                    self.row_lower[i], self.row_upper[i]
                )));
            }
        }
        if self.rows.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("row matrix has a non-finite entry".into()));
        }
        let mut prev = None;
        for &j in &self.integers {
            if j >= n {
                return Err(Error::InvalidInput(format!("integer index {j} out of range")));
            }
            if prev.is_some_and(|p| p >= j) {
                return Err(Error::InvalidInput("integer indices must be sorted and unique".into()));
            }
            prev = Some(j);
            if !self.lower[j].is_finite() || !self.upper[j].is_finite() {
                return Err(Error::InvalidInput(format!("integer variable {j} has an infinite bound")));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for i in 0..self.rows.nrows() {
            let a = self.rows.row_dot(i, x);
            worst = worst.max(self.row_lower[i] - a).max(a - self.row_upper[i]);
        }
        worst
    }
}

/// Solves the continuous relaxation (integrality ignored).
pub fn solve_lp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpSolution> {
    problem.validate()?;
    Ok(bnb::solve_relaxation(problem, options))
}

/// Solves the problem by branch-and-bound.
pub fn solve_milp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpSolution> {
    problem.validate()?;
    let mut sol = bnb::branch_and_bound(problem, options);
    if options.lex_tiebreak && sol.status == MilpStatus::Optimal && !problem.integers.is_empty() {
        sol = bnb::lex_smallest(problem, options, sol);
    }
    Ok(sol)
}
