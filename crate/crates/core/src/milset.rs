//! The mixed-integer linear set `X = { x : row_lower <= A x <= row_upper,
//! lower <= x <= upper, x_i ∈ Z for i ∈ I }`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{solve_milp, MilpOptions, MilpProblem, MilpStatus};
use crate::sparse::CsrMatrix;

/// Integrality tolerance used by membership tests.
pub const INT_TOL: f64 = 1e-6;
/// Simplex feasibility tolerance of the ℓ1 projection.
pub const PROJECTION_FEAS_TOL: f64 = 1e-11;

/// Polyhedral "norm" measuring distance on the real-valued components only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    #[default]
    Linf,
    L1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilSet {
    rows: CsrMatrix,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integers: Vec<usize>,
    is_int: Vec<bool>,
}

/// Result of evaluating the criticality measure.
#[derive(Debug, Clone)]
pub struct Criticality {
    pub psi: f64,
    /// Maximizing displacement `x - x̄`.
    pub step: Vec<f64>,
    /// `x̄ + step`, clamped to the bounds with integer entries rounded.
    pub point: Vec<f64>,
    /// False when the MILP stopped early; `psi` is then only a lower bound.
    pub exact: bool,
    pub nodes: usize,
}

impl MilSet {
    /// The free space `R^n`.
    pub fn free(n: usize) -> Self {
        Self {
            rows: CsrMatrix::zeros(0, n),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            integers: Vec::new(),
            is_int: vec![false; n],
        }
    }

    pub fn new(
        rows: CsrMatrix,
        row_lower: Vec<f64>,
        row_upper: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mut integers: Vec<usize>,
    ) -> Result<Self> {
        let n = lower.len();
        let check = |what: &'static str, expected: usize, found: usize| {
            if expected != found {
                Err(Error::Dimension { what, expected, found })
            } else {
                Ok(())
            }
        };
        check("upper bounds", n, upper.len())?;
        check("row matrix columns", n, rows.ncols())?;
        check("row lower bounds", rows.nrows(), row_lower.len())?;
        check("row upper bounds", rows.nrows(), row_upper.len())?;
        for j in 0..n {
            if lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j] {
                return Err(Error::InvalidInput(format!("variable {j} has bounds [{}, {}]", lower[j], upper[j])));
            }
        }
        for i in 0..row_lower.len() {
            if row_lower[i].is_nan() || row_upper[i].is_nan() || row_lower[i] > row_upper[i] {
                return Err(Error::InvalidInput(format!(
                    "row {i} has bounds [{}, {}]",
                    row_lower[i], row_upper[i]
                )));
            }
        }
        integers.sort_unstable();
        integers.dedup();
        if let Some(&j) = integers.last() {
            if j >= n {
                return Err(Error::InvalidInput(format!("integer index {j} out of range")));
            }
        }
        let mut is_int = vec![false; n];
        for &j in &integers {
            is_int[j] = true;
        }
        Ok(Self {
            rows,
            row_lower,
            row_upper,
            lower,
            upper,
            integers,
            is_int,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn rows(&self) -> &CsrMatrix {
        &self.rows
    }

    pub fn row_lower(&self) -> &[f64] {
        &self.row_lower
    }

    pub fn row_upper(&self) -> &[f64] {
        &self.row_upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn integers(&self) -> &[usize] {
        &self.integers
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.is_int[j]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of scalar inequalities `a x <= b` the rows amount to; a ranged
    /// or equality row counts once per finite side.
    pub fn inequality_count(&self) -> usize {
        self.row_lower
            .iter()
            .zip(&self.row_upper)
            .map(|(l, u)| l.is_finite() as usize + u.is_finite() as usize)
            .sum()
    }

    /// Same set without integrality restrictions.
    pub fn relaxed(&self) -> Self {
        Self {
            integers: Vec::new(),
            is_int: vec![false; self.dim()],
            ..self.clone()
        }
    }

    /// Fixes every integer variable to its (rounded) value in `x` and drops
    /// integrality.
    pub fn with_fixed_integers(&self, x: &[f64]) -> Self {
        let mut s = self.relaxed();
        for &j in &self.integers {
            let v = x[j].round();
            s.lower[j] = v;
            s.upper[j] = v;
        }
        s
    }

    /// Appends rows and extra variables. `rows` must have `dim() + extra_vars`
    /// columns.
    pub fn extend(
        &self,
        extra_lower: &[f64],
        extra_upper: &[f64],
        rows: &CsrMatrix,
        row_lower: &[f64],
        row_upper: &[f64],
    ) -> Result<Self> {
        let widened = self.rows.with_extra_cols(extra_lower.len());
        let all = widened.vstack(rows)?;
        let mut lower = self.lower.clone();
        lower.extend_from_slice(extra_lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(extra_upper);
        let mut rl = self.row_lower.clone();
        rl.extend_from_slice(row_lower);
        let mut ru = self.row_upper.clone();
        ru.extend_from_slice(row_upper);
        Self::new(all, rl, ru, lower, upper, self.integers.clone())
    }

    /// Membership with absolute tolerance `tol` on rows and bounds and
    /// [`INT_TOL`] on integrality.
    pub fn is_member(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for j in 0..x.len() {
            if x[j] < self.lower[j] - tol || x[j] > self.upper[j] + tol {
                return false;
            }
        }
        if self.integers.iter().any(|&j| (x[j] - x[j].round()).abs() > INT_TOL) {
            return false;
        }
        (0..self.num_rows()).all(|i| {
            let a = self.rows.row_dot(i, x);
            a >= self.row_lower[i] - tol && a <= self.row_upper[i] + tol
        })
    }

    /// Largest violation of rows and bounds at `x` (integrality not included).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for i in 0..self.num_rows() {
            let a = self.rows.row_dot(i, x);
            worst = worst.max(self.row_lower[i] - a).max(a - self.row_upper[i]);
        }
        worst
    }

    /// Largest distance of an integer entry from the nearest integer.
    pub fn max_fractionality(&self, x: &[f64]) -> f64 {
        self.integers.iter().map(|&j| (x[j] - x[j].round()).abs()).fold(0.0, f64::max)
    }

    /// Clamps `x` to the bounds and rounds integer entries.
    pub fn snap(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            let mut v = x[j].max(self.lower[j]).min(self.upper[j]);
            if self.is_int[j] {
                v = v.round();
            }
            x[j] = v;
        }
    }

    /// The set as a MILP with the given cost vector.
    pub fn to_milp(&self, cost: Vec<f64>) -> MilpProblem {
        MilpProblem {
            cost,
            rows: self.rows.clone(),
            row_lower: self.row_lower.clone(),
            row_upper: self.row_upper.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            integers: self.integers.clone(),
        }
    }

    fn check_len(&self, what: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                what,
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// A minimizer of `‖x − x0‖₁` over the set. Points already in the set
    /// (within 1e-9) are returned unchanged.
    pub fn project_l1(&self, x0: &[f64]) -> Result<Vec<f64>> {
        self.check_len("projection point", x0)?;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("projection point is not finite".into()));
        }
        if self.is_member(x0, 1e-9) && self.max_fractionality(x0) == 0.0 {
            return Ok(x0.to_vec());
        }
        let n = self.dim();
        // variables (x, t) with t_j >= |x_j - x0_j|
        let mut trip = Vec::with_capacity(4 * n);
        let mut rl = Vec::with_capacity(2 * n);
        let mut ru = Vec::with_capacity(2 * n);
        for j in 0..n {
            trip.push((2 * j, j, 1.0));
            trip.push((2 * j, n + j, -1.0));
            rl.push(f64::NEG_INFINITY);
            ru.push(x0[j]);
            trip.push((2 * j + 1, j, 1.0));
            trip.push((2 * j + 1, n + j, 1.0));
            rl.push(x0[j]);
            ru.push(f64::INFINITY);
        }
        let extra = CsrMatrix::from_triplets(2 * n, 2 * n, &trip)?;
        let ext = self.extend(&vec![0.0; n], &vec![f64::INFINITY; n], &extra, &rl, &ru)?;
        let mut cost = vec![0.0; 2 * n];
        cost[n..].iter_mut().for_each(|c| *c = 1.0);
        // a tight tolerance so that slightly infeasible inputs are really moved
        let options = MilpOptions {
            feas_tol: PROJECTION_FEAS_TOL,
            ..MilpOptions::engine()
        };
        let sol = solve_milp(&ext.to_milp(cost), &options)?;
        match sol.status {
            MilpStatus::Infeasible => Err(Error::EmptySet),
            _ if !sol.has_point() => Err(Error::Milp(format!("projection MILP ended with {:?}", sol.status))),
            status => {
                if status != MilpStatus::Optimal {
                    log::warn!("projection MILP ended with {status:?}; returning best point found");
                }
                let mut x = sol.x[..n].to_vec();
                for &j in &self.integers {
                    x[j] = x[j].round();
                }
                Ok(x)
            }
        }
    }

    /// `Ψ(x̄, Δ) = max { ⟨g, x̄ − x⟩ : x ∈ X, ‖x − x̄‖ ≤ Δ }` where the norm only
    /// sees real-valued components. Integer entries of `xbar` are rounded.
    pub fn criticality_measure(&self, g: &[f64], xbar: &[f64], delta: f64, norm: BallNorm) -> Result<Criticality> {
        self.criticality_with(g, xbar, delta, norm, &MilpOptions::engine())
    }

    pub fn criticality_with(
        &self,
        g: &[f64],
        xbar: &[f64],
        delta: f64,
        norm: BallNorm,
        options: &MilpOptions,
    ) -> Result<Criticality> {
        self.criticality_impl(g, xbar, delta, norm, None, options)
    }

    /// Maximizer of the same linear model with the integer displacement
    /// further limited to `Σ_{i∈I} |x_i − x̄_i| <= budget`. Used to propose
    /// smaller integer moves; its value is not a criticality measure.
    pub fn budgeted_step(&self, g: &[f64], xbar: &[f64], delta: f64, norm: BallNorm, budget: f64) -> Result<Criticality> {
        self.criticality_impl(g, xbar, delta, norm, Some(budget), &MilpOptions::engine())
    }

    fn criticality_impl(
        &self,
        g: &[f64],
        xbar: &[f64],
        delta: f64,
        norm: BallNorm,
        budget: Option<f64>,
        options: &MilpOptions,
    ) -> Result<Criticality> {
        self.check_len("gradient", g)?;
        self.check_len("center point", xbar)?;
        if !(delta >= 0.0) || delta.is_infinite() {
            return Err(Error::InvalidInput(format!("trust radius {delta} must be finite and nonnegative")));
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("gradient entry {j} is not finite")));
        }
        let n = self.dim();
        let mut center = xbar.to_vec();
        for &j in &self.integers {
            center[j] = center[j].round();
        }
        let mut p = self.shifted_problem(g, &center, delta, norm)?;
        if let Some(k) = budget {
            add_integer_budget(&mut p, &self.integers, k)?;
        }
        let sol = solve_milp(&p, options)?;
        let (step, exact) = match sol.status {
            MilpStatus::Optimal => (sol.x[..n].to_vec(), true),
            MilpStatus::Infeasible => {
                // d = 0 is feasible by construction, so this is numerical trouble
                return Err(Error::Milp("criticality MILP reported infeasible at a feasible center".into()));
            }
            MilpStatus::Unbounded => {
                return Err(Error::Milp("criticality MILP is unbounded (a real variable is unbounded)".into()))
            }
            _ if sol.has_point() => (sol.x[..n].to_vec(), false),
            _ => (vec![0.0; n], false),
        };
        let mut step = step;
        for &j in &self.integers {
            step[j] = step[j].round();
        }
        let psi = (-g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>()).max(0.0);
        let mut point: Vec<f64> = center.iter().zip(&step).map(|(a, b)| a + b).collect();
        self.snap(&mut point);
        Ok(Criticality {
            psi,
            step,
            point,
            exact,
            nodes: sol.nodes_explored,
        })
    }

    /// MILP in the displacement `d = x − x̄`, with all bounds widened so that
    /// `d = 0` stays feasible even if `x̄` sits marginally outside the set.
    fn shifted_problem(&self, g: &[f64], center: &[f64], delta: f64, norm: BallNorm) -> Result<MilpProblem> {
        let n = self.dim();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let (mut lo, mut hi) = (self.lower[j] - center[j], self.upper[j] - center[j]);
            if self.is_int[j] {
                lo = lo.ceil();
                hi = hi.floor();
            } else if norm == BallNorm::Linf {
                lo = lo.max(-delta);
                hi = hi.min(delta);
            }
            lower[j] = lo.min(0.0);
            upper[j] = hi.max(0.0);
        }
        let mut act = vec![0.0; self.num_rows()];
        self.rows.mul_vec(center, &mut act);
        let row_lower: Vec<f64> = self.row_lower.iter().zip(&act).map(|(l, a)| (l - a).min(0.0)).collect();
        let row_upper: Vec<f64> = self.row_upper.iter().zip(&act).map(|(u, a)| (u - a).max(0.0)).collect();
        let base = MilpProblem {
            cost: g.to_vec(),
            rows: self.rows.clone(),
            row_lower,
            row_upper,
            lower,
            upper,
            integers: self.integers.clone(),
        };
        if norm == BallNorm::Linf {
            return Ok(base);
        }
        // l1 ball: t_j >= |d_j| for real j and Σ t <= Δ
        let reals: Vec<usize> = (0..n).filter(|&j| !self.is_int[j]).collect();
        let k = reals.len();
        let m0 = self.num_rows();
        let mut trip = Vec::new();
        for i in 0..m0 {
            for (j, v) in self.rows.row_iter(i) {
                trip.push((i, j, v));
            }
        }
        let mut p = base;
        for (r, &j) in reals.iter().enumerate() {
            let t = n + r;
            trip.push((m0 + 2 * r, j, 1.0));
            trip.push((m0 + 2 * r, t, -1.0));
            p.row_lower.push(f64::NEG_INFINITY);
            p.row_upper.push(0.0);
            trip.push((m0 + 2 * r + 1, j, 1.0));
            trip.push((m0 + 2 * r + 1, t, 1.0));
            p.row_lower.push(0.0);
            p.row_upper.push(f64::INFINITY);
            trip.push((m0 + 2 * k, t, 1.0));
            p.lower[j] = p.lower[j].max(-delta);
            p.upper[j] = p.upper[j].min(delta);
        }
        p.row_lower.push(f64::NEG_INFINITY);
        p.row_upper.push(delta);
        p.rows = CsrMatrix::from_triplets(m0 + 2 * k + 1, n + k, &trip)?;
        p.cost.resize(n + k, 0.0);
        p.lower.resize(n + k, 0.0);
        p.upper.resize(n + k, delta);
        Ok(p)
    }
}

/// Appends `t_j >= |d_j|` for the given integer columns and `Σ t <= budget`.
fn add_integer_budget(p: &mut MilpProblem, ints: &[usize], budget: f64) -> Result<()> {
    let n0 = p.num_vars();
    let m0 = p.num_rows();
    let mut trip = Vec::with_capacity(p.rows.nnz() + 5 * ints.len());
    for i in 0..m0 {
        for (j, v) in p.rows.row_iter(i) {
            trip.push((i, j, v));
        }
    }
    for (r, &j) in ints.iter().enumerate() {
        let t = n0 + r;
        trip.push((m0 + 2 * r, j, 1.0));
        trip.push((m0 + 2 * r, t, -1.0));
        p.row_lower.push(f64::NEG_INFINITY);
        p.row_upper.push(0.0);
        trip.push((m0 + 2 * r + 1, j, 1.0));
        trip.push((m0 + 2 * r + 1, t, 1.0));
        p.row_lower.push(0.0);
        p.row_upper.push(f64::INFINITY);
        trip.push((m0 + 2 * ints.len(), t, 1.0));
        p.cost.push(0.0);
        p.lower.push(0.0);
        p.upper.push(p.lower[j].abs().max(p.upper[j].abs()));
    }
    p.row_lower.push(f64::NEG_INFINITY);
    p.row_upper.push(budget.max(0.0));
    p.rows = CsrMatrix::from_triplets(m0 + 2 * ints.len() + 1, n0 + ints.len(), &trip)?;
    Ok(())
}
