//! Bounded-variable revised simplex.
//!
//! Rows are kept as `A x - r = 0` with one logical variable `r_i` per row whose
//! bounds are the row bounds. Every variable carries its own (possibly
//! infinite) bounds, so fixed variables, equality rows and free variables are
//! all handled by the same bound logic.
//!
//! The primal method uses a composite phase 1 (minimize the sum of bound
//! violations of basic variables, re-derived each iteration) followed by
//! phase 2 on the true costs. The dual method is used to re-optimize after
//! bound changes from a dual feasible basis, which is the common case in
//! branch-and-bound.

use std::rc::Rc;

use super::lu::BasisFactor;
use crate::sparse::CsrMatrix;

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 1000;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

/// Saved basis used to warm start a later solve.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    head: Vec<usize>,
    state: Vec<VarState>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub feas: f64,
    pub opt: f64,
}

pub(crate) struct Simplex<'a> {
    n: usize,
    m: usize,
    /// Columns of `A` (the transpose in row storage).
    cols: &'a CsrMatrix,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    factor: BasisFactor,
    tol: Tolerances,
    pub iterations: usize,
    pub max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
    // scratch
    col_buf: Vec<f64>,
    dual_buf: Vec<f64>,
    d: Vec<f64>,
}

const NONBASIC: usize = usize::MAX;

impl<'a> Simplex<'a> {
    /// `cols` holds the columns of the `m x n` constraint matrix; `lower` and
    /// `upper` have length `n + m` (structural bounds followed by row bounds).
    pub fn new(cols: &'a CsrMatrix, m: usize, cost: &[f64], lower: Vec<f64>, upper: Vec<f64>, tol: Tolerances) -> Self {
        let n = cols.nrows();
        debug_assert_eq!(lower.len(), n + m);
        let mut full_cost = cost.to_vec();
        full_cost.resize(n + m, 0.0);
        let mut s = Simplex {
            n,
            m,
            cols,
            cost: full_cost,
            lower,
            upper,
            head: (n..n + m).collect(),
            pos_of: vec![NONBASIC; n + m],
            state: vec![VarState::AtLower; n + m],
            x: vec![0.0; n + m],
            factor: BasisFactor::default(),
            tol,
            iterations: 0,
            max_iterations: 20_000 + 50 * (n + m),
            degenerate_run: 0,
            bland: false,
            col_buf: vec![0.0; m],
            dual_buf: vec![0.0; m],
            d: vec![0.0; n + m],
        };
        for i in 0..m {
            s.pos_of[n + i] = i;
            s.state[n + i] = VarState::Basic;
        }
        for j in 0..n {
            s.state[j] = s.resting_state(j);
            s.x[j] = s.resting_value(j);
        }
        s.refactor();
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.lower[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.upper[j]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn resting_state(&self, j: usize) -> VarState {
        if self.lower[j].is_finite() {
            VarState::AtLower
        } else if self.upper[j].is_finite() {
            VarState::AtUpper
        } else {
            VarState::Zero
        }
    }

    fn resting_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            _ => 0.0,
        }
    }

    /// Changes the bounds of variable `j`. Nonbasic variables are moved onto
    /// the new bounds; call [`Simplex::recompute_primal`] afterwards.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            let st = match self.state[j] {
                VarState::AtLower if lower.is_finite() => VarState::AtLower,
                VarState::AtUpper if upper.is_finite() => VarState::AtUpper,
                _ => self.resting_state(j),
            };
            self.state[j] = st;
            self.x[j] = self.resting_value(j);
        }
    }

    pub fn snapshot(&self) -> Rc<BasisSnapshot> {
        Rc::new(BasisSnapshot {
            head: self.head.clone(),
            state: self.state.clone(),
        })
    }

    /// Restores a saved basis. Bounds must already be set.
    pub fn load(&mut self, snap: &BasisSnapshot) {
        self.head.clone_from(&snap.head);
        self.state.clone_from(&snap.state);
        self.pos_of.iter_mut().for_each(|p| *p = NONBASIC);
        for (r, &j) in self.head.iter().enumerate() {
            self.pos_of[j] = r;
        }
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                let st = match self.state[j] {
                    VarState::AtLower if self.lower[j].is_finite() => VarState::AtLower,
                    VarState::AtUpper if self.upper[j].is_finite() => VarState::AtUpper,
                    _ => self.resting_state(j),
                };
                self.state[j] = st;
                self.x[j] = self.resting_value(j);
            }
        }
        self.refactor();
    }

    fn column_entries(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        if j < self.n {
            out.extend(self.cols.row_iter(j));
        } else {
            out.push((j - self.n, -1.0));
        }
    }

    /// Dense column `a_j` indexed by row.
    fn load_column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for (i, v) in self.cols.row_iter(j) {
                out[i] = v;
            }
        } else {
            out[j - self.n] = -1.0;
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols.row_iter(j).map(|(i, v)| v * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Refactors the current basis, repairing singular bases by swapping in
    /// logical variables, and recomputes basic values.
    pub fn refactor(&mut self) {
        loop {
            let head = self.head.clone();
            let res = BasisFactor::factor(self.m, |p, out| self.column_entries(head[p], out));
            match res {
                Ok(f) => {
                    self.factor = f;
                    break;
                }
                Err(sing) => {
                    for (&p, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let logical = self.n + row;
                        // the logical of an uncovered row cannot already be basic
                        self.pos_of[out] = NONBASIC;
                        self.state[out] = self.resting_state(out);
                        self.x[out] = self.resting_value(out);
                        self.head[p] = logical;
                        self.pos_of[logical] = p;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        self.recompute_primal();
    }

    /// Recomputes basic variable values from the nonbasic ones.
    pub fn recompute_primal(&mut self) {
        let mut rhs = std::mem::take(&mut self.col_buf);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for (i, v) in self.cols.row_iter(j) {
                    rhs[i] -= v * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (r, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[r];
        }
        self.col_buf = rhs;
    }

    /// Feasibility tolerance of variable `j`, capped by a tenth of its range
    /// so that very narrow boxes are still resolved.
    fn feas_tol(&self, j: usize) -> f64 {
        let w = self.upper[j] - self.lower[j];
        if w > 0.0 {
            self.tol.feas.min(0.1 * w)
        } else {
            self.tol.feas
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let feas = self.feas_tol(j);
        if v < self.lower[j] - feas {
            self.lower[j] - v
        } else if v > self.upper[j] + feas {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    /// Duals for the given basic costs, then reduced costs of all nonbasics.
    fn price(&mut self, phase_one: bool) {
        let mut y = std::mem::take(&mut self.dual_buf);
        for (r, &j) in self.head.iter().enumerate() {
            y[r] = if phase_one {
                let v = self.x[j];
                let feas = self.feas_tol(j);
                if v < self.lower[j] - feas {
                    -1.0
                } else if v > self.upper[j] + feas {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost[j]
            };
        }
        self.factor.btran(&mut y);
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let c = if phase_one { 0.0 } else { self.cost[j] };
            self.d[j] = c - self.dot_column(j, &y);
        }
        self.dual_buf = y;
    }

    /// Entering candidate and direction (+1 increase, -1 decrease).
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let tol = self.tol.opt;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                VarState::AtLower if self.d[j] < -tol => 1.0,
                VarState::AtUpper if self.d[j] > tol => -1.0,
                VarState::Zero if self.d[j] < -tol => 1.0,
                VarState::Zero if self.d[j] > tol => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Primal ratio test. Returns the step length and the leaving position
    /// (with the bound it leaves at), or `None` for the position when the
    /// entering variable flips to its opposite bound.
    fn primal_ratio(&self, alpha: &[f64], q: usize, dir: f64, phase_one: bool) -> (f64, Option<(usize, bool)>) {
        let range = self.upper[q] - self.lower[q];
        // breakpoints: (theta, position, leaves at upper)
        let mut theta_max = f64::INFINITY;
        if !phase_one && !self.bland {
            // Harris pass 1 with bounds relaxed by the feasibility tolerance
            for (r, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[r];
                let feas = self.feas_tol(j);
                let rate = -dir * a;
                let t = if rate < 0.0 {
                    (self.x[j] - self.lower[j] + feas) / -rate
                } else {
                    (self.upper[j] - self.x[j] + feas) / rate
                };
                if t < theta_max {
                    theta_max = t;
                }
            }
            if range <= theta_max {
                return (range, None);
            }
            let mut pick: Option<(usize, bool)> = None;
            let mut pick_abs = 0.0;
            let mut pick_theta = 0.0;
            for (r, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[r];
                let rate = -dir * a;
                let (t, up) = if rate < 0.0 {
                    ((self.x[j] - self.lower[j]) / -rate, false)
                } else {
                    ((self.upper[j] - self.x[j]) / rate, true)
                };
                if t <= theta_max && a.abs() > pick_abs {
                    pick_abs = a.abs();
                    pick = Some((r, up));
                    pick_theta = t;
                }
            }
            return match pick {
                Some(p) => (pick_theta.max(0.0), Some(p)),
                None => (f64::INFINITY, None),
            };
        }
        let mut best_t = f64::INFINITY;
        let mut best: Option<(usize, bool)> = None;
        let mut best_key = (0.0f64, usize::MAX);
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.head[r];
            let feas = self.feas_tol(j);
            let rate = -dir * a;
            let (v, l, u) = (self.x[j], self.lower[j], self.upper[j]);
            let bp = if rate < 0.0 {
                if v > u + feas {
                    Some(((v - u) / -rate, true))
                } else if v >= l - feas {
                    Some((((v - l) / -rate).max(0.0), false))
                } else {
                    None
                }
            } else if v < l - feas {
                Some(((l - v) / rate, false))
            } else if v <= u + feas {
                Some((((u - v) / rate).max(0.0), true))
            } else {
                None
            };
            if let Some((t, up)) = bp {
                if !t.is_finite() {
                    continue;
                }
                let better = if t < best_t - 1e-12 {
                    true
                } else if t <= best_t + 1e-12 {
                    if self.bland {
                        j < best_key.1
                    } else {
                        a.abs() > best_key.0
                    }
                } else {
                    false
                };
                if better {
                    best_t = t;
                    best = Some((r, up));
                    best_key = (a.abs(), j);
                }
            }
        }
        if range <= best_t {
            return (range, None);
        }
        (best_t, best)
    }

    fn pivot(&mut self, r: usize, q: usize, leave_up: bool, alpha: &[f64]) {
        let out = self.head[r];
        self.x[out] = if leave_up { self.upper[out] } else { self.lower[out] };
        self.state[out] = if self.lower[out] == self.upper[out] {
            VarState::AtLower
        } else if leave_up {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        if !self.x[out].is_finite() {
            // leaving a free variable is only possible through a finite bound
            self.state[out] = VarState::Zero;
            self.x[out] = 0.0;
        }
        self.pos_of[out] = NONBASIC;
        self.head[r] = q;
        self.pos_of[q] = r;
        self.state[q] = VarState::Basic;
        self.factor.update(r, alpha);
        if self.factor.num_etas() >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn note_step(&mut self, theta: f64) {
        if theta <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run >= BLAND_AFTER {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    /// Primal simplex from the current basis.
    pub fn primal(&mut self) -> LpStatus {
        let mut alpha = vec![0.0; self.m];
        let mut verified = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let phase_one = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
            self.price(phase_one);
            let Some((q, dir)) = self.choose_entering() else {
                // confirm on a fresh factorization before declaring the result
                self.refactor();
                let still_infeasible = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
                if still_infeasible != phase_one && verified < 3 {
                    verified += 1;
                    continue;
                }
                if still_infeasible {
                    self.price(true);
                    if self.choose_entering().is_some() && verified < 3 {
                        verified += 1;
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                self.price(false);
                if self.choose_entering().is_some() && verified < 3 {
                    verified += 1;
                    continue;
                }
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            self.load_column(q, &mut alpha);
            self.factor.ftran(&mut alpha);
            let (theta, leave) = self.primal_ratio(&alpha, q, dir, phase_one);
            if !theta.is_finite() {
                if phase_one {
                    // cannot happen with a consistent phase-1 cost; refactor and retry
                    self.refactor();
                    continue;
                }
                return LpStatus::Unbounded;
            }
            self.note_step(theta);
            let step = dir * theta;
            if step != 0.0 {
                verified = 0;
                self.x[q] += step;
                for (r, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.head[r];
                        self.x[j] -= step * a;
                    }
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, up)) => self.pivot(r, q, up, &alpha),
            }
        }
    }

    /// True when every nonbasic reduced cost has the sign its bound allows.
    pub fn is_dual_feasible(&mut self) -> bool {
        self.price(false);
        let tol = self.tol.opt.max(1e-7);
        (0..self.n + self.m).all(|j| {
            if self.lower[j] == self.upper[j] {
                return true;
            }
            match self.state[j] {
                VarState::Basic => true,
                VarState::AtLower => self.d[j] >= -tol,
                VarState::AtUpper => self.d[j] <= tol,
                VarState::Zero => self.d[j].abs() <= tol,
            }
        })
    }

    /// Dual simplex from a dual feasible basis. On `Optimal` the caller should
    /// still run [`Simplex::primal`] to clean up any residual dual infeasibility.
    pub fn dual(&mut self) -> LpStatus {
        let mut alpha = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut row = vec![0.0; self.n + self.m];
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            // leaving row: largest bound violation
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for (r, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > 0.0 && (inf > worst || (self.bland && leave.is_none())) {
                    worst = inf;
                    let target = if self.x[j] < self.lower[j] { self.lower[j] } else { self.upper[j] };
                    leave = Some((r, target));
                    if self.bland {
                        break;
                    }
                }
            }
            let Some((r, target)) = leave else {
                return LpStatus::Optimal;
            };
            self.price(false);
            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            let jr = self.head[r];
            let increase = self.x[jr] < target;
            let tol = self.tol.opt;
            let mut theta_max = f64::INFINITY;
            for j in 0..self.n + self.m {
                row[j] = 0.0;
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.dot_column(j, &rho);
                row[j] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                if self.dual_eligible(j, a, increase) {
                    let t = (self.d[j].abs() + tol) / a.abs();
                    if t < theta_max {
                        theta_max = t;
                    }
                }
            }
            let mut q = usize::MAX;
            let mut q_abs = 0.0;
            for j in 0..self.n + self.m {
                let a = row[j];
                if a.abs() <= PIVOT_TOL || !self.dual_eligible(j, a, increase) {
                    continue;
                }
                let t = self.d[j].abs() / a.abs();
                if t <= theta_max && (a.abs() > q_abs || (self.bland && q == usize::MAX)) {
                    q_abs = a.abs();
                    q = j;
                    if self.bland {
                        break;
                    }
                }
            }
            if q == usize::MAX {
                return LpStatus::Infeasible;
            }
            self.iterations += 1;
            self.load_column(q, &mut alpha);
            self.factor.ftran(&mut alpha);
            if (alpha[r] - row[q]).abs() > 1e-7 * (1.0 + row[q].abs()) || alpha[r].abs() <= PIVOT_TOL {
                self.refactor();
                continue;
            }
            let delta = (self.x[jr] - target) / alpha[r];
            self.note_step(delta.abs() * self.d[q].abs());
            self.x[q] += delta;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= delta * a;
                }
            }
            let up = target == self.upper[jr] && target != self.lower[jr];
            self.pivot(r, q, up, &alpha);
        }
    }

    fn dual_eligible(&self, j: usize, a: f64, increase: bool) -> bool {
        // x_r changes by -a per unit increase of x_j
        let can_up = matches!(self.state[j], VarState::AtLower | VarState::Zero);
        let can_down = matches!(self.state[j], VarState::AtUpper | VarState::Zero);
        if increase {
            (a < 0.0 && can_up) || (a > 0.0 && can_down)
        } else {
            (a > 0.0 && can_up) || (a < 0.0 && can_down)
        }
    }

    /// Solves from the current basis, using the dual method first when the
    /// basis is dual feasible.
    pub fn solve(&mut self, try_dual: bool) -> LpStatus {
        if try_dual && self.is_dual_feasible() {
            match self.dual() {
                LpStatus::Infeasible => {
                    // confirm with the primal method; the dual ratio test may
                    // have given up on a numerically tiny pivot row
                    return self.primal();
                }
                LpStatus::IterationLimit => return LpStatus::IterationLimit,
                _ => {}
            }
        }
        self.primal()
    }
}
