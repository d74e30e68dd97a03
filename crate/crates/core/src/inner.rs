//! Trust-region sequential mixed-integer linearization: computes an
//! ε-critical point of a smooth function over a MIL set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milset::{BallNorm, MilSet};
use crate::qp::{solve_qp, QpProblem, QpStatus};
use crate::sparse::CsrMatrix;

/// Values of `Ψ` at or below this are treated as exactly critical.
pub const PSI_FLOOR: f64 = 1e-14;

/// Trial points violating rows or bounds of `X` by more than this are moved
/// back by an ℓ1 projection with the integers fixed.
pub const REPAIR_TOL: f64 = 1e-9;

/// Smooth function minimized by [`minimize`].
pub trait SmoothFn {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<()>;
    /// Positive semidefinite curvature model for the step (both triangles).
    /// `None` gives purely linear steps.
    fn model_hessian(&self, _x: &[f64]) -> Result<Option<CsrMatrix>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrConfig {
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub eta_accept: f64,
    pub eta_expand: f64,
    pub shrink: f64,
    pub expand: f64,
    pub max_iters: usize,
}

impl Default for TrConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta_min: 1e-10,
            delta_max: 1e3,
            eta_accept: 0.1,
            eta_expand: 0.75,
            shrink: 0.5,
            expand: 2.0,
            max_iters: 500,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.eta_accept
            && self.eta_accept < self.eta_expand
            && self.eta_expand < 1.0
            && 0.0 < self.delta_min
            && self.delta_min < self.delta0
            && self.delta0 <= self.delta_max
            && self.delta_max.is_finite()
            && 0.0 < self.shrink
            && self.shrink < 1.0
            && self.expand > 1.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("inconsistent trust-region settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerStatus {
    Certified,
    /// Radius underflow or iteration cap before reaching the tolerance.
    NotCertified,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub status: InnerStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// Last evaluated `Ψ(x, Δ_check)`.
    pub psi: f64,
    pub delta_check: f64,
    /// Final trust radius.
    pub delta: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub milp_solves: usize,
    pub milp_nodes: usize,
    /// MILPs that stopped before proving optimality.
    pub inexact_milps: usize,
    /// The radius underflowed while `Ψ` still reported descent through an
    /// integer move that the ratio test kept rejecting.
    pub integer_blocked: bool,
}

/// Step for a fixed integer assignment `ints` (values for every integer
/// index): minimizes `gᵀd + ½dᵀBd` over `x + d ∈ X`, `|d_j| <= Δ` on the real
/// coordinates. Rows and bounds are widened so that `d = 0` is admissible at a
/// slightly infeasible `x`. Returns the point and the predicted reduction.
fn model_step(
    g: &[f64],
    b: &CsrMatrix,
    set: &MilSet,
    x: &[f64],
    ints: &[f64],
    delta: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = set.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        lower[j] = (set.lower()[j] - x[j]).min(0.0).max(-delta);
        upper[j] = (set.upper()[j] - x[j]).max(0.0).min(delta);
    }
    for (k, &j) in set.integers().iter().enumerate() {
        lower[j] = ints[k] - x[j];
        upper[j] = lower[j];
    }
    let rows = set.rows();
    let mut rl = Vec::with_capacity(rows.nrows());
    let mut ru = Vec::with_capacity(rows.nrows());
    for i in 0..rows.nrows() {
        let ax = rows.row_dot(i, x);
        rl.push((set.row_lower()[i] - ax).min(0.0));
        ru.push((set.row_upper()[i] - ax).max(0.0));
    }
    let qp = QpProblem {
        hessian: b.clone(),
        cost: g.to_vec(),
        rows: rows.clone(),
        row_lower: rl,
        row_upper: ru,
        lower,
        upper,
    };
    let sol = solve_qp(&qp);
    if sol.status == QpStatus::Infeasible {
        return None;
    }
    let mut d = sol.x;
    for j in 0..n {
        d[j] = d[j].clamp(qp.lower[j], qp.upper[j]);
    }
    let pred = -qp.objective_value(&d);
    let mut point: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
    for (k, &j) in set.integers().iter().enumerate() {
        point[j] = ints[k];
    }
    Some((point, pred))
}

/// Undoes the drift that solver tolerances leave in a trial point. Keeps the
/// point if the projection does not reduce the violation.
fn repair(set: &MilSet, point: Vec<f64>) -> Result<Vec<f64>> {
    let before = set.max_violation(&point);
    if before <= REPAIR_TOL {
        return Ok(point);
    }
    let fixed = set.with_fixed_integers(&point);
    let q = fixed.project_l1(&point)?;
    Ok(if fixed.max_violation(&q) < before { q } else { point })
}

/// Runs the trust-region loop from `x_start` (which must lie in `set`).
///
/// `Ψ(x, min(Δ, 1))` decides termination. Integer moves are proposed by the
/// `Ψ` step; if `phi` supplies a curvature model the real coordinates are then
/// chosen by a quadratic model over the fixed assignment and the ratio test
/// uses the model reduction, otherwise the `Ψ` step itself is tried with
/// `Ψ` as predicted reduction.
pub fn minimize(
    phi: &dyn SmoothFn,
    set: &MilSet,
    x_start: &[f64],
    eps: f64,
    norm: BallNorm,
    cfg: &TrConfig,
) -> Result<InnerResult> {
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("inner tolerance {eps} must be positive")));
    }
    let n = set.dim();
    let mut x = x_start.to_vec();
    let mut fx = phi.value(&x)?;
    let mut g = vec![0.0; n];
    let mut hess: Option<CsrMatrix> = None;
    let mut delta = cfg.delta0;
    let mut res = InnerResult {
        status: InnerStatus::NotCertified,
        x: Vec::new(),
        value: fx,
        psi: f64::INFINITY,
        delta_check: delta.min(1.0),
        delta,
        iterations: 0,
        accepted: 0,
        milp_solves: 0,
        milp_nodes: 0,
        inexact_milps: 0,
        integer_blocked: false,
    };
    let mut need_grad = true;
    // ℓ1 limit on the integer part of proposed moves
    let mut int_budget = f64::INFINITY;
    let int_values = |p: &[f64]| -> Vec<f64> { set.integers().iter().map(|&j| p[j]).collect() };
    while res.iterations < cfg.max_iters {
        res.iterations += 1;
        if need_grad {
            phi.gradient(&x, &mut g)?;
            hess = phi.model_hessian(&x)?;
            need_grad = false;
        }
        let delta_check = delta.min(1.0);
        let crit = set.criticality_measure(&g, &x, delta_check, norm)?;
        let psi_check = crit.psi;
        res.milp_solves += 1;
        res.milp_nodes += crit.nodes;
        res.inexact_milps += (!crit.exact) as usize;
        res.psi = crit.psi;
        res.delta_check = delta_check;
        if crit.exact && (crit.psi <= eps || crit.psi <= PSI_FLOOR) {
            res.status = InnerStatus::Certified;
            break;
        }
        if crit.psi <= PSI_FLOOR {
            // inexact and no descent found: nothing to try at this radius
            delta *= cfg.shrink;
            if delta < cfg.delta_min {
                break;
            }
            continue;
        }
        let trial = if int_budget.is_finite() {
            let t = set.budgeted_step(&g, &x, delta, norm, int_budget)?;
            res.milp_solves += 1;
            res.milp_nodes += t.nodes;
            t
        } else if delta > 1.0 {
            let t = set.criticality_measure(&g, &x, delta, norm)?;
            res.milp_solves += 1;
            res.milp_nodes += t.nodes;
            res.inexact_milps += (!t.exact) as usize;
            t
        } else {
            crit
        };
        let int_size: f64 = set.integers().iter().map(|&j| trial.step[j].abs()).sum();
        let moves_integers = int_size > 0.0;
        log::debug!(
            "inner {}: f {fx:.10e} delta {delta:.3e} psi {psi_check:.3e} integer move {int_size} (budget {int_budget})",
            res.iterations
        );

        // (point, predicted reduction) candidates, integer move first
        let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
        match &hess {
            Some(b) => {
                if moves_integers {
                    // the real part may need a long compensating move, so the
                    // integer assignment is tried without the radius first
                    let ints = int_values(&trial.point);
                    for r in [cfg.delta_max, delta] {
                        if let Some(c) = model_step(&g, b, set, &x, &ints, r) {
                            candidates.push(c);
                        }
                    }
                }
            }
            None => candidates.push((trial.point.clone(), trial.psi)),
        }
        for c in &mut candidates {
            c.0 = repair(set, std::mem::take(&mut c.0))?;
        }
        let mut accepted = false;
        // accepted value and ratio, or None
        let ratio = |point: &[f64], pred: f64, fx: f64| -> Option<(f64, f64)> {
            if !(pred > 0.0) {
                return None;
            }
            let ft = phi.value(point).ok()?;
            let rho = (fx - ft) / pred;
            (rho >= cfg.eta_accept).then_some((ft, rho))
        };
        for (point, pred) in candidates {
            if let Some((ft, rho)) = ratio(&point, pred, fx) {
                x = point;
                fx = ft;
                if rho >= cfg.eta_expand {
                    delta = (delta * cfg.expand).min(cfg.delta_max);
                }
                accepted = true;
                break;
            }
        }
        if accepted {
            int_budget = f64::INFINITY;
            need_grad = true;
            res.accepted += 1;
            continue;
        }
        // A rejected integer move is retried with half the integer budget.
        // Once no smaller move is left the radius shrinks even if a real step
        // is accepted, so that Δ_check eventually excludes the move.
        let retry = moves_integers && int_size >= 2.0;
        let int_failed = (moves_integers && !retry) || (int_budget.is_finite() && !moves_integers);
        int_budget = if retry { (0.5 * int_size).floor() } else { f64::INFINITY };
        if moves_integers {
            log::debug!("  integer move rejected");
        }
        let mut step = trial.step.clone();
        let mut real_critical = false;
        let alt = match &hess {
            Some(b) => model_step(&g, b, set, &x, &int_values(&x), delta),
            None if moves_integers || int_failed => {
                let fixed = set.with_fixed_integers(&x);
                let a = fixed.criticality_measure(&g, &x, delta, norm)?;
                res.milp_solves += 1;
                res.milp_nodes += a.nodes;
                res.inexact_milps += (!a.exact) as usize;
                Some((a.point, a.psi))
            }
            None => None,
        };
        if let Some((point, pred)) = alt {
            let point = repair(set, point)?;
            log::debug!("  real step pred {pred:.3e}");
            if let Some((ft, rho)) = ratio(&point, pred, fx) {
                x = point;
                fx = ft;
                need_grad = true;
                res.accepted += 1;
                if int_failed {
                    delta *= cfg.shrink;
                } else if rho >= cfg.eta_expand && !retry {
                    delta = (delta * cfg.expand).min(cfg.delta_max);
                }
                if delta < cfg.delta_min {
                    res.integer_blocked = true;
                    break;
                }
                continue;
            }
            if pred > 0.0 {
                step = point.iter().zip(&x).map(|(a, b)| a - b).collect();
            } else {
                real_critical = true;
            }
        }
        if retry && real_critical {
            continue;
        }
        let d_real = (0..n)
            .filter(|&j| !set.is_integer(j))
            .map(|j| step[j].abs())
            .fold(0.0, f64::max);
        let base = if d_real > 0.0 && !real_critical { delta.min(d_real) } else { delta };
        delta = cfg.shrink * base;
        if delta < cfg.delta_min {
            res.integer_blocked = int_failed;
            break;
        }
    }
    res.x = x;
    res.value = fx;
    res.delta = delta;
    Ok(res)
}
