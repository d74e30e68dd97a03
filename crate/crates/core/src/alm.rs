//! Safeguarded augmented Lagrangian method.
//!
//! `L_μ(x, ŷ) = f(x) + dist²_C(c(x) + μŷ) / (2μ) − μ‖ŷ‖²/2`, minimized over
//! `X` to approximate criticality by [`crate::inner::minimize`].

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::convex::ACTIVE_TOL;
use crate::error::{Error, Result};
use crate::inner::{self, InnerStatus, SmoothFn, TrConfig};
use crate::milset::BallNorm;
use crate::model::{EvalCounters, Evaluator, Minlp};
use crate::sparse::CsrMatrix;

/// Tolerance on the normal-cone residual in certification.
pub const NORMAL_CONE_TOL: f64 = 1e-9;
/// Membership tolerance on rows and bounds of `X` in certification.
pub const MEMBER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlmConfig {
    pub mu1: f64,
    pub eps1: f64,
    pub eps_p: f64,
    pub eps_d: f64,
    pub kappa_mu: f64,
    pub theta_mu: f64,
    pub kappa_eps: f64,
    pub y_bound: f64,
    pub max_outer: usize,
    /// Consecutive uncertified subproblems after which the method gives up.
    pub max_inner_failures: usize,
    pub norm: BallNorm,
    /// Scale `mu1` by the initial infeasibility.
    pub adaptive_mu: bool,
    pub tr: TrConfig,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            mu1: 1e-2,
            eps1: 1e-2,
            eps_p: 1e-6,
            eps_d: 1e-6,
            kappa_mu: 0.5,
            theta_mu: 0.5,
            kappa_eps: 0.5,
            y_bound: 1e4,
            max_outer: 100,
            max_inner_failures: 3,
            norm: BallNorm::Linf,
            adaptive_mu: false,
            tr: TrConfig::default(),
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.mu1, self.eps1, self.eps_p, self.eps_d, self.y_bound];
        let unit = [self.kappa_mu, self.theta_mu, self.kappa_eps];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("penalty, tolerances and dual bound must be positive".into()));
        }
        if unit.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidInput("kappa_mu, theta_mu and kappa_eps must lie in (0, 1)".into()));
        }
        if self.max_outer == 0 || self.max_inner_failures == 0 {
            return Err(Error::InvalidInput("max_outer and max_inner_failures must be positive".into()));
        }
        self.tr.validate()
    }

    /// Settings that continue a finished run from its final state.
    pub fn resume(&self, report: &AlmReport) -> Self {
        let mut tr = self.tr.clone();
        tr.delta0 = report.delta_check.clamp(tr.delta_min * 2.0, tr.delta_max);
        Self {
            mu1: report.mu_final,
            eps1: self.eps_d,
            adaptive_mu: false,
            tr,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlmStatus {
    EpsKktCritical,
    MaxOuterIter,
    InnerFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterRecord {
    pub j: usize,
    pub mu: f64,
    pub eps: f64,
    pub viol_norm: f64,
    pub psi: f64,
    pub inner_iters: usize,
    pub milp_nodes: usize,
    pub time_ms: f64,
    pub inner_status: InnerStatus,
}

#[derive(Debug, Clone)]
pub struct AlmReport {
    pub status: AlmStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Safeguarded estimate `ŷ` used in the last subproblem.
    pub y_hat: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub viol_norm: f64,
    pub psi: f64,
    pub delta_check: f64,
    pub mu_final: f64,
    pub eps_final: f64,
    pub outer_iters: usize,
    pub objective: f64,
    pub trace: Vec<OuterRecord>,
    pub counters: EvalCounters,
    pub milp_solves: usize,
    pub milp_nodes: usize,
    pub inexact_milps: usize,
    pub time_ms: f64,
    /// Set when the run stopped because of an error in a subproblem.
    pub failure: Option<String>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `(s, y)` with `s = proj_C(c + μŷ)` and `y = ŷ + (c − s)/μ`, given `c = c(x)`.
pub fn multipliers_from_c(p: &Minlp, c: &[f64], y_hat: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
    let mut s: Vec<f64> = c.iter().zip(y_hat).map(|(ci, yi)| ci + mu * yi).collect();
    p.set_c.project_into(&mut s);
    let y = y_hat.iter().zip(c.iter().zip(&s)).map(|(yh, (ci, si))| yh + (ci - si) / mu).collect();
    (s, y)
}

fn check_dual(p: &Minlp, y: &[f64], mu: f64) -> Result<()> {
    if y.len() != p.m() {
        return Err(Error::Dimension {
            what: "dual estimate",
            expected: p.m(),
            found: y.len(),
        });
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("penalty parameter {mu} must be positive")));
    }
    Ok(())
}

pub fn multiplier_maps(p: &Minlp, x: &[f64], y_hat: &[f64], mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dual(p, y_hat, mu)?;
    let ev = Evaluator::new(p)?;
    let mut c = vec![0.0; p.m()];
    ev.constraints(x, &mut c)?;
    Ok(multipliers_from_c(p, &c, y_hat, mu))
}

pub fn al_value(p: &Minlp, x: &[f64], y_hat: &[f64], mu: f64) -> Result<f64> {
    check_dual(p, y_hat, mu)?;
    let ev = Evaluator::new(p)?;
    AugLag::new(&ev, y_hat.to_vec(), mu).value(x)
}

pub fn al_gradient(p: &Minlp, x: &[f64], y_hat: &[f64], mu: f64) -> Result<Vec<f64>> {
    check_dual(p, y_hat, mu)?;
    let ev = Evaluator::new(p)?;
    let mut g = vec![0.0; p.n];
    AugLag::new(&ev, y_hat.to_vec(), mu).gradient(x, &mut g)?;
    Ok(g)
}

/// `∇f(x) + c'(x)ᵀ y`.
pub fn lagrangian_gradient(ev: &Evaluator, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; ev.problem().n];
    ev.gradient(x, &mut g)?;
    if !y.is_empty() {
        ev.jacobian(x)?.mul_t_vec_add(y, &mut g);
    }
    Ok(g)
}

/// The augmented Lagrangian for fixed `ŷ` and `μ`.
pub struct AugLag<'a, 'p> {
    ev: &'a Evaluator<'p>,
    y_hat: Vec<f64>,
    mu: f64,
}

impl<'a, 'p> AugLag<'a, 'p> {
    pub fn new(ev: &'a Evaluator<'p>, y_hat: Vec<f64>, mu: f64) -> Self {
        Self { ev, y_hat, mu }
    }
}

impl SmoothFn for AugLag<'_, '_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let p = self.ev.problem();
        let f = self.ev.value(x)?;
        if p.m() == 0 {
            return Ok(f);
        }
        let mut c = vec![0.0; p.m()];
        self.ev.constraints(x, &mut c)?;
        let shifted: Vec<f64> = c.iter().zip(&self.y_hat).map(|(ci, yi)| ci + self.mu * yi).collect();
        let d2 = p.set_c.dist2(&shifted)?;
        let yy: f64 = self.y_hat.iter().map(|v| v * v).sum();
        Ok(f + d2 / (2.0 * self.mu) - 0.5 * self.mu * yy)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        let p = self.ev.problem();
        self.ev.gradient(x, grad)?;
        if p.m() == 0 {
            return Ok(());
        }
        let mut c = vec![0.0; p.m()];
        self.ev.constraints(x, &mut c)?;
        let (_, y) = multipliers_from_c(p, &c, &self.y_hat, self.mu);
        self.ev.jacobian(x)?.mul_t_vec_add(&y, grad);
        Ok(())
    }

    /// `∇²f + J_Aᵀ J_A / μ` over the components whose shifted value is
    /// outside `C` (Gauss-Newton; constraint curvature is dropped).
    fn model_hessian(&self, x: &[f64]) -> Result<Option<CsrMatrix>> {
        let p = self.ev.problem();
        let mut t = self.ev.hessian(x)?.unwrap_or_default();
        if p.m() > 0 {
            let mut c = vec![0.0; p.m()];
            self.ev.constraints(x, &mut c)?;
            let jac = self.ev.jacobian(x)?;
            let (lo, hi) = (p.set_c.lower(), p.set_c.upper());
            for i in 0..p.m() {
                let z = c[i] + self.mu * self.y_hat[i];
                if lo[i] < hi[i] && z > lo[i] && z < hi[i] {
                    continue;
                }
                let (cols, vals) = jac.row(i);
                for (a, &ca) in cols.iter().enumerate() {
                    for (b, &cb) in cols.iter().enumerate() {
                        t.push((ca, cb, vals[a] * vals[b] / self.mu));
                    }
                }
            }
        }
        Ok(Some(CsrMatrix::from_triplets(p.n, p.n, &t)?))
    }
}

/// Runs the method from `x0 ∈ X` with initial dual estimate `y0`.
pub fn solve(p: &Minlp, x0: &[f64], y0: &[f64], cfg: &AlmConfig) -> Result<AlmReport> {
    let start = Instant::now();
    cfg.validate()?;
    let violations = p.validate();
    if let Some(v) = violations.first() {
        return Err(Error::InvalidInput(format!("invalid problem: {v}")));
    }
    if x0.len() != p.n {
        return Err(Error::Dimension {
            what: "initial point",
            expected: p.n,
            found: x0.len(),
        });
    }
    if !p.set_x.is_member(x0, MEMBER_TOL) {
        return Err(Error::InvalidInput(
            "initial point is not in X; project it first (e.g. with MilSet::project_l1)".into(),
        ));
    }
    let m = p.m();
    let ev = Evaluator::new(p)?;
    let mut x = x0.to_vec();
    for &j in p.set_x.integers() {
        x[j] = x[j].round();
    }
    let mut y = if y0.is_empty() { vec![0.0; m] } else { y0.to_vec() };
    check_dual(p, &y, cfg.mu1)?;

    let mut c = vec![0.0; m];
    let mut mu = cfg.mu1;
    if cfg.adaptive_mu && m > 0 {
        ev.constraints(&x, &mut c)?;
        let mut proj = c.clone();
        p.set_c.project_into(&mut proj);
        let v0: f64 = c.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum();
        let f0 = ev.value(&x)?.abs().max(1.0);
        // make the initial penalty term comparable to the objective
        if v0 > 0.0 {
            mu = (cfg.mu1 * v0 / f0).clamp(cfg.mu1 * 1e-3, cfg.mu1 * 1e3);
        }
    }
    // with no nonlinear constraints a single subproblem at the final tolerance suffices
    let mut eps = if m == 0 { cfg.eps_d } else { cfg.eps1 };

    let mut report = AlmReport {
        status: AlmStatus::MaxOuterIter,
        x: x.clone(),
        y: y.clone(),
        y_hat: y.clone(),
        s: Vec::new(),
        v: Vec::new(),
        viol_norm: f64::INFINITY,
        psi: f64::INFINITY,
        delta_check: cfg.tr.delta0.min(1.0),
        mu_final: mu,
        eps_final: eps,
        outer_iters: 0,
        objective: f64::NAN,
        trace: Vec::new(),
        counters: EvalCounters::default(),
        milp_solves: 0,
        milp_nodes: 0,
        inexact_milps: 0,
        time_ms: 0.0,
        failure: None,
    };
    let mut v_prev = f64::INFINITY;
    let mut failures = 0;
    for j in 1..=cfg.max_outer {
        let t0 = Instant::now();
        let y_hat: Vec<f64> = y.iter().map(|v| v.clamp(-cfg.y_bound, cfg.y_bound)).collect();
        let al = AugLag::new(&ev, y_hat.clone(), mu);
        let inner = match inner::minimize(&al, &p.set_x, &x, eps, cfg.norm, &cfg.tr) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("subproblem {j} failed: {e}");
                report.status = AlmStatus::InnerFailure;
                report.failure = Some(e.to_string());
                break;
            }
        };
        x = inner.x;
        ev.constraints(&x, &mut c)?;
        let (s, y_new) = multipliers_from_c(p, &c, &y_hat, mu);
        let v: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a - b).collect();
        let vn = norm2(&v);
        y = y_new;

        report.outer_iters = j;
        report.milp_solves += inner.milp_solves;
        report.milp_nodes += inner.milp_nodes;
        report.inexact_milps += inner.inexact_milps;
        report.trace.push(OuterRecord {
            j,
            mu,
            eps,
            viol_norm: vn,
            psi: inner.psi,
            inner_iters: inner.iterations,
            milp_nodes: inner.milp_nodes,
            time_ms: t0.elapsed().as_secs_f64() * 1e3,
            inner_status: inner.status,
        });
        log::debug!(
            "outer {j}: mu {mu:.3e} eps {eps:.3e} |v| {vn:.3e} psi {:.3e} inner {} ({:?})",
            inner.psi,
            inner.iterations,
            inner.status
        );
        report.x.clone_from(&x);
        report.y.clone_from(&y);
        report.y_hat = y_hat;
        report.s = s;
        report.v = v;
        report.viol_norm = vn;
        report.psi = inner.psi;
        report.delta_check = inner.delta_check;
        report.mu_final = mu;
        report.eps_final = eps;

        let certified = inner.status == InnerStatus::Certified;
        failures = if certified { 0 } else { failures + 1 };
        if certified && eps <= cfg.eps_d && vn <= cfg.eps_p {
            report.status = AlmStatus::EpsKktCritical;
            break;
        }
        if failures >= cfg.max_inner_failures {
            report.status = AlmStatus::InnerFailure;
            report.failure = Some(format!("{failures} consecutive subproblems were not certified"));
            break;
        }
        if !(j == 1 || vn <= cfg.eps_p.max(cfg.theta_mu * v_prev)) {
            mu *= cfg.kappa_mu;
        }
        eps = cfg.eps_d.max(cfg.kappa_eps * eps);
        v_prev = vn;
    }
    report.objective = ev.value(&report.x)?;
    report.counters = ev.counters();
    report.time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub in_x: bool,
    /// `Ψ` of the Lagrangian gradient at `delta_check` (NaN if `x ∉ X`).
    pub psi: f64,
    pub delta_check: f64,
    pub normal_cone_residual: f64,
    pub viol_norm: f64,
    pub failures: Vec<String>,
}

/// Checks approximate KKT criticality of `(x, y)` with `z = s`.
#[allow(clippy::too_many_arguments)]
pub fn certify_eps_kkt(
    p: &Minlp,
    x: &[f64],
    y: &[f64],
    s: &[f64],
    eps_p: f64,
    eps_d: f64,
    norm: BallNorm,
    delta_check: f64,
) -> Result<Certificate> {
    let m = p.m();
    for (what, v, expected) in [("x", x, p.n), ("y", y, m), ("s", s, m)] {
        if v.len() != expected {
            return Err(Error::Dimension {
                what,
                expected,
                found: v.len(),
            });
        }
    }
    let ev = Evaluator::new(p)?;
    let mut failures = Vec::new();
    let in_x = p.set_x.is_member(x, MEMBER_TOL);
    let mut psi = f64::NAN;
    if in_x {
        let mut xr = x.to_vec();
        for &j in p.set_x.integers() {
            xr[j] = xr[j].round();
        }
        let g = lagrangian_gradient(&ev, &xr, y)?;
        let crit = p.set_x.criticality_measure(&g, &xr, delta_check, norm)?;
        psi = crit.psi;
        if !crit.exact {
            failures.push("criticality MILP did not finish; psi is only a lower bound".to_string());
        }
        if !(psi <= eps_d) {
            failures.push(format!("psi {psi:.3e} exceeds {eps_d:.3e}"));
        }
    } else {
        failures.push("not in X".to_string());
    }
    let ncr = match p.set_c.normal_cone_residual(s, y, ACTIVE_TOL) {
        Ok(r) => r,
        Err(_) => {
            failures.push("s is not in C".to_string());
            f64::INFINITY
        }
    };
    if ncr.is_finite() && ncr > NORMAL_CONE_TOL {
        failures.push(format!("normal cone residual {ncr:.3e} exceeds {NORMAL_CONE_TOL:.0e}"));
    }
    let mut c = vec![0.0; m];
    ev.constraints(x, &mut c)?;
    let viol: Vec<f64> = c.iter().zip(s).map(|(a, b)| a - b).collect();
    let viol_norm = norm2(&viol);
    if !(viol_norm <= eps_p) {
        failures.push(format!("constraint violation {viol_norm:.3e} exceeds {eps_p:.3e}"));
    }
    Ok(Certificate {
        pass: failures.is_empty(),
        in_x,
        psi,
        delta_check,
        normal_cone_residual: ncr,
        viol_norm,
        failures,
    })
}
