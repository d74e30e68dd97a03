//! Explicit-Euler transcription of hybrid optimal control problems.
//!
//! Variables are laid out stage by stage, `[x_0, u_0, w_0, x_1, u_1, w_1, …,
//! x_N]`, followed by auxiliary variables (total-variation gadget). The
//! binary `w_k` and real control `u_k` act on the interval `[t_k, t_{k+1}]`.

use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::BoxSet;
use crate::error::{Error, EvalError, Result};
use crate::milset::MilSet;
use crate::model::{ConstraintFn, Minlp, ObjectiveFn};
use crate::sparse::CsrMatrix;

/// Dynamics `ẋ = F(t, x, u, w)` and running cost `ℓ(t, x, u, w)`.
pub trait OcpModel: Send + Sync {
    fn rhs(&self, t: f64, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]);
    /// Row-major partials of `F`: `jx` is `n_x × n_x`, `ju` is `n_x × n_u`,
    /// `jw` is `n_x × n_w`.
    fn rhs_jacobian(&self, t: f64, x: &[f64], u: &[f64], w: &[f64], jx: &mut [f64], ju: &mut [f64], jw: &mut [f64]);
    fn stage_cost(&self, t: f64, x: &[f64], u: &[f64], w: &[f64]) -> f64;
    fn stage_cost_gradient(&self, t: f64, x: &[f64], u: &[f64], w: &[f64], gx: &mut [f64], gu: &mut [f64], gw: &mut [f64]);
}

/// Variable referenced by a per-stage linear row at stage `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageVar {
    State(usize),
    Control(usize),
    Binary(usize),
    /// `w_{k−1}`; at `k = 0` the fixed initial mode is used.
    PrevBinary(usize),
}

/// `lower <= Σ coef · var <= upper`, imposed for every stage `k = 0..N−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub terms: Vec<(StageVar, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone)]
pub struct OcpSpec {
    pub n_x: usize,
    pub n_u: usize,
    pub n_w: usize,
    pub t_final: f64,
    pub model: Arc<dyn OcpModel>,
    pub x_init: Vec<f64>,
    /// Fixed final values per state component.
    pub terminal: Vec<Option<f64>>,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub control_lower: Vec<f64>,
    pub control_upper: Vec<f64>,
    /// Components whose dynamics are affine with constant coefficients; their
    /// Euler equations become linear rows of `X` instead of entries of `c`.
    pub affine_states: Vec<bool>,
    pub stage_rows: Vec<StageRow>,
    /// Mode before the first interval, used by `PrevBinary` at `k = 0`.
    pub w_init: Vec<f64>,
    /// Exactly one binary active per stage.
    pub sos1: bool,
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
    pub binary_names: Vec<String>,
}

impl std::fmt::Debug for OcpSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcpSpec")
            .field("n_x", &self.n_x)
            .field("n_u", &self.n_u)
            .field("n_w", &self.n_w)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

impl OcpSpec {
    fn validate(&self) -> Result<()> {
        let dims = [
            ("x_init", self.x_init.len(), self.n_x),
            ("terminal", self.terminal.len(), self.n_x),
            ("state_lower", self.state_lower.len(), self.n_x),
            ("state_upper", self.state_upper.len(), self.n_x),
            ("affine_states", self.affine_states.len(), self.n_x),
            ("control_lower", self.control_lower.len(), self.n_u),
            ("control_upper", self.control_upper.len(), self.n_u),
            ("w_init", self.w_init.len(), self.n_w),
            ("state_names", self.state_names.len(), self.n_x),
            ("control_names", self.control_names.len(), self.n_u),
            ("binary_names", self.binary_names.len(), self.n_w),
        ];
        for (what, found, expected) in dims {
            if found != expected {
                return Err(Error::Dimension { what, expected, found });
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!("final time {} must be positive", self.t_final)));
        }
        for row in &self.stage_rows {
            for &(v, _) in &row.terms {
                let ok = match v {
                    StageVar::State(i) => i < self.n_x,
                    StageVar::Control(i) => i < self.n_u,
                    StageVar::Binary(i) | StageVar::PrevBinary(i) => i < self.n_w,
                };
                if !ok {
                    return Err(Error::InvalidInput(format!("stage row references {v:?} out of range")));
                }
            }
        }
        if self.sos1 && self.n_w == 0 {
            return Err(Error::InvalidInput("SOS1 requested without binary controls".into()));
        }
        Ok(())
    }

    /// One explicit Euler step.
    pub fn euler_step(&self, t: f64, dt: f64, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        self.model.rhs(t, x, u, w, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + dt * *o;
        }
    }

    /// Forward Euler simulation from `x_init` with the given per-interval controls.
    pub fn simulate(&self, dt: f64, controls: &[Vec<f64>], binaries: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut states = vec![self.x_init.clone()];
        for k in 0..binaries.len().max(controls.len()) {
            let mut next = vec![0.0; self.n_x];
            let u = controls.get(k).map_or(&[][..], |v| v.as_slice());
            let w = binaries.get(k).map_or(&[][..], |v| v.as_slice());
            self.euler_step(k as f64 * dt, dt, &states[k], u, w, &mut next);
            states.push(next);
        }
        states
    }

    /// Whether the stage rows hold for `(x_k, u_k, w_k)` given `w_{k−1}`.
    pub fn stage_rows_hold(&self, x: &[f64], u: &[f64], w: &[f64], w_prev: &[f64], tol: f64) -> bool {
        self.stage_rows.iter().all(|row| {
            let a: f64 = row
                .terms
                .iter()
                .map(|&(v, c)| {
                    c * match v {
                        StageVar::State(i) => x[i],
                        StageVar::Control(i) => u[i],
                        StageVar::Binary(i) => w[i],
                        StageVar::PrevBinary(i) => w_prev[i],
                    }
                })
                .sum();
            a >= row.lower - tol && a <= row.upper + tol
        })
    }

    /// Whether the stage's binaries satisfy SOS1 (when required).
    pub fn sos1_holds(&self, w: &[f64]) -> bool {
        !self.sos1 || (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxVar {
    pub binary: usize,
    /// The gadget variable measures `|w_{k+1} − w_k|`.
    pub k: usize,
}

/// Index map between `(stage, component)` and flat variable positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub n_x: usize,
    pub n_u: usize,
    pub n_w: usize,
    pub intervals: usize,
    pub stride: usize,
    pub aux: Vec<AuxVar>,
}

impl Layout {
    fn new(n_x: usize, n_u: usize, n_w: usize, intervals: usize) -> Self {
        Self {
            n_x,
            n_u,
            n_w,
            intervals,
            stride: n_x + n_u + n_w,
            aux: Vec::new(),
        }
    }

    pub fn x(&self, k: usize, i: usize) -> usize {
        k * self.stride + i
    }

    pub fn u(&self, k: usize, i: usize) -> usize {
        k * self.stride + self.n_x + i
    }

    pub fn w(&self, k: usize, i: usize) -> usize {
        k * self.stride + self.n_x + self.n_u + i
    }

    /// Number of state and control variables.
    pub fn n_core(&self) -> usize {
        self.intervals * self.stride + self.n_x
    }

    pub fn n_vars(&self) -> usize {
        self.n_core() + self.aux.len()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        (0..self.intervals).flat_map(|k| (0..self.n_w).map(move |i| self.w(k, i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvMode {
    None,
    Bound(f64),
    Penalty(f64),
}

/// Discretized trajectory; `controls` and `binaries` have one entry per
/// interval, `states` one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub binaries: Vec<Vec<f64>>,
    pub aux: Vec<f64>,
}

#[derive(Clone)]
pub struct DiscretizedOcp {
    pub spec: Arc<OcpSpec>,
    pub minlp: Minlp,
    pub layout: Layout,
    pub dt: f64,
    pub tv_mode: TvMode,
    /// Linear objective part added on top of the stage costs.
    pub linear_cost: Vec<f64>,
}

impl std::fmt::Debug for DiscretizedOcp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscretizedOcp")
            .field("layout", &self.layout)
            .field("dt", &self.dt)
            .field("tv_mode", &self.tv_mode)
            .finish_non_exhaustive()
    }
}

struct TranscribedObjective {
    spec: Arc<OcpSpec>,
    layout: Layout,
    dt: f64,
    linear: Vec<f64>,
}

impl ObjectiveFn for TranscribedObjective {
    fn num_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        let l = &self.layout;
        let s = &self.spec;
        let mut total = 0.0;
        for k in 0..l.intervals {
            let b = k * l.stride;
            let (xs, rest) = x[b..b + l.stride].split_at(l.n_x);
            let (us, ws) = rest.split_at(l.n_u);
            total += s.model.stage_cost(k as f64 * self.dt, xs, us, ws);
        }
        let lin: f64 = self.linear.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(self.dt * total + lin)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<(), EvalError> {
        let l = &self.layout;
        grad.copy_from_slice(&self.linear);
        let mut gx = vec![0.0; l.n_x];
        let mut gu = vec![0.0; l.n_u];
        let mut gw = vec![0.0; l.n_w];
        for k in 0..l.intervals {
            let b = k * l.stride;
            let (xs, rest) = x[b..b + l.stride].split_at(l.n_x);
            let (us, ws) = rest.split_at(l.n_u);
            self.spec
                .model
                .stage_cost_gradient(k as f64 * self.dt, xs, us, ws, &mut gx, &mut gu, &mut gw);
            for (j, v) in gx.iter().chain(&gu).chain(&gw).enumerate() {
                grad[b + j] += self.dt * v;
            }
        }
        Ok(())
    }

    /// Stage blocks by central differences of the stage-cost gradient.
    fn hessian(&self, x: &[f64]) -> Result<Option<Vec<(usize, usize, f64)>>, EvalError> {
        let l = &self.layout;
        let sd = l.stride;
        let mut out = Vec::new();
        let mut z = vec![0.0; sd];
        let mut gp = vec![0.0; sd];
        let mut gm = vec![0.0; sd];
        let mut block = vec![0.0; sd * sd];
        let stage_grad = |k: usize, z: &[f64], g: &mut [f64]| {
            let (xs, rest) = z.split_at(l.n_x);
            let (us, ws) = rest.split_at(l.n_u);
            let (gx, rest) = g.split_at_mut(l.n_x);
            let (gu, gw) = rest.split_at_mut(l.n_u);
            self.spec.model.stage_cost_gradient(k as f64 * self.dt, xs, us, ws, gx, gu, gw);
        };
        for k in 0..l.intervals {
            let b = k * sd;
            z.copy_from_slice(&x[b..b + sd]);
            for j in 0..sd {
                let h = 1e-5 * (1.0 + z[j].abs());
                let z0 = z[j];
                z[j] = z0 + h;
                stage_grad(k, &z, &mut gp);
                z[j] = z0 - h;
                stage_grad(k, &z, &mut gm);
                z[j] = z0;
                for i in 0..sd {
                    block[i * sd + j] = self.dt * (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            for i in 0..sd {
                for j in 0..sd {
                    let v = 0.5 * (block[i * sd + j] + block[j * sd + i]);
                    if v != 0.0 {
                        out.push((b + i, b + j, v));
                    }
                }
            }
        }
        Ok(Some(out))
    }
}

/// Euler residuals `x_{k+1,i} − x_{k,i} − Δt F_i(t_k, x_k, u_k, w_k)` of the
/// non-affine components, ordered stage-major.
struct EulerConstraints {
    spec: Arc<OcpSpec>,
    layout: Layout,
    dt: f64,
    comps: Vec<usize>,
}

impl EulerConstraints {
    fn stage_slices<'x>(&self, x: &'x [f64], k: usize) -> (&'x [f64], &'x [f64], &'x [f64]) {
        let l = &self.layout;
        let b = k * l.stride;
        let (xs, rest) = x[b..b + l.stride].split_at(l.n_x);
        let (us, ws) = rest.split_at(l.n_u);
        (xs, us, ws)
    }
}

impl ConstraintFn for EulerConstraints {
    fn num_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn dim(&self) -> usize {
        self.layout.intervals * self.comps.len()
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        let l = &self.layout;
        let q = self.comps.len();
        let mut out = Vec::with_capacity(self.dim() * (l.stride + 1));
        for k in 0..l.intervals {
            for (r, &i) in self.comps.iter().enumerate() {
                let row = k * q + r;
                out.push((row, l.x(k + 1, i)));
                for j in 0..l.stride {
                    out.push((row, k * l.stride + j));
                }
            }
        }
        out
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let l = &self.layout;
        let q = self.comps.len();
        let mut f = vec![0.0; l.n_x];
        for k in 0..l.intervals {
            let (xs, us, ws) = self.stage_slices(x, k);
            self.spec.model.rhs(k as f64 * self.dt, xs, us, ws, &mut f);
            for (r, &i) in self.comps.iter().enumerate() {
                out[k * q + r] = x[l.x(k + 1, i)] - xs[i] - self.dt * f[i];
            }
        }
        Ok(())
    }

    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) -> Result<(), EvalError> {
        let l = &self.layout;
        let (nx, nu, nw) = (l.n_x, l.n_u, l.n_w);
        let mut jx = vec![0.0; nx * nx];
        let mut ju = vec![0.0; nx * nu];
        let mut jw = vec![0.0; nx * nw];
        let mut pos = 0;
        for k in 0..l.intervals {
            let (xs, us, ws) = self.stage_slices(x, k);
            self.spec
                .model
                .rhs_jacobian(k as f64 * self.dt, xs, us, ws, &mut jx, &mut ju, &mut jw);
            for &i in &self.comps {
                values[pos] = 1.0;
                pos += 1;
                for j in 0..nx {
                    values[pos] = -(if i == j { 1.0 } else { 0.0 }) - self.dt * jx[i * nx + j];
                    pos += 1;
                }
                for j in 0..nu {
                    values[pos] = -self.dt * ju[i * nu + j];
                    pos += 1;
                }
                for j in 0..nw {
                    values[pos] = -self.dt * jw[i * nw + j];
                    pos += 1;
                }
            }
        }
        Ok(())
    }
}

struct RowBuilder {
    trip: Vec<(usize, usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl RowBuilder {
    fn new() -> Self {
        Self {
            trip: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    fn push(&mut self, terms: &[(usize, f64)], lower: f64, upper: f64) {
        let r = self.lower.len();
        self.trip.extend(terms.iter().filter(|t| t.1 != 0.0).map(|&(j, v)| (r, j, v)));
        self.lower.push(lower);
        self.upper.push(upper);
    }

    fn matrix(&self, ncols: usize) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(self.lower.len(), ncols, &self.trip)
    }
}

/// Transcribes `spec` on `intervals` uniform Euler steps.
pub fn discretize_euler(spec: Arc<OcpSpec>, intervals: usize) -> Result<DiscretizedOcp> {
    spec.validate()?;
    if intervals == 0 {
        return Err(Error::InvalidInput("at least one interval is required".into()));
    }
    let (nx, nu, nw) = (spec.n_x, spec.n_u, spec.n_w);
    let layout = Layout::new(nx, nu, nw, intervals);
    let n = layout.n_core();
    let dt = spec.t_final / intervals as f64;

    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for k in 0..=intervals {
        for i in 0..nx {
            let j = layout.x(k, i);
            lower[j] = spec.state_lower[i];
            upper[j] = spec.state_upper[i];
        }
        if k == intervals {
            break;
        }
        for i in 0..nu {
            lower[layout.u(k, i)] = spec.control_lower[i];
            upper[layout.u(k, i)] = spec.control_upper[i];
        }
        for i in 0..nw {
            lower[layout.w(k, i)] = 0.0;
            upper[layout.w(k, i)] = 1.0;
        }
    }
    for i in 0..nx {
        let j = layout.x(0, i);
        lower[j] = spec.x_init[i];
        upper[j] = spec.x_init[i];
        if let Some(v) = spec.terminal[i] {
            let j = layout.x(intervals, i);
            lower[j] = v;
            upper[j] = v;
        }
    }
    if let Some(j) = (0..n).find(|&j| lower[j] > upper[j]) {
        return Err(Error::InvalidInput(format!("boundary value of variable {j} lies outside its bounds")));
    }

    let mut rows = RowBuilder::new();
    // affine dynamics rows: coefficients read off the Jacobian at the origin
    let (z0x, z0u, z0w) = (vec![0.0; nx], vec![0.0; nu], vec![0.0; nw]);
    let mut f0 = vec![0.0; nx];
    let mut jx = vec![0.0; nx * nx];
    let mut ju = vec![0.0; nx * nu];
    let mut jw = vec![0.0; nx * nw];
    spec.model.rhs(0.0, &z0x, &z0u, &z0w, &mut f0);
    spec.model.rhs_jacobian(0.0, &z0x, &z0u, &z0w, &mut jx, &mut ju, &mut jw);
    let affine: Vec<usize> = (0..nx).filter(|&i| spec.affine_states[i]).collect();
    for k in 0..intervals {
        for &i in &affine {
            let mut terms = vec![(layout.x(k + 1, i), 1.0)];
            for j in 0..nx {
                let d = if i == j { 1.0 } else { 0.0 };
                terms.push((layout.x(k, j), -d - dt * jx[i * nx + j]));
            }
            for j in 0..nu {
                terms.push((layout.u(k, j), -dt * ju[i * nu + j]));
            }
            for j in 0..nw {
                terms.push((layout.w(k, j), -dt * jw[i * nw + j]));
            }
            rows.push(&terms, dt * f0[i], dt * f0[i]);
        }
    }
    for k in 0..intervals {
        for row in &spec.stage_rows {
            let mut shift = 0.0;
            let mut terms = Vec::with_capacity(row.terms.len());
            for &(v, c) in &row.terms {
                match v {
                    StageVar::State(i) => terms.push((layout.x(k, i), c)),
                    StageVar::Control(i) => terms.push((layout.u(k, i), c)),
                    StageVar::Binary(i) => terms.push((layout.w(k, i), c)),
                    StageVar::PrevBinary(i) if k == 0 => shift += c * spec.w_init[i],
                    StageVar::PrevBinary(i) => terms.push((layout.w(k - 1, i), c)),
                }
            }
            rows.push(&terms, row.lower - shift, row.upper - shift);
        }
        if spec.sos1 {
            let terms: Vec<(usize, f64)> = (0..nw).map(|i| (layout.w(k, i), 1.0)).collect();
            rows.push(&terms, 1.0, 1.0);
        }
    }
    let set_x = MilSet::new(rows.matrix(n)?, rows.lower, rows.upper, lower, upper, layout.binary_indices())?;
    let linear_cost = vec![0.0; n];
    assemble(spec, layout, dt, set_x, linear_cost, TvMode::None)
}

fn assemble(
    spec: Arc<OcpSpec>,
    layout: Layout,
    dt: f64,
    set_x: MilSet,
    linear_cost: Vec<f64>,
    tv_mode: TvMode,
) -> Result<DiscretizedOcp> {
    let comps: Vec<usize> = (0..spec.n_x).filter(|&i| !spec.affine_states[i]).collect();
    let constraints = EulerConstraints {
        spec: spec.clone(),
        layout: layout.clone(),
        dt,
        comps,
    };
    let m = constraints.dim();
    let objective = TranscribedObjective {
        spec: spec.clone(),
        layout: layout.clone(),
        dt,
        linear: linear_cost.clone(),
    };
    let mut minlp = Minlp::new(Arc::new(objective), Arc::new(constraints), BoxSet::zeros(m), set_x);
    minlp.names = Some(variable_names(&spec, &layout));
    Ok(DiscretizedOcp {
        spec,
        minlp,
        layout,
        dt,
        tv_mode,
        linear_cost,
    })
}

fn variable_names(spec: &OcpSpec, layout: &Layout) -> Vec<String> {
    let mut names = vec![String::new(); layout.n_vars()];
    for k in 0..=layout.intervals {
        for i in 0..layout.n_x {
            names[layout.x(k, i)] = format!("{}[{k}]", spec.state_names[i]);
        }
        if k == layout.intervals {
            break;
        }
        for i in 0..layout.n_u {
            names[layout.u(k, i)] = format!("{}[{k}]", spec.control_names[i]);
        }
        for i in 0..layout.n_w {
            names[layout.w(k, i)] = format!("{}[{k}]", spec.binary_names[i]);
        }
    }
    for (a, aux) in layout.aux.iter().enumerate() {
        names[layout.n_core() + a] = format!("tv_{}[{}]", spec.binary_names[aux.binary], aux.k);
    }
    names
}

/// Adds the total-variation gadget: per binary control `i` and `k = 0..N−2` a
/// variable `t ∈ [0, 1]` with four rows pinning `t = |w_{k+1} − w_k|` at
/// binary points, then bounds or penalizes `TV = ½ Σ t`.
pub fn add_total_variation(d: &DiscretizedOcp, mode: TvMode) -> Result<DiscretizedOcp> {
    match mode {
        TvMode::None => return Ok(d.clone()),
        TvMode::Bound(u) | TvMode::Penalty(u) if !(u >= 0.0 && u.is_finite()) => {
            return Err(Error::InvalidInput(format!("total-variation parameter {u} must be nonnegative")));
        }
        _ => {}
    }
    if d.tv_mode != TvMode::None {
        return Err(Error::InvalidInput("total-variation gadget already present".into()));
    }
    let l = &d.layout;
    if l.n_w == 0 {
        return Err(Error::InvalidInput("total variation needs binary controls".into()));
    }
    let mut layout = l.clone();
    let base = l.n_vars();
    let mut rows = RowBuilder::new();
    for i in 0..l.n_w {
        for k in 0..l.intervals.saturating_sub(1) {
            let t = base + layout.aux.len();
            layout.aux.push(AuxVar { binary: i, k });
            let (a, b) = (l.w(k, i), l.w(k + 1, i));
            rows.push(&[(t, 1.0), (b, -1.0), (a, 1.0)], 0.0, f64::INFINITY);
            rows.push(&[(t, 1.0), (b, 1.0), (a, -1.0)], 0.0, f64::INFINITY);
            rows.push(&[(t, 1.0), (a, -1.0), (b, -1.0)], f64::NEG_INFINITY, 0.0);
            rows.push(&[(t, 1.0), (a, 1.0), (b, 1.0)], f64::NEG_INFINITY, 2.0);
        }
    }
    let n_aux = layout.aux.len();
    let n = base + n_aux;
    let mut linear = d.linear_cost.clone();
    linear.resize(n, 0.0);
    match mode {
        TvMode::Bound(u) => {
            let terms: Vec<(usize, f64)> = (base..n).map(|j| (j, 0.5)).collect();
            rows.push(&terms, f64::NEG_INFINITY, u);
        }
        TvMode::Penalty(alpha) => {
            for c in &mut linear[base..] {
                *c += 0.5 * alpha;
            }
        }
        TvMode::None => unreachable!(),
    }
    let set_x = d
        .minlp
        .set_x
        .extend(&vec![0.0; n_aux], &vec![1.0; n_aux], &rows.matrix(n)?, &rows.lower, &rows.upper)?;
    assemble(d.spec.clone(), layout, d.dt, set_x, linear, mode)
}

impl DiscretizedOcp {
    pub fn intervals(&self) -> usize {
        self.layout.intervals
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.layout.intervals;
        (0..=n)
            .map(|k| if k == n { self.spec.t_final } else { k as f64 * self.dt })
            .collect()
    }

    /// Raw decoding of a flat vector (no rounding).
    pub fn decode(&self, x: &[f64]) -> Trajectory {
        let l = &self.layout;
        let n = l.intervals;
        Trajectory {
            t: self.time_grid(),
            states: (0..=n).map(|k| (0..l.n_x).map(|i| x[l.x(k, i)]).collect()).collect(),
            controls: (0..n).map(|k| (0..l.n_u).map(|i| x[l.u(k, i)]).collect()).collect(),
            binaries: (0..n).map(|k| (0..l.n_w).map(|i| x[l.w(k, i)]).collect()).collect(),
            aux: x[l.n_core()..].to_vec(),
        }
    }

    /// Decoding with binary entries rounded to the nearest integer.
    pub fn extract_trajectory(&self, x: &[f64]) -> Trajectory {
        let mut t = self.decode(x);
        for w in &mut t.binaries {
            for v in w.iter_mut() {
                *v = v.round();
            }
        }
        t
    }

    /// Inverse of [`DiscretizedOcp::decode`]. Missing auxiliary entries are
    /// filled with `|w_{k+1} − w_k|`.
    pub fn encode(&self, traj: &Trajectory) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.n_vars()];
        for (k, s) in traj.states.iter().enumerate() {
            for (i, v) in s.iter().enumerate() {
                x[l.x(k, i)] = *v;
            }
        }
        for (k, u) in traj.controls.iter().enumerate() {
            for (i, v) in u.iter().enumerate() {
                x[l.u(k, i)] = *v;
            }
        }
        for (k, w) in traj.binaries.iter().enumerate() {
            for (i, v) in w.iter().enumerate() {
                x[l.w(k, i)] = *v;
            }
        }
        let core = l.n_core();
        for (a, aux) in l.aux.iter().enumerate() {
            x[core + a] = match traj.aux.get(a) {
                Some(&v) => v,
                None => (traj.binaries[aux.k + 1][aux.binary] - traj.binaries[aux.k][aux.binary]).abs(),
            };
        }
        x
    }

    /// `½ Σ_i Σ_k |w_{i,k+1} − w_{i,k}|` evaluated from the binaries of `x`.
    pub fn total_variation(&self, x: &[f64]) -> f64 {
        let l = &self.layout;
        let mut s = 0.0;
        for i in 0..l.n_w {
            for k in 0..l.intervals.saturating_sub(1) {
                s += (x[l.w(k + 1, i)] - x[l.w(k, i)]).abs();
            }
        }
        0.5 * s
    }

    /// Point with the given controls and Euler-simulated states; auxiliary
    /// variables take their exact values.
    pub fn simulate_point(&self, controls: &[Vec<f64>], binaries: &[Vec<f64>]) -> Vec<f64> {
        let states = self.spec.simulate(self.dt, controls, binaries);
        let traj = Trajectory {
            t: self.time_grid(),
            states,
            controls: controls.to_vec(),
            binaries: binaries.to_vec(),
            aux: Vec::new(),
        };
        self.encode(&traj)
    }

    /// CSV with columns `t, x1.., u1.., w1..`; control cells are empty on the
    /// final node.
    pub fn write_trajectory_csv<W: io::Write>(&self, traj: &Trajectory, mut w: W) -> io::Result<()> {
        let l = &self.layout;
        let mut s = String::from("t");
        for i in 1..=l.n_x {
            let _ = write!(s, ",x{i}");
        }
        for i in 1..=l.n_u {
            let _ = write!(s, ",u{i}");
        }
        for i in 1..=l.n_w {
            let _ = write!(s, ",w{i}");
        }
        s.push('\n');
        for k in 0..=l.intervals {
            let _ = write!(s, "{:.16e}", traj.t[k]);
            for v in &traj.states[k] {
                let _ = write!(s, ",{v:.16e}");
            }
            if k < l.intervals {
                for v in traj.controls[k].iter().chain(&traj.binaries[k]) {
                    let _ = write!(s, ",{v:.16e}");
                }
            } else {
                for _ in 0..l.n_u + l.n_w {
                    s.push(',');
                }
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes())
    }
}
