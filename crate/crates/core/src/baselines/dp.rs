//! Backward value iteration on a uniform state grid.
//!
//! The discrete state is the previous mode, so transition rows that reference
//! `w_{k−1}` (hysteresis) are enforced exactly at every node.

use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcription::{DiscretizedOcp, OcpSpec, Trajectory, TvMode};

const ROW_TOL: f64 = 1e-9;
const MAGIC: &[u8; 8] = b"HOCPDP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpGrid {
    /// Grid values per state component.
    pub state_points: usize,
    /// Grid values per real control component.
    pub control_points: usize,
}

impl Default for DpGrid {
    fn default() -> Self {
        Self {
            state_points: 51,
            control_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpConfig {
    pub grid: DpGrid,
    /// Weight on each squared deviation from a fixed terminal value.
    pub terminal_weight: f64,
    /// Worker threads for the stage sweeps; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            grid: DpGrid::default(),
            terminal_weight: 1e4,
            threads: None,
        }
    }
}

/// Cost-to-go `V[k][node][mode]` where `mode` is the mode active on the
/// interval before node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub stages: usize,
    pub axes: Vec<Vec<f64>>,
    pub n_modes: usize,
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn nodes(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn get(&self, k: usize, node: usize, mode: usize) -> f64 {
        self.values[(k * self.nodes() + node) * self.n_modes + mode]
    }

    /// Little-endian layout: magic `HOCPDP01`, then `u64` stages, state
    /// count, mode count, one `u64` point count per state, the axes as `f64`,
    /// then the values in `[stage][node][mode]` order (node index row-major
    /// over the state axes, last state fastest).
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.stages, self.axes.len(), self.n_modes] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for a in &self.axes {
            w.write_all(&(a.len() as u64).to_le_bytes())?;
        }
        for v in self.axes.iter().flatten().chain(&self.values) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a value table"));
        }
        let mut u = || -> io::Result<usize> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            usize::try_from(u64::from_le_bytes(b)).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        };
        let stages = u()?;
        let dims = u()?;
        let n_modes = u()?;
        let counts = (0..dims).map(|_| u()).collect::<io::Result<Vec<_>>>()?;
        let mut f = || -> io::Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let axes = counts
            .iter()
            .map(|&c| (0..c).map(|_| f()).collect::<io::Result<Vec<_>>>())
            .collect::<io::Result<Vec<_>>>()?;
        let total = stages * counts.iter().product::<usize>() * n_modes;
        let values = (0..total).map(|_| f()).collect::<io::Result<Vec<_>>>()?;
        Ok(Self {
            stages,
            axes,
            n_modes,
            values,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DpSolution {
    pub trajectory: Trajectory,
    /// Flat point in the layout of the transcription.
    pub x: Vec<f64>,
    /// Transcribed objective at `x`.
    pub objective: f64,
    /// Terminal penalty of the rolled-out final state.
    pub terminal_penalty: f64,
    /// Grid estimate of the optimal cost (objective plus penalty).
    pub value_estimate: f64,
    /// Rollout stages where no action from the exact state had a finite
    /// cost-to-go and the action of the nearest node (or, failing that, the
    /// cheapest admissible one) was applied; bounds may be violated there.
    pub off_grid: Vec<usize>,
    pub table: ValueTable,
}

/// Binary mode vectors the solver enumerates.
pub fn enumerate_modes(spec: &OcpSpec) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_w;
    if spec.sos1 {
        return Ok((0..n)
            .map(|i| {
                let mut w = vec![0.0; n];
                w[i] = 1.0;
                w
            })
            .collect());
    }
    if n > 16 {
        return Err(Error::InvalidInput(format!("{n} free binaries are too many to enumerate")));
    }
    Ok((0..1usize << n)
        .map(|bits| (0..n).map(|i| ((bits >> i) & 1) as f64).collect())
        .collect())
}

fn axis(lo: f64, hi: f64, points: usize, what: &str) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} needs finite bounds for a grid")));
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

struct Sweep<'a> {
    spec: &'a OcpSpec,
    dt: f64,
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    modes: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    switch_cost: f64,
}

impl Sweep<'_> {
    fn node_state(&self, mut node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.axes.len()];
        for i in (0..self.axes.len()).rev() {
            let c = self.axes[i].len();
            x[i] = self.axes[i][node % c];
            node /= c;
        }
        x
    }

    /// Nearest grid node, or `None` outside the state bounds unless `clamp`.
    fn nearest(&self, x: &[f64], clamp: bool) -> Option<usize> {
        let mut node = 0;
        for (i, a) in self.axes.iter().enumerate() {
            let (lo, hi) = (a[0], a[a.len() - 1]);
            if !(x[i] >= lo - ROW_TOL && x[i] <= hi + ROW_TOL) && !clamp {
                return None;
            }
            let idx = if a.len() == 1 {
                0
            } else {
                (((x[i] - lo) / (hi - lo) * (a.len() - 1) as f64).round().max(0.0) as usize).min(a.len() - 1)
            };
            node += idx * self.strides[i];
        }
        Some(node)
    }

    /// Best `(cost, mode, control)` from state `x` at stage `k` after mode
    /// `prev`, scoring successors with `next` (values at stage `k + 1`).
    fn best_action(&self, k: usize, x: &[f64], prev: usize, next: &[f64]) -> Option<(f64, usize, usize)> {
        let nm = self.modes.len();
        let t = k as f64 * self.dt;
        let mut buf = vec![0.0; x.len()];
        let mut best: Option<(f64, usize, usize)> = None;
        for (m, w) in self.modes.iter().enumerate() {
            let switch = if k > 0 && m != prev {
                let diff: f64 = w.iter().zip(&self.modes[prev]).map(|(a, b)| (a - b).abs()).sum();
                0.5 * self.switch_cost * diff
            } else {
                0.0
            };
            for (ci, u) in self.controls.iter().enumerate() {
                if !self.spec.stage_rows_hold(x, u, w, &self.modes[prev], ROW_TOL) {
                    continue;
                }
                self.spec.euler_step(t, self.dt, x, u, w, &mut buf);
                let Some(node) = self.nearest(&buf, false) else { continue };
                let tail = next[node * nm + m];
                if !tail.is_finite() {
                    continue;
                }
                let cost = self.dt * self.spec.model.stage_cost(t, x, u, w) + switch + tail;
                if best.map_or(true, |b| cost < b.0) {
                    best = Some((cost, m, ci));
                }
            }
        }
        best
    }
}

impl Sweep<'_> {
    /// Row-admissible action of least stage cost, ignoring the cost-to-go.
    fn cheapest_action(&self, k: usize, x: &[f64], prev: usize) -> Option<(f64, usize, usize)> {
        let t = k as f64 * self.dt;
        let mut best: Option<(f64, usize, usize)> = None;
        for (m, w) in self.modes.iter().enumerate() {
            for (ci, u) in self.controls.iter().enumerate() {
                if self.spec.stage_rows_hold(x, u, w, &self.modes[prev], ROW_TOL) {
                    let cost = self.dt * self.spec.model.stage_cost(t, x, u, w);
                    if best.map_or(true, |b| cost < b.0) {
                        best = Some((cost, m, ci));
                    }
                }
            }
        }
        best
    }
}

/// Grid dynamic programming with a greedy forward rollout from the exact
/// initial state.
pub fn dp_solve(d: &DiscretizedOcp, cfg: &DpConfig) -> Result<DpSolution> {
    let spec = d.spec.as_ref();
    let n = d.intervals();
    let g = &cfg.grid;
    if g.state_points < 2 || g.control_points < 2 {
        return Err(Error::InvalidInput("grid counts must be at least 2".into()));
    }
    if !(cfg.terminal_weight >= 0.0 && cfg.terminal_weight.is_finite()) {
        return Err(Error::InvalidInput("terminal weight must be nonnegative".into()));
    }
    let switch_cost = match d.tv_mode {
        TvMode::None => 0.0,
        TvMode::Penalty(a) => a,
        TvMode::Bound(_) => {
            return Err(Error::InvalidInput("dynamic programming does not support a total-variation bound".into()))
        }
    };
    let axes = (0..spec.n_x)
        .map(|i| axis(spec.state_lower[i], spec.state_upper[i], g.state_points, &spec.state_names[i]))
        .collect::<Result<Vec<_>>>()?;
    let control_axes = (0..spec.n_u)
        .map(|i| axis(spec.control_lower[i], spec.control_upper[i], g.control_points, &spec.control_names[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut controls = vec![Vec::new()];
    for a in &control_axes {
        controls = controls
            .iter()
            .flat_map(|c| {
                a.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    let mut strides = vec![1; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * axes[i + 1].len();
    }
    let modes = enumerate_modes(spec)?;
    let w_init = if spec.n_w == 0 {
        0
    } else {
        modes
            .iter()
            .position(|m| m == &spec.w_init)
            .ok_or_else(|| Error::InvalidInput("initial mode is not an admissible mode".into()))?
    };
    let sweep = Sweep {
        spec,
        dt: d.dt,
        axes,
        strides,
        modes,
        controls,
        switch_cost,
    };
    let nodes: usize = sweep.axes.iter().map(Vec::len).product();
    let nm = sweep.modes.len().max(1);
    let stage_len = nodes * nm;

    let mut values = vec![0.0; (n + 1) * stage_len];
    {
        let last = &mut values[n * stage_len..];
        for node in 0..nodes {
            let x = sweep.node_state(node);
            let pen: f64 = spec
                .terminal
                .iter()
                .zip(&x)
                .filter_map(|(t, v)| t.map(|t| (v - t) * (v - t)))
                .sum();
            last[node * nm..(node + 1) * nm].fill(cfg.terminal_weight * pen);
        }
    }
    let mut run = || {
        for k in (0..n).rev() {
            let (head, tail) = values.split_at_mut((k + 1) * stage_len);
            let next = &tail[..stage_len];
            head[k * stage_len..]
                .par_chunks_mut(nm)
                .enumerate()
                .for_each(|(node, out)| {
                    let x = sweep.node_state(node);
                    for (prev, o) in out.iter_mut().enumerate() {
                        *o = sweep.best_action(k, &x, prev, next).map_or(f64::INFINITY, |b| b.0);
                    }
                });
        }
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }

    let mut states = vec![spec.x_init.clone()];
    let mut ctrl = Vec::with_capacity(n);
    let mut bins = Vec::with_capacity(n);
    let mut prev = w_init;
    let mut value_estimate = f64::NAN;
    let mut off_grid = Vec::new();
    for k in 0..n {
        let next = &values[(k + 1) * stage_len..(k + 2) * stage_len];
        let found = match sweep.best_action(k, &states[k], prev, next) {
            Some(b) => Some(b),
            None => {
                // the exact state drifted into a dead end; follow the policy
                // of the nearest node instead
                off_grid.push(k);
                let node = sweep.nearest(&states[k], true).unwrap_or(0);
                sweep
                    .best_action(k, &sweep.node_state(node), prev, next)
                    .or_else(|| sweep.cheapest_action(k, &states[k], prev))
            }
        };
        let (cost, m, ci) = found.ok_or_else(|| Error::InvalidInput(format!("no admissible action at stage {k}")))?;
        if k == 0 {
            value_estimate = cost;
        }
        let mut xn = vec![0.0; spec.n_x];
        spec.euler_step(k as f64 * d.dt, d.dt, &states[k], &sweep.controls[ci], &sweep.modes[m], &mut xn);
        states.push(xn);
        ctrl.push(sweep.controls[ci].clone());
        bins.push(sweep.modes.get(m).cloned().unwrap_or_default());
        prev = m;
    }
    if !off_grid.is_empty() {
        log::warn!("grid rollout followed node policies at stages {off_grid:?}");
    }
    let x = d.simulate_point(&ctrl, &bins);
    let objective = d.minlp.objective.value(&x)?;
    let terminal_penalty = cfg.terminal_weight
        * spec
            .terminal
            .iter()
            .zip(&states[n])
            .filter_map(|(t, v)| t.map(|t| (v - t) * (v - t)))
            .sum::<f64>();
    Ok(DpSolution {
        trajectory: d.decode(&x),
        x,
        objective,
        terminal_penalty,
        value_estimate,
        off_grid,
        table: ValueTable {
            stages: n + 1,
            axes: sweep.axes,
            n_modes: nm,
            values,
        },
    })
}
