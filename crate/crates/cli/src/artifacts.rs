//! Output files: solution.json, trace.csv, trajectory.csv and manifest.json.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context, Result};
use hocp::alm::{AlmReport, OuterRecord};
use hocp::model::EvalCounters;
use hocp::transcription::{DiscretizedOcp, Trajectory};
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::plot::{polylines, Series};

/// Where a flat vector lives: the instance it was built from and its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRef {
    pub instance: Instance,
    pub n_vars: usize,
    pub n_constraints: usize,
    pub intervals: usize,
}

impl LayoutRef {
    pub fn new(instance: &Instance, d: &DiscretizedOcp) -> Self {
        Self {
            instance: instance.clone(),
            n_vars: d.minlp.n,
            n_constraints: d.minlp.m(),
            intervals: d.intervals(),
        }
    }
}

/// `solution.json`. Non-finite measures are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub psi: Option<f64>,
    pub viol_norm: Option<f64>,
    pub objective: Option<f64>,
    pub counters: EvalCounters,
    pub layout_ref: LayoutRef,
    /// Radius at which `psi` was evaluated.
    pub delta_check: Option<f64>,
    /// Safeguarded dual estimate of the last subproblem.
    pub y_hat: Vec<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Solution {
    pub fn from_report(r: &AlmReport, layout_ref: LayoutRef) -> Self {
        Self {
            status: format!("{:?}", r.status),
            x: r.x.clone(),
            y: r.y.clone(),
            s: r.s.clone(),
            psi: finite(r.psi),
            viol_norm: finite(r.viol_norm),
            objective: finite(r.objective),
            counters: r.counters,
            layout_ref,
            delta_check: finite(r.delta_check),
            y_hat: r.y_hat.clone(),
        }
    }

    /// A point without multipliers (baseline outputs).
    pub fn primal(status: &str, x: Vec<f64>, objective: f64, layout_ref: LayoutRef) -> Self {
        Self {
            status: status.to_string(),
            x,
            y: Vec::new(),
            s: Vec::new(),
            psi: None,
            viol_norm: None,
            objective: finite(objective),
            counters: EvalCounters::default(),
            layout_ref,
            delta_check: None,
            y_hat: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read solution file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a solution file", path.display()))
    }
}

/// JSON floats with 17 significant digits, so that output bytes depend only
/// on the values.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn trace_csv(trace: &[OuterRecord]) -> String {
    let mut s = String::from("j,mu,eps_j,viol_norm,psi,inner_iters,milp_nodes,time_ms\n");
    for t in trace {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.3}",
            t.j, t.mu, t.eps, t.viol_norm, t.psi, t.inner_iters, t.milp_nodes, t.time_ms
        );
    }
    s
}

/// Collects the files of one run and writes the manifest last.
pub struct RunWriter {
    dir: PathBuf,
    outputs: Vec<String>,
    timings: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: Vec<String>,
    config: Option<String>,
    /// The solvers are deterministic; no random seed is involved.
    seed: Option<u64>,
    parameters: serde_json::Value,
    git_describe: String,
    timings_ms: &'a BTreeMap<String, f64>,
    outputs: &'a [String],
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

impl RunWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `trajectory.csv` and a plot of every column against time.
    pub fn write_trajectory(&mut self, d: &DiscretizedOcp, traj: &Trajectory) -> Result<()> {
        let mut buf = Vec::new();
        d.write_trajectory_csv(traj, &mut buf)?;
        self.write("trajectory.csv", &buf)?;
        let l = &d.layout;
        let pad = |v: Vec<f64>| v.into_iter().chain([f64::NAN]).collect::<Vec<_>>();
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for i in 0..l.n_x {
            names.push(format!("x{}", i + 1));
            cols.push(traj.states.iter().map(|s| s[i]).collect());
        }
        for i in 0..l.n_u {
            names.push(format!("u{}", i + 1));
            cols.push(pad(traj.controls.iter().map(|u| u[i]).collect()));
        }
        for i in 0..l.n_w {
            names.push(format!("w{}", i + 1));
            cols.push(pad(traj.binaries.iter().map(|w| w[i]).collect()));
        }
        let series: Vec<Series> = names
            .iter()
            .zip(cols)
            .map(|(name, values)| Series { name, values })
            .collect();
        let svg = polylines("trajectory", "t", &traj.t, &series);
        self.write("trajectory.svg", svg.as_bytes())
    }

    pub fn time(&mut self, what: &str, ms: f64) {
        self.timings.insert(what.to_string(), ms);
    }

    /// Writes `manifest.json` through a temporary file and a rename.
    pub fn finish(mut self, config: Option<&Path>, parameters: serde_json::Value) -> Result<()> {
        self.outputs.push("manifest.json".to_string());
        let manifest = Manifest {
            command: std::env::args().collect(),
            config: config.map(|p| p.display().to_string()),
            seed: None,
            parameters,
            git_describe: git_describe(),
            timings_ms: &self.timings,
            outputs: &self.outputs,
        };
        let tmp = self.dir.join(".manifest.json.tmp");
        fs::write(&tmp, to_json(&manifest)?)?;
        fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(())
    }
}
