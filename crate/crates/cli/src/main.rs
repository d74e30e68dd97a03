mod artifacts;
mod instance;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hocp::alm::{self, certify_eps_kkt, AlmConfig, AlmReport, AlmStatus, Certificate};
use hocp::baselines::{cia_sur, dp_solve, refine_fixed_integers, relax_then_project, DpConfig};
use hocp::model::{Evaluator, Minlp};
use hocp::transcription::DiscretizedOcp;
use log::{info, warn};
use serde_json::json;

use artifacts::{to_json, trace_csv, LayoutRef, RunWriter, Solution};
use instance::{Instance, InstanceArgs, ProblemKind};
use plot::{polylines, Series};

/// Membership tolerance below which a warm start is used without projection.
const WARM_START_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "hocp", version, about = "Mixed-integer optimal control by an augmented Lagrangian method")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the augmented Lagrangian method on a benchmark instance.
    Solve(SolveArgs),
    /// Run a reference method.
    Baseline(BaselineArgs),
    /// Time the method (and fixed-integer refinement) over several grid sizes.
    BenchRuntime(BenchArgs),
    /// Re-certify a stored solution.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// JSON file with method parameters (missing fields take their defaults).
    #[arg(long)]
    alm_config: Option<PathBuf>,
}

impl SolverArgs {
    fn load(&self) -> Result<AlmConfig> {
        let cfg: AlmConfig = match &self.alm_config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("invalid method parameters in {}", p.display()))?
            }
            None => AlmConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(value_enum)]
    problem: ProblemKind,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// A solution.json from an earlier run; projected onto X if needed.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long, default_value = "alm")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineKind {
    Dp,
    Cia,
    Relax,
    Refine,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(value_enum)]
    kind: BaselineKind,
    /// Problem for `dp` and `relax`; `cia` and `refine` take it from their input.
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Relaxation output used by `cia`.
    #[arg(long, default_value = "relax/solution.json")]
    input: PathBuf,
    /// Solution refined by `refine`.
    #[arg(long, default_value = "alm/solution.json")]
    warm_start: PathBuf,
    /// Grid values per state component (`dp`).
    #[arg(long)]
    state_points: Option<usize>,
    /// Grid values per real control component (`dp`).
    #[arg(long)]
    control_points: Option<usize>,
    /// Output directory; defaults to the baseline name.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(value_enum)]
    problem: ProblemKind,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
    n_list: Vec<usize>,
    /// Repetitions per size; the median time is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    eps_p: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps_d: f64,
}

/// Result of a command that ran to completion.
enum Outcome {
    Success,
    NotCertified,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.command {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Baseline(a) => cmd_baseline(a),
        Cmd::BenchRuntime(a) => cmd_bench(a),
        Cmd::Check(a) => cmd_check(a),
    };
    match res {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotCertified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn status_outcome(s: AlmStatus) -> Outcome {
    match s {
        AlmStatus::EpsKktCritical => Outcome::Success,
        _ => Outcome::NotCertified,
    }
}

/// Projection of the instance's default start onto `X`.
fn default_start(inst: &Instance, p: &Minlp) -> Result<Vec<f64>> {
    Ok(p.set_x.project_l1(&inst.default_start(p.n))?)
}

fn warm_start(path: &Path, p: &Minlp) -> Result<(Vec<f64>, Vec<f64>)> {
    let sol = Solution::read(path)?;
    if sol.x.len() != p.n {
        bail!(
            "warm start {} has {} variables, the instance has {}",
            path.display(),
            sol.x.len(),
            p.n
        );
    }
    let x = if p.set_x.is_member(&sol.x, WARM_START_TOL) {
        sol.x
    } else {
        info!("warm start is not in X; projecting");
        p.set_x.project_l1(&sol.x)?
    };
    let y = if sol.y.len() == p.m() { sol.y } else { Vec::new() };
    Ok((x, y))
}

fn certify(p: &Minlp, r: &AlmReport, cfg: &AlmConfig) -> Result<Certificate> {
    Ok(certify_eps_kkt(p, &r.x, &r.y, &r.s, cfg.eps_p, cfg.eps_d, cfg.norm, r.delta_check)?)
}

fn report_summary(what: &str, r: &AlmReport) {
    info!(
        "{what}: {:?} after {} outer iterations, objective {:.6}, violation {:.3e}, psi {:.3e}, {:.0} ms",
        r.status, r.outer_iters, r.objective, r.viol_norm, r.psi, r.time_ms
    );
}

/// Writes solution, trace, trajectory and certificate of an ALM run.
fn write_report(
    w: &mut RunWriter,
    inst: &Instance,
    d: &DiscretizedOcp,
    r: &AlmReport,
    cert: Option<&Certificate>,
) -> Result<()> {
    w.write("solution.json", &to_json(&Solution::from_report(r, LayoutRef::new(inst, d)))?)?;
    w.write("trace.csv", trace_csv(&r.trace).as_bytes())?;
    if let Some(c) = cert {
        w.write("certificate.json", &to_json(c)?)?;
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<Outcome> {
    let inst = a.instance.resolve(a.problem)?;
    let cfg = a.solver.load()?;
    let d = inst.build()?;
    let p = &d.minlp;
    let (x0, y0) = match &a.warm_start {
        Some(path) => warm_start(path, p)?,
        None => (default_start(&inst, p)?, Vec::new()),
    };
    let mut w = RunWriter::new(&a.out)?;
    let t = Instant::now();
    let r = alm::solve(p, &x0, &y0, &cfg)?;
    w.time("alm", ms(t));
    report_summary("alm", &r);
    let t = Instant::now();
    let cert = certify(p, &r, &cfg)?;
    w.time("certify", ms(t));
    let mut outcome = status_outcome(r.status);
    if matches!(outcome, Outcome::Success) && !cert.pass {
        warn!("independent certification failed: {}", cert.failures.join("; "));
        outcome = Outcome::NotCertified;
    }
    write_report(&mut w, &inst, &d, &r, Some(&cert))?;
    w.write_trajectory(&d, &d.extract_trajectory(&r.x))?;
    w.finish(
        a.instance.config.as_deref(),
        json!({"instance": inst, "alm": cfg, "warm_start": a.warm_start}),
    )?;
    Ok(outcome)
}

fn dp_config(a: &BaselineArgs) -> Result<DpConfig> {
    let mut cfg = DpConfig::default();
    if let Some(s) = a.state_points {
        cfg.grid.state_points = s;
    }
    if let Some(c) = a.control_points {
        cfg.grid.control_points = c;
    }
    if let Ok(v) = std::env::var("HOCP_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow!("HOCP_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("HOCP_THREADS must be a positive integer, got 0");
        }
        cfg.threads = Some(n);
    }
    Ok(cfg)
}

fn require_problem(a: &BaselineArgs) -> Result<Instance> {
    let kind = a.problem.ok_or_else(|| anyhow!("--problem is required for this baseline"))?;
    a.instance.resolve(kind)
}

fn read_prerequisite(path: &Path, what: &str) -> Result<Solution> {
    if !path.exists() {
        bail!("missing prerequisite {what} output {}", path.display());
    }
    Solution::read(path)
}

fn cmd_baseline(a: BaselineArgs) -> Result<Outcome> {
    let out = a.out.clone().unwrap_or_else(|| {
        PathBuf::from(match a.kind {
            BaselineKind::Dp => "dp",
            BaselineKind::Cia => "cia",
            BaselineKind::Relax => "relax",
            BaselineKind::Refine => "refine",
        })
    });
    let cfg = a.solver.load()?;
    match a.kind {
        BaselineKind::Dp => {
            let inst = require_problem(&a)?;
            let dcfg = dp_config(&a)?;
            let d = inst.build()?;
            let mut w = RunWriter::new(&out)?;
            let t = Instant::now();
            let sol = dp_solve(&d, &dcfg)?;
            w.time("dp", ms(t));
            info!(
                "dp: objective {:.6}, terminal penalty {:.3e}, {} off-grid stages",
                sol.objective,
                sol.terminal_penalty,
                sol.off_grid.len()
            );
            let lr = LayoutRef::new(&inst, &d);
            w.write("solution.json", &to_json(&Solution::primal("Dp", sol.x.clone(), sol.objective, lr))?)?;
            w.write(
                "dp.json",
                &to_json(&json!({
                    "objective": sol.objective,
                    "terminal_penalty": sol.terminal_penalty,
                    "value_estimate": sol.value_estimate,
                    "off_grid": sol.off_grid,
                }))?,
            )?;
            let mut table = Vec::new();
            sol.table.write_to(&mut table)?;
            w.write("value_table.bin", &table)?;
            w.write_trajectory(&d, &sol.trajectory)?;
            w.finish(a.instance.config.as_deref(), json!({"instance": inst, "dp": dcfg}))?;
            Ok(Outcome::Success)
        }
        BaselineKind::Relax => {
            let inst = require_problem(&a)?;
            let d = inst.build()?;
            let p = &d.minlp;
            let mut w = RunWriter::new(&out)?;
            let t = Instant::now();
            let rel = relax_then_project(p, &inst.default_start(p.n), &cfg)?;
            w.time("relax", ms(t));
            report_summary("relaxation", &rel.report);
            let lr = LayoutRef::new(&inst, &d);
            write_report(&mut w, &inst, &d, &rel.report, None)?;
            let f = Evaluator::new(p)?.value(&rel.projected)?;
            w.write("projected.json", &to_json(&Solution::primal("Projected", rel.projected, f, lr))?)?;
            w.write_trajectory(&d, &d.decode(&rel.report.x))?;
            w.finish(a.instance.config.as_deref(), json!({"instance": inst, "alm": cfg}))?;
            Ok(status_outcome(rel.report.status))
        }
        BaselineKind::Cia => {
            let relax = read_prerequisite(&a.input, "relaxation")?;
            let inst = relax.layout_ref.instance.clone();
            let d = inst.build()?;
            if relax.x.len() != d.minlp.n {
                bail!("{} does not match its own instance", a.input.display());
            }
            let mut w = RunWriter::new(&out)?;
            let t = Instant::now();
            let traj = d.decode(&relax.x);
            let rounded = cia_sur(&traj, d.spec.sos1)?;
            let mut x = d.simulate_point(&traj.controls, &rounded.binaries);
            if x.iter().any(|v| !v.is_finite()) {
                warn!("simulation with the rounded modes diverged; keeping the relaxed states");
                x = d.encode(&rounded);
            }
            w.time("cia", ms(t));
            let f = Evaluator::new(&d.minlp)?.value(&x).unwrap_or(f64::NAN);
            info!("cia: objective {f:.6}, total variation {}", d.total_variation(&x));
            let lr = LayoutRef::new(&inst, &d);
            w.write("solution.json", &to_json(&Solution::primal("Cia", x.clone(), f, lr))?)?;
            w.write_trajectory(&d, &d.extract_trajectory(&x))?;
            w.finish(None, json!({"instance": inst, "input": a.input}))?;
            Ok(Outcome::Success)
        }
        BaselineKind::Refine => {
            let input = read_prerequisite(&a.warm_start, "solution")?;
            let inst = input.layout_ref.instance.clone();
            let d = inst.build()?;
            if input.x.len() != d.minlp.n {
                bail!("{} does not match its own instance", a.warm_start.display());
            }
            let mut w = RunWriter::new(&out)?;
            let t = Instant::now();
            let r = refine_fixed_integers(&d.minlp, &input.x, &cfg)?;
            w.time("refine", ms(t));
            report_summary("refinement", &r.report);
            if r.kept_input {
                info!("refinement did not improve the input; returning it");
            }
            write_report(&mut w, &inst, &d, &r.report, None)?;
            w.write_trajectory(&d, &d.extract_trajectory(&r.report.x))?;
            w.finish(None, json!({"instance": inst, "alm": cfg, "input": a.warm_start}))?;
            Ok(status_outcome(r.report.status))
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct BenchRow {
    n: usize,
    alm_ms: f64,
    refine_ms: f64,
    status: String,
}

fn bench_one(inst: &Instance, cfg: &AlmConfig, reps: usize) -> Result<BenchRow> {
    let d = inst.build()?;
    let p = &d.minlp;
    let x0 = default_start(inst, p)?;
    let (mut ta, mut tr) = (Vec::new(), Vec::new());
    let mut status = String::new();
    for _ in 0..reps {
        let t = Instant::now();
        let r = alm::solve(p, &x0, &[], cfg)?;
        ta.push(ms(t));
        let t = Instant::now();
        refine_fixed_integers(p, &r.x, cfg)?;
        tr.push(ms(t));
        status = format!("{:?}", r.status);
    }
    Ok(BenchRow {
        n: d.intervals(),
        alm_ms: median(&mut ta),
        refine_ms: median(&mut tr),
        status,
    })
}

fn cmd_bench(a: BenchArgs) -> Result<Outcome> {
    if a.instance.n.is_some() {
        bail!("bench-runtime takes its sizes from --n-list, not --n");
    }
    if a.reps == 0 || a.n_list.is_empty() {
        bail!("--reps and --n-list must be nonempty");
    }
    let base = a.instance.resolve(a.problem)?;
    let cfg = a.solver.load()?;
    let mut w = RunWriter::new(&a.out)?;
    let mut rows = Vec::new();
    let t_all = Instant::now();
    for &n in &a.n_list {
        let inst = match &base {
            Instance::TurboCar(c) => Instance::TurboCar(hocp::problems::TurboCarConfig { n, ..c.clone() }),
            Instance::Fishing(c) => Instance::Fishing(hocp::problems::FishingConfig { n, ..c.clone() }),
        };
        let row = bench_one(&inst, &cfg, a.reps).unwrap_or_else(|e| {
            warn!("N = {n}: {e:#}");
            BenchRow {
                n,
                alm_ms: f64::NAN,
                refine_ms: f64::NAN,
                status: format!("error: {e}").replace([',', '\n'], ";"),
            }
        });
        info!("N = {n}: alm {:.1} ms, refine {:.1} ms, {}", row.alm_ms, row.refine_ms, row.status);
        rows.push(row);
    }
    w.time("total", ms(t_all));
    let mut csv = String::from("N,alm_ms,refine_ms,status\n");
    for r in &rows {
        csv.push_str(&format!("{},{:.3},{:.3},{}\n", r.n, r.alm_ms, r.refine_ms, r.status));
    }
    w.write("runtime.csv", csv.as_bytes())?;
    for p in rows.windows(2) {
        let ra = p[1].alm_ms / p[0].alm_ms;
        let rr = p[1].refine_ms / p[0].refine_ms;
        info!(
            "N {} -> {}: alm ratio {ra:.2}, refine ratio {rr:.2}{}",
            p[0].n,
            p[1].n,
            if rr > ra { " (refinement grows faster)" } else { "" }
        );
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let svg = polylines(
        "median wall time [ms]",
        "N",
        &xs,
        &[
            Series {
                name: "alm",
                values: rows.iter().map(|r| r.alm_ms).collect(),
            },
            Series {
                name: "refine",
                values: rows.iter().map(|r| r.refine_ms).collect(),
            },
        ],
    );
    w.write("runtime.svg", svg.as_bytes())?;
    w.finish(
        a.instance.config.as_deref(),
        json!({"instance": base, "alm": cfg, "n_list": a.n_list, "reps": a.reps}),
    )?;
    Ok(Outcome::Success)
}

fn cmd_check(a: CheckArgs) -> Result<Outcome> {
    let sol = Solution::read(&a.solution)?;
    let d = sol.layout_ref.instance.build()?;
    let p = &d.minlp;
    if sol.x.len() != p.n {
        bail!("x has {} entries, the instance has {} variables", sol.x.len(), p.n);
    }
    let (y, s) = if sol.y.is_empty() && sol.s.is_empty() {
        info!("no multipliers stored; checking with y = 0 and s = proj_C(c(x))");
        let mut c = vec![0.0; p.m()];
        Evaluator::new(p)?.constraints(&sol.x, &mut c)?;
        (vec![0.0; p.m()], p.set_c.project(&c)?)
    } else {
        (sol.y, sol.s)
    };
    let delta = sol.delta_check.unwrap_or(1.0);
    let cert = certify_eps_kkt(p, &sol.x, &y, &s, a.eps_p, a.eps_d, AlmConfig::default().norm, delta)?;
    println!("in_x                 {}", cert.in_x);
    println!("psi                  {:.6e}", cert.psi);
    println!("normal_cone_residual {:.6e}", cert.normal_cone_residual);
    println!("viol_norm            {:.6e}", cert.viol_norm);
    for f in &cert.failures {
        println!("FAIL {f}");
    }
    println!("{}", if cert.pass { "PASS" } else { "FAIL" });
    Ok(if cert.pass { Outcome::Success } else { Outcome::NotCertified })
}
