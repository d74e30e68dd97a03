use std::sync::Arc;

use hocp::alm::{certify_eps_kkt, AlmConfig, AlmStatus};
use hocp::baselines::*;
use hocp::model::{ClosureObjective, Minlp, NoConstraints};
use hocp::problems::{build_fishing, build_turbo_car, FishingConfig, TurboCarConfig};
use hocp::transcription::{discretize_euler, OcpModel, OcpSpec, Trajectory};
use hocp::{BoxSet, CsrMatrix, MilSet};
use proptest::prelude::*;

struct Integrator;

impl OcpModel for Integrator {
    fn rhs(&self, _t: f64, _x: &[f64], u: &[f64], _w: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn rhs_jacobian(&self, _t: f64, _x: &[f64], _u: &[f64], _w: &[f64], jx: &mut [f64], ju: &mut [f64], _jw: &mut [f64]) {
        jx[0] = 0.0;
        ju[0] = 1.0;
    }
    fn stage_cost(&self, _t: f64, _x: &[f64], u: &[f64], _w: &[f64]) -> f64 {
        u[0] * u[0]
    }
    fn stage_cost_gradient(&self, _t: f64, _x: &[f64], u: &[f64], _w: &[f64], gx: &mut [f64], gu: &mut [f64], _gw: &mut [f64]) {
        gx[0] = 0.0;
        gu[0] = 2.0 * u[0];
    }
}

fn integrator_spec() -> OcpSpec {
    OcpSpec {
        n_x: 1,
        n_u: 1,
        n_w: 0,
        t_final: 1.0,
        model: Arc::new(Integrator),
        x_init: vec![0.0],
        terminal: vec![None],
        state_lower: vec![-1.0],
        state_upper: vec![1.0],
        control_lower: vec![-1.0],
        control_upper: vec![1.0],
        affine_states: vec![true],
        stage_rows: Vec::new(),
        w_init: Vec::new(),
        sos1: false,
        state_names: vec!["x".into()],
        control_names: vec!["u".into()],
        binary_names: Vec::new(),
    }
}

#[test]
fn dp_free_endpoint_integrator_rests() {
    let d = discretize_euler(Arc::new(integrator_spec()), 10).unwrap();
    let sol = dp_solve(&d, &DpConfig::default()).unwrap();
    assert!(sol.trajectory.controls.iter().all(|u| u[0] == 0.0));
    assert_eq!(sol.objective, 0.0);
    assert_eq!(sol.terminal_penalty, 0.0);
}

fn tiny_car() -> TurboCarConfig {
    // unit steps with velocity changes in multiples of 5 keep every reachable
    // state on grids with 31 or 61 points
    TurboCarConfig {
        t_final: 5.0,
        n: 5,
        c_d: 0.0,
        x_target: 30.0,
        ..Default::default()
    }
}

fn brute_force_car(cfg: &TurboCarConfig, weight: f64) -> f64 {
    let dt = cfg.t_final / cfg.n as f64;
    let levels = [0.0, cfg.a_max];
    let brakes = [0.0, cfg.b_max];
    let mut best = f64::INFINITY;
    let n = cfg.n;
    for code in 0..(4usize.pow(n as u32) << n) {
        let (mut x, mut v, mut wp) = (0.0f64, 0.0f64, cfg.w0);
        let mut cost = 0.0;
        let mut ok = true;
        for k in 0..n {
            let c = (code >> (2 * k)) & 3;
            let w = ((code >> (2 * n + k)) & 1) as f64;
            let (a, b) = (levels[c & 1], brakes[c >> 1]);
            let h1 = v - cfg.v_plus <= (cfg.v_max - cfg.v_plus) * w;
            let h2 = cfg.v_minus - v <= (cfg.v_minus + cfg.v_max) * (1.0 - w);
            let h3 = v >= cfg.v_plus - (cfg.v_plus + cfg.v_max) * (1.0 - (w - wp));
            let h4 = v <= cfg.v_minus + (cfg.v_max - cfg.v_minus) * (1.0 - (wp - w));
            if !(h1 && h2 && h3 && h4) {
                ok = false;
                break;
            }
            cost += dt * (a * a + b * b);
            let vn = v + dt * ((1.0 + 2.0 * w) * a - b - cfg.c_d * v * v);
            x += dt * v;
            v = vn;
            wp = w;
            if !(0.0..=cfg.x_target).contains(&x) || v.abs() > cfg.v_max {
                ok = false;
                break;
            }
        }
        if ok {
            let pen = weight * ((x - cfg.x_target).powi(2) + v * v);
            best = best.min(cost + pen);
        }
    }
    best
}

#[test]
fn dp_matches_enumeration_on_tiny_car() {
    let cfg = tiny_car();
    let d = build_turbo_car(&cfg).unwrap();
    let dp_cfg = DpConfig {
        grid: DpGrid {
            state_points: 61,
            control_points: 2,
        },
        ..Default::default()
    };
    let sol = dp_solve(&d, &dp_cfg).unwrap();
    let brute = brute_force_car(&cfg, dp_cfg.terminal_weight);
    // accelerate twice, brake twice
    assert_eq!(brute, 100.0);
    assert!((sol.value_estimate - brute).abs() <= 1e-9 * brute.max(1.0), "{} vs {brute}", sol.value_estimate);
    assert!((sol.objective + sol.terminal_penalty - brute).abs() <= 1e-9 * brute.max(1.0));
}

#[test]
fn dp_is_deterministic_and_finer_grids_do_not_hurt() {
    let cfg = tiny_car();
    let d = build_turbo_car(&cfg).unwrap();
    let run = |points: usize, threads| {
        let c = DpConfig {
            grid: DpGrid {
                state_points: points,
                control_points: 2,
            },
            threads,
            ..Default::default()
        };
        dp_solve(&d, &c).unwrap()
    };
    let a = run(61, Some(1));
    let b = run(61, Some(3));
    assert_eq!(a.x, b.x);
    assert_eq!(a.table, b.table);
    let coarse = run(31, None);
    let total = |s: &DpSolution| s.objective + s.terminal_penalty;
    println!("tiny car: 31 points {:.6}, 61 points {:.6}", total(&coarse), total(&a));
    assert!(total(&a) <= total(&coarse) + 1e-9);
}

#[test]
fn dp_rollout_respects_hysteresis_rows() {
    let d = build_turbo_car(&TurboCarConfig {
        n: 20,
        ..Default::default()
    })
    .unwrap();
    let sol = dp_solve(&d, &DpConfig::default()).unwrap();
    let tr = &sol.trajectory;
    let spec = &d.spec;
    for k in (0..20).filter(|k| !sol.off_grid.contains(k)) {
        let prev = if k == 0 { spec.w_init.clone() } else { tr.binaries[k - 1].clone() };
        assert!(spec.stage_rows_hold(&tr.states[k], &tr.controls[k], &tr.binaries[k], &prev, 1e-9));
    }
    println!("car N=20 rollout: final state {:?}, node-policy stages {:?}", tr.states[20], sol.off_grid);
    assert!(sol.off_grid.len() < 5);
    assert!((tr.states[20][0] - 100.0).abs() < 5.0, "{:?}", tr.states[20]);
}

#[test]
fn value_table_round_trips() {
    let d = discretize_euler(Arc::new(integrator_spec()), 3).unwrap();
    let sol = dp_solve(
        &d,
        &DpConfig {
            grid: DpGrid {
                state_points: 5,
                control_points: 3,
            },
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    sol.table.write_to(&mut buf).unwrap();
    assert_eq!(buf.len(), 8 + 8 * 4 + 8 * 5 + 8 * 4 * 5);
    assert_eq!(ValueTable::read_from(&buf[..]).unwrap(), sol.table);
    assert!(ValueTable::read_from(&buf[1..]).is_err());
}

#[test]
fn dp_rejects_a_total_variation_bound() {
    let d = build_fishing(&FishingConfig {
        n: 10,
        tv_mode: hocp::transcription::TvMode::Bound(3.0),
        ..Default::default()
    })
    .unwrap();
    assert!(dp_solve(&d, &DpConfig::default()).is_err());
}

fn mode_index(w: &[f64]) -> usize {
    w.iter().position(|&v| v == 1.0).unwrap()
}

#[test]
fn sur_keeps_binary_profiles() {
    let alpha: Vec<Vec<f64>> = [0, 2, 2, 4, 1, 0].iter().map(|&i| {
        let mut w = vec![0.0; 5];
        w[i] = 1.0;
        w
    }).collect();
    assert_eq!(sum_up_rounding(&alpha, &[0.5; 6]).unwrap(), alpha);
}

#[test]
fn sur_alternates_on_even_split() {
    let alpha = vec![vec![0.5, 0.5]; 4];
    let w = sum_up_rounding(&alpha, &[1.0; 4]).unwrap();
    let modes: Vec<usize> = w.iter().map(|w| mode_index(w)).collect();
    assert_eq!(modes, [0, 1, 0, 1]);
}

/// Deficit-driven rounding traced by hand-rolled bookkeeping in exact
/// rational steps of tenths.
#[test]
fn sur_counts_on_uneven_split() {
    let alpha = vec![vec![0.3, 0.7]; 10];
    let w = sum_up_rounding(&alpha, &[1.0; 10]).unwrap();
    let second = w.iter().filter(|w| w[1] == 1.0).count();
    assert_eq!(second, 7);
    let mut theta = [0i64; 2];
    for wk in &w {
        theta[0] += 3;
        theta[1] += 7;
        let pick = if theta[1] > theta[0] { 1 } else { 0 };
        assert_eq!(mode_index(wk), pick);
        theta[pick] -= 10;
    }
}

#[test]
fn sur_renormalizes_off_simplex_input() {
    let alpha = vec![vec![0.2, 0.2], vec![1.5, -0.1]];
    let w = sum_up_rounding(&alpha, &[1.0, 1.0]).unwrap();
    assert_eq!(w, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
    assert!(sum_up_rounding(&[vec![0.0, -1.0]], &[1.0]).is_err());
}

#[test]
fn cia_rounds_a_single_free_binary() {
    let relaxed = Trajectory {
        t: vec![0.0, 1.0, 2.0, 3.0, 4.0],
        states: vec![vec![0.0]; 5],
        controls: vec![vec![]; 4],
        binaries: vec![vec![0.25]; 4],
        aux: Vec::new(),
    };
    let out = cia_sur(&relaxed, false).unwrap();
    let ones = out.binaries.iter().filter(|w| w[0] == 1.0).count();
    assert_eq!(ones, 1);
    assert_eq!(out.states, relaxed.states);
}

proptest! {
    #[test]
    fn sur_is_sos1_and_keeps_deficits_bounded(
        raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 1..40),
        dt in 0.01f64..2.0,
    ) {
        let alpha: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum::<f64>() + 1e-9;
                let mut a: Vec<f64> = r.iter().map(|v| (v + 1e-9 / 5.0) / s).collect();
                let fix = 1.0 - a.iter().sum::<f64>();
                a[0] += fix;
                a
            })
            .collect();
        let w = sum_up_rounding(&alpha, &vec![dt; alpha.len()]).unwrap();
        let mut theta = [0.0f64; 5];
        for (a, wk) in alpha.iter().zip(&w) {
            prop_assert_eq!(wk.iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(wk.iter().filter(|&&v| v == 0.0).count(), 4);
            for i in 0..5 {
                theta[i] += (a[i] - wk[i]) * dt;
                prop_assert!(theta[i].abs() <= dt * 4.0 + 1e-9);
            }
        }
    }
}

fn toy_binary() -> Minlp {
    let f = ClosureObjective::new(1, |x| (x[0] - 0.4).powi(2), |x, g| g[0] = 2.0 * (x[0] - 0.4));
    let set = MilSet::new(CsrMatrix::zeros(0, 1), vec![], vec![], vec![0.0], vec![1.0], vec![0]).unwrap();
    Minlp::new(Arc::new(f), Arc::new(NoConstraints { n: 1 }), BoxSet::zeros(0), set)
}

#[test]
fn relaxation_of_nearest_integer_toy() {
    let p = toy_binary();
    let r = relax_then_project(&p, &[1.0], &AlmConfig::default()).unwrap();
    assert_eq!(r.report.status, AlmStatus::EpsKktCritical);
    assert!((r.report.x[0] - 0.4).abs() < 1e-3);
    assert_eq!(r.projected, vec![0.0]);
}

#[test]
fn relaxation_of_continuous_problem_projects_to_itself() {
    let p = toy_binary();
    let cont = p.with_set_x(p.set_x.relaxed());
    let r = relax_then_project(&cont, &[1.0], &AlmConfig::default()).unwrap();
    assert_eq!(r.projected, r.report.x);
}

#[test]
fn fishing_relaxation_keeps_sos1_rows() {
    let d = build_fishing(&FishingConfig {
        n: 30,
        ..Default::default()
    })
    .unwrap();
    let cfg = AlmConfig {
        max_outer: 4,
        ..Default::default()
    };
    let r = relax_then_project(&d.minlp, &vec![1.0; d.minlp.n], &cfg).unwrap();
    let x = &r.report.x;
    for k in 0..30 {
        let s: f64 = (0..5).map(|i| x[d.layout.w(k, i)]).sum();
        assert!((s - 1.0).abs() < 1e-6, "stage {k}: {s}");
    }
    assert!(d.minlp.set_x.is_member(&r.projected, 1e-6));
}

#[test]
fn refinement_of_a_critical_point_is_idempotent() {
    let p = toy_binary();
    let out = refine_fixed_integers(&p, &[0.0], &AlmConfig::default()).unwrap();
    assert_eq!(out.report.x, vec![0.0]);
    assert_eq!(out.report.status, AlmStatus::EpsKktCritical);
}

#[test]
fn refinement_keeps_integers_and_never_increases_the_objective() {
    let d = build_turbo_car(&TurboCarConfig {
        n: 25,
        c_d: 1e-2,
        ..Default::default()
    })
    .unwrap();
    let p = &d.minlp;
    let x0 = p.set_x.project_l1(&vec![0.0; p.n]).unwrap();
    let cfg = AlmConfig::default();
    let alm = hocp::alm::solve(p, &x0, &[], &cfg).unwrap();
    let out = refine_fixed_integers(p, &alm.x, &cfg).unwrap();
    for &j in p.set_x.integers() {
        assert_eq!(out.report.x[j], alm.x[j].round());
    }
    let ev = hocp::model::Evaluator::new(p).unwrap();
    let f_in = ev.value(&alm.x).unwrap();
    println!(
        "car refinement: {f_in:.6} -> {:.6} ({:?}, kept input {})",
        out.report.objective, out.report.status, out.kept_input
    );
    assert!(out.report.objective <= f_in);
    if out.report.status == AlmStatus::EpsKktCritical && !out.kept_input {
        let fixed = p.with_set_x(p.set_x.with_fixed_integers(&alm.x));
        let r = &out.report;
        let cert = certify_eps_kkt(&fixed, &r.x, &r.y, &r.s, 1e-6, 1e-6, cfg.norm, r.delta_check).unwrap();
        assert!(cert.pass, "{:?}", cert.failures);
    }
}
