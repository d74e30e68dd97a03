use std::sync::Arc;

use hocp::alm::{
    al_gradient, al_value, certify_eps_kkt, multiplier_maps, solve, AlmConfig, AlmStatus, MEMBER_TOL,
};
use hocp::model::{ClosureConstraints, ClosureObjective, Evaluator, Minlp, NoConstraints};
use hocp::problems::{build_turbo_car, TurboCarConfig};
use hocp::{BallNorm, BoxSet, CsrMatrix, MilSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `min f s.t. c(x) ∈ C` over `R^n` with `c(x) = x`.
fn identity_constraint(f: ClosureObjective, n: usize, set_c: BoxSet) -> Minlp {
    let c = ClosureConstraints::new(n, n, |x, out| out.copy_from_slice(x), move |_, j| {
        j.fill(0.0);
        for i in 0..n {
            j[i * n + i] = 1.0;
        }
    });
    Minlp::new(Arc::new(f), Arc::new(c), set_c, MilSet::free(n))
}

fn zero_objective(n: usize) -> ClosureObjective {
    ClosureObjective::new(n, |_| 0.0, |_, g| g.fill(0.0))
}

#[test]
fn al_value_examples() {
    let f = ClosureObjective::new(1, |x| 3.0 * x[0], |_, g| g[0] = 3.0);
    let p = identity_constraint(f, 1, BoxSet::new(vec![-1.0], vec![1.0]).unwrap());
    assert_eq!(al_value(&p, &[0.5], &[0.0], 0.1).unwrap(), 1.5);
    let p = identity_constraint(zero_objective(1), 1, BoxSet::zeros(1));
    assert_eq!(al_value(&p, &[2.0], &[0.0], 1.0).unwrap(), 2.0);
    assert!(al_value(&p, &[2.0], &[0.0], 0.0).is_err());
}

#[test]
fn multiplier_map_examples() {
    let p = identity_constraint(zero_objective(1), 1, BoxSet::new(vec![-1.0], vec![1.0]).unwrap());
    assert_eq!(multiplier_maps(&p, &[0.3], &[0.0], 0.5).unwrap(), (vec![0.3], vec![0.0]));
    let p = identity_constraint(zero_objective(1), 1, BoxSet::zeros(1));
    assert_eq!(multiplier_maps(&p, &[2.0], &[0.0], 1.0).unwrap(), (vec![0.0], vec![2.0]));
    let p = identity_constraint(zero_objective(1), 1, BoxSet::new(vec![f64::NEG_INFINITY], vec![0.0]).unwrap());
    assert_eq!(multiplier_maps(&p, &[-1.0], &[3.0], 1.0).unwrap(), (vec![0.0], vec![2.0]));
}

#[test]
fn al_gradient_examples() {
    let f = ClosureObjective::new(2, |x| x[0] * x[0] + x[1], |x, g| {
        g[0] = 2.0 * x[0];
        g[1] = 1.0;
    });
    let p = identity_constraint(f, 2, BoxSet::new(vec![-5.0; 2], vec![5.0; 2]).unwrap());
    assert_eq!(al_gradient(&p, &[1.5, 2.0], &[0.0, 0.0], 0.1).unwrap(), vec![3.0, 1.0]);
    let p = identity_constraint(zero_objective(1), 1, BoxSet::zeros(1));
    assert_eq!(al_gradient(&p, &[4.0], &[0.0], 2.0).unwrap(), vec![2.0]);
}

/// Three variables, three constraints of different kinds.
fn mixed_problem() -> Minlp {
    let f = ClosureObjective::new(3, |x| x[0] * x[0] + x[1].sin() + x[0] * x[2], |x, g| {
        g[0] = 2.0 * x[0] + x[2];
        g[1] = x[1].cos();
        g[2] = x[0];
    });
    let c = ClosureConstraints::new(
        3,
        3,
        |x, out| {
            out[0] = x[0] * x[1] - x[2];
            out[1] = x[1] * x[1] + x[2];
            out[2] = (0.5 * x[0]).exp();
        },
        |x, j| {
            j.copy_from_slice(&[x[1], x[0], -1.0, 0.0, 2.0 * x[1], 1.0, 0.5 * (0.5 * x[0]).exp(), 0.0, 0.0]);
        },
    );
    let set_c = BoxSet::new(vec![-1.0, 0.5, f64::NEG_INFINITY], vec![1.0, 0.5, 1.0]).unwrap();
    Minlp::new(Arc::new(f), Arc::new(c), set_c, MilSet::free(3))
}

#[test]
fn al_gradient_matches_finite_differences() {
    let p = mixed_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mu = rng.gen_range(0.05..2.0);
        let g = al_gradient(&p, &x, &y, mu).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (al_value(&p, &xp, &y, mu).unwrap() - al_value(&p, &xm, &y, mu).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{fd} vs {}", g[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn al_gradient_is_the_lagrangian_gradient_at_the_multiplier_map(
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y_hat in prop::collection::vec(-3.0f64..3.0, 3),
        mu in 0.01f64..5.0,
    ) {
        let p = mixed_problem();
        let g = al_gradient(&p, &x, &y_hat, mu).unwrap();
        let (s, y) = multiplier_maps(&p, &x, &y_hat, mu).unwrap();
        let ev = Evaluator::new(&p).unwrap();
        let gl = hocp::alm::lagrangian_gradient(&ev, &x, &y).unwrap();
        for (a, b) in g.iter().zip(&gl) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        prop_assert!(p.set_c.contains(&s, 0.0));
        prop_assert!(p.set_c.normal_cone_residual(&s, &y, 1e-9).unwrap() <= 1e-9);
    }
}

#[test]
fn unconstrained_problem_needs_one_outer_iteration() {
    let f = ClosureObjective::new(1, |x| (x[0] - 3.0).powi(2), |x, g| g[0] = 2.0 * (x[0] - 3.0));
    let set = MilSet::new(CsrMatrix::zeros(0, 1), vec![], vec![], vec![0.0], vec![10.0], vec![0]).unwrap();
    let p = Minlp::new(Arc::new(f), Arc::new(NoConstraints { n: 1 }), BoxSet::zeros(0), set);
    let r = solve(&p, &[0.0], &[], &AlmConfig::default()).unwrap();
    assert_eq!(r.status, AlmStatus::EpsKktCritical);
    assert_eq!(r.outer_iters, 1);
    assert_eq!(r.x, vec![3.0]);
}

#[test]
fn equality_constrained_square_recovers_the_multiplier() {
    // min x² s.t. x − 1 = 0: KKT gives 2x + y = 0 at x = 1
    let f = ClosureObjective::new(1, |x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0]);
    let c = ClosureConstraints::new(1, 1, |x, out| out[0] = x[0] - 1.0, |_, j| j[0] = 1.0);
    let p = Minlp::new(Arc::new(f), Arc::new(c), BoxSet::zeros(1), MilSet::free(1));
    let r = solve(&p, &[0.0], &[], &AlmConfig::default()).unwrap();
    assert_eq!(r.status, AlmStatus::EpsKktCritical);
    assert!((r.x[0] - 1.0).abs() <= 1e-6);
    assert!((r.y[0] + 2.0).abs() <= 1e-5, "y = {}", r.y[0]);
}

#[test]
fn rejects_a_start_outside_x() {
    let set = MilSet::new(CsrMatrix::zeros(0, 1), vec![], vec![], vec![0.0], vec![1.0], vec![0]).unwrap();
    let f = ClosureObjective::new(1, |x| x[0], |_, g| g[0] = 1.0);
    let p = Minlp::new(Arc::new(f), Arc::new(NoConstraints { n: 1 }), BoxSet::zeros(0), set);
    assert!(solve(&p, &[0.5], &[], &AlmConfig::default()).is_err());
    let bad = AlmConfig {
        kappa_mu: 1.0,
        ..Default::default()
    };
    assert!(solve(&p, &[0.0], &[], &bad).is_err());
}

#[test]
fn small_car_certifies_and_obeys_the_schedules() {
    let d = build_turbo_car(&TurboCarConfig {
        n: 25,
        c_d: 1e-2,
        ..Default::default()
    })
    .unwrap();
    let p = &d.minlp;
    let cfg = AlmConfig::default();
    let x0 = p.set_x.project_l1(&vec![0.0; p.n]).unwrap();
    let r = solve(p, &x0, &[], &cfg).unwrap();
    assert_eq!(r.status, AlmStatus::EpsKktCritical, "{:?}", r.failure);
    assert!(r.viol_norm <= 1e-6);
    assert!(p.set_x.is_member(&r.x, 1e-9));

    for w in r.trace.windows(2) {
        assert!(w[1].mu <= w[0].mu);
        assert!(w[1].eps <= w[0].eps);
    }
    assert!(r.trace.iter().all(|t| t.eps >= cfg.eps_d));
    for i in 0..p.m() {
        assert_eq!(r.y[i], r.y_hat[i] + r.v[i] / r.mu_final);
    }

    let cert = certify_eps_kkt(p, &r.x, &r.y, &r.s, 1e-6, 1e-6, BallNorm::Linf, r.delta_check).unwrap();
    assert!(cert.pass, "{:?}", cert.failures);

    // restarting from the certified pair stops at once
    let again = solve(p, &r.x, &r.y, &cfg.resume(&r)).unwrap();
    assert_eq!(again.status, AlmStatus::EpsKktCritical);
    assert_eq!(again.outer_iters, 1);
    let moved = r.x.iter().zip(&again.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(moved <= 1e-6, "moved {moved}");

    // a wrong multiplier on an equality row is no longer critical
    let mut y = r.y.clone();
    y[3] += 1.0;
    let cert = certify_eps_kkt(p, &r.x, &y, &r.s, 1e-6, 1e-6, BallNorm::Linf, r.delta_check).unwrap();
    assert!(!cert.pass);
    assert!(cert.psi > 1e-6);

    let mut off = r.x.clone();
    off[d.layout.w(4, 0)] = 0.5;
    let cert = certify_eps_kkt(p, &off, &r.y, &r.s, 1e-6, 1e-6, BallNorm::Linf, r.delta_check).unwrap();
    assert!(!cert.in_x && !cert.pass);
    assert!(cert.failures.iter().any(|f| f == "not in X"));
    assert!(!p.set_x.is_member(&off, MEMBER_TOL));
}
