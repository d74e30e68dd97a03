use hocp::inner::{minimize, InnerStatus, SmoothFn, TrConfig};
use hocp::{BallNorm, CsrMatrix, MilSet, Result};
use proptest::prelude::*;

/// `½ Σ d_i (x_i − a_i)² + ½ ρ (Σ x_i − s)² + bᵀx`.
#[derive(Debug, Clone)]
struct Quadratic {
    d: Vec<f64>,
    a: Vec<f64>,
    rho: f64,
    s: f64,
    b: Vec<f64>,
    curvature: bool,
}

impl Quadratic {
    fn diagonal(d: Vec<f64>, a: Vec<f64>) -> Self {
        let n = d.len();
        Self {
            d,
            a,
            rho: 0.0,
            s: 0.0,
            b: vec![0.0; n],
            curvature: false,
        }
    }

    fn linear(b: Vec<f64>) -> Self {
        let n = b.len();
        Self {
            b,
            ..Self::diagonal(vec![0.0; n], vec![0.0; n])
        }
    }
}

impl SmoothFn for Quadratic {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let sum: f64 = x.iter().sum();
        let mut v = 0.5 * self.rho * (sum - self.s).powi(2);
        for i in 0..x.len() {
            v += 0.5 * self.d[i] * (x[i] - self.a[i]).powi(2) + self.b[i] * x[i];
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        let sum: f64 = x.iter().sum();
        for i in 0..x.len() {
            grad[i] = self.d[i] * (x[i] - self.a[i]) + self.rho * (sum - self.s) + self.b[i];
        }
        Ok(())
    }

    fn model_hessian(&self, x: &[f64]) -> Result<Option<CsrMatrix>> {
        if !self.curvature {
            return Ok(None);
        }
        let n = x.len();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, self.d[i]));
            for j in 0..n {
                t.push((i, j, self.rho));
            }
        }
        Ok(Some(CsrMatrix::from_triplets(n, n, &t)?))
    }
}

fn boxed(lower: Vec<f64>, upper: Vec<f64>, integers: Vec<usize>) -> MilSet {
    let n = lower.len();
    MilSet::new(CsrMatrix::zeros(0, n), vec![], vec![], lower, upper, integers).unwrap()
}

#[test]
fn integer_quadratic_finds_the_nearest_integer() {
    let phi = Quadratic::diagonal(vec![2.0], vec![3.0]);
    let set = boxed(vec![0.0], vec![10.0], vec![0]);
    let r = minimize(&phi, &set, &[0.0], 1e-6, BallNorm::Linf, &TrConfig::default()).unwrap();
    // enumerate 0..=10
    let best = (0..=10).min_by(|&a, &b| phi.value(&[a as f64]).unwrap().total_cmp(&phi.value(&[b as f64]).unwrap())).unwrap();
    assert_eq!(r.status, InnerStatus::Certified);
    assert_eq!(r.x, vec![best as f64]);
    assert_eq!(r.psi, 0.0);
}

#[test]
fn linear_objective_on_a_box_reaches_the_optimal_vertex() {
    let phi = Quadratic::linear(vec![1.0, -1.0]);
    let set = boxed(vec![0.0; 2], vec![1.0; 2], vec![]);
    let r = minimize(&phi, &set, &[0.5, 0.5], 1e-6, BallNorm::Linf, &TrConfig::default()).unwrap();
    assert_eq!(r.status, InnerStatus::Certified);
    assert_eq!(r.x, vec![0.0, 1.0]);
    assert_eq!(r.accepted, 1);
    assert_eq!(r.psi, 0.0);
}

#[test]
fn critical_start_is_returned_after_one_measure() {
    let phi = Quadratic::diagonal(vec![1.0, 1.0], vec![0.25, 2.0]);
    let set = boxed(vec![-1.0, 0.0], vec![1.0, 5.0], vec![1]);
    let r = minimize(&phi, &set, &[0.25, 2.0], 1e-6, BallNorm::Linf, &TrConfig::default()).unwrap();
    assert_eq!(r.status, InnerStatus::Certified);
    assert_eq!(r.x, vec![0.25, 2.0]);
    assert_eq!(r.milp_solves, 1);
    assert_eq!(r.accepted, 0);
}

#[test]
fn rejects_nonpositive_tolerance_and_bad_radius_settings() {
    let phi = Quadratic::linear(vec![1.0]);
    let set = boxed(vec![0.0], vec![1.0], vec![]);
    assert!(minimize(&phi, &set, &[0.5], 0.0, BallNorm::Linf, &TrConfig::default()).is_err());
    let bad = TrConfig {
        eta_accept: 0.9,
        eta_expand: 0.5,
        ..Default::default()
    };
    assert!(minimize(&phi, &set, &[0.5], 1e-6, BallNorm::Linf, &bad).is_err());
}

/// Projected gradient with step `1/L` as an independent reference.
fn projected_gradient(phi: &Quadratic, lower: &[f64], upper: &[f64], lipschitz: f64) -> f64 {
    let n = lower.len();
    let mut x: Vec<f64> = (0..n).map(|i| 0.5 * (lower[i] + upper[i])).collect();
    let mut g = vec![0.0; n];
    for _ in 0..20000 {
        phi.gradient(&x, &mut g).unwrap();
        for i in 0..n {
            x[i] = (x[i] - g[i] / lipschitz).clamp(lower[i], upper[i]);
        }
    }
    phi.value(&x).unwrap()
}

#[test]
fn continuous_convex_problem_matches_projected_gradient() {
    let lower = vec![-1.0, -1.0, 0.0, -2.0];
    let upper = vec![1.0, 0.5, 3.0, 2.0];
    for curvature in [false, true] {
        let phi = Quadratic {
            d: vec![1.0, 3.0, 0.5, 2.0],
            a: vec![2.0, -0.2, 1.0, -3.0],
            rho: 0.7,
            s: 1.0,
            b: vec![0.1, 0.0, -0.3, 0.2],
            curvature,
        };
        let reference = projected_gradient(&phi, &lower, &upper, 3.0 + 4.0 * 0.7);
        let set = boxed(lower.clone(), upper.clone(), vec![]);
        let r = minimize(&phi, &set, &[0.0, 0.0, 0.0, 0.0], 1e-8, BallNorm::Linf, &TrConfig::default()).unwrap();
        assert_eq!(r.status, InnerStatus::Certified);
        assert!((r.value - reference).abs() <= 1e-4, "{} vs {reference}", r.value);
    }
}

fn random_problem() -> impl Strategy<Value = (Quadratic, MilSet)> {
    (
        prop::collection::vec(0.0f64..3.0, 4),
        prop::collection::vec(-3.0f64..3.0, 4),
        0.0f64..2.0,
        prop::collection::vec(-1.0f64..1.0, 4),
        any::<bool>(),
        prop::collection::vec(-2i32..3, 4),
    )
        .prop_map(|(d, a, rho, b, curvature, row)| {
            let phi = Quadratic {
                d,
                a,
                rho,
                s: 0.5,
                b,
                curvature,
            };
            // two reals in [-2, 2], two integers in {-2, ..., 2}, one row
            let rows = CsrMatrix::from_dense(&[row.iter().map(|&v| v as f64).collect()], 4).unwrap();
            let set = MilSet::new(rows, vec![-3.0], vec![3.0], vec![-2.0; 4], vec![2.0; 4], vec![2, 3]).unwrap();
            (phi, set)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn descent_membership_and_reproducible_certificate((phi, set) in random_problem()) {
        let start = vec![0.0; 4];
        let r = minimize(&phi, &set, &start, 1e-6, BallNorm::Linf, &TrConfig::default()).unwrap();
        prop_assert!(set.is_member(&r.x, 1e-9));
        prop_assert!(r.value <= phi.value(&start).unwrap());
        prop_assert_eq!(r.value, phi.value(&r.x).unwrap());
        if r.status == InnerStatus::Certified {
            let mut g = vec![0.0; 4];
            phi.gradient(&r.x, &mut g).unwrap();
            let fresh = set.criticality_measure(&g, &r.x, r.delta_check, BallNorm::Linf).unwrap();
            prop_assert!((fresh.psi - r.psi).abs() <= 1e-9, "{} vs {}", fresh.psi, r.psi);
            prop_assert!(r.psi <= 1e-6);
        }
    }
}

