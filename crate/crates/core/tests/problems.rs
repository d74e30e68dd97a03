use std::time::Instant;

use hocp::problems::{build_fishing, build_turbo_car, hysteresis_rows, turbo_car_spec, FishingConfig, TurboCarConfig};
use hocp::transcription::TvMode;

/// Independent statement of the switching rule with weak thresholds.
fn hysteresis_admits(v: f64, w_prev: f64, w: f64, v_minus: f64, v_plus: f64) -> bool {
    if w == 1.0 {
        v >= v_minus && (w_prev == 1.0 || v >= v_plus)
    } else {
        v <= v_plus && (w_prev == 0.0 || v <= v_minus)
    }
}

fn check_truth_table(grid: &[f64]) {
    let cfg = TurboCarConfig::default();
    let spec = turbo_car_spec(&cfg).unwrap();
    assert_eq!(spec.stage_rows, hysteresis_rows(cfg.v_plus, cfg.v_minus, cfg.v_max));
    for &v in grid {
        for w_prev in [0.0, 1.0] {
            for w in [0.0, 1.0] {
                let rows = spec.stage_rows_hold(&[0.0, v], &[0.0, 0.0], &[w], &[w_prev], 0.0);
                assert_eq!(
                    rows,
                    hysteresis_admits(v, w_prev, w, cfg.v_minus, cfg.v_plus),
                    "v = {v}, w_prev = {w_prev}, w = {w}"
                );
            }
        }
    }
}

#[test]
fn hysteresis_truth_table_on_sample_velocities() {
    check_truth_table(&[0.0, 4.0, 5.0, 7.0, 10.0, 12.0, 25.0]);
}

#[test]
fn hysteresis_truth_table_on_half_grid() {
    let grid: Vec<f64> = (-50..=50).map(|k| k as f64 * 0.5).collect();
    check_truth_table(&grid);
}

#[test]
fn benchmark_sizes() {
    let start = Instant::now();
    let car = build_turbo_car(&TurboCarConfig::default()).unwrap();
    assert_eq!(car.minlp.set_x.integers().len(), 100);
    assert_eq!(car.layout.binary_indices().len(), 100);
    // velocity rows only; position dynamics are affine and live in X
    assert_eq!(car.minlp.m(), 100);

    let plain = build_fishing(&FishingConfig::default()).unwrap();
    assert_eq!(plain.minlp.set_x.integers().len(), 250);
    assert_eq!(plain.minlp.m(), 100);
    for (mode, extra_rows) in [(TvMode::Penalty(1.0), 0), (TvMode::Bound(8.0), 1)] {
        let tv = build_fishing(&FishingConfig {
            tv_mode: mode,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(tv.minlp.set_x.integers().len(), 250);
        assert_eq!(tv.minlp.n - plain.minlp.n, 5 * 49);
        assert_eq!(tv.layout.aux.len(), 245);
        for i in 0..5 {
            assert_eq!(tv.layout.aux.iter().filter(|a| a.binary == i).count(), 49);
        }
        assert_eq!(tv.minlp.set_x.num_rows() - plain.minlp.set_x.num_rows(), 5 * 4 * 49 + extra_rows);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn car_rest_state_is_an_equilibrium() {
    let d = build_turbo_car(&TurboCarConfig {
        n: 10,
        ..Default::default()
    })
    .unwrap();
    let x = d.simulate_point(&vec![vec![0.0, 0.0]; 10], &vec![vec![0.0]; 10]);
    assert!(x.iter().all(|&v| v == 0.0));
    assert!(d.spec.stage_rows_hold(&[0.0, 0.0], &[0.0, 0.0], &[0.0], &[0.0], 0.0));
    // everything but the final position holds
    assert_eq!(d.minlp.set_x.max_violation(&x), 100.0);
}

#[test]
fn alternating_modes_have_full_total_variation() {
    let d = build_fishing(&FishingConfig {
        n: 10,
        tv_mode: TvMode::Bound(9.0),
        ..Default::default()
    })
    .unwrap();
    let w: Vec<Vec<f64>> = (0..10)
        .map(|k| if k % 2 == 0 { vec![1.0, 0.0, 0.0, 0.0, 0.0] } else { vec![0.0, 1.0, 0.0, 0.0, 0.0] })
        .collect();
    let x = d.simulate_point(&vec![vec![]; 10], &w);
    assert_eq!(d.total_variation(&x), 9.0);
    assert!(w.iter().all(|wk| d.spec.sos1_holds(wk)));
}

#[test]
fn configs_use_exact_field_names() {
    let car: TurboCarConfig = serde_json::from_str(r#"{"T": 5.0, "N": 20, "c_d": 0.01}"#).unwrap();
    assert_eq!((car.t_final, car.n, car.c_d, car.v_max), (5.0, 20, 0.01, 25.0));
    assert!(serde_json::from_str::<TurboCarConfig>(r#"{"drag": 0.01}"#).is_err());
    let fish: FishingConfig = serde_json::from_str(r#"{"N": 30, "tv_mode": {"bound": 8.0}}"#).unwrap();
    assert_eq!(fish.tv_mode, TvMode::Bound(8.0));
    assert!(serde_json::from_str::<FishingConfig>(r#"{"N": 30, "U_TV": 8}"#).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let swapped = TurboCarConfig {
        v_plus: 4.0,
        ..Default::default()
    };
    assert!(build_turbo_car(&swapped).is_err());
    let negative_drag = TurboCarConfig {
        c_d: -1.0,
        ..Default::default()
    };
    assert!(build_turbo_car(&negative_drag).is_err());
    let no_intervals = FishingConfig {
        n: 0,
        ..Default::default()
    };
    assert!(build_fishing(&no_intervals).is_err());
}
