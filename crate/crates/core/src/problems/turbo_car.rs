use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcription::{discretize_euler, DiscretizedOcp, OcpModel, OcpSpec, StageRow, StageVar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurboCarConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_max: f64,
    pub c_d: f64,
    pub a_max: f64,
    pub b_max: f64,
    pub x_target: f64,
    /// Turbo state before the first interval.
    pub w0: f64,
    pub weight_a: f64,
    pub weight_b: f64,
}

impl Default for TurboCarConfig {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            n: 100,
            v_plus: 10.0,
            v_minus: 5.0,
            v_max: 25.0,
            c_d: 1e-3,
            a_max: 5.0,
            b_max: 5.0,
            x_target: 100.0,
            w0: 0.0,
            weight_a: 1.0,
            weight_b: 1.0,
        }
    }
}

impl TurboCarConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.v_minus
            && self.v_minus < self.v_plus
            && self.v_plus < self.v_max
            && self.c_d >= 0.0
            && self.a_max > 0.0
            && self.b_max > 0.0
            && self.x_target > 0.0
            && self.t_final > 0.0
            && self.n >= 1
            && (self.w0 == 0.0 || self.w0 == 1.0)
            && self.weight_a >= 0.0
            && self.weight_b >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid turbo car configuration {self:?}")))
        }
    }
}

/// States `(position, velocity)`, controls `(a, b)`, binary `w` (turbo).
#[derive(Debug, Clone)]
pub struct TurboCarModel {
    pub c_d: f64,
    pub weight_a: f64,
    pub weight_b: f64,
}

impl OcpModel for TurboCarModel {
    fn rhs(&self, _t: f64, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = (1.0 + 2.0 * w[0]) * u[0] - u[1] - self.c_d * x[1] * x[1];
    }

    fn rhs_jacobian(&self, _t: f64, x: &[f64], u: &[f64], w: &[f64], jx: &mut [f64], ju: &mut [f64], jw: &mut [f64]) {
        jx.copy_from_slice(&[0.0, 1.0, 0.0, -2.0 * self.c_d * x[1]]);
        ju.copy_from_slice(&[0.0, 0.0, 1.0 + 2.0 * w[0], -1.0]);
        jw.copy_from_slice(&[0.0, 2.0 * u[0]]);
    }

    fn stage_cost(&self, _t: f64, _x: &[f64], u: &[f64], _w: &[f64]) -> f64 {
        self.weight_a * u[0] * u[0] + self.weight_b * u[1] * u[1]
    }

    fn stage_cost_gradient(&self, _t: f64, _x: &[f64], u: &[f64], _w: &[f64], gx: &mut [f64], gu: &mut [f64], gw: &mut [f64]) {
        gx.fill(0.0);
        gw.fill(0.0);
        gu[0] = 2.0 * self.weight_a * u[0];
        gu[1] = 2.0 * self.weight_b * u[1];
    }
}

/// Big-M rows tying the turbo mode `w_k` to the velocity `v_k` and the
/// previous mode: off forces `v <= v⁺`, on forces `v >= v⁻`, switching on
/// needs `v >= v⁺` and switching off needs `v <= v⁻`.
pub fn hysteresis_rows(v_plus: f64, v_minus: f64, v_max: f64) -> Vec<StageRow> {
    let v = StageVar::State(1);
    let w = StageVar::Binary(0);
    let wp = StageVar::PrevBinary(0);
    let ninf = f64::NEG_INFINITY;
    vec![
        StageRow {
            terms: vec![(v, 1.0), (w, -(v_max - v_plus))],
            lower: ninf,
            upper: v_plus,
        },
        StageRow {
            terms: vec![(v, -1.0), (w, v_minus + v_max)],
            lower: ninf,
            upper: v_max,
        },
        StageRow {
            terms: vec![(v, -1.0), (w, v_plus + v_max), (wp, -(v_plus + v_max))],
            lower: ninf,
            upper: v_max,
        },
        StageRow {
            terms: vec![(v, 1.0), (wp, v_max - v_minus), (w, -(v_max - v_minus))],
            lower: ninf,
            upper: v_max,
        },
    ]
}

pub fn turbo_car_spec(cfg: &TurboCarConfig) -> Result<OcpSpec> {
    cfg.validate()?;
    Ok(OcpSpec {
        n_x: 2,
        n_u: 2,
        n_w: 1,
        t_final: cfg.t_final,
        model: Arc::new(TurboCarModel {
            c_d: cfg.c_d,
            weight_a: cfg.weight_a,
            weight_b: cfg.weight_b,
        }),
        x_init: vec![0.0, 0.0],
        terminal: vec![Some(cfg.x_target), Some(0.0)],
        state_lower: vec![0.0, -cfg.v_max],
        state_upper: vec![cfg.x_target, cfg.v_max],
        control_lower: vec![0.0, 0.0],
        control_upper: vec![cfg.a_max, cfg.b_max],
        affine_states: vec![true, false],
        stage_rows: hysteresis_rows(cfg.v_plus, cfg.v_minus, cfg.v_max),
        w_init: vec![cfg.w0],
        sos1: false,
        state_names: vec!["x".into(), "v".into()],
        control_names: vec!["a".into(), "b".into()],
        binary_names: vec!["w".into()],
    })
}

pub fn build_turbo_car(cfg: &TurboCarConfig) -> Result<DiscretizedOcp> {
    discretize_euler(Arc::new(turbo_car_spec(cfg)?), cfg.n)
}
