use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcription::{add_total_variation, discretize_euler, DiscretizedOcp, OcpModel, OcpSpec, TvMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FishingConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub x_init: [f64; 2],
    pub x_ref: [f64; 2],
    pub c1: [f64; 5],
    pub c2: [f64; 5],
    pub tv_mode: TvMode,
    /// Upper bound on both biomasses (lower bound is 0).
    pub state_max: f64,
}

impl Default for FishingConfig {
    fn default() -> Self {
        Self {
            t_final: 12.0,
            n: 50,
            x_init: [0.5, 0.7],
            x_ref: [1.0, 1.0],
            c1: [0.0, 0.2, 0.4, 0.6, 0.8],
            c2: [0.0, 0.1, 0.2, 0.3, 0.4],
            tv_mode: TvMode::None,
            state_max: 3.0,
        }
    }
}

impl FishingConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .x_init
            .iter()
            .chain(&self.x_ref)
            .chain(&self.c1)
            .chain(&self.c2)
            .all(|v| v.is_finite());
        let ok = finite
            && self.t_final > 0.0
            && self.n >= 1
            && self.state_max > 0.0
            && self.x_init.iter().all(|&v| (0.0..=self.state_max).contains(&v));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid fishing configuration {self:?}")))
        }
    }
}

/// Predator-prey dynamics with mode-dependent harvesting rates.
#[derive(Debug, Clone)]
pub struct FishingModel {
    pub c1: [f64; 5],
    pub c2: [f64; 5],
    pub x_ref: [f64; 2],
}

fn dot(a: &[f64; 5], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(p, q)| p * q).sum()
}

impl OcpModel for FishingModel {
    fn rhs(&self, _t: f64, x: &[f64], _u: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = x[0] - x[0] * x[1] - dot(&self.c1, w);
        out[1] = x[0] * x[1] - x[1] - dot(&self.c2, w);
    }

    fn rhs_jacobian(&self, _t: f64, x: &[f64], _u: &[f64], _w: &[f64], jx: &mut [f64], _ju: &mut [f64], jw: &mut [f64]) {
        jx.copy_from_slice(&[1.0 - x[1], -x[0], x[1], x[0] - 1.0]);
        for i in 0..5 {
            jw[i] = -self.c1[i];
            jw[5 + i] = -self.c2[i];
        }
    }

    fn stage_cost(&self, _t: f64, x: &[f64], _u: &[f64], _w: &[f64]) -> f64 {
        let d0 = x[0] - self.x_ref[0];
        let d1 = x[1] - self.x_ref[1];
        d0 * d0 + d1 * d1
    }

    fn stage_cost_gradient(&self, _t: f64, x: &[f64], _u: &[f64], _w: &[f64], gx: &mut [f64], _gu: &mut [f64], gw: &mut [f64]) {
        gx[0] = 2.0 * (x[0] - self.x_ref[0]);
        gx[1] = 2.0 * (x[1] - self.x_ref[1]);
        gw.fill(0.0);
    }
}

pub fn fishing_spec(cfg: &FishingConfig) -> Result<OcpSpec> {
    cfg.validate()?;
    Ok(OcpSpec {
        n_x: 2,
        n_u: 0,
        n_w: 5,
        t_final: cfg.t_final,
        model: Arc::new(FishingModel {
            c1: cfg.c1,
            c2: cfg.c2,
            x_ref: cfg.x_ref,
        }),
        x_init: cfg.x_init.to_vec(),
        terminal: vec![None, None],
        state_lower: vec![0.0, 0.0],
        state_upper: vec![cfg.state_max, cfg.state_max],
        control_lower: Vec::new(),
        control_upper: Vec::new(),
        affine_states: vec![false, false],
        stage_rows: Vec::new(),
        w_init: vec![1.0, 0.0, 0.0, 0.0, 0.0],
        sos1: true,
        state_names: vec!["x1".into(), "x2".into()],
        control_names: Vec::new(),
        binary_names: (1..=5).map(|i| format!("w{i}")).collect(),
    })
}

pub fn build_fishing(cfg: &FishingConfig) -> Result<DiscretizedOcp> {
    let d = discretize_euler(Arc::new(fishing_spec(cfg)?), cfg.n)?;
    add_total_variation(&d, cfg.tv_mode)
}
