//! Building benchmark instances from a config file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use hocp::problems::{build_fishing, build_turbo_car, FishingConfig, TurboCarConfig};
use hocp::transcription::{DiscretizedOcp, TvMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProblemKind {
    TurboCar,
    Fishing,
}

/// Flags shared by every command that builds an instance.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// JSON file with the problem configuration (field names as in the config types).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of intervals.
    #[arg(long)]
    pub n: Option<usize>,
    /// Drag coefficient (turbo car).
    #[arg(long)]
    pub drag: Option<f64>,
    /// Upper bound on the total variation of the modes (fishing).
    #[arg(long, conflicts_with = "tv_penalty")]
    pub tv_bound: Option<f64>,
    /// Weight of the total-variation penalty (fishing).
    #[arg(long)]
    pub tv_penalty: Option<f64>,
}

/// Fully resolved problem description, stored with every solution so that
/// later commands can rebuild the same instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", content = "config", rename_all = "snake_case")]
pub enum Instance {
    TurboCar(TurboCarConfig),
    Fishing(FishingConfig),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

impl InstanceArgs {
    pub fn resolve(&self, kind: ProblemKind) -> Result<Instance> {
        match kind {
            ProblemKind::TurboCar => {
                let mut cfg: TurboCarConfig = match &self.config {
                    Some(p) => read_json(p)?,
                    None => TurboCarConfig::default(),
                };
                if self.tv_bound.is_some() || self.tv_penalty.is_some() {
                    bail!("total variation options apply to the fishing problem only");
                }
                if let Some(n) = self.n {
                    cfg.n = n;
                }
                if let Some(c) = self.drag {
                    cfg.c_d = c;
                }
                Ok(Instance::TurboCar(cfg))
            }
            ProblemKind::Fishing => {
                let mut cfg: FishingConfig = match &self.config {
                    Some(p) => read_json(p)?,
                    None => FishingConfig::default(),
                };
                if self.drag.is_some() {
                    bail!("--drag applies to the turbo car only");
                }
                if let Some(n) = self.n {
                    cfg.n = n;
                }
                if let Some(u) = self.tv_bound {
                    cfg.tv_mode = TvMode::Bound(u);
                }
                if let Some(a) = self.tv_penalty {
                    cfg.tv_mode = TvMode::Penalty(a);
                }
                Ok(Instance::Fishing(cfg))
            }
        }
    }
}

impl Instance {
    pub fn build(&self) -> Result<DiscretizedOcp> {
        Ok(match self {
            Instance::TurboCar(c) => build_turbo_car(c)?,
            Instance::Fishing(c) => build_fishing(c)?,
        })
    }

    /// Default primal start before projection onto `X`: rest for the car,
    /// all ones for fishing.
    pub fn default_start(&self, n: usize) -> Vec<f64> {
        match self {
            Instance::TurboCar(_) => vec![0.0; n],
            Instance::Fishing(_) => vec![1.0; n],
        }
    }
}
