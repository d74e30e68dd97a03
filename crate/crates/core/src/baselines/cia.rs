//! Sum-up rounding of relaxed mode profiles.

use crate::error::{Error, Result};
use crate::transcription::Trajectory;

const SIMPLEX_TOL: f64 = 1e-6;
const TIE_TOL: f64 = 1e-12;

/// Rounds `alpha[k][i]` (one simplex point per interval of length `dt[k]`)
/// to one active mode per interval. Stages off the simplex are clamped and
/// renormalized with a warning.
pub fn sum_up_rounding(alpha: &[Vec<f64>], dt: &[f64]) -> Result<Vec<Vec<f64>>> {
    if alpha.len() != dt.len() {
        return Err(Error::Dimension {
            what: "interval lengths",
            expected: alpha.len(),
            found: dt.len(),
        });
    }
    let n_modes = alpha.first().map_or(0, Vec::len);
    if n_modes == 0 && !alpha.is_empty() {
        return Err(Error::InvalidInput("no modes to round".into()));
    }
    let mut theta = vec![0.0; n_modes];
    let mut out = Vec::with_capacity(alpha.len());
    for (k, (a, &h)) in alpha.iter().zip(dt).enumerate() {
        if a.len() != n_modes {
            return Err(Error::Dimension {
                what: "mode profile",
                expected: n_modes,
                found: a.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite mode value at stage {k}")));
        }
        let a = on_simplex(a, k)?;
        for (t, v) in theta.iter_mut().zip(&a) {
            *t += v * h;
        }
        let mut best = 0;
        for i in 1..n_modes {
            if theta[i] > theta[best] + TIE_TOL {
                best = i;
            }
        }
        theta[best] -= h;
        let mut w = vec![0.0; n_modes];
        w[best] = 1.0;
        out.push(w);
    }
    Ok(out)
}

fn on_simplex(a: &[f64], k: usize) -> Result<Vec<f64>> {
    let sum: f64 = a.iter().sum();
    let off = (sum - 1.0).abs() > SIMPLEX_TOL || a.iter().any(|&v| v < -SIMPLEX_TOL || v > 1.0 + SIMPLEX_TOL);
    if !off {
        return Ok(a.to_vec());
    }
    let clamped: Vec<f64> = a.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let s: f64 = clamped.iter().sum();
    if s <= 0.0 {
        return Err(Error::InvalidInput(format!("mode profile at stage {k} has no positive entry")));
    }
    log::warn!("mode profile at stage {k} sums to {sum}; renormalizing");
    Ok(clamped.into_iter().map(|v| v / s).collect())
}

/// Sum-up rounding of the binaries of a relaxed trajectory. A single binary
/// without SOS1 structure is rounded as the pair `(1 − w, w)`.
pub fn cia_sur(relaxed: &Trajectory, sos1: bool) -> Result<Trajectory> {
    let n = relaxed.binaries.len();
    if relaxed.t.len() != n + 1 {
        return Err(Error::Dimension {
            what: "time grid",
            expected: n + 1,
            found: relaxed.t.len(),
        });
    }
    let dt: Vec<f64> = relaxed.t.windows(2).map(|p| p[1] - p[0]).collect();
    let n_w = relaxed.binaries.first().map_or(0, Vec::len);
    let binaries = if sos1 {
        sum_up_rounding(&relaxed.binaries, &dt)?
    } else if n_w == 1 {
        let pairs: Vec<Vec<f64>> = relaxed.binaries.iter().map(|w| vec![1.0 - w[0], w[0]]).collect();
        sum_up_rounding(&pairs, &dt)?.into_iter().map(|p| vec![p[1]]).collect()
    } else {
        return Err(Error::InvalidInput(
            "sum-up rounding needs SOS1 modes or a single binary control".into(),
        ));
    };
    Ok(Trajectory {
        binaries,
        aux: Vec::new(),
        ..relaxed.clone()
    })
}
