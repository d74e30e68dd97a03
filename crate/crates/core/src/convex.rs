//! The convex constraint set `C`, restricted to products of closed intervals.
//!
//! Equality constraints are degenerate intervals (`lower == upper`); one-sided
//! inequalities use an infinite bound on the free side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default active-set tolerance for [`BoxSet::normal_cone_residual`].
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                what: "box bounds",
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("empty interval [{l}, {u}] at component {i}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The singleton `{0}^m`, used for equality-constrained dynamics.
    pub fn zeros(m: usize) -> Self {
        Self {
            lower: vec![0.0; m],
            upper: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                what: "convex set argument",
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        Ok(v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &u))| x.max(l).min(u))
            .collect())
    }

    /// In-place projection; `v` must have the set's dimension.
    pub fn project_into(&self, v: &mut [f64]) {
        for (x, (&l, &u)) in v.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.max(l).min(u);
        }
    }

    /// Squared Euclidean distance to the set.
    pub fn dist2(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &u))| {
                let d = x - x.max(l).min(u);
                d * d
            })
            .sum())
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.dim()
            && v
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    /// Largest componentwise violation of `y ∈ N_C(z)`.
    ///
    /// A component active only at its lower bound needs `y_i ≤ 0`, only at its
    /// upper bound `y_i ≥ 0`, at both (equality) nothing, and an inactive
    /// component needs `y_i = 0`. Fails if `z` is outside the set by more than
    /// `tol`, since the normal cone is then empty.
    pub fn normal_cone_residual(&self, z: &[f64], y: &[f64], tol: f64) -> Result<f64> {
        self.check_dim(z)?;
        self.check_dim(y)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            let (l, u, zi, yi) = (self.lower[i], self.upper[i], z[i], y[i]);
            if zi < l - tol || zi > u + tol || zi.is_nan() {
                return Err(Error::OutsideSet {
                    index: i,
                    value: zi,
                    lower: l,
                    upper: u,
                });
            }
            let at_lower = zi <= l + tol;
            let at_upper = zi >= u - tol;
            let viol = match (at_lower, at_upper) {
                (true, true) => 0.0,
                (true, false) => yi.max(0.0),
                (false, true) => (-yi).max(0.0),
                (false, false) => yi.abs(),
            };
            worst = worst.max(viol);
        }
        Ok(worst)
    }
}
