//! Problem template `min f(x)  s.t.  x ∈ X,  c(x) ∈ C`.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::BoxSet;
use crate::error::{EvalError, Result};
use crate::milset::MilSet;
use crate::sparse::CsrMatrix;

/// Smooth objective with gradient. Implementations must be pure.
pub trait ObjectiveFn: Send + Sync {
    fn num_vars(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, EvalError>;
    /// Writes `∇f(x)` into `grad` (length `num_vars`).
    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<(), EvalError>;
    /// Optional Hessian as `(row, col, value)` triplets of both triangles
    /// (repeats summed). Used only as a step model, never for certification.
    fn hessian(&self, _x: &[f64]) -> Result<Option<Vec<(usize, usize, f64)>>, EvalError> {
        Ok(None)
    }
}

/// Smooth constraint map `c: R^n → R^m` with a fixed sparse Jacobian pattern.
pub trait ConstraintFn: Send + Sync {
    fn num_vars(&self) -> usize;
    fn dim(&self) -> usize;
    /// `(row, col)` positions of the Jacobian entries; repeated positions are summed.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;
    /// Jacobian values in the order of [`ConstraintFn::jacobian_structure`].
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) -> Result<(), EvalError>;
}

/// `c` for problems without nonlinear constraints (`m = 0`).
#[derive(Debug, Clone)]
pub struct NoConstraints {
    pub n: usize,
}

impl ConstraintFn for NoConstraints {
    fn num_vars(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        0
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }
    fn eval(&self, _x: &[f64], _out: &mut [f64]) -> Result<(), EvalError> {
        Ok(())
    }
    fn jacobian_values(&self, _x: &[f64], _values: &mut [f64]) -> Result<(), EvalError> {
        Ok(())
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Objective given by two closures.
pub struct ClosureObjective {
    n: usize,
    f: Box<ValueFn>,
    g: Box<VecFn>,
}

impl ClosureObjective {
    pub fn new(
        n: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Box::new(f),
            g: Box::new(g),
        }
    }
}

impl ObjectiveFn for ClosureObjective {
    fn num_vars(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok((self.f)(x))
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<(), EvalError> {
        (self.g)(x, grad);
        Ok(())
    }
}

/// Constraint map given by closures, with a dense `m × n` Jacobian written
/// row-major.
pub struct ClosureConstraints {
    n: usize,
    m: usize,
    c: Box<VecFn>,
    jac: Box<VecFn>,
}

impl ClosureConstraints {
    pub fn new(
        n: usize,
        m: usize,
        c: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        jac: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            c: Box::new(c),
            jac: Box::new(jac),
        }
    }
}

impl ConstraintFn for ClosureConstraints {
    fn num_vars(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.m
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        (0..self.m).flat_map(|i| (0..self.n).map(move |j| (i, j))).collect()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.c)(x, out);
        Ok(())
    }
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) -> Result<(), EvalError> {
        (self.jac)(x, values);
        Ok(())
    }
}

#[derive(Clone)]
pub struct Minlp {
    pub n: usize,
    pub objective: Arc<dyn ObjectiveFn>,
    pub constraints: Arc<dyn ConstraintFn>,
    pub set_c: BoxSet,
    pub set_x: MilSet,
    pub names: Option<Vec<String>>,
}

impl fmt::Debug for Minlp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Minlp")
            .field("n", &self.n)
            .field("m", &self.set_c.dim())
            .field("integers", &self.set_x.integers().len())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Dimension,
    UnboundedInteger,
    /// Jacobian pattern entry outside the declared shape.
    Structure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub n_f: u64,
    pub n_grad: u64,
    pub n_c: u64,
    pub n_jac: u64,
}

impl Minlp {
    pub fn new(
        objective: Arc<dyn ObjectiveFn>,
        constraints: Arc<dyn ConstraintFn>,
        set_c: BoxSet,
        set_x: MilSet,
    ) -> Self {
        Self {
            n: set_x.dim(),
            objective,
            constraints,
            set_c,
            set_x,
            names: None,
        }
    }

    pub fn m(&self) -> usize {
        self.set_c.dim()
    }

    /// Every dimensional or boundedness violation; empty iff the problem is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut dim = |what: &str, expected: usize, found: usize| {
            if expected != found {
                out.push(Violation {
                    kind: ViolationKind::Dimension,
                    message: format!("{what}: expected {expected}, found {found}"),
                });
            }
        };
        let m = self.set_c.dim();
        dim("objective variable count", self.n, self.objective.num_vars());
        dim("constraint variable count (Jacobian columns)", self.n, self.constraints.num_vars());
        dim("constraint count (Jacobian rows) vs dimension of C", m, self.constraints.dim());
        dim("dimension of X", self.n, self.set_x.dim());
        if let Some(names) = &self.names {
            dim("variable names", self.n, names.len());
        }
        let (rows, cols) = (self.constraints.dim(), self.constraints.num_vars());
        if let Some(&(i, j)) = self.constraints.jacobian_structure().iter().find(|&&(i, j)| i >= rows || j >= cols) {
            out.push(Violation {
                kind: ViolationKind::Structure,
                message: format!("Jacobian entry ({i}, {j}) lies outside the declared {rows}x{cols} shape"),
            });
        }
        if self.set_x.dim() == self.n {
            for &j in self.set_x.integers() {
                let (l, u) = (self.set_x.lower()[j], self.set_x.upper()[j]);
                if !l.is_finite() || !u.is_finite() {
                    out.push(Violation {
                        kind: ViolationKind::UnboundedInteger,
                        message: format!(
                            "integer variable {j} has bounds [{l}, {u}]; integer variables must lie in a bounded set"
                        ),
                    });
                }
            }
        }
        out
    }

    /// Returns the problem unchanged if valid, else an error listing the violations.
    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            let msgs: Vec<String> = v.iter().map(|v| v.message.clone()).collect();
            Err(crate::Error::InvalidInput(msgs.join("; ")))
        }
    }

    /// Copy with a different MIL set (same functions).
    pub fn with_set_x(&self, set_x: MilSet) -> Self {
        Self {
            set_x,
            ..self.clone()
        }
    }

    /// Sparse Jacobian pattern and the map from structure entries to CSR slots.
    pub fn jacobian_pattern(&self) -> Result<JacobianPattern> {
        JacobianPattern::new(self.constraints.as_ref())
    }

    /// Largest relative error (denominator `max(1, |analytic|)`) between the
    /// analytic gradient/Jacobian and central differences with step `h`.
    pub fn check_derivatives(&self, x: &[f64], h: f64) -> Result<f64> {
        let n = self.n;
        let m = self.m();
        let ev = Evaluator::new(self)?;
        let mut grad = vec![0.0; n];
        ev.gradient(x, &mut grad)?;
        let jac = ev.jacobian(x)?.to_dense();
        let mut worst = 0.0f64;
        let mut xp = x.to_vec();
        let mut cp = vec![0.0; m];
        let mut cm = vec![0.0; m];
        for j in 0..n {
            xp[j] = x[j] + h;
            let fp = ev.value(&xp)?;
            ev.constraints(&xp, &mut cp)?;
            xp[j] = x[j] - h;
            let fm = ev.value(&xp)?;
            ev.constraints(&xp, &mut cm)?;
            xp[j] = x[j];
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs() / grad[j].abs().max(1.0));
            for i in 0..m {
                let fd = (cp[i] - cm[i]) / (2.0 * h);
                worst = worst.max((fd - jac[i][j]).abs() / jac[i][j].abs().max(1.0));
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone)]
pub struct JacobianPattern {
    matrix: CsrMatrix,
    slot: Vec<usize>,
    scratch_len: usize,
}

impl JacobianPattern {
    fn new(c: &dyn ConstraintFn) -> Result<Self> {
        let structure = c.jacobian_structure();
        let trip: Vec<(usize, usize, f64)> = structure.iter().map(|&(i, j)| (i, j, 0.0)).collect();
        let matrix = CsrMatrix::from_triplets(c.dim(), c.num_vars(), &trip)?;
        let slot = structure
            .iter()
            .map(|&(i, j)| {
                let (cols, _) = matrix.row(i);
                matrix.row_ptr()[i] + cols.binary_search(&j).expect("pattern entry present")
            })
            .collect();
        Ok(Self {
            matrix,
            slot,
            scratch_len: structure.len(),
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Evaluation front end that checks outputs and counts calls.
pub struct Evaluator<'a> {
    p: &'a Minlp,
    pattern: JacobianPattern,
    counters: Cell<EvalCounters>,
}

fn finite(what: &'static str, v: &[f64]) -> Result<(), EvalError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(EvalError::NonFinite { what, index }),
        None => Ok(()),
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(p: &'a Minlp) -> Result<Self> {
        Ok(Self {
            p,
            pattern: p.jacobian_pattern()?,
            counters: Cell::new(EvalCounters::default()),
        })
    }

    pub fn problem(&self) -> &'a Minlp {
        self.p
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters.get()
    }

    fn bump(&self, f: impl FnOnce(&mut EvalCounters)) {
        let mut c = self.counters.get();
        f(&mut c);
        self.counters.set(c);
    }

    fn check_x(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.p.n {
            return Err(EvalError::Dimension {
                what: "point",
                expected: self.p.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_x(x)?;
        self.bump(|c| c.n_f += 1);
        let v = self.p.objective.value(x)?;
        finite("objective", &[v])?;
        Ok(v)
    }

    pub fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<(), EvalError> {
        self.check_x(x)?;
        self.bump(|c| c.n_grad += 1);
        self.p.objective.gradient(x, grad)?;
        finite("objective gradient", grad)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Option<Vec<(usize, usize, f64)>>, EvalError> {
        self.check_x(x)?;
        let h = self.p.objective.hessian(x)?;
        if let Some(t) = &h {
            if let Some(k) = t.iter().position(|e| !e.2.is_finite()) {
                return Err(EvalError::NonFinite {
                    what: "objective Hessian",
                    index: k,
                });
            }
        }
        Ok(h)
    }

    pub fn constraints(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.check_x(x)?;
        self.bump(|c| c.n_c += 1);
        self.p.constraints.eval(x, out)?;
        finite("constraints", out)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix, EvalError> {
        self.check_x(x)?;
        self.bump(|c| c.n_jac += 1);
        let mut raw = vec![0.0; self.pattern.scratch_len];
        self.p.constraints.jacobian_values(x, &mut raw)?;
        finite("constraint Jacobian", &raw)?;
        let mut jac = self.pattern.matrix.clone();
        let vals = jac.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        for (k, &s) in self.pattern.slot.iter().enumerate() {
            vals[s] += raw[k];
        }
        Ok(jac)
    }
}
