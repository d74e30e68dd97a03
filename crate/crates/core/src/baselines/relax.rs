//! Continuous relaxation and fixed-integer refinement.

use crate::alm::{self, certify_eps_kkt, AlmConfig, AlmReport, AlmStatus};
use crate::error::Result;
use crate::model::{Evaluator, Minlp};

#[derive(Debug, Clone)]
pub struct Relaxation {
    /// Run on the set without integrality.
    pub report: AlmReport,
    /// `‖·‖₁`-projection of the relaxed point onto the original set.
    pub projected: Vec<f64>,
}

/// Solves `p` with integrality dropped, starting from the projection of `x0`
/// onto the relaxed set, then projects the result onto `X`.
pub fn relax_then_project(p: &Minlp, x0: &[f64], cfg: &AlmConfig) -> Result<Relaxation> {
    let relaxed = p.with_set_x(p.set_x.relaxed());
    let start = relaxed.set_x.project_l1(x0)?;
    let report = alm::solve(&relaxed, &start, &[], cfg)?;
    let projected = p.set_x.project_l1(&report.x)?;
    Ok(Relaxation { report, projected })
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub report: AlmReport,
    /// The run ended above the input objective and the input was returned.
    pub kept_input: bool,
}

/// Reruns the method with every integer fixed at its value in `x_in`. The
/// objective never increases: a worse run returns `x_in` itself.
pub fn refine_fixed_integers(p: &Minlp, x_in: &[f64], cfg: &AlmConfig) -> Result<Refinement> {
    let fixed = p.with_set_x(p.set_x.with_fixed_integers(x_in));
    let mut start = x_in.to_vec();
    for &j in p.set_x.integers() {
        start[j] = start[j].round();
    }
    let mut report = alm::solve(&fixed, &start, &[], cfg)?;
    let ev = Evaluator::new(&fixed)?;
    let f_in = ev.value(&start)?;
    if report.objective <= f_in {
        return Ok(Refinement {
            report,
            kept_input: false,
        });
    }
    let mut c = vec![0.0; fixed.m()];
    ev.constraints(&start, &mut c)?;
    let (s, _) = alm::multipliers_from_c(&fixed, &c, &report.y_hat, report.mu_final);
    let v: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a - b).collect();
    let cert = certify_eps_kkt(&fixed, &start, &report.y, &s, cfg.eps_p, cfg.eps_d, cfg.norm, report.delta_check)?;
    report.viol_norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    report.psi = cert.psi;
    report.status = if cert.pass {
        AlmStatus::EpsKktCritical
    } else {
        report.status
    };
    report.x = start;
    report.s = s;
    report.v = v;
    report.objective = f_in;
    Ok(Refinement {
        report,
        kept_input: true,
    })
}
