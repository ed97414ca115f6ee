use std::io::Write;

use ep_dimer::branch::uniform_grid;
use ep_dimer::ep::{analytic_ep, detect_ep, ep_existence_check, DEFAULT_TOL_COALESCE};
use ep_dimer::poly::sweep_polynomial;
use ep_dimer::{DimerParams, EpLocation};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpRequest {
    pub params: DimerParams,
    /// Centre of the local sweep; the analytic δ_EP when absent.
    pub centre: Option<f64>,
    pub span: f64,
    pub steps: usize,
    /// Largest accepted analytic/detected discrepancy.
    pub tol: f64,
    /// How close |J| must be to Γ for an EP to exist.
    pub existence_tol: f64,
}

impl EpRequest {
    pub fn new(params: DimerParams) -> Self {
        Self {
            params,
            centre: None,
            span: 0.05,
            steps: 101,
            tol: 1e-4,
            existence_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpOutcome {
    /// Analytic and detected EPs agree within the tolerance.
    Agree { analytic: EpLocation, detected: EpLocation },
    /// Detected EP missing or too far from the analytic one.
    Disagree {
        analytic: EpLocation,
        detected: Option<EpLocation>,
    },
    /// The parameters admit no EP.
    NoEp(String),
}

impl EpOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            EpOutcome::Agree { .. } => 0,
            EpOutcome::Disagree { .. } => 1,
            EpOutcome::NoEp(_) => 2,
        }
    }
}

fn describe(label: &str, ep: &EpLocation) -> String {
    format!(
        "{label}: delta = {:.10}, J = {}, mu = {:.10} {:+.10}i, s = {:.3e}",
        ep.delta_ep,
        ep.coupling_j,
        ep.mu_ep.re,
        ep.mu_ep.im,
        ep.imbalance()
    )
}

pub fn cmd_ep<W: Write>(request: &EpRequest, out: &mut W) -> Result<EpOutcome> {
    let p = request.params;
    let io = |e| CliError::io("<stdout>", e);
    if p.gamma == 0.0 || !ep_existence_check(&p, request.existence_tol) {
        let reason = format!(
            "no EP on this parameter slice: an EP needs |J| = Γ > 0, got J = {}, Γ = {}",
            p.coupling_j, p.gamma
        );
        writeln!(out, "{reason}").map_err(io)?;
        return Ok(EpOutcome::NoEp(reason));
    }
    if !(request.span > 0.0) || request.steps < 3 {
        return Err(CliError::config("span", "local sweep needs span > 0 and at least 3 steps"));
    }

    let sign = if p.coupling_j < 0.0 { 1 } else { 0 };
    let mut analytic = analytic_ep(p.gamma, p.g1, p.g2)[sign];
    // the analytic location assumes |J| = Γ exactly
    analytic.coupling_j = p.coupling_j;
    writeln!(out, "{}", describe("analytic", &analytic)).map_err(io)?;

    let centre = request.centre.unwrap_or(analytic.delta_ep);
    let deltas = uniform_grid(centre - request.span, centre + request.span, request.steps);
    let sweep = sweep_polynomial(&p, &deltas)?;
    let found = detect_ep(&sweep, DEFAULT_TOL_COALESCE);
    let closest = found
        .iter()
        .min_by(|a, b| {
            (a.delta_ep - analytic.delta_ep)
                .abs()
                .total_cmp(&(b.delta_ep - analytic.delta_ep).abs())
        })
        .copied();
    let Some(detected) = closest else {
        writeln!(out, "detected: none in [{}, {}]", deltas[0], deltas[deltas.len() - 1]).map_err(io)?;
        return Ok(EpOutcome::Disagree {
            analytic,
            detected: None,
        });
    };
    writeln!(out, "{}", describe("detected", &detected)).map_err(io)?;

    let d_delta = (detected.delta_ep - analytic.delta_ep).abs();
    let d_mu = (detected.mu_ep - analytic.mu_ep).norm();
    writeln!(out, "discrepancy: |d delta| = {d_delta:.3e}, |d mu| = {d_mu:.3e} (tol {:.1e})", request.tol)
        .map_err(io)?;
    if d_delta < request.tol && d_mu < request.tol {
        Ok(EpOutcome::Agree { analytic, detected })
    } else {
        Ok(EpOutcome::Disagree {
            analytic,
            detected: Some(detected),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn run(params: DimerParams) -> (EpOutcome, String) {
        let mut buf = Vec::new();
        let outcome = cmd_ep(&EpRequest::new(params), &mut buf).unwrap();
        (outcome, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn unequal_gain_ep_agrees() {
        let (outcome, text) = run(DimerParams::new(0.0, 1.0, 1.0, 1.8, 2.4).unwrap());
        match outcome {
            EpOutcome::Agree { analytic, detected } => {
                assert!((analytic.delta_ep - 0.2).abs() < 1e-15);
                assert!((detected.delta_ep - 0.2).abs() < 1e-4);
            }
            other => panic!("{other:?}\n{text}"),
        }
    }

    #[test]
    fn linear_ep() {
        let (outcome, _) = run(DimerParams::linear(0.0, 1.0, 1.0).unwrap());
        match outcome {
            EpOutcome::Agree { analytic, .. } => {
                assert_eq!(analytic.delta_ep, 0.0);
                assert!((analytic.mu_ep - Complex64::new(0.0, -1.0)).norm() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_ep_exit_code() {
        let (outcome, text) = run(DimerParams::linear(0.0, 1.0, 0.5).unwrap());
        assert_eq!(outcome.exit_code(), 2);
        assert!(text.contains("no EP"));
        let (outcome, _) = run(DimerParams::linear(0.0, 0.0, 0.0).unwrap());
        assert_eq!(outcome.exit_code(), 2);
    }
}
