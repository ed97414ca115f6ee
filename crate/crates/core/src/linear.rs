//! Closed-form spectrum of the linear dimer (g₁ = g₂ = 0).

use num_complex::Complex64;

use crate::ep::{EpLocation, EpSource};
use crate::error::{DimerError, Result};
use crate::model::{canonicalize_gauge, ep_state, DimerParams, ModeState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpectrum {
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    pub eigvec_plus: ModeState,
    pub eigvec_minus: ModeState,
}

/// μ± = −iΓ ± √(J² + (δ − iΓ)²), principal square root.
///
/// At the exceptional point both slots carry the same coalesced eigenvector.
pub fn linear_spectrum(params: &DimerParams) -> Result<LinearSpectrum> {
    if !params.is_linear() {
        return Err(DimerError::Precondition(format!(
            "linear spectrum needs g1 = g2 = 0, got g1 = {}, g2 = {}",
            params.g1, params.g2
        )));
    }
    let DimerParams {
        delta,
        gamma,
        coupling_j: j,
        ..
    } = *params;
    let shifted = Complex64::new(delta, -gamma);
    let radicand = shifted * shifted + j * j;
    // −0 imaginary part would flip the principal branch
    let root = Complex64::new(radicand.re, radicand.im + 0.0).sqrt();
    let centre = Complex64::new(0.0, -gamma);
    let mu_plus = centre + root;
    let mu_minus = centre - root;
    Ok(LinearSpectrum {
        mu_plus,
        mu_minus,
        eigvec_plus: eigenvector(params, mu_plus, 0)?,
        eigvec_minus: eigenvector(params, mu_minus, 1)?,
    })
}

// Null vector of H − μ from whichever row is better conditioned. `slot`
// picks the basis vector when H − μ vanishes identically.
fn eigenvector(params: &DimerParams, mu: Complex64, slot: usize) -> Result<ModeState> {
    let j = Complex64::new(params.coupling_j, 0.0);
    let from_row1 = ModeState::new(j, mu - Complex64::new(params.delta, -2.0 * params.gamma));
    let from_row2 = ModeState::new(mu + params.delta, j);
    let v = if from_row1.norm_sqr() >= from_row2.norm_sqr() {
        from_row1
    } else {
        from_row2
    };
    let v = if v.norm_sqr() > 0.0 {
        v
    } else if slot == 0 {
        ModeState::from_real(1.0, 0.0)
    } else {
        ModeState::from_real(0.0, 1.0)
    };
    canonicalize_gauge(&v.normalized()?)
}

/// The two linear EPs: δ = 0, J = ±Γ, μ = −iΓ, state (1, ±i)/√2.
pub fn linear_ep(gamma: f64) -> [EpLocation; 2] {
    [1.0, -1.0].map(|sign| EpLocation {
        delta_ep: 0.0,
        coupling_j: sign * gamma,
        mu_ep: Complex64::new(0.0, -gamma),
        state_ep: ep_state(sign),
        source: EpSource::Analytic,
    })
}

/// Small-detuning gap estimate |μ₊ − μ₋| ≈ 2√(2Γ)√|δ| near the linear EP.
pub fn splitting_estimate(gamma: f64, delta: f64) -> f64 {
    2.0 * (2.0 * gamma).sqrt() * delta.abs().sqrt()
}
