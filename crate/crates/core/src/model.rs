//! Physical parameters, mode states and the stationary eigen-equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{DimerError, Result};

/// Absolute tolerance on |ψ₁|² + |ψ₂|² − 1 for a state to count as normalized.
pub const NORM_TOL: f64 = 1e-12;

/// Below this modulus ψ₁ is treated as zero when fixing the gauge.
pub const GAUGE_ZERO: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The five real parameters of the dimer: detuning, mode-1 loss, coupling
/// and the two saturable coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub delta: f64,
    pub gamma: f64,
    pub coupling_j: f64,
    pub g1: f64,
    pub g2: f64,
}

impl DimerParams {
    pub fn new(delta: f64, gamma: f64, coupling_j: f64, g1: f64, g2: f64) -> Result<Self> {
        let p = Self {
            delta,
            gamma,
            coupling_j,
            g1,
            g2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Linear dimer (g₁ = g₂ = 0).
    pub fn linear(delta: f64, gamma: f64, coupling_j: f64) -> Result<Self> {
        Self::new(delta, gamma, coupling_j, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("coupling_j", self.coupling_j),
            ("g1", self.g1),
            ("g2", self.g2),
        ] {
            if !value.is_finite() {
                return Err(DimerError::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.gamma < 0.0 {
            return Err(DimerError::InvalidParameter {
                field: "gamma",
                reason: format!("loss rate must be >= 0, got {}", self.gamma),
            });
        }
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }

    /// Same parameters with the nonlinearity switched off.
    pub fn without_nonlinearity(&self) -> Self {
        Self {
            g1: 0.0,
            g2: 0.0,
            ..*self
        }
    }

    pub fn is_linear(&self) -> bool {
        self.g1 == 0.0 && self.g2 == 0.0
    }

    /// The 2×2 matrix of the eigen-equation with the saturable terms evaluated
    /// at the given mode populations.
    pub fn matrix_at(&self, pop1: f64, pop2: f64) -> [[Complex64; 2]; 2] {
        let s1 = self.g1 / (1.0 + pop1);
        let s2 = self.g2 / (1.0 + pop2);
        [
            [
                Complex64::new(self.delta + s1, -2.0 * self.gamma),
                Complex64::new(self.coupling_j, 0.0),
            ],
            [
                Complex64::new(self.coupling_j, 0.0),
                Complex64::new(-self.delta + s2, 0.0),
            ],
        ]
    }
}

/// Complex mode amplitudes (ψ₁, ψ₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub psi1: Complex64,
    pub psi2: Complex64,
}

impl ModeState {
    pub fn new(psi1: Complex64, psi2: Complex64) -> Self {
        Self { psi1, psi2 }
    }

    pub fn from_real(psi1: f64, psi2: f64) -> Self {
        Self::new(Complex64::new(psi1, 0.0), Complex64::new(psi2, 0.0))
    }

    pub fn populations(&self) -> (f64, f64) {
        (self.psi1.norm_sqr(), self.psi2.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi1.norm_sqr() + self.psi2.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// Rescale to unit norm. Fails on the zero state.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(DimerError::Domain(
                "cannot normalize a zero or non-finite state".into(),
            ));
        }
        Ok(Self::new(self.psi1 / n, self.psi2 / n))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(self.psi1 * factor, self.psi2 * factor)
    }

    /// Euclidean distance between amplitude pairs.
    pub fn distance(&self, other: &ModeState) -> f64 {
        ((self.psi1 - other.psi1).norm_sqr() + (self.psi2 - other.psi2).norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.psi1.is_finite() && self.psi2.is_finite()
    }
}

/// Which route produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Polynomial,
    Newton,
    AnalyticEp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Polynomial => "polynomial",
            Method::Newton => "newton",
            Method::AnalyticEp => "analyticep",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = DimerError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Method::Linear),
            "polynomial" | "poly" => Ok(Method::Polynomial),
            "newton" => Ok(Method::Newton),
            "analyticep" | "analytic_ep" => Ok(Method::AnalyticEp),
            other => Err(DimerError::Domain(format!("unknown method `{other}`"))),
        }
    }
}

/// One self-consistent stationary solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub imbalance_s: f64,
    pub mu: Complex64,
    pub state: ModeState,
    pub residual: f64,
    pub method: Method,
}

impl SpectrumPoint {
    /// Build a point from a normalized state, filling in s and the residual.
    pub fn new(params: &DimerParams, state: ModeState, mu: Complex64, method: Method) -> Result<Self> {
        let residual = residual_of(params, &state, mu)?;
        Ok(Self {
            imbalance_s: imbalance_of(&state),
            mu,
            state,
            residual,
            method,
        })
    }

    /// Distance in (s, Re μ, Im μ) space.
    pub fn distance(&self, other: &SpectrumPoint) -> f64 {
        let ds = self.imbalance_s - other.imbalance_s;
        let dm = self.mu - other.mu;
        (ds * ds + dm.norm_sqr()).sqrt()
    }
}

/// g / (1 + population).
pub fn saturable_term(g: f64, population: f64) -> Result<f64> {
    if population < 0.0 || population.is_nan() {
        return Err(DimerError::Domain(format!(
            "population must be >= 0, got {population}"
        )));
    }
    Ok(g / (1.0 + population))
}

/// Left-hand side of the eigen-equation, with the saturable terms taken from
/// the populations of `state` itself.
pub fn apply_hamiltonian(params: &DimerParams, state: &ModeState) -> [Complex64; 2] {
    let (p1, p2) = state.populations();
    let h = params.matrix_at(p1, p2);
    [
        h[0][0] * state.psi1 + h[0][1] * state.psi2,
        h[1][0] * state.psi1 + h[1][1] * state.psi2,
    ]
}

/// ‖H(ψ)ψ − μψ‖ for a normalized state.
pub fn residual_of(params: &DimerParams, state: &ModeState, mu: Complex64) -> Result<f64> {
    let norm_sq = state.norm_sqr();
    if !((norm_sq - 1.0).abs() <= NORM_TOL) {
        return Err(DimerError::Unnormalized { norm_sq });
    }
    let [h1, h2] = apply_hamiltonian(params, state);
    let r1 = h1 - mu * state.psi1;
    let r2 = h2 - mu * state.psi2;
    Ok((r1.norm_sqr() + r2.norm_sqr()).sqrt())
}

/// s = |ψ₁|² − |ψ₂|².
pub fn imbalance_of(state: &ModeState) -> f64 {
    let (p1, p2) = state.populations();
    p1 - p2
}

/// Remove the global phase: ψ₁ real and non-negative, or ψ₂ real and
/// non-negative when |ψ₁| < 1e-12.
pub fn canonicalize_gauge(state: &ModeState) -> Result<ModeState> {
    if !state.is_finite() || state.norm_sqr() == 0.0 {
        return Err(DimerError::Domain(
            "cannot fix the gauge of a zero or non-finite state".into(),
        ));
    }
    let anchor = if state.psi1.norm() >= GAUGE_ZERO {
        state.psi1
    } else {
        state.psi2
    };
    let phase = anchor.conj() / anchor.norm();
    let mut out = state.scale(phase);
    // the anchor is exactly real after rotation; drop rounding in its imaginary part
    if state.psi1.norm() >= GAUGE_ZERO {
        out.psi1 = Complex64::new(out.psi1.norm(), 0.0);
    } else {
        out.psi2 = Complex64::new(out.psi2.norm(), 0.0);
    }
    Ok(out)
}

/// The coalesced EP eigenvector (1, ±i)/√2.
pub fn ep_state(sign: f64) -> ModeState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ModeState::new(Complex64::new(r, 0.0), I * sign.signum() * r)
}
