//! Spectra and exceptional points of a lossy two-mode dimer with saturable
//! nonlinearity.
//!
//! The stationary problem is
//!
//! ```text
//! [ δ − 2iΓ + g₁/(1+|ψ₁|²)        J           ] [ψ₁]     [ψ₁]
//! [        J           −δ + g₂/(1+|ψ₂|²)  ] [ψ₂] = μ [ψ₂]
//! ```
//!
//! with |ψ₁|² + |ψ₂|² = 1. Two independent routes solve it:
//!
//! - [`poly`] reduces the problem to a degree-8 polynomial in the population
//!   imbalance s = |ψ₁|² − |ψ₂|² and recovers μ and the state from each real
//!   root;
//! - [`newton`] solves the gauge-fixed real system directly with damped Newton
//!   iterations and multi-start seeding.
//!
//! [`linear`] holds the closed-form g₁ = g₂ = 0 spectrum, [`ep`] the analytic
//! exceptional-point location and its detection from sweep data, and
//! [`branch`] groups per-detuning solutions into continuous branches.

pub mod branch;
pub mod ep;
pub mod error;
pub mod linear;
pub mod model;
pub mod newton;
pub mod poly;

pub use branch::{BranchEvent, BranchEventKind, BranchPoint, BranchSweep};
pub use ep::{EpLocation, EpSource};
pub use error::{DimerError, Result};
pub use model::{DimerParams, Method, ModeState, SpectrumPoint};
