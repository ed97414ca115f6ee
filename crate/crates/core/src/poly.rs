//! Population-imbalance reduction of the nonlinear eigenproblem.
//!
//! With |ψ₁|² = (1+s)/2 and |ψ₂|² = (1−s)/2 the chemical potential becomes an
//! explicit function μ(s), and self-consistency collapses to a single real
//! polynomial of degree 8 in s. Real roots in [−1, 1] are candidate
//! solutions; each one is accepted only if a normalized eigenstate with that
//! imbalance actually solves the eigen-equation.

use log::debug;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::branch::BranchSweep;
use crate::error::{DimerError, Result};
use crate::model::{canonicalize_gauge, residual_of, DimerParams, Method, ModeState, SpectrumPoint};

/// Real roots need |Im z| below this times max(1, |z|).
pub const REAL_ROOT_TOL: f64 = 1e-9;
/// Roots closer than this are one cluster (reported with multiplicity).
pub const CLUSTER_RADIUS: f64 = 1e-8;
/// Admissible window |s| ≤ 1 + ADMISSIBLE_SLACK.
pub const ADMISSIBLE_SLACK: f64 = 1e-9;
/// Below this |s| μ is taken from the effective-Hamiltonian eigenvalues.
pub const SMALL_IMBALANCE: f64 = 1e-6;
/// Reconstruction residual above which a real root is spurious.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

// A conjugate pair this close to the real axis is a split double root.
const NEAR_DOUBLE_TOL: f64 = 1e-6;

/// Coefficients a₀ … a₈ of the imbalance polynomial, indexed by power of s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalancePolynomial {
    pub coeffs: [f64; 9],
}

impl ImbalancePolynomial {
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * s + a)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }

    fn derivative(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect()
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// The nine coefficients of the imbalance polynomial (a₇ is identically zero).
pub fn polynomial_coeffs(params: &DimerParams) -> ImbalancePolynomial {
    let DimerParams {
        delta: d,
        gamma,
        coupling_j: j,
        g1,
        g2,
    } = *params;
    let gm2 = gamma * gamma;
    let j2 = j * j;
    let d2 = d * d;
    let gsum = g1 + g2;
    let gdiff = g1 - g2;
    let ep_offset = 3.0 * d + gdiff;

    let a8 = -gm2;
    let a6 = -d2 + 19.0 * gm2 - j2;
    let a5 = -2.0 * gsum * d;
    let a4 = 19.0 * d2 + 6.0 * d * gdiff - 99.0 * gm2 + 18.0 * j2 - gsum * gsum;
    let a3 = 2.0 * gsum * (10.0 * d + 3.0 * gdiff);
    let a2 = -99.0 * d2 + 20.0 * g1 * g2 + 81.0 * gm2 - 81.0 * j2 - 60.0 * d * g1
        + 60.0 * d * g2
        - 8.0 * g1 * g1
        - 8.0 * g2 * g2;
    let a1 = -6.0 * gsum * ep_offset;
    let a0 = 9.0 * ep_offset * ep_offset;

    ImbalancePolynomial {
        coeffs: [a0, a1, a2, a3, a4, a5, a6, 0.0, a8],
    }
}

/// All complex roots: exact zeros split off first, the rest from the
/// eigenvalues of the companion matrix, then polished by Newton steps.
fn complex_roots(poly: &ImbalancePolynomial) -> Vec<Complex64> {
    let scale = poly.scale();
    let zero_floor = 4.0 * f64::EPSILON * scale;
    let mut coeffs: Vec<f64> = poly.coeffs.to_vec();
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    let mut roots = Vec::with_capacity(8);
    // trailing coefficients at rounding level are exact zeros of the model
    let mut lead = 0;
    while lead + 1 < coeffs.len() && coeffs[lead].abs() <= zero_floor {
        roots.push(Complex64::new(0.0, 0.0));
        lead += 1;
    }
    let reduced = &coeffs[lead..];
    let degree = reduced.len() - 1;
    if degree == 0 {
        return roots;
    }

    // the plain QR iteration can stall on symmetric root patterns; a small
    // shift of the variable breaks the symmetry
    let eig = [0.0, 0.0137, -0.0291, 0.0613, -0.1127]
        .iter()
        .find_map(|&shift| {
            companion_eigenvalues(&taylor_shift(reduced, shift))
                .map(|e| e.into_iter().map(|z| z + shift).collect::<Vec<_>>())
        })
        .unwrap_or_default();

    for z in eig {
        roots.push(polish(poly, z));
    }
    roots
}

// Coefficients of p(t + c) by repeated synthetic division.
fn taylor_shift(coeffs: &[f64], c: f64) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    if c == 0.0 {
        return out;
    }
    let n = out.len();
    for i in 0..n {
        for k in (i..n - 1).rev() {
            out[k] += c * out[k + 1];
        }
    }
    out
}

fn companion_eigenvalues(coeffs: &[f64]) -> Option<Vec<Complex64>> {
    let degree = coeffs.len() - 1;
    let top = coeffs[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for k in 1..degree {
        companion[(k, k - 1)] = 1.0;
    }
    for k in 0..degree {
        companion[(k, degree - 1)] = -coeffs[k] / top;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 200 * degree)?;
    let eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(eig)
}

fn polish(poly: &ImbalancePolynomial, mut z: Complex64) -> Complex64 {
    let deriv = poly.derivative();
    let dp = |z: Complex64| {
        deriv
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    };
    let mut fz = poly.eval_complex(z).norm();
    for _ in 0..8 {
        let d = dp(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - poly.eval_complex(z) / d;
        let fnext = poly.eval_complex(next).norm();
        if !(fnext < fz) {
            break;
        }
        z = next;
        fz = fnext;
    }
    z
}

// Critical point of p near x0, i.e. the centre of a near-double root.
fn double_root_centre(poly: &ImbalancePolynomial, x0: f64) -> f64 {
    let d1 = poly.derivative();
    let d2: Vec<f64> = d1
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| k as f64 * a)
        .collect();
    let mut x = x0;
    for _ in 0..20 {
        let denom = horner(&d2, x);
        if denom == 0.0 {
            break;
        }
        let step = horner(&d1, x) / denom;
        x -= step;
        if step.abs() <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    if x.is_finite() && (x - x0).abs() < 1e-4 {
        x
    } else {
        x0
    }
}

/// A real root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCluster {
    pub value: f64,
    pub multiplicity: usize,
}

/// Real roots of the polynomial inside [−1, 1], clustered.
pub fn real_root_clusters(poly: &ImbalancePolynomial) -> Result<Vec<RootCluster>> {
    if poly.coeffs[8] == 0.0 {
        return Err(DimerError::DegreeDrop);
    }
    let roots = complex_roots(poly);
    let mut used = vec![false; roots.len()];
    let mut real = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let z = roots[i];
        let size = z.norm().max(1.0);
        if z.im.abs() <= REAL_ROOT_TOL * size {
            used[i] = true;
            real.push(z.re);
            continue;
        }
        if z.im.abs() > NEAR_DOUBLE_TOL * size {
            continue;
        }
        let partner = (0..roots.len())
            .filter(|&k| k != i && !used[k] && roots[k].im * z.im < 0.0)
            .min_by(|&a, &b| {
                let da = (roots[a] - z.conj()).norm();
                let db = (roots[b] - z.conj()).norm();
                da.total_cmp(&db)
            });
        if let Some(k) = partner {
            if (roots[k] - z.conj()).norm() <= NEAR_DOUBLE_TOL * size {
                used[i] = true;
                used[k] = true;
                let centre = double_root_centre(poly, 0.5 * (z.re + roots[k].re));
                real.push(centre);
                real.push(centre);
            }
        }
    }
    real.sort_by(f64::total_cmp);

    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in real {
        match clusters.last_mut() {
            Some((sum, n)) if x - last <= CLUSTER_RADIUS => {
                *sum += x;
                *n += 1;
            }
            _ => clusters.push((x, 1)),
        }
        last = x;
    }

    Ok(clusters
        .into_iter()
        .map(|(sum, n)| (sum / n as f64, n))
        .filter(|(x, _)| x.abs() <= 1.0 + ADMISSIBLE_SLACK)
        .map(|(x, n)| RootCluster {
            value: x.clamp(-1.0, 1.0),
            multiplicity: n,
        })
        .collect())
}

/// Admissible real roots, ascending, each repeated by its multiplicity.
pub fn real_roots(poly: &ImbalancePolynomial) -> Result<Vec<f64>> {
    Ok(real_root_clusters(poly)?
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c.value, c.multiplicity))
        .collect())
}

/// H = A₀·I + X·σ_z + J·σ_x at fixed populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDecomposition {
    pub a0: Complex64,
    pub x: Complex64,
    pub j: f64,
}

impl EffectiveDecomposition {
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let j = Complex64::new(self.j, 0.0);
        [[self.a0 + self.x, j], [j, self.a0 - self.x]]
    }

    /// √(X² + J²), principal branch. A radicand at rounding level is taken
    /// as exactly zero: its square root would otherwise split a coalesced
    /// pair by ~1e-8.
    pub fn half_gap(&self) -> Complex64 {
        let radicand = self.x * self.x + self.j * self.j;
        let noise = 8.0 * f64::EPSILON * (self.x.norm_sqr() + self.j * self.j);
        if radicand.norm() <= noise {
            return Complex64::new(0.0, 0.0);
        }
        radicand.sqrt()
    }

    /// [μ₊, μ₋] = A₀ ± √(X² + J²).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let root = self.half_gap();
        [self.a0 + root, self.a0 - root]
    }
}

fn check_imbalance(s: f64) -> Result<()> {
    if !(s.abs() <= 1.0 + ADMISSIBLE_SLACK) {
        return Err(DimerError::Domain(format!(
            "population imbalance must lie in [-1, 1], got {s}"
        )));
    }
    Ok(())
}

fn populations(s: f64) -> (f64, f64) {
    let s = s.clamp(-1.0, 1.0);
    (0.5 * (1.0 + s), 0.5 * (1.0 - s))
}

pub fn effective_decomposition(params: &DimerParams, s: f64) -> Result<EffectiveDecomposition> {
    check_imbalance(s)?;
    let (p1, p2) = populations(s);
    let s1 = params.g1 / (1.0 + p1);
    let s2 = params.g2 / (1.0 + p2);
    Ok(EffectiveDecomposition {
        a0: Complex64::new(0.5 * (s1 + s2), -params.gamma),
        x: Complex64::new(params.delta + 0.5 * (s1 - s2), -params.gamma),
        j: params.coupling_j,
    })
}

// μ(s) = δ/s + g₁(1+s)/(s(3+s)) − g₂(1−s)/(s(3−s)) − iΓ(1+s)
fn mu_closed_form(params: &DimerParams, s: f64) -> Complex64 {
    let re = (params.delta + params.g1 * (1.0 + s) / (3.0 + s) - params.g2 * (1.0 - s) / (3.0 - s)) / s;
    Complex64::new(re, -params.gamma * (1.0 + s))
}

// State with the populations of s and the relative phase fixed by the
// eigen-equation; no admissibility check.
fn reconstruct_unchecked(params: &DimerParams, s: f64, mu: Complex64) -> Result<(ModeState, f64)> {
    if params.coupling_j == 0.0 {
        return Err(DimerError::Decoupled);
    }
    let (p1, p2) = populations(s);
    let j = params.coupling_j;
    let s1 = params.g1 / (1.0 + p1);
    let s2 = params.g2 / (1.0 + p2);
    // second row: Jψ₁ = (μ + δ − S₂)ψ₂; first row as fallback
    let row2 = mu + params.delta - s2;
    let ratio = if row2.norm() > 1e-14 * (1.0 + mu.norm()) {
        Complex64::new(j, 0.0) / row2
    } else {
        -(Complex64::new(params.delta + s1, -2.0 * params.gamma) - mu) / j
    };
    let phase = if ratio.norm() > 0.0 && ratio.is_finite() {
        ratio / ratio.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let state = canonicalize_gauge(&ModeState::new(
        Complex64::new(p1.sqrt(), 0.0),
        phase * p2.sqrt(),
    ))?;
    let residual = residual_of(params, &state, mu)?;
    Ok((state, residual))
}

/// Normalized, gauge-fixed state with imbalance s solving the eigen-equation
/// at μ. Fails when (s, μ) is not a consistent pair.
pub fn reconstruct_state(params: &DimerParams, s: f64, mu: Complex64) -> Result<ModeState> {
    check_imbalance(s)?;
    let (state, residual) = reconstruct_unchecked(params, s, mu)?;
    if !(residual <= RECONSTRUCTION_TOL) {
        return Err(DimerError::ReconstructionFailed { s, residual });
    }
    Ok(state)
}

/// μ for a given imbalance. Uses the closed form away from s = 0 and the
/// effective-Hamiltonian eigenvalue with the smaller reconstruction residual
/// near it.
pub fn mu_from_imbalance(params: &DimerParams, s: f64) -> Result<Complex64> {
    check_imbalance(s)?;
    if s.abs() >= SMALL_IMBALANCE {
        return Ok(mu_closed_form(params, s));
    }
    let candidates = ranked_branches(params, s)?;
    Ok(candidates[0].0)
}

// Both effective-Hamiltonian eigenvalues at s, ordered by reconstruction
// residual.
fn ranked_branches(params: &DimerParams, s: f64) -> Result<Vec<(Complex64, ModeState, f64)>> {
    let eff = effective_decomposition(params, s)?;
    let mut out = Vec::with_capacity(2);
    for mu in eff.eigenvalues() {
        let (state, residual) = reconstruct_unchecked(params, s, mu)?;
        out.push((mu, state, residual));
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2));
    Ok(out)
}

/// Full polynomial route: roots → μ(s) → state, spurious roots dropped.
pub fn solve_polynomial(params: &DimerParams) -> Result<Vec<SpectrumPoint>> {
    solve_with_polynomial(params, &polynomial_coeffs(params))
}

/// Same pipeline with caller-supplied coefficients.
pub fn solve_with_polynomial(
    params: &DimerParams,
    poly: &ImbalancePolynomial,
) -> Result<Vec<SpectrumPoint>> {
    params.validate()?;
    let clusters = real_root_clusters(poly)?;
    let mut points = Vec::new();
    for RootCluster {
        value: s,
        multiplicity,
    } in clusters
    {
        if s.abs() < SMALL_IMBALANCE {
            let valid: Vec<_> = ranked_branches(params, s)?
                .into_iter()
                .filter(|(_, _, r)| *r <= RECONSTRUCTION_TOL)
                .collect();
            if valid.is_empty() {
                debug!("rejected spurious root s = {s:e} at {params:?}");
                continue;
            }
            for k in 0..multiplicity {
                let (mu, state, _) = valid[k % valid.len()];
                points.push(SpectrumPoint::new(params, state, mu, Method::Polynomial)?);
            }
            continue;
        }
        let mu = mu_closed_form(params, s);
        match reconstruct_state(params, s, mu) {
            Ok(state) => {
                let point = SpectrumPoint::new(params, state, mu, Method::Polynomial)?;
                points.extend(std::iter::repeat_n(point, multiplicity));
            }
            Err(DimerError::ReconstructionFailed { residual, .. }) => {
                debug!("rejected spurious root s = {s} (residual {residual:e}) at {params:?}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(points)
}

/// Polynomial route over a detuning grid, tracked into branches.
pub fn sweep_polynomial(template: &DimerParams, deltas: &[f64]) -> Result<BranchSweep> {
    let solutions = deltas
        .par_iter()
        .map(|&delta| solve_polynomial(&template.with_delta(delta)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchSweep::track(*template, deltas.to_vec(), solutions))
}
