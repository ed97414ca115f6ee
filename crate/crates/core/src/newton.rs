//! Direct numerical route: damped Newton on the gauge-fixed real system.
//!
//! With ψ₁ = φ₁ (real) and ψ₂ = φ₂ + iφ₃, the eigen-equation splits into
//! four real equations in (φ₁, φ₂, φ₃, μ_r, μ_i); normalization supplies the
//! fifth.

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::branch::BranchSweep;
use crate::linear::linear_spectrum;
use crate::model::{canonicalize_gauge, DimerParams, Method, ModeState, SpectrumPoint, GAUGE_ZERO};
use crate::poly::solve_polynomial;

/// The five real unknowns of the gauge-fixed system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealUnknowns {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub mu_r: f64,
    pub mu_i: f64,
}

impl RealUnknowns {
    pub fn new(phi1: f64, phi2: f64, phi3: f64, mu_r: f64, mu_i: f64) -> Self {
        Self {
            phi1,
            phi2,
            phi3,
            mu_r,
            mu_i,
        }
    }

    /// Gauge-fix a complex state and split it into real unknowns.
    pub fn from_state(state: &ModeState, mu: Complex64) -> Self {
        let st = canonicalize_gauge(state).unwrap_or(*state);
        Self::new(st.psi1.re, st.psi2.re, st.psi2.im, mu.re, mu.im)
    }

    pub fn state(&self) -> ModeState {
        ModeState::new(Complex64::new(self.phi1, 0.0), Complex64::new(self.phi2, self.phi3))
    }

    pub fn mu(&self) -> Complex64 {
        Complex64::new(self.mu_r, self.mu_i)
    }

    fn to_vector(self) -> Vector5<f64> {
        Vector5::new(self.phi1, self.phi2, self.phi3, self.mu_r, self.mu_i)
    }

    fn from_vector(v: &Vector5<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

const POLISH_STEP_MAX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Converged once ‖F‖₂ drops below this.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Initial step fraction; halved while the residual grows.
    pub damping: f64,
    pub min_damping: f64,
    /// Quasi-random seeds on the amplitude sphere used by [`solve_all`].
    pub seed_count: usize,
    /// Converged solutions closer than this in (s, μ) are one solution.
    pub dedup_radius: f64,
    /// Seed [`solve_all`] with the polynomial-route solutions.
    pub polynomial_seeds: bool,
    /// Extra full steps after convergence, kept while ‖F‖ keeps dropping.
    pub polish_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-12,
            max_iter: 100,
            damping: 1.0,
            min_damping: 1.0 / 64.0,
            seed_count: 32,
            dedup_radius: 1e-6,
            polynomial_seeds: true,
            polish_iter: 8,
        }
    }
}

/// The four real eigen-equations followed by φ₁² + φ₂² + φ₃² − 1.
pub fn residual_vector(params: &DimerParams, u: &RealUnknowns) -> [f64; 5] {
    let DimerParams {
        delta: d,
        gamma,
        coupling_j: j,
        g1,
        g2,
    } = *params;
    let RealUnknowns {
        phi1,
        phi2,
        phi3,
        mu_r,
        mu_i,
    } = *u;
    let sat1 = g1 / (1.0 + phi1 * phi1);
    let sat2 = g2 / (1.0 + phi2 * phi2 + phi3 * phi3);
    [
        (d - mu_r + sat1) * phi1 + j * phi2,
        -(2.0 * gamma + mu_i) * phi1 + j * phi3,
        j * phi1 + (-d - mu_r + sat2) * phi2 + mu_i * phi3,
        (d + mu_r - sat2) * phi3 + mu_i * phi2,
        phi1 * phi1 + phi2 * phi2 + phi3 * phi3 - 1.0,
    ]
}

/// Analytic Jacobian of [`residual_vector`]; rows are equations, columns
/// (φ₁, φ₂, φ₃, μ_r, μ_i).
pub fn jacobian(params: &DimerParams, u: &RealUnknowns) -> [[f64; 5]; 5] {
    let DimerParams {
        delta: d,
        gamma,
        coupling_j: j,
        g1,
        g2,
    } = *params;
    let RealUnknowns {
        phi1,
        phi2,
        phi3,
        mu_r,
        mu_i,
    } = *u;
    let q1 = 1.0 + phi1 * phi1;
    let q2 = 1.0 + phi2 * phi2 + phi3 * phi3;
    let sat1 = g1 / q1;
    let sat2 = g2 / q2;
    let dsat1 = -2.0 * g1 * phi1 / (q1 * q1);
    let dsat2_2 = -2.0 * g2 * phi2 / (q2 * q2);
    let dsat2_3 = -2.0 * g2 * phi3 / (q2 * q2);
    [
        [d - mu_r + sat1 + phi1 * dsat1, j, 0.0, -phi1, 0.0],
        [-(2.0 * gamma + mu_i), 0.0, j, 0.0, -phi1],
        [j, -d - mu_r + sat2 + phi2 * dsat2_2, phi2 * dsat2_3 + mu_i, -phi2, phi3],
        [0.0, mu_i - phi3 * dsat2_2, d + mu_r - sat2 - phi3 * dsat2_3, phi3, phi2],
        [2.0 * phi1, 2.0 * phi2, 2.0 * phi3, 0.0, 0.0],
    ]
}

/// Result of one Newton run. Divergence is an ordinary outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NewtonOutcome {
    Converged {
        point: SpectrumPoint,
        unknowns: RealUnknowns,
        iterations: usize,
    },
    Diverged {
        residual_norm: f64,
        iterations: usize,
    },
}

impl NewtonOutcome {
    pub fn point(&self) -> Option<&SpectrumPoint> {
        match self {
            NewtonOutcome::Converged { point, .. } => Some(point),
            NewtonOutcome::Diverged { .. } => None,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            NewtonOutcome::Converged { iterations, .. } | NewtonOutcome::Diverged { iterations, .. } => *iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gauge {
    /// ψ₁ = φ₁, ψ₂ = φ₂ + iφ₃
    Psi1Real,
    /// ψ₁ = φ₁ + iφ₃, ψ₂ = φ₂; used when ψ₁ vanishes
    Psi2Real,
}

fn gauge_state(gauge: Gauge, v: &Vector5<f64>) -> ModeState {
    match gauge {
        Gauge::Psi1Real => ModeState::new(Complex64::new(v[0], 0.0), Complex64::new(v[1], v[2])),
        Gauge::Psi2Real => ModeState::new(Complex64::new(v[0], v[2]), Complex64::new(v[1], 0.0)),
    }
}

fn gauge_residual(params: &DimerParams, gauge: Gauge, v: &Vector5<f64>) -> Vector5<f64> {
    match gauge {
        Gauge::Psi1Real => Vector5::from(residual_vector(params, &RealUnknowns::from_vector(v))),
        Gauge::Psi2Real => {
            let st = gauge_state(gauge, v);
            let (p1, p2) = st.populations();
            let h = params.matrix_at(p1, p2);
            let mu = Complex64::new(v[3], v[4]);
            let r1 = (h[0][0] - mu) * st.psi1 + h[0][1] * st.psi2;
            let r2 = h[1][0] * st.psi1 + (h[1][1] - mu) * st.psi2;
            Vector5::new(r1.re, r1.im, r2.re, r2.im, st.norm_sqr() - 1.0)
        }
    }
}

fn gauge_jacobian(params: &DimerParams, gauge: Gauge, v: &Vector5<f64>) -> Matrix5<f64> {
    match gauge {
        Gauge::Psi1Real => {
            let jac = jacobian(params, &RealUnknowns::from_vector(v));
            Matrix5::from_fn(|r, c| jac[r][c])
        }
        // only reached for decoupled modes; central differences suffice
        Gauge::Psi2Real => {
            let h = 1e-7;
            let mut m = Matrix5::zeros();
            for c in 0..5 {
                let mut up = *v;
                let mut down = *v;
                up[c] += h;
                down[c] -= h;
                let col = (gauge_residual(params, gauge, &up) - gauge_residual(params, gauge, &down)) / (2.0 * h);
                m.set_column(c, &col);
            }
            m
        }
    }
}

fn newton_step(jac: &Matrix5<f64>, f: &Vector5<f64>) -> Option<Vector5<f64>> {
    let rhs = -f;
    if let Some(step) = jac.lu().solve(&rhs) {
        if step.iter().all(|x| x.is_finite()) {
            return Some(step);
        }
    }
    // singular at coalescence: minimum-norm least-squares step
    let svd = jac.svd(true, true);
    let cutoff = 1e-14 * svd.singular_values.max();
    svd.solve(&rhs, cutoff).ok().filter(|s| s.iter().all(|x| x.is_finite()))
}

// Normalized amplitudes never exceed 1 and |μ + iΓ| is bounded by the matrix
// entries; iterates well outside that box are not heading for a solution.
fn in_search_region(params: &DimerParams, v: &Vector5<f64>) -> bool {
    let mu_bound = params.delta.abs() + params.gamma + params.coupling_j.abs() + params.g1.abs() + params.g2.abs();
    let mu_offset = Complex64::new(v[3], v[4] + params.gamma).norm();
    v.iter().take(3).all(|x| x.abs() <= 2.0) && mu_offset <= 2.0 * mu_bound + 1.0
}

struct Run {
    v: Vector5<f64>,
    norm: f64,
    iterations: usize,
    converged: bool,
}

fn iterate(params: &DimerParams, gauge: Gauge, seed: Vector5<f64>, config: &NewtonConfig) -> Run {
    let mut v = seed;
    let mut f = gauge_residual(params, gauge, &v);
    let mut norm = f.norm();
    let mut iterations = 0;
    let diverged = |v: Vector5<f64>, norm: f64, iterations| Run {
        v,
        norm,
        iterations,
        converged: false,
    };
    if !norm.is_finite() || !in_search_region(params, &v) {
        return diverged(v, norm, 0);
    }

    while norm >= config.tol_residual {
        if iterations >= config.max_iter {
            return diverged(v, norm, iterations);
        }
        iterations += 1;
        let Some(step) = newton_step(&gauge_jacobian(params, gauge, &v), &f) else {
            return diverged(v, norm, iterations);
        };
        let mut lambda = config.damping;
        loop {
            let trial = v + step * lambda;
            let ft = gauge_residual(params, gauge, &trial);
            let nt = ft.norm();
            if nt.is_finite() && nt < norm {
                v = trial;
                f = ft;
                norm = nt;
                break;
            }
            lambda *= 0.5;
            if lambda < config.min_damping {
                return diverged(v, norm, iterations);
            }
        }
        if !in_search_region(params, &v) {
            return diverged(v, norm, iterations);
        }
    }

    for _ in 0..config.polish_iter {
        let Some(step) = newton_step(&gauge_jacobian(params, gauge, &v), &f) else {
            break;
        };
        // near a coalescence the residual is flat along one direction; a
        // polish step must stay a correction, not a walk along it
        if step.norm() > POLISH_STEP_MAX {
            break;
        }
        let trial = v + step;
        let ft = gauge_residual(params, gauge, &trial);
        let nt = ft.norm();
        if !(nt < norm) {
            break;
        }
        v = trial;
        f = ft;
        norm = nt;
    }

    Run {
        v,
        norm,
        iterations,
        converged: true,
    }
}

/// Damped Newton from one seed.
pub fn solve_from_seed(params: &DimerParams, seed: &RealUnknowns, config: &NewtonConfig) -> NewtonOutcome {
    if !seed.is_finite() {
        return NewtonOutcome::Diverged {
            residual_norm: f64::NAN,
            iterations: 0,
        };
    }
    let mut run = iterate(params, Gauge::Psi1Real, seed.to_vector(), config);
    if !run.converged {
        return NewtonOutcome::Diverged {
            residual_norm: run.norm,
            iterations: run.iterations,
        };
    }
    let mut gauge = Gauge::Psi1Real;
    if run.v[0].abs() < GAUGE_ZERO {
        // ψ₁ ≈ 0 leaves the phase of ψ₂ free; redo with ψ₂ real
        let st = gauge_state(gauge, &run.v);
        let rot = if st.psi2.norm() > 0.0 {
            st.psi2.conj() / st.psi2.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let psi1 = st.psi1 * rot;
        let alt = Vector5::new(psi1.re, st.psi2.norm(), psi1.im, run.v[3], run.v[4]);
        let retry = iterate(params, Gauge::Psi2Real, alt, config);
        if retry.converged {
            run.iterations += retry.iterations;
            run.v = retry.v;
            gauge = Gauge::Psi2Real;
        }
    }

    let mu = Complex64::new(run.v[3], run.v[4]);
    let state = gauge_state(gauge, &run.v)
        .normalized()
        .and_then(|s| canonicalize_gauge(&s));
    let point = state.and_then(|s| SpectrumPoint::new(params, s, mu, Method::Newton));
    match point {
        Ok(point) => NewtonOutcome::Converged {
            unknowns: RealUnknowns::from_state(&point.state, point.mu),
            point,
            iterations: run.iterations,
        },
        Err(_) => NewtonOutcome::Diverged {
            residual_norm: run.norm,
            iterations: run.iterations,
        },
    }
}

/// Deterministic quasi-uniform points on the unit sphere (Fibonacci lattice).
fn sphere_seeds(params: &DimerParams, count: usize) -> Vec<RealUnknowns> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * k as f64;
            let mu_r = if k % 2 == 0 { params.coupling_j } else { -params.coupling_j };
            RealUnknowns::new(r * theta.cos(), r * theta.sin(), z, mu_r, -params.gamma)
        })
        .collect()
}

/// Multi-start solve: polynomial solutions, linear eigenpairs and sphere
/// seeds, converged results deduplicated in (s, μ) and sorted by (s, Re μ).
pub fn solve_all(params: &DimerParams, config: &NewtonConfig) -> Vec<SpectrumPoint> {
    solve_all_with_seeds(params, config, &[])
}

/// [`solve_all`] with additional caller seeds (e.g. the previous grid point).
pub fn solve_all_with_seeds(params: &DimerParams, config: &NewtonConfig, extra: &[RealUnknowns]) -> Vec<SpectrumPoint> {
    let mut seeds: Vec<RealUnknowns> = Vec::new();
    if config.polynomial_seeds {
        if let Ok(points) = solve_polynomial(params) {
            seeds.extend(points.iter().map(|p| RealUnknowns::from_state(&p.state, p.mu)));
        }
    }
    seeds.extend_from_slice(extra);
    if let Ok(lin) = linear_spectrum(&params.without_nonlinearity()) {
        seeds.push(RealUnknowns::from_state(&lin.eigvec_plus, lin.mu_plus));
        seeds.push(RealUnknowns::from_state(&lin.eigvec_minus, lin.mu_minus));
    }
    seeds.extend(sphere_seeds(params, config.seed_count));

    let outcomes: Vec<NewtonOutcome> = seeds
        .par_iter()
        .map(|seed| solve_from_seed(params, seed, config))
        .collect();

    let mut kept: Vec<SpectrumPoint> = Vec::new();
    for point in outcomes.iter().filter_map(NewtonOutcome::point) {
        if kept.iter().all(|k| k.distance(point) >= config.dedup_radius) {
            kept.push(*point);
        }
    }
    kept.sort_by(|a, b| {
        a.imbalance_s
            .total_cmp(&b.imbalance_s)
            .then(a.mu.re.total_cmp(&b.mu.re))
            .then(a.mu.im.total_cmp(&b.mu.im))
    });
    kept
}

/// Natural-parameter continuation over a monotone detuning grid.
pub fn sweep_with_continuation(template: &DimerParams, deltas: &[f64], config: &NewtonConfig) -> BranchSweep {
    let mut all: Vec<Vec<SpectrumPoint>> = Vec::with_capacity(deltas.len());
    let mut carried: Vec<RealUnknowns> = Vec::new();
    for &delta in deltas {
        let params = template.with_delta(delta);
        let points = solve_all_with_seeds(&params, config, &carried);
        carried = points.iter().map(|p| RealUnknowns::from_state(&p.state, p.mu)).collect();
        all.push(points);
    }
    BranchSweep::track(*template, deltas.to_vec(), all)
}
