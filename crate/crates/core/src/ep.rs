//! Exceptional points: the analytic location for the saturable dimer and
//! detection of coalescences in swept branch data.
//!
//! An EP needs J = ±Γ. With equal populations the σ_z part of the effective
//! Hamiltonian is X = δ + (g₁ − g₂)/3 − iΓ, so X² + J² vanishes at
//! δ = −(g₁ − g₂)/3, where μ = −iΓ + (g₁ + g₂)/3 and the eigenvectors merge
//! into (1, ±i)/√2.
//!
//! Detection looks for branch pairs whose μ agree in both real and imaginary
//! part. A real-part-only crossing is reported separately and never counted
//! as an EP; the same holds for fold edges, where two nonlinear branches
//! merge but the Hamiltonian at the merged populations is not defective.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::branch::BranchSweep;
use crate::model::{ep_state, imbalance_of, DimerParams, ModeState, SpectrumPoint};
use crate::poly::{effective_decomposition, solve_polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpSource {
    Analytic,
    Detected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpLocation {
    pub delta_ep: f64,
    /// Signed coupling of this EP (J = +Γ or J = −Γ).
    pub coupling_j: f64,
    pub mu_ep: Complex64,
    pub state_ep: ModeState,
    pub source: EpSource,
}

impl EpLocation {
    pub fn j_ep_magnitude(&self) -> f64 {
        self.coupling_j.abs()
    }

    pub fn imbalance(&self) -> f64 {
        imbalance_of(&self.state_ep)
    }
}

/// Both EPs (J = +Γ, then J = −Γ) of the saturable dimer.
pub fn analytic_ep(gamma: f64, g1: f64, g2: f64) -> [EpLocation; 2] {
    let delta_ep = (g2 - g1) / 3.0;
    let mu_ep = Complex64::new((g1 + g2) / 3.0, -gamma);
    // σ_z coefficient at populations ½, ½ must have zero real part
    let re_x = delta_ep + 0.5 * g1 / 1.5 - 0.5 * g2 / 1.5;
    debug_assert!(re_x.abs() <= 1e-12 * (1.0 + g1.abs() + g2.abs()));
    [1.0, -1.0].map(|sign| EpLocation {
        delta_ep,
        coupling_j: sign * gamma,
        mu_ep,
        state_ep: ep_state(sign),
        source: EpSource::Analytic,
    })
}

/// Traceless part of H at the EP with J = sign·Γ: −iΓσ_z + Jσ_x.
pub fn ep_effective_hamiltonian(gamma: f64, sign: f64) -> Matrix2<Complex64> {
    let j = Complex64::new(sign.signum() * gamma, 0.0);
    let ig = Complex64::new(0.0, gamma);
    Matrix2::new(-ig, j, j, ig)
}

/// EPs can only exist on the J = ±Γ manifold.
pub fn ep_existence_check(params: &DimerParams, tol: f64) -> bool {
    (params.coupling_j.abs() - params.gamma).abs() <= tol
}

pub const DEFAULT_TOL_COALESCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Both |ΔRe μ| and |ΔIm μ| must fall below this.
    pub tol_coalesce: f64,
    /// Refine grid minima by re-solving between neighbouring grid points.
    pub refine: bool,
    pub refine_iters: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            tol_coalesce: DEFAULT_TOL_COALESCE,
            refine: true,
            refine_iters: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneracyKind {
    /// μ and the eigenvector coalesce and the Hamiltonian is defective.
    Exceptional,
    /// Re μ crosses while Im μ stays split ("diabolic-like crossing, not EP").
    ReOnlyCrossing,
    /// Two nonlinear branches merge at a fold edge.
    Fold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degeneracy {
    pub kind: DegeneracyKind,
    pub delta: f64,
    pub branches: (usize, usize),
    pub mu_a: Complex64,
    pub mu_b: Complex64,
    pub state: ModeState,
}

impl Degeneracy {
    pub fn gap(&self) -> Complex64 {
        self.mu_a - self.mu_b
    }
}

/// Detected EPs with the default detection settings and tolerance `tol_coalesce`.
pub fn detect_ep(sweep: &BranchSweep, tol_coalesce: f64) -> Vec<EpLocation> {
    detect_ep_with(
        sweep,
        &DetectConfig {
            tol_coalesce,
            ..DetectConfig::default()
        },
    )
}

pub fn detect_ep_with(sweep: &BranchSweep, config: &DetectConfig) -> Vec<EpLocation> {
    detect_ep_using(sweep, config, |p| solve_polynomial(p).unwrap_or_default())
}

/// [`detect_ep_with`] with a caller-supplied solver for refinement.
pub fn detect_ep_using<F>(sweep: &BranchSweep, config: &DetectConfig, solver: F) -> Vec<EpLocation>
where
    F: Fn(&DimerParams) -> Vec<SpectrumPoint>,
{
    find_degeneracies_using(sweep, config, solver)
        .into_iter()
        .filter(|d| d.kind == DegeneracyKind::Exceptional)
        .map(|d| EpLocation {
            delta_ep: d.delta,
            coupling_j: sweep.params.coupling_j,
            mu_ep: 0.5 * (d.mu_a + d.mu_b),
            state_ep: d.state,
            source: EpSource::Detected,
        })
        .collect()
}

/// All classified degeneracies, refining with the polynomial solver.
pub fn find_degeneracies(sweep: &BranchSweep, config: &DetectConfig) -> Vec<Degeneracy> {
    find_degeneracies_using(sweep, config, |p| solve_polynomial(p).unwrap_or_default())
}

/// All classified degeneracies; `solver` recomputes the solution set at
/// off-grid detunings during refinement.
pub fn find_degeneracies_using<F>(sweep: &BranchSweep, config: &DetectConfig, solver: F) -> Vec<Degeneracy>
where
    F: Fn(&DimerParams) -> Vec<SpectrumPoint>,
{
    let tol = config.tol_coalesce;
    let ids = sweep.branch_ids();
    let mut found: Vec<Degeneracy> = Vec::new();

    for (ai, &a) in ids.iter().enumerate() {
        for &b in &ids[ai + 1..] {
            let common: Vec<(usize, SpectrumPoint, SpectrumPoint)> = (0..sweep.len())
                .filter_map(|i| Some((i, *sweep.point(i, a)?, *sweep.point(i, b)?)))
                .collect();
            for run in contiguous_runs(&common) {
                let gaps: Vec<f64> = run.iter().map(|(_, pa, pb)| (pa.mu - pb.mu).norm()).collect();
                for k in 0..run.len() {
                    let left = if k > 0 { gaps[k - 1] } else { f64::INFINITY };
                    let right = if k + 1 < run.len() { gaps[k + 1] } else { f64::INFINITY };
                    if !(gaps[k] <= left && gaps[k] <= right) {
                        continue;
                    }
                    // plateaus: only the first index of equal neighbours
                    if k > 0 && gaps[k] == left {
                        continue;
                    }
                    if let Some(d) = refine_coalescence(sweep, config, &solver, run, k, (a, b)) {
                        found.push(d);
                    }
                }
                for w in run.windows(2) {
                    let (i0, pa0, pb0) = w[0];
                    let (_, pa1, pb1) = w[1];
                    let r0 = pa0.mu.re - pb0.mu.re;
                    let r1 = pa1.mu.re - pb1.mu.re;
                    let crosses = r0 == 0.0 || r0.signum() != r1.signum();
                    if !crosses || r1 == 0.0 && r0 != 0.0 {
                        continue;
                    }
                    let t = if r0 == r1 { 0.0 } else { r0 / (r0 - r1) };
                    let im_gap = (pa0.mu.im - pb0.mu.im) * (1.0 - t) + (pa1.mu.im - pb1.mu.im) * t;
                    if im_gap.abs() <= tol {
                        continue;
                    }
                    let i1 = i0 + 1;
                    found.push(Degeneracy {
                        kind: DegeneracyKind::ReOnlyCrossing,
                        delta: sweep.deltas[i0] * (1.0 - t) + sweep.deltas[i1] * t,
                        branches: (a, b),
                        mu_a: pa0.mu * (1.0 - t) + pa1.mu * t,
                        mu_b: pb0.mu * (1.0 - t) + pb1.mu * t,
                        state: pa0.state,
                    });
                }
            }
        }
    }

    // merge repeats of the same coalescence reported by several branch pairs
    let step = grid_step(sweep);
    let mut unique: Vec<Degeneracy> = Vec::new();
    for d in found {
        let duplicate = unique.iter().any(|u| {
            u.kind == d.kind
                && (u.delta - d.delta).abs() <= step
                && (0.5 * (u.mu_a + u.mu_b) - 0.5 * (d.mu_a + d.mu_b)).norm() <= tol.max(1e-9)
        });
        if !duplicate {
            unique.push(d);
        }
    }
    unique.sort_by(|x, y| x.delta.total_cmp(&y.delta));
    unique
}

fn grid_step(sweep: &BranchSweep) -> f64 {
    sweep
        .deltas
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

type PairSample = (usize, SpectrumPoint, SpectrumPoint);

fn contiguous_runs(common: &[PairSample]) -> Vec<&[PairSample]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for k in 1..=common.len() {
        if k == common.len() || common[k].0 != common[k - 1].0 + 1 {
            if k > start {
                runs.push(&common[start..k]);
            }
            start = k;
        }
    }
    runs
}

// Closest pair of solutions near `centre` in (s, μ) space.
fn closest_pair(points: &[SpectrumPoint], centre: (f64, Complex64), radius: f64) -> Option<(SpectrumPoint, SpectrumPoint)> {
    let near: Vec<&SpectrumPoint> = points
        .iter()
        .filter(|p| {
            let ds = p.imbalance_s - centre.0;
            (ds * ds + (p.mu - centre.1).norm_sqr()).sqrt() <= radius
        })
        .collect();
    let mut best: Option<(f64, SpectrumPoint, SpectrumPoint)> = None;
    for i in 0..near.len() {
        for j in i + 1..near.len() {
            let g = (near[i].mu - near[j].mu).norm();
            if best.as_ref().is_none_or(|(bg, _, _)| g < *bg) {
                best = Some((g, *near[i], *near[j]));
            }
        }
    }
    best.map(|(_, p, q)| (p, q))
}

fn refine_coalescence<F>(
    sweep: &BranchSweep,
    config: &DetectConfig,
    solver: &F,
    run: &[PairSample],
    k: usize,
    branches: (usize, usize),
) -> Option<Degeneracy>
where
    F: Fn(&DimerParams) -> Vec<SpectrumPoint>,
{
    let tol = config.tol_coalesce;
    let (index, pa, pb) = run[k];
    let mut best_delta = sweep.deltas[index];
    let mut best_pair = (pa, pb);
    let best_gap = (pa.mu - pb.mu).norm();

    if config.refine && best_gap > 0.0 {
        let lo = sweep.deltas[run[k.saturating_sub(1)].0];
        let hi = sweep.deltas[run[(k + 1).min(run.len() - 1)].0];
        let centre = (0.5 * (pa.imbalance_s + pb.imbalance_s), 0.5 * (pa.mu + pb.mu));
        let radius = 2.0 * best_gap + 0.1;
        let gap_at = |delta: f64| -> (f64, Option<(SpectrumPoint, SpectrumPoint)>) {
            let pts = solver(&sweep.params.with_delta(delta));
            match closest_pair(&pts, centre, radius) {
                Some((p, q)) => ((p.mu - q.mu).norm(), Some((p, q))),
                None => (f64::INFINITY, None),
            }
        };
        // golden-section search on the pair gap
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo.min(hi), lo.max(hi));
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut p1) = gap_at(x1);
        let (mut f2, mut p2) = gap_at(x2);
        for _ in 0..config.refine_iters {
            if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                p2 = p1;
                x1 = b - ratio * (b - a);
                (f1, p1) = gap_at(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                p1 = p2;
                x2 = a + ratio * (b - a);
                (f2, p2) = gap_at(x2);
            }
        }
        let (x, f, p) = if f1 <= f2 { (x1, f1, p1) } else { (x2, f2, p2) };
        if let Some(pair) = p {
            if f < best_gap {
                best_delta = x;
                best_pair = pair;
            }
        }
    }

    let (p, q) = best_pair;
    let gap = p.mu - q.mu;
    if !(gap.re.abs() < tol && gap.im.abs() < tol) {
        return None;
    }
    let mean_s = 0.5 * (p.imbalance_s + q.imbalance_s);
    let params = sweep.params.with_delta(best_delta);
    let defective = effective_decomposition(&params, mean_s.clamp(-1.0, 1.0))
        .map(|e| e.half_gap().norm() < tol)
        .unwrap_or(false);
    Some(Degeneracy {
        kind: if defective {
            DegeneracyKind::Exceptional
        } else {
            DegeneracyKind::Fold
        },
        delta: best_delta,
        branches,
        mu_a: p.mu,
        mu_b: q.mu,
        state: p.state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::residual_of;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn analytic_examples() {
        let [plus, minus] = analytic_ep(1.0, 1.8, 1.8);
        assert_eq!(plus.delta_ep, 0.0);
        assert!((plus.mu_ep - c(1.2, -1.0)).norm() < 1e-15);
        assert_eq!(plus.coupling_j, 1.0);
        assert_eq!(minus.coupling_j, -1.0);

        let [ep, _] = analytic_ep(1.0, 1.8, 2.4);
        assert!((ep.delta_ep - 0.2).abs() < 1e-15);
        assert!((ep.mu_ep - c(1.4, -1.0)).norm() < 1e-15);

        let [ep, _] = analytic_ep(1.0, 0.0, 0.0);
        assert_eq!(ep.delta_ep, 0.0);
        assert_eq!(ep.mu_ep, c(0.0, -1.0));
    }

    #[test]
    fn analytic_ep_solves_the_eigen_equation() {
        for &(gamma, g1, g2) in &[(1.0, 1.8, 2.4), (0.5, -1.0, 2.0), (2.0, 3.0, 0.0)] {
            for ep in analytic_ep(gamma, g1, g2) {
                let p = DimerParams::new(ep.delta_ep, gamma, ep.coupling_j, g1, g2).unwrap();
                assert!(residual_of(&p, &ep.state_ep, ep.mu_ep).unwrap() < 1e-12);
                assert!(ep.imbalance().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn effective_hamiltonian_is_nilpotent() {
        let h = ep_effective_hamiltonian(1.0, 1.0);
        assert_eq!(h, Matrix2::new(c(0.0, -1.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)));
        for sign in [1.0, -1.0] {
            for gamma in [1.0, 0.3, 2.5] {
                let h = ep_effective_hamiltonian(gamma, sign);
                let sq = h * h;
                assert!(sq.iter().all(|z| z.norm() < 1e-14));
                let v = ep_state(sign);
                let hv = h * nalgebra::Vector2::new(v.psi1, v.psi2);
                assert!(hv.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn existence_check() {
        let p = |j: f64| DimerParams::new(0.0, 1.0, j, 0.0, 0.0).unwrap();
        assert!(ep_existence_check(&p(1.0), 1e-9));
        assert!(!ep_existence_check(&p(0.9), 1e-6));
        assert!(ep_existence_check(&p(-1.0), 1e-9));
    }
}
