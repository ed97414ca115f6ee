//! Self-test suite run by `ep-dimer verify`.

use std::io::Write;
use std::time::{Duration, Instant};

use ep_dimer::branch::{uniform_grid, BranchSweep};
use ep_dimer::ep::{detect_ep_using, find_degeneracies_using, DegeneracyKind, DetectConfig};
use ep_dimer::linear::linear_spectrum;
use ep_dimer::model::residual_of;
use ep_dimer::newton::{jacobian, residual_vector, solve_all, NewtonConfig, RealUnknowns};
use ep_dimer::poly::{polynomial_coeffs, solve_with_polynomial};
use ep_dimer::{DimerError, DimerParams, SpectrumPoint};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ep::{cmd_ep, EpRequest};
use crate::error::{CliError, Result};

/// Deliberate defects for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the s⁴ coefficient.
    A4Sign,
}

type Check<'a> = Box<dyn Fn() -> std::result::Result<String, String> + 'a>;
type Solver<'a> = &'a (dyn Fn(&DimerParams) -> ep_dimer::Result<Vec<SpectrumPoint>> + Sync);

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: std::result::Result<String, String>,
    pub elapsed: Duration,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed())
    }
}

/// Hausdorff distance between two solution sets in (s, Re μ, Im μ), max norm.
pub fn set_distance(a: &[SpectrumPoint], b: &[SpectrumPoint]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let gap = |p: &SpectrumPoint, q: &SpectrumPoint| {
        (p.imbalance_s - q.imbalance_s)
            .abs()
            .max((p.mu.re - q.mu.re).abs())
            .max((p.mu.im - q.mu.im).abs())
    };
    let one_way = |x: &[SpectrumPoint], y: &[SpectrumPoint]| {
        x.iter()
            .map(|p| y.iter().map(|q| gap(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(solver: Solver, p: &DimerParams) -> std::result::Result<Vec<SpectrumPoint>, String> {
    solver(p).map_err(|e| format!("solver failed at {p:?}: {e}"))
}

fn sweep_with(solver: Solver, template: DimerParams, deltas: Vec<f64>) -> std::result::Result<BranchSweep, String> {
    let solutions = deltas
        .iter()
        .map(|&d| solve(solver, &template.with_delta(d)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(BranchSweep::track(template, deltas, solutions))
}

fn refine_with(solver: Solver<'_>) -> impl Fn(&DimerParams) -> Vec<SpectrumPoint> + '_ {
    move |p| solver(p).unwrap_or_default()
}

fn linear_ep(solver: Solver) -> std::result::Result<String, String> {
    let p = DimerParams::linear(0.0, 1.0, 1.0).unwrap();
    let target = Complex64::new(0.0, -1.0);
    let lin = linear_spectrum(&p).map_err(|e| e.to_string())?;
    ensure((lin.mu_plus - target).norm() < 1e-10 && (lin.mu_minus - target).norm() < 1e-10, || {
        format!("closed form gives {} and {}", lin.mu_plus, lin.mu_minus)
    })?;
    let poly = solve(solver, &p)?;
    let newton = solve_all(&p, &NewtonConfig::default());
    for (name, pts) in [("polynomial", &poly), ("newton", &newton)] {
        ensure(!pts.is_empty(), || format!("{name} found no solution"))?;
        for pt in pts {
            ensure((pt.mu - target).norm() < 1e-10, || format!("{name} gives mu = {}", pt.mu))?;
        }
    }
    Ok(format!("{} polynomial, {} newton points at mu = -i", poly.len(), newton.len()))
}

fn splitting_exponent() -> std::result::Result<String, String> {
    let n = 31;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let delta = 10f64.powf(-6.0 + 3.0 * k as f64 / (n - 1) as f64);
        let lin = linear_spectrum(&DimerParams::linear(delta, 1.0, 1.0).unwrap()).map_err(|e| e.to_string())?;
        let (x, y) = (delta.ln(), (lin.mu_plus - lin.mu_minus).norm().ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let nf = n as f64;
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let prefactor = ((sy - slope * sx) / nf).exp();
    let expected = 2.0 * 2f64.sqrt();
    ensure((slope - 0.5).abs() <= 0.01, || format!("slope {slope}"))?;
    ensure((prefactor / expected - 1.0).abs() <= 0.02, || format!("prefactor {prefactor}"))?;
    Ok(format!("slope {slope:.5}, prefactor {prefactor:.5}"))
}

fn equal_gain_regression(solver: Solver) -> std::result::Result<String, String> {
    let template = DimerParams::new(0.0, 1.0, 1.0, 1.8, 1.8).unwrap();
    let count = |d: f64| solve(solver, &template.with_delta(d)).map(|v| v.len());
    let deltas = uniform_grid(-0.1, 0.1, 201);
    for &d in &deltas {
        let n = count(d)?;
        if d.abs() < 0.036 {
            ensure(n == 4, || format!("{n} roots at delta = {d}, expected 4"))?;
        } else if d.abs() > 0.040 {
            ensure(n == 2, || format!("{n} roots at delta = {d}, expected 2"))?;
        }
    }
    // window edge by bisection on the root count
    let (mut lo, mut hi) = (0.0, 0.1);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if count(mid)? == 4 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let edge = 0.5 * (lo + hi);
    ensure((edge - 0.038).abs() <= 0.002, || format!("four-root window ends at {edge}"))?;

    let sweep = sweep_with(solver, template, deltas)?;
    let config = DetectConfig::default();
    let eps = detect_ep_using(&sweep, &config, refine_with(solver));
    ensure(eps.len() == 1, || format!("{} EPs detected", eps.len()))?;
    let ep = eps[0];
    ensure(ep.delta_ep.abs() <= 1e-4, || format!("EP at delta = {}", ep.delta_ep))?;
    ensure((ep.mu_ep - Complex64::new(1.2, -1.0)).norm() <= 1e-6, || format!("EP mu = {}", ep.mu_ep))?;
    let all = find_degeneracies_using(&sweep, &config, refine_with(solver));
    let lower = all
        .iter()
        .find(|d| d.kind == DegeneracyKind::ReOnlyCrossing && d.mu_a.re < 1.0)
        .ok_or_else(|| "lower Re-mu crossing not found".to_string())?;
    ensure(
        !all.iter()
            .any(|d| d.kind == DegeneracyKind::Exceptional && d.mu_a.re < 1.0),
        || "lower crossing reported as EP".into(),
    )?;
    Ok(format!(
        "edge {edge:.5}, EP at {:.2e} mu = {:.8}{:+.8}i, lower crossing Im gap {:.3}",
        ep.delta_ep,
        ep.mu_ep.re,
        ep.mu_ep.im,
        (lower.mu_a.im - lower.mu_b.im).abs()
    ))
}

fn unequal_gain_regression(solver: Solver) -> std::result::Result<String, String> {
    let template = DimerParams::new(0.0, 1.0, 1.0, 1.8, 2.4).unwrap();
    let sweep = sweep_with(solver, template, uniform_grid(0.1, 0.3, 201))?;
    let eps = detect_ep_using(&sweep, &DetectConfig::default(), refine_with(solver));
    ensure(eps.len() == 1, || format!("{} EPs detected", eps.len()))?;
    let ep = eps[0];
    ensure((ep.delta_ep - 0.2).abs() <= 1e-4, || format!("EP at delta = {}", ep.delta_ep))?;
    ensure((ep.mu_ep - Complex64::new(1.4, -1.0)).norm() <= 1e-6, || format!("EP mu = {}", ep.mu_ep))?;
    ensure(ep.imbalance().abs() <= 1e-8, || format!("EP s = {}", ep.imbalance()))?;
    Ok(format!("EP at {:.10} mu = {:.8}{:+.8}i", ep.delta_ep, ep.mu_ep.re, ep.mu_ep.im))
}

fn cross_method(solver: Solver) -> std::result::Result<String, String> {
    let grids = [
        (DimerParams::linear(0.0, 1.0, 1.0).unwrap(), uniform_grid(-1.0, 1.0, 201)),
        (DimerParams::new(0.0, 1.0, 1.0, 1.8, 1.8).unwrap(), uniform_grid(-0.1, 0.1, 201)),
        (DimerParams::new(0.0, 1.0, 1.0, 1.8, 2.4).unwrap(), uniform_grid(0.1, 0.3, 201)),
    ];
    let mut worst: f64 = 0.0;
    for (template, deltas) in &grids {
        for &d in deltas {
            let p = template.with_delta(d);
            let dist = set_distance(&solve(solver, &p)?, &solve_all(&p, &NewtonConfig::default()));
            ensure(dist < 1e-8, || format!("set distance {dist:e} at {p:?}"))?;
            worst = worst.max(dist);
        }
    }
    Ok(format!("max set distance {worst:.2e} over 603 grid points"))
}

fn random_params(rng: &mut ChaCha8Rng) -> DimerParams {
    DimerParams::new(
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(0.1..=3.0),
        rng.gen_range(0.1..=3.0),
        rng.gen_range(-3.0..=3.0),
        rng.gen_range(-3.0..=3.0),
    )
    .unwrap()
}

fn residual_suite(solver: Solver) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let poly = solve(solver, &p)?;
        for pt in &poly {
            let im_err = (pt.mu.im + p.gamma * (1.0 + pt.imbalance_s)).abs();
            ensure(im_err < 1e-10, || format!("Im mu off by {im_err:e} at {p:?}"))?;
        }
        let newton = solve_all(&p, &NewtonConfig::default());
        for pt in poly.iter().chain(&newton) {
            let r = residual_of(&p, &pt.state, pt.mu).map_err(|e| e.to_string())?;
            ensure(r < 1e-8, || format!("residual {r:e} ({}) at {p:?}", pt.method))?;
            worst = worst.max(r);
            points += 1;
        }
    }
    Ok(format!("{points} points, max residual {worst:.2e}"))
}

fn symmetry(solver: Solver) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e77);
    for _ in 0..100 {
        let g = rng.gen_range(-3.0..=3.0);
        let p = DimerParams::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(0.1..=3.0),
            g,
            g,
        )
        .unwrap();
        let fwd = solve(solver, &p)?;
        let back = solve(solver, &p.with_delta(-p.delta))?;
        let mirrored = |a: &[SpectrumPoint], b: &[SpectrumPoint]| {
            a.iter().all(|x| {
                b.iter()
                    .any(|y| (x.imbalance_s + y.imbalance_s).abs() < 1e-8 && (x.mu.re - y.mu.re).abs() < 1e-8)
            })
        };
        ensure(fwd.len() == back.len() && mirrored(&fwd, &back) && mirrored(&back, &fwd), || {
            format!("(delta, s) -> (-delta, -s) broken at {p:?}")
        })?;
    }
    Ok("100 equal-gain draws mirror".into())
}

fn linear_limit(solver: Solver) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11ea);
    for _ in 0..100 {
        let p = DimerParams::linear(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(0.1..=3.0),
        )
        .unwrap();
        let lin = linear_spectrum(&p).map_err(|e| e.to_string())?;
        let exact = [lin.mu_plus, lin.mu_minus];
        let pts = solve(solver, &p)?;
        ensure(!pts.is_empty(), || format!("no solution at {p:?}"))?;
        for pt in &pts {
            ensure(exact.iter().any(|mu| (pt.mu - mu).norm() < 1e-8), || {
                format!("mu = {} is not a linear eigenvalue at {p:?}", pt.mu)
            })?;
        }
        for mu in exact {
            ensure(pts.iter().any(|pt| (pt.mu - mu).norm() < 1e-8), || {
                format!("linear eigenvalue {mu} missing at {p:?}")
            })?;
        }
    }
    Ok("100 draws match the closed form".into())
}

fn no_ep_guard(solver: Solver) -> std::result::Result<String, String> {
    for ratio in [0.8, 0.9, 1.1, 1.2] {
        let template = DimerParams::new(0.0, 1.0, ratio, 1.8, 2.4).unwrap();
        let sweep = sweep_with(solver, template, uniform_grid(-0.3, 0.5, 161))?;
        let eps = detect_ep_using(&sweep, &DetectConfig::default(), refine_with(solver));
        ensure(eps.is_empty(), || format!("false EP at J/Gamma = {ratio}: {eps:?}"))?;
        let outcome = cmd_ep(&EpRequest::new(template), &mut std::io::sink()).map_err(|e| e.to_string())?;
        ensure(outcome.exit_code() == 2, || format!("ep exit code {} at J/Gamma = {ratio}", outcome.exit_code()))?;
    }
    Ok("no EP for J/Gamma in {0.8, 0.9, 1.1, 1.2}".into())
}

fn jacobian_check() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ac0);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let v: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.5..1.5));
        let at = |v: [f64; 5]| RealUnknowns::new(v[0], v[1], v[2], v[3], v[4]);
        let jac = jacobian(&p, &at(v));
        for c in 0..5 {
            let (mut up, mut down) = (v, v);
            up[c] += h;
            down[c] -= h;
            let (fu, fd) = (residual_vector(&p, &at(up)), residual_vector(&p, &at(down)));
            for r in 0..5 {
                let numeric = (fu[r] - fd[r]) / (2.0 * h);
                worst = worst.max((numeric - jac[r][c]).abs() / jac[r][c].abs().max(1.0));
            }
        }
    }
    ensure(worst < 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn degree_drop(solver: Solver) -> std::result::Result<String, String> {
    let p = DimerParams::new(0.1, 0.0, 1.0, 1.8, 1.8).unwrap();
    match solver(&p) {
        Err(DimerError::DegreeDrop) => Ok("Gamma = 0 reported as a degree drop".into()),
        other => Err(format!("expected a degree-drop error, got {other:?}")),
    }
}

pub fn run_checks(fault: Fault) -> VerifyReport {
    let solver = move |p: &DimerParams| {
        let mut poly = polynomial_coeffs(p);
        if fault == Fault::A4Sign {
            poly.coeffs[4] = -poly.coeffs[4];
        }
        solve_with_polynomial(p, &poly)
    };
    let s: Solver = &solver;
    let checks: Vec<(&'static str, Check<'_>)> = vec![
        ("linear-ep", Box::new(move || linear_ep(s))),
        ("splitting-exponent", Box::new(splitting_exponent)),
        ("equal-gain-regression", Box::new(move || equal_gain_regression(s))),
        ("unequal-gain-regression", Box::new(move || unequal_gain_regression(s))),
        ("cross-method", Box::new(move || cross_method(s))),
        ("residual-suite", Box::new(move || residual_suite(s))),
        ("symmetry", Box::new(move || symmetry(s))),
        ("linear-limit", Box::new(move || linear_limit(s))),
        ("no-ep-guard", Box::new(move || no_ep_guard(s))),
        ("jacobian", Box::new(jacobian_check)),
        ("degree-drop", Box::new(move || degree_drop(s))),
    ];
    let checks = checks
        .into_iter()
        .map(|(name, check)| {
            let started = Instant::now();
            let outcome = check();
            CheckResult {
                name,
                outcome,
                elapsed: started.elapsed(),
            }
        })
        .collect();
    VerifyReport { checks }
}

/// Run the suite and print one line per check.
pub fn cmd_verify<W: Write>(fault: Fault, out: &mut W) -> Result<VerifyReport> {
    let report = run_checks(fault);
    for check in &report.checks {
        let (status, detail) = match &check.outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(
            out,
            "{status} {:<20} {:>8.3} s  {detail}",
            check.name,
            check.elapsed.as_secs_f64()
        )
        .map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(report)
}
