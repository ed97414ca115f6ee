use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ep_dimer::branch::uniform_grid;
use ep_dimer::ep::{detect_ep, find_degeneracies, DegeneracyKind, DetectConfig};
use ep_dimer::linear::linear_spectrum;
use ep_dimer::newton::{jacobian, residual_vector, solve_all, NewtonConfig, RealUnknowns};
use ep_dimer::poly::{solve_polynomial, sweep_polynomial};
use ep_dimer::{DimerParams, SpectrumPoint};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn params(delta: f64, gamma: f64, j: f64, g1: f64, g2: f64) -> DimerParams {
    DimerParams::new(delta, gamma, j, g1, g2).unwrap()
}

fn gap(a: (f64, Complex64), b: (f64, Complex64)) -> f64 {
    (a.0 - b.0)
        .abs()
        .max((a.1.re - b.1.re).abs())
        .max((a.1.im - b.1.im).abs())
}

fn hausdorff(a: &[(f64, Complex64)], b: &[(f64, Complex64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let one_way = |x: &[(f64, Complex64)], y: &[(f64, Complex64)]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| gap(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn coords(points: &[SpectrumPoint]) -> Vec<(f64, Complex64)> {
    points.iter().map(|p| (p.imbalance_s, p.mu)).collect()
}

// H ψ − μ ψ evaluated from scratch, relative to |μ|.
fn eigen_residual(p: &DimerParams, point: &SpectrumPoint) -> f64 {
    let [a, b] = [point.state.psi1, point.state.psi2];
    let (n1, n2) = (a.norm_sqr(), b.norm_sqr());
    let h11 = c(p.delta + p.g1 / (1.0 + n1), -2.0 * p.gamma);
    let h22 = c(-p.delta + p.g2 / (1.0 + n2), 0.0);
    let r1 = h11 * a + p.coupling_j * b - point.mu * a;
    let r2 = p.coupling_j * a + h22 * b - point.mu * b;
    (r1.norm_sqr() + r2.norm_sqr()).sqrt() / point.mu.norm().max(1.0)
}

// Self-consistency function at imbalance s, scaled by s² so it stays finite
// at s = 0. Balancing the loss against Im μ fixes Im μ = −Γ(1+s); the
// imaginary part of det(H − μ) = 0 then gives Re μ, and what is left of the
// real part must vanish.
fn consistency(p: &DimerParams, s: f64) -> f64 {
    let ar = p.delta + p.g1 / (1.0 + 0.5 * (1.0 + s));
    let br = -p.delta + p.g2 / (1.0 + 0.5 * (1.0 - s));
    let num = (1.0 + s) * ar - (1.0 - s) * br;
    let j2 = p.coupling_j * p.coupling_j;
    0.25 * (2.0 * s * ar - num) * (2.0 * s * br - num) + s * s * (p.gamma * p.gamma * (1.0 - s * s) - j2)
}

fn oracle_root_count(p: &DimerParams) -> usize {
    let n = 40_000;
    let grid: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&s| consistency(p, s)).collect();
    values.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

// Zero-gain EP location: equal populations, and the effective 2×2 problem
// [[δ + g₁/1.5 − 2iΓ, J], [J, −δ + g₂/1.5]] must be defective.
fn oracle_ep(gamma: f64, g1: f64, g2: f64) -> (f64, Complex64) {
    let delta = (g2 - g1) / 3.0;
    let mu = c((g1 + g2) / 3.0, -gamma);
    (delta, mu)
}

fn linear_ep() -> Outcome {
    let p = params(0.0, 1.0, 1.0, 0.0, 0.0);
    let target = c(0.0, -1.0);
    let lin = linear_spectrum(&p).map_err(|e| e.to_string())?;
    let poly = solve_polynomial(&p).map_err(|e| e.to_string())?;
    let newton = solve_all(&p, &NewtonConfig::default());
    let worst = [lin.mu_plus, lin.mu_minus]
        .into_iter()
        .chain(poly.iter().map(|q| q.mu))
        .chain(newton.iter().map(|q| q.mu))
        .map(|mu| (mu - target).norm())
        .fold(0.0, f64::max);
    ensure(!poly.is_empty() && !newton.is_empty(), || "a method returned no solution".into())?;
    ensure(worst < 1e-10, || format!("max |mu + i| = {worst:.3e}"))?;
    Ok(format!("max |mu + i| = {worst:.1e}"))
}

fn splitting_exponent() -> Outcome {
    let n = 61;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let delta = 10f64.powf(-6.0 + 3.0 * k as f64 / (n - 1) as f64);
        let sp = linear_spectrum(&params(delta, 1.0, 1.0, 0.0, 0.0)).map_err(|e| e.to_string())?;
        let (x, y) = (delta.ln(), (sp.mu_plus - sp.mu_minus).norm().ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let nf = n as f64;
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let prefactor = ((sy - slope * sx) / nf).exp();
    let expected = 2.0 * 2f64.sqrt();
    ensure((slope - 0.5).abs() < 0.01, || format!("slope {slope}"))?;
    ensure((prefactor - expected).abs() / expected < 0.02, || {
        format!("prefactor {prefactor} vs {expected}")
    })?;
    Ok(format!("slope {slope:.6}, prefactor {prefactor:.6}"))
}

fn equal_gain_regression() -> Outcome {
    let template = params(0.0, 1.0, 1.0, 1.8, 1.8);
    let deltas = uniform_grid(-0.1, 0.1, 201);
    let sweep = sweep_polynomial(&template, &deltas).map_err(|e| e.to_string())?;

    // (a) root counts with multiplicity (the coalesced pair at the EP counts
    // twice), checked against the oracle, then the fold edge by bisection
    for &delta in &deltas {
        let got = solve_polynomial(&template.with_delta(delta)).map_err(|e| e.to_string())?.len();
        let want = if delta.abs() < 0.036 {
            4
        } else if delta.abs() > 0.040 {
            2
        } else {
            continue;
        };
        ensure(got == want, || format!("{got} roots at delta = {delta}, expected {want}"))?;
        if delta != 0.0 {
            let oracle = oracle_root_count(&template.with_delta(delta));
            ensure(oracle == want, || format!("oracle finds {oracle} roots at delta = {delta}"))?;
        }
    }
    let count_at = |delta: f64| solve_polynomial(&template.with_delta(delta)).map(|pts| pts.len());
    let oracle_at = |delta: f64| oracle_root_count(&template.with_delta(delta));
    let bisect = |f: &dyn Fn(f64) -> usize| {
        let (mut lo, mut hi) = (0.02, 0.06);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if f(mid) == 4 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let edge = bisect(&|d| count_at(d).unwrap_or(0));
    let oracle_edge = bisect(&oracle_at);
    ensure((edge - 0.038).abs() <= 0.002, || format!("fold edge at {edge}"))?;
    ensure((edge - oracle_edge).abs() < 1e-6, || {
        format!("fold edge {edge} vs oracle {oracle_edge}")
    })?;

    // (b) the EP
    let (d_ep, mu_ep) = oracle_ep(1.0, 1.8, 1.8);
    let eps = detect_ep(&sweep, DetectConfig::default().tol_coalesce);
    ensure(eps.len() == 1, || format!("{} EPs detected", eps.len()))?;
    let ep = &eps[0];
    ensure((ep.delta_ep - d_ep).abs() <= 1e-4, || format!("EP at delta = {}", ep.delta_ep))?;
    ensure((ep.mu_ep - mu_ep).norm() <= 1e-6, || format!("mu_EP = {}", ep.mu_ep))?;

    // (c) the lower Re μ degeneracy is not exceptional
    let degeneracies = find_degeneracies(&sweep, &DetectConfig::default());
    let lower: Vec<_> = degeneracies
        .iter()
        .filter(|d| d.kind != DegeneracyKind::Fold && 0.5 * (d.mu_a.re + d.mu_b.re) < mu_ep.re - 0.1)
        .collect();
    ensure(!lower.is_empty(), || "no lower Re mu degeneracy found".into())?;
    ensure(lower.iter().all(|d| d.kind == DegeneracyKind::ReOnlyCrossing), || {
        format!("lower degeneracy classified {:?}", lower[0].kind)
    })?;
    Ok(format!(
        "edge {edge:.5}, EP delta {:.1e}, |dmu| {:.1e}, lower crossing at Re mu {:.4}",
        ep.delta_ep,
        (ep.mu_ep - mu_ep).norm(),
        0.5 * (lower[0].mu_a.re + lower[0].mu_b.re)
    ))
}

fn unequal_gain_regression() -> Outcome {
    let template = params(0.0, 1.0, 1.0, 1.8, 2.4);
    let sweep = sweep_polynomial(&template, &uniform_grid(0.1, 0.3, 201)).map_err(|e| e.to_string())?;
    let (d_ep, mu_ep) = oracle_ep(1.0, 1.8, 2.4);
    let eps = detect_ep(&sweep, DetectConfig::default().tol_coalesce);
    ensure(eps.len() == 1, || format!("{} EPs detected", eps.len()))?;
    let ep = &eps[0];
    let s_ep = ep.imbalance();
    ensure((ep.delta_ep - d_ep).abs() <= 1e-4, || format!("EP at delta = {}", ep.delta_ep))?;
    ensure((ep.mu_ep - mu_ep).norm() <= 1e-6, || format!("mu_EP = {}", ep.mu_ep))?;
    ensure(s_ep.abs() <= 1e-8, || format!("s_EP = {s_ep}"))?;
    Ok(format!(
        "EP delta {:.6}, |dmu| {:.1e}, s {:.1e}",
        ep.delta_ep,
        (ep.mu_ep - mu_ep).norm(),
        s_ep
    ))
}

fn cross_method() -> Outcome {
    let config = NewtonConfig::default();
    let figures = [
        ("linear_case", params(0.0, 1.0, 1.0, 0.0, 0.0), -1.0, 1.0),
        ("equal_gain", params(0.0, 1.0, 1.0, 1.8, 1.8), -0.1, 0.1),
        ("unequal_gain", params(0.0, 1.0, 1.0, 1.8, 2.4), 0.1, 0.3),
    ];
    let mut worst: f64 = 0.0;
    let mut total = 0;
    for (name, template, lo, hi) in figures {
        for delta in uniform_grid(lo, hi, 201) {
            let p = template.with_delta(delta);
            let poly = solve_polynomial(&p).map_err(|e| format!("{name} delta = {delta}: {e}"))?;
            let newton = solve_all(&p, &config);
            let d = hausdorff(&coords(&poly), &coords(&newton));
            ensure(d < 1e-8, || format!("{name} delta = {delta}: distance {d:.3e}"))?;
            worst = worst.max(d);
            total += 1;
        }
    }
    Ok(format!("{total} grid points, max distance {worst:.1e}"))
}

fn residual_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let config = NewtonConfig::default();
    let (mut worst_res, mut worst_im, mut points): (f64, f64, usize) = (0.0, 0.0, 0);
    for draw in 0..1000 {
        let p = params(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(-3.0..=3.0),
            rng.gen_range(-3.0..=3.0),
        );
        let poly = solve_polynomial(&p).map_err(|e| format!("draw {draw} {p:?}: {e}"))?;
        for q in &poly {
            let im_err = (q.mu.im + p.gamma * (1.0 + q.imbalance_s)).abs();
            worst_im = worst_im.max(im_err);
            ensure(im_err < 1e-10, || format!("draw {draw} {p:?}: Im mu off by {im_err:.3e}"))?;
        }
        for q in poly.iter().chain(&solve_all(&p, &config)) {
            let r = eigen_residual(&p, q);
            worst_res = worst_res.max(r);
            points += 1;
            ensure(r < 1e-8, || format!("draw {draw} {p:?}: residual {r:.3e} ({:?})", q.method))?;
        }
    }
    Ok(format!("{points} points, max residual {worst_res:.1e}, max Im mu error {worst_im:.1e}"))
}

fn symmetry_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let g = rng.gen_range(-3.0..=3.0);
        let p = params(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(0.1..=3.0),
            g,
            g,
        );
        let plus = solve_polynomial(&p).map_err(|e| e.to_string())?;
        let minus = solve_polynomial(&p.with_delta(-p.delta)).map_err(|e| e.to_string())?;
        let mirrored: Vec<(f64, Complex64)> = plus.iter().map(|q| (-q.imbalance_s, c(q.mu.re, 0.0))).collect();
        let other: Vec<(f64, Complex64)> = minus.iter().map(|q| (q.imbalance_s, c(q.mu.re, 0.0))).collect();
        let d = hausdorff(&mirrored, &other);
        worst = worst.max(d);
        ensure(d < 1e-8, || format!("draw {draw} {p:?}: distance {d:.3e}"))?;
    }
    Ok(format!("max distance {worst:.1e}"))
}

fn linear_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let (delta, gamma, j) = (
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(0.1..=3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        );
        let p = params(delta, gamma, j, 0.0, 0.0);
        let root = (c(delta, -gamma) * c(delta, -gamma) + j * j).sqrt();
        let expected: Vec<(f64, Complex64)> = [c(0.0, -gamma) + root, c(0.0, -gamma) - root]
            .into_iter()
            .map(|mu| {
                // eigenvector (J, μ − δ + 2iΓ)
                let w = (mu - c(delta, -2.0 * gamma)).norm_sqr();
                ((j * j - w) / (j * j + w), mu)
            })
            .collect();
        let got = solve_polynomial(&p).map_err(|e| e.to_string())?;
        let d = hausdorff(&coords(&got), &expected);
        worst = worst.max(d);
        ensure(d < 1e-8, || format!("draw {draw} {p:?}: distance {d:.3e}"))?;
    }
    Ok(format!("max distance {worst:.1e}"))
}

fn no_ep_guard() -> Outcome {
    let slices = [(1.8, 1.8, -0.1, 0.1), (1.8, 2.4, 0.1, 0.3), (0.0, 0.0, -0.5, 0.5)];
    for j in [0.8, 1.2] {
        for (g1, g2, lo, hi) in slices {
            let sweep = sweep_polynomial(&params(0.0, 1.0, j, g1, g2), &uniform_grid(lo, hi, 201))
                .map_err(|e| e.to_string())?;
            let eps = detect_ep(&sweep, DetectConfig::default().tol_coalesce);
            ensure(eps.is_empty(), || format!("J = {j}, g = ({g1}, {g2}): EP at {:?}", eps[0].delta_ep))?;
        }
        let out = Command::new(env!("CARGO_BIN_EXE_ep-dimer"))
            .args(["ep", "--gamma", "1", "--g1", "1.8", "--g2", "2.4"])
            .arg(format!("--j={j}"))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(2), || {
            format!("ep --j {j} exited with {:?}", out.status.code())
        })?;
    }
    Ok("no EP for J = 0.8, 1.2; ep exits 2".into())
}

fn jacobian_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let p = params(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.1..=3.0),
            rng.gen_range(-3.0..=3.0),
            rng.gen_range(-3.0..=3.0),
            rng.gen_range(-3.0..=3.0),
        );
        let x: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
        let at = |v: [f64; 5]| residual_vector(&p, &RealUnknowns::new(v[0], v[1], v[2], v[3], v[4]));
        let analytic = jacobian(&p, &RealUnknowns::new(x[0], x[1], x[2], x[3], x[4]));
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for col in 0..5 {
            let (mut up, mut down) = (x, x);
            up[col] += h;
            down[col] -= h;
            let (fu, fd) = (at(up), at(down));
            for row in 0..5 {
                let fd_entry = (fu[row] - fd[row]) / (2.0 * h);
                diff = diff.max((analytic[row][col] - fd_entry).abs());
                scale = scale.max(fd_entry.abs());
            }
        }
        let rel = diff / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel < 1e-5, || format!("draw {draw}: relative error {rel:.3e}"))?;
    }
    Ok(format!("max relative error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "linear-ep", budget: Some(Duration::from_secs(1)), run: linear_ep },
        Criterion { id: 2, name: "splitting-exponent", budget: Some(Duration::from_secs(1)), run: splitting_exponent },
        Criterion { id: 3, name: "equal-gain-regression", budget: Some(Duration::from_secs(10)), run: equal_gain_regression },
        Criterion { id: 4, name: "unequal-gain-regression", budget: Some(Duration::from_secs(10)), run: unequal_gain_regression },
        Criterion { id: 5, name: "cross-method", budget: Some(Duration::from_secs(60)), run: cross_method },
        Criterion { id: 6, name: "residual-suite", budget: None, run: residual_suite },
        Criterion { id: 7, name: "symmetry-suite", budget: None, run: symmetry_suite },
        Criterion { id: 8, name: "linear-limit", budget: None, run: linear_limit },
        Criterion { id: 9, name: "no-ep-guard", budget: None, run: no_ep_guard },
        Criterion { id: 10, name: "jacobian-check", budget: None, run: jacobian_check },
    ];
    let mut failed = 0;
    for criterion in &criteria {
        let start = Instant::now();
        let mut outcome = (criterion.run)();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(budget)) = (&outcome, criterion.budget) {
            if elapsed > budget {
                outcome = Err(format!("took {elapsed:.2?}, budget {budget:.0?}"));
            }
        }
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{status} {:>2} {:<24} {:>8.3}s  {detail}",
            criterion.id,
            criterion.name,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
