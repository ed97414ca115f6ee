#![allow(dead_code)]

use ep_dimer::SpectrumPoint;

pub fn linear_case(delta: f64) -> ep_dimer::DimerParams {
    ep_dimer::DimerParams::linear(delta, 1.0, 1.0).unwrap()
}

pub fn equal_gain(delta: f64) -> ep_dimer::DimerParams {
    ep_dimer::DimerParams::new(delta, 1.0, 1.0, 1.8, 1.8).unwrap()
}

pub fn unequal_gain(delta: f64) -> ep_dimer::DimerParams {
    ep_dimer::DimerParams::new(delta, 1.0, 1.0, 1.8, 2.4).unwrap()
}

fn gap(a: &SpectrumPoint, b: &SpectrumPoint) -> f64 {
    (a.imbalance_s - b.imbalance_s)
        .abs()
        .max((a.mu.re - b.mu.re).abs())
        .max((a.mu.im - b.mu.im).abs())
}

/// Symmetric (Hausdorff) distance between two point sets in (s, Re μ, Im μ).
pub fn set_distance(a: &[SpectrumPoint], b: &[SpectrumPoint]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let one_way = |x: &[SpectrumPoint], y: &[SpectrumPoint]| {
        x.iter()
            .map(|p| y.iter().map(|q| gap(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}
