use std::time::Instant;

use ep_dimer::branch::BranchSweep;
use ep_dimer::ep::{detect_ep, DEFAULT_TOL_COALESCE};
use ep_dimer::linear::linear_spectrum;
use ep_dimer::newton::{sweep_with_continuation, NewtonConfig};
use ep_dimer::poly::sweep_polynomial;
use ep_dimer::{Method, SpectrumPoint};
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::Result;
use crate::output::{write_outputs, DetectedEp, MethodCount, Row, RunManifest};

pub struct SweepRun {
    pub rows: Vec<Row>,
    pub manifest: RunManifest,
    pub sweeps: Vec<BranchSweep>,
}

pub fn sweep_method(config: &SweepConfig, method: Method) -> Result<BranchSweep> {
    let deltas = config.deltas();
    let template = config.params;
    let sweep = match method {
        Method::Linear => {
            let solutions = deltas
                .par_iter()
                .map(|&delta| {
                    let params = template.with_delta(delta);
                    let lin = linear_spectrum(&params)?;
                    Ok(vec![
                        SpectrumPoint::new(&params, lin.eigvec_plus, lin.mu_plus, Method::Linear)?,
                        SpectrumPoint::new(&params, lin.eigvec_minus, lin.mu_minus, Method::Linear)?,
                    ])
                })
                .collect::<ep_dimer::Result<Vec<_>>>()?;
            BranchSweep::track(template, deltas, solutions)
        }
        Method::Polynomial => sweep_polynomial(&template, &deltas)?,
        Method::Newton => sweep_with_continuation(&template, &deltas, &NewtonConfig::default()),
        Method::AnalyticEp => unreachable!("rejected when the config is resolved"),
    };
    Ok(sweep)
}

/// Compute every requested method without touching the filesystem.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepRun> {
    let started = Instant::now();
    let mut sweeps = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        log::info!("sweeping {method} over {} grid points", config.steps);
        sweeps.push(sweep_method(config, method)?);
    }

    let mut rows = Vec::new();
    let mut counts = Vec::new();
    let mut detected_eps = Vec::new();
    for (sweep, &method) in sweeps.iter().zip(&config.methods) {
        let before = rows.len();
        for (i, row) in sweep.points.iter().enumerate() {
            for bp in row {
                rows.push(Row {
                    delta: sweep.deltas[i],
                    method,
                    branch_id: bp.branch_id,
                    s: bp.point.imbalance_s,
                    mu_re: bp.point.mu.re,
                    mu_im: bp.point.mu.im,
                    residual: bp.point.residual,
                });
            }
        }
        counts.push(MethodCount {
            method,
            rows: rows.len() - before,
        });
        detected_eps.extend(
            detect_ep(sweep, DEFAULT_TOL_COALESCE)
                .iter()
                .map(|ep| DetectedEp::new(method, ep)),
        );
    }
    // grid index order equals δ order; the sort is stable within a method
    let index_of: std::collections::HashMap<u64, usize> = config
        .deltas()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.to_bits(), i))
        .collect();
    rows.sort_by_key(|r| (index_of[&r.delta.to_bits()], r.method, r.branch_id));

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        counts,
        detected_eps,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(SweepRun { rows, manifest, sweeps })
}

pub fn cmd_sweep(config: &SweepConfig) -> Result<RunManifest> {
    let run = run_sweep(config)?;
    write_outputs(config, &run.rows, &run.manifest)?;
    Ok(run.manifest)
}
