//! Per-panel two-column data files from a sweep file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ep_dimer::Method;

use crate::config::manifest_path_for;
use crate::error::{CliError, Result};
use crate::output::{read_manifest, read_rows, DetectedEp, Row};

pub const MARKER_FILE: &str = "ep_markers.dat";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub panels: Vec<PathBuf>,
    pub markers: PathBuf,
    pub marker_count: usize,
}

// Marker coordinates are analytic-looking numbers; 10 decimals is plenty and
// keeps grid noise out of the file.
fn marker_number(x: f64) -> String {
    let rounded = (x * 1e10).round() / 1e10 + 0.0;
    format!("{rounded}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Pick the markers of one method, polynomial first.
fn markers(eps: &[DetectedEp]) -> Vec<DetectedEp> {
    [Method::Polynomial, Method::Newton, Method::Linear]
        .iter()
        .map(|&m| eps.iter().filter(|e| e.method == m).copied().collect::<Vec<_>>())
        .find(|v| !v.is_empty())
        .unwrap_or_default()
}

pub fn cmd_plotdata(sweep_path: &Path, out_dir: &Path) -> Result<PlotFiles> {
    let rows = read_rows(sweep_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let mut branches: BTreeMap<(Method, usize), Vec<&Row>> = BTreeMap::new();
    for row in &rows {
        branches.entry((row.method, row.branch_id)).or_default().push(row);
    }
    let mut panels = Vec::new();
    for ((method, id), branch) in &branches {
        for (panel, value) in [
            ("a", (|r: &Row| r.s) as fn(&Row) -> f64),
            ("b", |r: &Row| r.mu_re),
            ("c", |r: &Row| r.mu_im),
        ] {
            let mut text = String::new();
            for row in branch {
                writeln!(text, "{:?} {:?}", row.delta, value(row)).unwrap();
            }
            let path = out_dir.join(format!("panel_{panel}_{method}_branch{id}.dat"));
            write_file(&path, &text)?;
            panels.push(path);
        }
    }

    let manifest_path = manifest_path_for(sweep_path);
    let eps = if manifest_path.exists() {
        markers(&read_manifest(&manifest_path)?.detected_eps)
    } else {
        log::warn!("no manifest at {}; marker file left empty", manifest_path.display());
        Vec::new()
    };
    let mut text = String::new();
    for ep in &eps {
        writeln!(
            text,
            "{} {} {}",
            marker_number(ep.delta),
            marker_number(ep.mu_re),
            marker_number(ep.mu_im)
        )
        .unwrap();
    }
    let markers = out_dir.join(MARKER_FILE);
    write_file(&markers, &text)?;
    Ok(PlotFiles {
        panels,
        markers,
        marker_count: eps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_numbers() {
        assert_eq!(marker_number(0.19999999999999998), "0.2");
        assert_eq!(marker_number(1.4000000000000001), "1.4");
        assert_eq!(marker_number(-1.0), "-1");
        assert_eq!(marker_number(-1e-17), "0");
    }
}
