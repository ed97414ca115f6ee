//! Sweep configuration: a TOML file, command-line flags on top, defaults
//! underneath.

use std::path::{Path, PathBuf};

use ep_dimer::{DimerError, DimerParams, Method};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Model parameters as they appear in config files and on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct ParamArgs {
    /// Detuning δ
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Loss rate Γ [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Coupling J [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    /// Saturable gain on mode 1 [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub g1: Option<f64>,
    /// Saturable gain on mode 2 [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub g2: Option<f64>,
}

impl ParamArgs {
    /// Fields set here win over `base`.
    pub fn over(&self, base: &ParamArgs) -> ParamArgs {
        ParamArgs {
            delta: self.delta.or(base.delta),
            gamma: self.gamma.or(base.gamma),
            j: self.j.or(base.j),
            g1: self.g1.or(base.g1),
            g2: self.g2.or(base.g2),
        }
    }

    pub fn resolve(&self) -> Result<DimerParams> {
        DimerParams::new(
            self.delta.unwrap_or(0.0),
            self.gamma.unwrap_or(1.0),
            self.j.unwrap_or(1.0),
            self.g1.unwrap_or(0.0),
            self.g2.unwrap_or(0.0),
        )
        .map_err(param_error)
    }
}

fn param_error(err: DimerError) -> CliError {
    match err {
        DimerError::InvalidParameter { field, reason } => {
            let field = if field == "coupling_j" { "j" } else { field };
            CliError::config(field, reason)
        }
        other => CliError::Model(other),
    }
}

/// Sweep settings that may come from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(default)]
    pub params: ParamArgs,
    /// Lower end of the detuning grid
    #[arg(long, allow_hyphen_values = true)]
    pub delta_min: Option<f64>,
    /// Upper end of the detuning grid
    #[arg(long, allow_hyphen_values = true)]
    pub delta_max: Option<f64>,
    /// Number of grid points, endpoints included
    #[arg(long)]
    pub steps: Option<usize>,
    /// Comma-separated subset of linear, polynomial, newton, or `all`
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Output file; a `.manifest.json` sidecar is written next to it
    #[arg(long = "output", short = 'o')]
    #[serde(alias = "output")]
    pub output_path: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl SweepArgs {
    pub fn over(&self, base: &SweepArgs) -> SweepArgs {
        SweepArgs {
            params: self.params.over(&base.params),
            delta_min: self.delta_min.or(base.delta_min),
            delta_max: self.delta_max.or(base.delta_max),
            steps: self.steps.or(base.steps),
            methods: self.methods.clone().or_else(|| base.methods.clone()),
            output_path: self.output_path.clone().or_else(|| base.output_path.clone()),
            format: self.format.or(base.format),
        }
    }

    pub fn from_file(path: &Path) -> Result<SweepArgs> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                reason: e.message().to_string(),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: DimerParams,
    pub delta_min: f64,
    pub delta_max: f64,
    pub steps: usize,
    pub methods: Vec<Method>,
    pub output_path: PathBuf,
    pub format: Format,
}

impl SweepConfig {
    /// Fill defaults and validate.
    pub fn resolve(args: &SweepArgs) -> Result<SweepConfig> {
        let params = args.params.resolve()?;
        let delta_min = args.delta_min.unwrap_or(-1.0);
        let delta_max = args.delta_max.unwrap_or(1.0);
        if !(delta_min.is_finite() && delta_max.is_finite()) {
            return Err(CliError::config("delta_min", "grid bounds must be finite"));
        }
        if !(delta_min < delta_max) {
            return Err(CliError::config(
                "delta_min",
                format!("must be below delta_max ({delta_min} >= {delta_max})"),
            ));
        }
        let steps = args.steps.unwrap_or(201);
        if steps < 2 {
            return Err(CliError::config("steps", format!("need at least 2 grid points, got {steps}")));
        }
        let methods = resolve_methods(args.methods.as_deref(), &params)?;
        let format = args.format.unwrap_or(Format::Csv);
        let output_path = args.output_path.clone().unwrap_or_else(|| match format {
            Format::Csv => PathBuf::from("sweep.csv"),
            Format::Json => PathBuf::from("sweep.json"),
        });
        Ok(SweepConfig {
            params,
            delta_min,
            delta_max,
            steps,
            methods,
            output_path,
            format,
        })
    }

    pub fn deltas(&self) -> Vec<f64> {
        ep_dimer::branch::uniform_grid(self.delta_min, self.delta_max, self.steps)
    }

    pub fn manifest_path(&self) -> PathBuf {
        manifest_path_for(&self.output_path)
    }
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

// `all` expands to the methods that apply to the given parameters; naming
// `linear` explicitly for a nonlinear model is an error.
fn resolve_methods(names: Option<&[String]>, params: &DimerParams) -> Result<Vec<Method>> {
    let all = |params: &DimerParams| {
        if params.is_linear() {
            vec![Method::Linear, Method::Polynomial, Method::Newton]
        } else {
            vec![Method::Polynomial, Method::Newton]
        }
    };
    let Some(names) = names else {
        return Ok(all(params));
    };
    let mut methods = Vec::new();
    for name in names {
        if name.trim().eq_ignore_ascii_case("all") {
            methods.extend(all(params));
            continue;
        }
        let method: Method = name
            .parse()
            .map_err(|_| CliError::config("methods", format!("unknown method `{name}`")))?;
        match method {
            Method::AnalyticEp => {
                return Err(CliError::config("methods", "analyticep is not a sweep method"));
            }
            Method::Linear if !params.is_linear() => {
                return Err(CliError::config(
                    "methods",
                    format!("linear needs g1 = g2 = 0, got g1 = {}, g2 = {}", params.g1, params.g2),
                ));
            }
            _ => methods.push(method),
        }
    }
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(CliError::config("methods", "no method selected"));
    }
    Ok(methods)
}
