//! TOML experiment files and flag merging. Every command section mirrors its flags;
//! a flag given on the command line always beats the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use planar_sis::geometry::ModelParams;
use serde::{Deserialize, Serialize};

use crate::commands::{
    mtta::MttaArgs, pcf::PcfArgs, percolation::PercolationArgs, phase::PhaseArgs,
    simulate::SimulateArgs, solve::SolveArgs,
};
use crate::output::usage;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub simulate: SimulateArgs,
    pub solve: SolveArgs,
    pub phase: PhaseArgs,
    pub mtta: MttaArgs,
    pub percolation: PercolationArgs,
    pub pcf: PcfArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage("config", e.to_string()))
    }
}

/// Fill every `None` field of `$dst` from `$src`.
macro_rules! overlay {
    ($dst:expr, $src:expr; $($f:ident),+ $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )+
    };
}
pub(crate) use overlay;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArgs {
    /// Infection rate per infected neighbor
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Recovery rate
    #[arg(long)]
    pub beta: Option<f64>,
    /// Jump (motion) rate
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Point density
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Contact radius
    #[arg(long)]
    pub a: Option<f64>,
    /// Mean degree; sets the radius from lambda
    #[arg(long)]
    pub mu: Option<f64>,
}

impl ModelArgs {
    pub fn overlay(&mut self, file: &ModelArgs) {
        // the radius is given either as `a` or as `mu`; a flag for either replaces both
        if self.a.is_none() && self.mu.is_none() {
            self.a = file.a;
            self.mu = file.mu;
        }
        overlay!(self, file; alpha, beta, gamma, lambda);
    }

    pub fn resolve(&self, default_gamma: Option<f64>) -> Result<ResolvedModel> {
        let alpha = self.alpha.unwrap_or(1.0);
        let beta = self.beta.ok_or_else(|| usage("beta", "required"))?;
        let gamma = match (self.gamma, default_gamma) {
            (Some(g), _) | (None, Some(g)) => g,
            (None, None) => return Err(usage("gamma", "required")),
        };
        let lambda = self.lambda.unwrap_or(1.0);
        let a = match (self.a, self.mu) {
            (Some(_), Some(_)) => return Err(usage("mu", "give either `a` or `mu`, not both")),
            (Some(a), None) => a,
            (None, Some(mu)) => {
                if !(mu > 0.0 && lambda > 0.0) {
                    return Err(usage("mu", "mu and lambda must be positive"));
                }
                (mu / (lambda * std::f64::consts::PI)).sqrt()
            }
            (None, None) => 1.0,
        };
        let params = ModelParams::new(alpha, beta, gamma, lambda, a).map_err(crate::output::lib_err)?;
        Ok(ResolvedModel {
            alpha,
            beta,
            gamma,
            lambda,
            a,
            mu: params.mu(),
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a: f64,
    pub mu: f64,
}

impl ResolvedModel {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            lambda: self.lambda,
            a: self.a,
        }
    }
}

/// Parse `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(field: &str, s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| usage(field, format!("not a number: `{t}`")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        3 => {
            let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(h > 0.0) || b < a {
                return Err(usage(field, "need start <= stop and step > 0"));
            }
            Ok(planar_sis::phase::linspace_step(a, b, h))
        }
        1 => s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect(),
        _ => Err(usage(field, "expected `start:stop:step` or a comma list")),
    }
}

/// The resolved configuration echoed next to the outputs.
#[derive(Serialize)]
pub struct Echo<'a, T: Serialize> {
    pub command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub version: &'a str,
    pub resolved: &'a T,
}

/// TOML has no null; unset options are left out of the echo.
pub fn drop_nulls(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(m) => Value::Object(
            m.into_iter()
                .filter(|(_, x)| !x.is_null())
                .map(|(k, x)| (k, drop_nulls(x)))
                .collect(),
        ),
        Value::Array(a) => Value::Array(a.into_iter().map(drop_nulls).collect()),
        other => other,
    }
}
