use anyhow::Result;
use clap::Args;
use planar_sis::percolation::{cluster_constants, empirical_q, pi_recursion, PiGrid};
use serde::{Deserialize, Serialize};

use super::Report;
use crate::config::overlay;
use crate::output::{lib_err, usage, Failure, OutDir};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PercolationArgs {
    /// Mean degree of the graph; defaults to lambda * pi * a^2
    #[arg(long)]
    pub mu_tilde: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Also solve the radial connection probability pi(r)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub pi: Option<bool>,
    /// Also measure the largest-cluster fraction on a sampled torus of this side
    #[arg(long = "empirical-L")]
    #[serde(rename = "empirical_L")]
    pub empirical_side: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PercolationResolved {
    pub mu_tilde: f64,
    pub lambda: Option<f64>,
    pub a: Option<f64>,
    pub pi: bool,
    #[serde(rename = "empirical_L")]
    pub empirical_side: Option<f64>,
    pub seed: u64,
}

impl PercolationArgs {
    pub fn overlay(&mut self, file: &PercolationArgs) {
        overlay!(self, file; mu_tilde, lambda, a, pi, empirical_side, seed);
    }

    pub fn resolve(&self) -> Result<PercolationResolved> {
        let geometric = match (self.lambda, self.a) {
            (Some(l), Some(a)) if l > 0.0 && a > 0.0 => Some((l, a)),
            (None, None) => None,
            _ => return Err(usage("a", "lambda and a must both be given and positive")),
        };
        let mu_tilde = match (self.mu_tilde, geometric) {
            (Some(m), _) => m,
            (None, Some((l, a))) => l * std::f64::consts::PI * a * a,
            (None, None) => return Err(usage("mu_tilde", "give mu_tilde or lambda and a")),
        };
        if !(mu_tilde >= 0.0 && mu_tilde.is_finite()) {
            return Err(usage("mu_tilde", "must be finite and non-negative"));
        }
        let pi = self.pi.unwrap_or(false);
        if (pi || self.empirical_side.is_some()) && geometric.is_none() {
            return Err(usage("lambda", "pi(r) and empirical q need lambda and a"));
        }
        Ok(PercolationResolved {
            mu_tilde,
            lambda: self.lambda,
            a: self.a,
            pi,
            empirical_side: self.empirical_side,
            seed: self.seed.unwrap_or(1),
        })
    }
}

#[derive(Serialize)]
struct PercolationOut {
    mu_tilde: f64,
    q: f64,
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_empirical: Option<f64>,
}

pub fn execute(args: &PercolationArgs, out: &OutDir) -> Result<Report> {
    let r = args.resolve()?;
    let cl = cluster_constants(r.mu_tilde);
    let mut failures = Vec::new();
    let q_empirical = match (r.empirical_side, r.lambda, r.a) {
        (Some(side), Some(l), Some(a)) => Some(empirical_q(l, a, side, r.seed).map_err(lib_err)?),
        _ => None,
    };
    if let (true, Some(l), Some(a)) = (r.pi, r.lambda, r.a) {
        let sol = pi_recursion(l, a, &PiGrid::for_radius(a)).map_err(lib_err)?;
        if !sol.converged {
            failures.push(Failure::new("pi", format!("no convergence after {} sweeps", sol.iterations)));
        }
        let rows: Vec<(f64, f64)> = sol.pi.nodes().zip(sol.pi.values.iter().copied()).collect();
        out.csv_with_header("pi.csv", &["r", "pi"], &rows)?;
    }
    out.json(
        "percolation.json",
        &PercolationOut {
            mu_tilde: cl.mu_tilde,
            q: cl.q,
            c: cl.c,
            q_empirical,
        },
    )?;
    Report::new(&r, failures)
}
