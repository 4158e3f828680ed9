use anyhow::Result;
use clap::{Args, ValueEnum};
use planar_sis::phase::{beta_c, classify, sweep, CriticalSpec, PhasePoint};
use serde::{Deserialize, Serialize};

use super::Report;
use crate::config::{overlay, parse_grid};
use crate::output::{lib_err, usage, Failure, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseAction {
    /// Classify a (mu, beta) grid and export critical curves
    Sweep,
    /// Print the region of a single (mu, beta) point
    Classify,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseArgs {
    #[arg(value_enum)]
    pub action: Option<PhaseAction>,
    /// m2bi or b1i
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `start:stop:step` or a comma list
    #[arg(long)]
    pub mu_range: Option<String>,
    /// `start:stop:step` or a comma list
    #[arg(long)]
    pub beta_range: Option<String>,
    /// Motion rates for the critical-recovery curve
    #[arg(long)]
    pub gamma_range: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResolved {
    pub action: PhaseAction,
    pub spec: String,
    pub alpha: f64,
    pub mus: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl PhaseArgs {
    pub fn overlay(&mut self, file: &PhaseArgs) {
        overlay!(self, file; action, spec, alpha, mu, beta, mu_range, beta_range, gamma_range);
    }

    pub fn resolve(&self) -> Result<PhaseResolved> {
        let spec = self.spec.clone().unwrap_or_else(|| "m2bi".into());
        CriticalSpec::from_code(&spec).map_err(|_| usage("spec", "critical curves exist for m2bi and b1i"))?;
        let pick = |single: Option<f64>, range: &Option<String>, field: &str| -> Result<Vec<f64>> {
            match (single, range) {
                (Some(_), Some(_)) => Err(usage(field, format!("give either `{field}` or `{field}_range`"))),
                (Some(x), None) => Ok(vec![x]),
                (None, Some(r)) => parse_grid(field, r),
                (None, None) => Err(usage(field, "required")),
            }
        };
        let mus = pick(self.mu, &self.mu_range, "mu")?;
        let alpha = self.alpha.unwrap_or(1.0);
        let action = self.action.unwrap_or(PhaseAction::Sweep);
        let betas = match (action, self.beta, &self.beta_range) {
            // the critical-recovery curve alone needs no beta grid
            (PhaseAction::Sweep, None, None) if self.gamma_range.is_some() => vec![],
            _ => pick(self.beta, &self.beta_range, "beta")?,
        };
        let gammas = match &self.gamma_range {
            Some(g) => parse_grid("gamma_range", g)?,
            None => vec![],
        };
        if action == PhaseAction::Classify && (mus.len() != 1 || betas.len() != 1) {
            return Err(usage("mu", "classify takes a single mu and beta"));
        }
        for (field, xs) in [("mu", &mus), ("beta", &betas), ("gamma_range", &gammas)] {
            if xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(usage(field, "values must be positive"));
            }
        }
        if !(alpha > 0.0) {
            return Err(usage("alpha", "must be positive"));
        }
        Ok(PhaseResolved { action, spec, alpha, mus, betas, gammas })
    }
}

#[derive(Serialize)]
struct PhaseRow {
    mu: f64,
    beta: f64,
    region: &'static str,
    boolean_supercritical: bool,
    gamma_minus: Option<f64>,
    gamma_plus: Option<f64>,
}

impl From<&PhasePoint> for PhaseRow {
    fn from(p: &PhasePoint) -> Self {
        Self {
            mu: p.mu,
            beta: p.beta,
            region: p.region.label(),
            boolean_supercritical: p.boolean_supercritical,
            gamma_minus: p.gamma_minus,
            gamma_plus: p.gamma_plus,
        }
    }
}

const PHASE_HEADER: [&str; 6] = ["mu", "beta", "region", "boolean_supercritical", "gamma_minus", "gamma_plus"];

fn suffix(r: &PhaseResolved, mu: f64) -> String {
    if r.mus.len() == 1 {
        String::new()
    } else {
        format!("_mu{mu}")
    }
}

pub fn execute(args: &PhaseArgs, out: &OutDir) -> Result<Report> {
    let r = args.resolve()?;
    let spec = CriticalSpec::from_code(&r.spec).map_err(lib_err)?;
    let mut failures = Vec::new();
    if r.action == PhaseAction::Classify {
        let pt = classify(spec, r.mus[0], r.betas[0], r.alpha);
        println!("{}", pt.region.label());
        out.csv_with_header("phase.csv", &PHASE_HEADER, &[PhaseRow::from(&pt)])?;
        return Report::new(&r, failures);
    }
    let pts = sweep(spec, &r.mus, &r.betas, r.alpha);
    let rows: Vec<PhaseRow> = pts.iter().map(PhaseRow::from).collect();
    out.csv_with_header("phase.csv", &PHASE_HEADER, &rows)?;
    for &mu in &r.mus {
        let sfx = suffix(&r, mu);
        let of_mu: Vec<&PhasePoint> = pts.iter().filter(|p| p.mu == mu).collect();
        let minus: Vec<(f64, f64)> = of_mu.iter().filter_map(|p| Some((p.beta, p.gamma_minus?))).collect();
        let plus: Vec<(f64, f64)> = of_mu.iter().filter_map(|p| Some((p.beta, p.gamma_plus?))).collect();
        if !r.betas.is_empty() {
            out.csv_with_header(&format!("gamma_minus{sfx}.csv"), &["beta", "gamma_minus"], &minus)?;
            out.csv_with_header(&format!("gamma_plus{sfx}.csv"), &["beta", "gamma_plus"], &plus)?;
        }
        if !r.gammas.is_empty() {
            let mut curve = Vec::new();
            for &g in &r.gammas {
                let b = beta_c(spec, mu, g, r.alpha);
                if b.unresolved {
                    failures.push(Failure::new(format!("beta_c(mu={mu}, gamma={g})"), "critical recovery rate unresolved"));
                } else {
                    curve.push((g, b.value));
                }
            }
            out.csv_with_header(&format!("beta_c{sfx}.csv"), &["gamma", "beta_c"], &curve)?;
        }
    }
    Report::new(&r, failures)
}
