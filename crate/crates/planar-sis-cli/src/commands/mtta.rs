use anyhow::Result;
use clap::{Args, ValueEnum};
use planar_sis::geometry::{Position, TorusDomain};
use planar_sis::simulator::{Population, SimConfig, DEFAULT_EXTINCTION_CAP};
use planar_sis::statistics::mtta_curve;
use serde::{Deserialize, Serialize};

use super::simulate::parse_initial;
use super::Report;
use crate::config::{overlay, parse_grid, ModelArgs, ResolvedModel};
use crate::output::{lib_err, usage, Failure, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Gamma,
    Beta,
    #[value(name = "L")]
    #[serde(rename = "L")]
    Side,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct MttaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Parameter swept along the `param` column
    #[arg(long, value_enum)]
    pub sweep: Option<SweepParam>,
    /// Sweep values: `start:stop:step` or a comma list
    #[arg(long)]
    pub values: Option<String>,
    /// Torus sides: `start:stop:step` or a comma list
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub sides: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Censoring time for runs that never die out
    #[arg(long)]
    pub cap: Option<f64>,
    /// `all`, `single` or an infected fraction
    #[arg(long)]
    pub initial: Option<String>,
    /// One fixed point instead of a Poisson population
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub single_particle: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MttaResolved {
    #[serde(flatten)]
    pub model: ResolvedModel,
    pub sweep: SweepParam,
    pub values: Vec<f64>,
    #[serde(rename = "L")]
    pub sides: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub cap: f64,
    pub initial: String,
    pub single_particle: bool,
}

impl MttaArgs {
    pub fn overlay(&mut self, file: &MttaArgs) {
        self.model.overlay(&file.model);
        overlay!(self, file; sweep, values, sides, replications, seed, cap, initial, single_particle);
    }

    pub fn resolve(&self) -> Result<MttaResolved> {
        let sweep = self.sweep.unwrap_or(SweepParam::Gamma);
        let mut base = self.model.clone();
        // the swept parameter may be absent from the base model
        match sweep {
            SweepParam::Gamma => base.gamma = base.gamma.or(Some(0.0)),
            SweepParam::Beta => base.beta = base.beta.or(Some(1.0)),
            SweepParam::Side => {}
        }
        let model = base.resolve(Some(0.0))?;
        let sides = match &self.sides {
            Some(s) => parse_grid("L", s)?,
            None => vec![20.0],
        };
        let values = match (&self.values, sweep) {
            (Some(v), _) => parse_grid("values", v)?,
            (None, SweepParam::Side) => sides.clone(),
            (None, _) => return Err(usage("values", "required for gamma and beta sweeps")),
        };
        let initial = self.initial.clone().unwrap_or_else(|| "all".into());
        parse_initial(&initial)?;
        let r = MttaResolved {
            model,
            sweep,
            sides: if sweep == SweepParam::Side { vec![] } else { sides },
            values,
            replications: self.replications.unwrap_or(10),
            seed: self.seed.unwrap_or(1),
            cap: self.cap.unwrap_or(DEFAULT_EXTINCTION_CAP),
            initial,
            single_particle: self.single_particle.unwrap_or(false),
        };
        if r.replications < 2 {
            return Err(usage("replications", "need at least 2 for a confidence interval"));
        }
        if !(r.cap > 0.0) {
            return Err(usage("cap", "must be positive"));
        }
        Ok(r)
    }

    fn cells(r: &MttaResolved) -> Result<Vec<(f64, SimConfig)>> {
        let sides: Vec<Option<f64>> = if r.sweep == SweepParam::Side {
            vec![None]
        } else {
            r.sides.iter().map(|&s| Some(s)).collect()
        };
        let mut cells = Vec::new();
        for side in sides {
            for &v in &r.values {
                let mut params = r.model.params();
                let l = match r.sweep {
                    SweepParam::Gamma => {
                        params.gamma = v;
                        side.unwrap()
                    }
                    SweepParam::Beta => {
                        params.beta = v;
                        side.unwrap()
                    }
                    SweepParam::Side => v,
                };
                params.validate().map_err(lib_err)?;
                let dom = TorusDomain::new(l, params.a).map_err(lib_err)?;
                let mut cfg = SimConfig::new(params, dom, r.seed, r.cap);
                cfg.extinction_cap = r.cap;
                cfg.initial = parse_initial(&r.initial)?;
                if r.single_particle {
                    cfg.population = Population::Fixed(vec![Position::new(0.5 * l, 0.5 * l)]);
                }
                cells.push((v, cfg));
            }
        }
        Ok(cells)
    }
}

#[derive(Serialize)]
struct MttaRow {
    param: f64,
    #[serde(rename = "L")]
    side: f64,
    mean: f64,
    ci_lo: f64,
    ci_hi: f64,
    n: usize,
    censored_n: usize,
}

pub fn execute(args: &MttaArgs, out: &OutDir) -> Result<Report> {
    let r = args.resolve()?;
    let cells = MttaArgs::cells(&r)?;
    let recs = mtta_curve(&cells, r.replications).map_err(lib_err)?;
    let mut failures = Vec::new();
    let rows: Vec<MttaRow> = recs
        .iter()
        .map(|m| {
            if m.censored_n > 0 {
                failures.push(Failure::new(
                    format!("param={} L={}", m.param, m.side),
                    format!("{} of {} runs censored at {}", m.censored_n, m.n(), r.cap),
                ));
            }
            MttaRow {
                param: m.param,
                side: m.side,
                mean: m.mean,
                ci_lo: m.ci_lo,
                ci_hi: m.ci_hi,
                n: m.n(),
                censored_n: m.censored_n,
            }
        })
        .collect();
    out.csv_with_header("mtta.csv", &["param", "L", "mean", "ci_lo", "ci_hi", "n", "censored_n"], &rows)?;
    Report::new(&r, failures)
}
