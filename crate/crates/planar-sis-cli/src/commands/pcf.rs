use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use planar_sis::geometry::{Position, TorusDomain};
use planar_sis::simulator::{run, Snapshot};
use planar_sis::statistics::estimate_pcf;
use serde::{Deserialize, Serialize};

use super::simulate::SimulateArgs;
use super::{pcf_rows, Report};
use crate::output::{lib_err, usage, OutDir};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PcfArgs {
    /// Snapshot CSV (`t,id,x,y,state`) to analyse; without it a simulation is run
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimulateArgs,
}

#[derive(Serialize)]
struct PcfResolved {
    input: Option<PathBuf>,
    #[serde(flatten)]
    sim: super::simulate::SimResolved,
}

impl PcfArgs {
    pub fn overlay(&mut self, file: &PcfArgs) {
        if self.input.is_none() {
            self.input = file.input.clone();
        }
        self.sim.overlay(&file.sim);
    }
}

#[derive(Deserialize)]
struct Row {
    t: f64,
    #[allow(dead_code)]
    id: usize,
    x: f64,
    y: f64,
    state: String,
}

fn read_snapshots(path: &PathBuf) -> Result<Vec<Snapshot>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut snaps: Vec<Snapshot> = Vec::new();
    for rec in rdr.deserialize() {
        let row: Row = rec.map_err(|e| usage("input", e.to_string()))?;
        let infected = match row.state.as_str() {
            "I" => true,
            "S" => false,
            s => return Err(usage("input", format!("unknown state `{s}`"))),
        };
        if snaps.last().is_none_or(|s| s.t != row.t) {
            snaps.push(Snapshot { t: row.t, positions: vec![], infected: vec![] });
        }
        let s = snaps.last_mut().unwrap();
        s.positions.push(Position::new(row.x, row.y));
        s.infected.push(infected);
    }
    Ok(snaps)
}

pub fn execute(args: &PcfArgs, out: &OutDir) -> Result<Report> {
    let mut sim_args = args.sim.clone();
    if args.input.is_some() && sim_args.model.beta.is_none() {
        // rates do not enter the estimator
        sim_args.model.beta = Some(1.0);
    }
    let r = sim_args.resolve()?;
    let dom = TorusDomain::new(r.side, r.model.a).map_err(lib_err)?;
    let snaps = match &args.input {
        Some(path) => read_snapshots(path)?,
        None => run(&r.sim_config(true)?).map_err(lib_err)?.snapshots,
    };
    let est = estimate_pcf(&snaps, &dom, r.bin_width, r.r_max).map_err(lib_err)?;
    out.csv_with_header(
        "pcf.csv",
        &["r_lo", "r_hi", "xi_psiphi", "xi_phiphi", "xi_psipsi", "counts"],
        &pcf_rows(&est),
    )?;
    Report::new(&PcfResolved { input: args.input.clone(), sim: r }, vec![])
}
