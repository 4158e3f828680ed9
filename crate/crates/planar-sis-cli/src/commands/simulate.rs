use anyhow::Result;
use clap::Args;
use planar_sis::geometry::TorusDomain;
use planar_sis::simulator::{run, EventCounts, InitialCondition, SimConfig, Snapshot};
use planar_sis::statistics::{estimate_pcf, little_check, plateaus};
use serde::{Deserialize, Serialize};

use super::{pcf_rows, Report};
use crate::config::{overlay, ModelArgs, ResolvedModel};
use crate::output::{lib_err, usage, OutDir};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Torus side length
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub side: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replication index; selects the random streams of the seed
    #[arg(long)]
    pub replica: Option<u64>,
    /// `all`, `single` or an infected fraction in [0,1]
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub snapshot_interval: Option<f64>,
    /// PCF bin width (default a/8)
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// PCF range (default 3a)
    #[arg(long)]
    pub r_max: Option<f64>,
}

impl SimulateArgs {
    pub fn overlay(&mut self, file: &SimulateArgs) {
        self.model.overlay(&file.model);
        overlay!(self, file; side, t_max, seed, replica, initial, warmup, snapshot_interval, bin_width, r_max);
    }

    pub fn resolve(&self) -> Result<SimResolved> {
        let model = self.model.resolve(Some(0.0))?;
        let initial = self.initial.clone().unwrap_or_else(|| "all".into());
        parse_initial(&initial)?;
        let r = SimResolved {
            model,
            side: self.side.unwrap_or(20.0),
            t_max: self.t_max.unwrap_or(100.0),
            seed: self.seed.unwrap_or(1),
            replica: self.replica.unwrap_or(0),
            initial,
            warmup: self.warmup,
            snapshot_interval: self.snapshot_interval,
            bin_width: self.bin_width.unwrap_or(model.a / 8.0),
            r_max: self.r_max.unwrap_or(3.0 * model.a),
        };
        if !(r.bin_width > 0.0 && r.r_max > r.bin_width) {
            return Err(usage("bin_width", "need 0 < bin_width < r_max"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResolved {
    #[serde(flatten)]
    pub model: ResolvedModel,
    #[serde(rename = "L")]
    pub side: f64,
    pub t_max: f64,
    pub seed: u64,
    pub replica: u64,
    pub initial: String,
    pub warmup: Option<f64>,
    pub snapshot_interval: Option<f64>,
    pub bin_width: f64,
    pub r_max: f64,
}

impl SimResolved {
    pub fn sim_config(&self, keep_snapshots: bool) -> Result<SimConfig> {
        let dom = TorusDomain::new(self.side, self.model.a).map_err(lib_err)?;
        let mut cfg = SimConfig::new(self.model.params(), dom, self.seed, self.t_max);
        cfg.replica = self.replica;
        cfg.initial = parse_initial(&self.initial)?;
        cfg.warmup = self.warmup;
        cfg.snapshot_interval = self.snapshot_interval;
        cfg.keep_snapshots = keep_snapshots;
        cfg.validate().map_err(lib_err)?;
        Ok(cfg)
    }
}

pub fn parse_initial(s: &str) -> Result<InitialCondition> {
    match s {
        "all" => Ok(InitialCondition::AllInfected),
        "single" => Ok(InitialCondition::SingleInfected),
        other => match other.parse::<f64>() {
            Ok(f) if (0.0..=1.0).contains(&f) => Ok(InitialCondition::Fraction(f)),
            _ => Err(usage("initial", "expected `all`, `single` or a fraction in [0,1]")),
        },
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    p_mean: f64,
    p_stderr: f64,
    t_absorb: Option<f64>,
    censored: bool,
    event_counts: EventCounts,
    seed: u64,
    params: &'a SimResolved,
    replica: u64,
    n_points: usize,
    warmup: f64,
    little_ratio: Option<f64>,
    plateaus: Plateaus,
}

#[derive(Serialize)]
struct Plateaus {
    w: Option<f64>,
    v: Option<f64>,
    z: Option<f64>,
}

#[derive(Serialize)]
pub struct SnapshotRow {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub state: &'static str,
}

pub fn snapshot_rows(snaps: &[Snapshot]) -> Vec<SnapshotRow> {
    snaps
        .iter()
        .flat_map(|s| {
            s.positions.iter().zip(&s.infected).enumerate().map(move |(id, (p, &inf))| SnapshotRow {
                t: s.t,
                id,
                x: p.x,
                y: p.y,
                state: if inf { "I" } else { "S" },
            })
        })
        .collect()
}

pub fn execute(args: &SimulateArgs, out: &OutDir) -> Result<Report> {
    let r = args.resolve()?;
    let cfg = r.sim_config(true)?;
    let res = run(&cfg).map_err(lib_err)?;
    let pcf = estimate_pcf(&res.snapshots, &cfg.dom, r.bin_width, r.r_max).map_err(lib_err)?;
    let (w, v, z) = plateaus(&pcf, r.model.a);
    let summary = Summary {
        p_mean: res.p_mean,
        p_stderr: res.p_stderr,
        t_absorb: res.t_absorb,
        censored: res.censored,
        event_counts: res.event_counts,
        seed: r.seed,
        params: &r,
        replica: r.replica,
        n_points: res.n_points,
        warmup: res.warmup,
        little_ratio: little_check(&res, r.model.beta),
        plateaus: Plateaus { w, v, z },
    };
    out.csv_with_header("snapshots.csv", &["t", "id", "x", "y", "state"], &snapshot_rows(&res.snapshots))?;
    out.csv_with_header(
        "pcf.csv",
        &["r_lo", "r_hi", "xi_psiphi", "xi_phiphi", "xi_psipsi", "counts"],
        &pcf_rows(&pcf),
    )?;
    out.json("summary.json", &summary)?;
    Report::new(&r, vec![])
}
