//! `planar-sis`: simulations, closure solvers, phase diagrams and percolation constants
//! for SIS epidemics on planar Poisson point processes.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when some unit of work failed
//! (no convergence, censored runs), 1 for I/O errors. Failures are reported as JSON on
//! stderr and in `failures.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{mtta, pcf, percolation, phase, simulate, solve, Report};
use config::{Echo, FileConfig};
use output::{Failure, OutDir, UsageError};

#[derive(Parser)]
#[command(name = "planar-sis", version, about = "SIS epidemics on planar point processes")]
struct Cli {
    /// TOML experiment file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true, env = "PLANAR_SIS_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact stochastic dynamics and estimate p and the pair correlations
    Simulate(simulate::SimulateArgs),
    /// Solve a closure by its plateau polynomials or the functional equations
    Solve(solve::SolveArgs),
    /// Classify (mu, beta) points and export critical curves
    Phase(phase::PhaseArgs),
    /// Mean time till absorption over a parameter sweep
    Mtta(mtta::MttaArgs),
    /// Infinite-cluster constants of the Boolean model
    Percolation(percolation::PercolationArgs),
    /// Pair correlation functions from a snapshot file or a fresh run
    Pcf(pcf::PcfArgs),
}

#[derive(Serialize)]
struct FailureList<'a> {
    failures: &'a [Failure],
}

fn run(cli: Cli) -> Result<(OutDir, Vec<Failure>)> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cli.jobs.or(file.jobs);
    if let Some(j) = jobs {
        if j == 0 {
            return Err(output::usage("jobs", "must be at least 1"));
        }
        planar_sis::par::init_jobs(j);
    }
    let out_path = cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("planar-sis-out"));
    let out = OutDir::create(&out_path)?;
    let stale = out.path("failures.json");
    if stale.exists() {
        std::fs::remove_file(&stale)?;
    }
    let (name, report): (&str, Report) = match cli.command {
        Command::Simulate(mut a) => {
            a.overlay(&file.simulate);
            ("simulate", simulate::execute(&a, &out)?)
        }
        Command::Solve(mut a) => {
            a.overlay(&file.solve);
            ("solve", solve::execute(&a, &out)?)
        }
        Command::Phase(mut a) => {
            a.overlay(&file.phase);
            ("phase", phase::execute(&a, &out)?)
        }
        Command::Mtta(mut a) => {
            a.overlay(&file.mtta);
            ("mtta", mtta::execute(&a, &out)?)
        }
        Command::Percolation(mut a) => {
            a.overlay(&file.percolation);
            ("percolation", percolation::execute(&a, &out)?)
        }
        Command::Pcf(mut a) => {
            a.overlay(&file.pcf);
            ("pcf", pcf::execute(&a, &out)?)
        }
    };
    let echo = Echo {
        command: name,
        jobs,
        version: env!("CARGO_PKG_VERSION"),
        resolved: &config::drop_nulls(report.resolved),
    };
    out.write("config.resolved.toml", toml::to_string(&echo)?.as_bytes())?;
    Ok((out, report.failures))
}

fn report_failures(out: Option<&OutDir>, failures: &[Failure]) {
    let list = FailureList { failures };
    if let Some(out) = out {
        if let Err(e) = out.json("failures.json", &list) {
            eprintln!("could not write failures.json: {e:#}");
        }
    }
    eprintln!("{}", serde_json::to_string(&list).unwrap_or_default());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_hint = cli.out.clone();
    match run(cli) {
        Ok((_, failures)) if failures.is_empty() => ExitCode::SUCCESS,
        Ok((out, failures)) => {
            report_failures(Some(&out), &failures);
            ExitCode::from(3)
        }
        Err(e) => {
            let out = out_hint.and_then(|p| OutDir::create(&p).ok());
            match e.downcast_ref::<UsageError>() {
                Some(u) => {
                    let f = Failure {
                        unit: "config".into(),
                        field: u.field.clone(),
                        reason: u.reason.clone(),
                    };
                    eprintln!("error: {u}");
                    report_failures(out.as_ref(), &[f]);
                    ExitCode::from(2)
                }
                None => {
                    eprintln!("error: {e:#}");
                    report_failures(out.as_ref(), &[Failure::new("io", format!("{e:#}"))]);
                    ExitCode::from(1)
                }
            }
        }
    }
}
