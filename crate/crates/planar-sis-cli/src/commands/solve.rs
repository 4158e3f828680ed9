use anyhow::Result;
use clap::{Args, ValueEnum};
use planar_sis::closures::ClosureSpec;
use planar_sis::functional::{self, GridConfig, SolveReport};
use planar_sis::percolation::{cluster_pcf, lambert_q, pi_recursion, PiGrid};
use planar_sis::polynomial::{self, Branch, ClosureSolution, MOTION_CODES, NO_MOTION_CODES};
use planar_sis::radial::RadialFunction;
use serde::{Deserialize, Serialize};

use super::{PcfRow, Report};
use crate::config::{overlay, ModelArgs, ResolvedModel};
use crate::output::{lib_err, usage, Failure, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Poly,
    Functional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseArg {
    Motion,
    NoMotion,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveArgs {
    /// Closure code, e.g. m2bi or b1i
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long = "case", value_enum)]
    #[serde(rename = "case")]
    pub case_: Option<CaseArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Cluster PCF plateau (no-motion); defaults to 1/q
    #[arg(long)]
    pub c: Option<f64>,
    /// Infinite-cluster fraction (no-motion); defaults to the Lambert root at mu
    #[arg(long)]
    pub q: Option<f64>,
    /// Use the radial cluster PCF pi(r)/q instead of a constant (functional, no-motion)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub cluster_pcf: Option<bool>,
    /// Functional grid step (default a/16)
    #[arg(long)]
    pub h: Option<f64>,
    /// Functional grid range (default 8a)
    #[arg(long)]
    pub grid_r_max: Option<f64>,
}

impl SolveArgs {
    pub fn overlay(&mut self, file: &SolveArgs) {
        self.model.overlay(&file.model);
        overlay!(self, file; spec, method, case_, c, q, cluster_pcf, h, grid_r_max);
    }

    pub fn resolve(&self) -> Result<SolveResolved> {
        let case = self.case_.unwrap_or(CaseArg::Motion);
        let method = self.method.unwrap_or(Method::Poly);
        let spec = self.spec.clone().ok_or_else(|| usage("spec", "required"))?;
        let codes: &[&str] = match (method, case) {
            (Method::Poly, CaseArg::Motion) => &MOTION_CODES,
            (Method::Poly, CaseArg::NoMotion) => &NO_MOTION_CODES,
            (Method::Functional, _) => &planar_sis::closures::REGISTERED,
        };
        if !codes.contains(&spec.as_str()) {
            return Err(usage("spec", format!("unknown code `{spec}`; registered: {}", codes.join(", "))));
        }
        let model = self.model.resolve(Some(0.0))?;
        if case == CaseArg::NoMotion && model.gamma != 0.0 {
            return Err(usage("gamma", "the no-motion case needs gamma = 0"));
        }
        let (q, c) = if case == CaseArg::NoMotion {
            let q = self.q.unwrap_or_else(|| lambert_q(model.mu));
            if !(q > 0.0 && q <= 1.0) {
                return Err(usage("q", "no infinite cluster (q = 0); the no-motion case needs mu > 1"));
            }
            (Some(q), Some(self.c.unwrap_or(1.0 / q)))
        } else {
            (None, None)
        };
        let grid = GridConfig::for_radius(model.a);
        Ok(SolveResolved {
            spec,
            method,
            case,
            model,
            q,
            c,
            cluster_pcf: self.cluster_pcf.unwrap_or(false),
            h: self.h.unwrap_or(grid.h),
            grid_r_max: self.grid_r_max.unwrap_or(grid.r_max),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResolved {
    pub spec: String,
    pub method: Method,
    pub case: CaseArg,
    #[serde(flatten)]
    pub model: ResolvedModel,
    pub q: Option<f64>,
    pub c: Option<f64>,
    pub cluster_pcf: bool,
    pub h: f64,
    pub grid_r_max: f64,
}

#[derive(Serialize)]
struct PolyOut<'a> {
    spec: &'a str,
    params: &'a ResolvedModel,
    w: Option<f64>,
    v: Option<f64>,
    z: Option<f64>,
    p: f64,
    branch: Branch,
    residual: f64,
    multiplicity_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

#[derive(Serialize)]
struct FunctionalOut<'a> {
    spec: &'a str,
    params: &'a ResolvedModel,
    p: f64,
    p_tilde: Option<f64>,
    q: Option<f64>,
    w: f64,
    v: f64,
    z: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    degenerate: bool,
    first_moment_residual: f64,
    singular: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn poly(r: &SolveResolved, out: &OutDir) -> Result<Vec<Failure>> {
    let params = r.model.params();
    let sol: ClosureSolution = match r.case {
        CaseArg::Motion => polynomial::solve_motion_poly(&r.spec, &params),
        CaseArg::NoMotion => polynomial::solve_no_motion_poly(&r.spec, &params, r.c.unwrap(), r.q.unwrap()),
    }
    .map_err(lib_err)?;
    out.json(
        "solution.json",
        &PolyOut {
            spec: &sol.spec,
            params: &r.model,
            w: finite(sol.w),
            v: finite(sol.v),
            z: finite(sol.z),
            p: sol.p,
            branch: sol.branch,
            residual: sol.residual,
            multiplicity_flag: sol.multiplicity_flag,
            p_tilde: sol.p_tilde,
            q: r.q,
            c: r.c,
        },
    )?;
    Ok(match sol.branch {
        Branch::Unresolved => vec![Failure::new(&r.spec, "no admissible root and the system is undefined near p = 0")],
        _ => vec![],
    })
}

fn functional(r: &SolveResolved, out: &OutDir) -> Result<Vec<Failure>> {
    let params = r.model.params();
    let spec = ClosureSpec::from_code(&r.spec).map_err(lib_err)?;
    let grid = GridConfig {
        h: r.h,
        r_max: r.grid_r_max,
        ..GridConfig::for_radius(r.model.a)
    };
    let mut failures = Vec::new();
    let rep: SolveReport = match r.case {
        CaseArg::Motion => functional::solve_motion(&spec, &params, &grid),
        CaseArg::NoMotion => {
            let n = (grid.r_max / grid.h).round() as usize;
            let c = if r.cluster_pcf {
                let pi = pi_recursion(r.model.lambda, r.model.a, &PiGrid { h: grid.h, r_max: grid.r_max, ..PiGrid::for_radius(r.model.a) })
                    .map_err(lib_err)?;
                if !pi.converged {
                    failures.push(Failure::new("pi", "connection-probability recursion did not converge"));
                }
                cluster_pcf(&pi).ok_or_else(|| usage("mu", "the Boolean model does not percolate"))?
            } else {
                RadialFunction::constant(grid.h, n, r.c.unwrap(), 1.0)
            };
            functional::solve_no_motion(&spec, &params, &c, r.q.unwrap(), &grid)
        }
    }
    .map_err(lib_err)?;
    if !rep.converged {
        failures.push(Failure::new(&r.spec, format!("no convergence after {} sweeps (residual {:.3e})", rep.iterations, rep.residual)));
    }
    let (w, v, z) = rep.plateaus(r.model.a);
    let rows: Vec<PcfRow> = (0..rep.pcf.psi_phi.len())
        .map(|i| {
            let h = rep.pcf.psi_phi.h;
            PcfRow {
                r_lo: h * i as f64,
                r_hi: h * (i + 1) as f64,
                xi_psiphi: Some(rep.pcf.psi_phi.values[i]),
                xi_phiphi: Some(rep.pcf.phi_phi.values[i]),
                xi_psipsi: Some(rep.pcf.psi_psi.values[i]),
                counts: None,
            }
        })
        .collect();
    out.csv_with_header("pcf.csv", &["r_lo", "r_hi", "xi_psiphi", "xi_phiphi", "xi_psipsi", "counts"], &rows)?;
    out.json(
        "report.json",
        &FunctionalOut {
            spec: &rep.spec,
            params: &r.model,
            p: rep.p,
            p_tilde: rep.p_tilde,
            q: rep.q,
            w,
            v,
            z,
            iterations: rep.iterations,
            residual: rep.residual,
            converged: rep.converged,
            degenerate: rep.degenerate,
            first_moment_residual: rep.first_moment_residual,
            singular: rep.singular,
        },
    )?;
    Ok(failures)
}

pub fn execute(args: &SolveArgs, out: &OutDir) -> Result<Report> {
    let r = args.resolve()?;
    let failures = match r.method {
        Method::Poly => poly(&r, out)?,
        Method::Functional => functional(&r, out)?,
    };
    Report::new(&r, failures)
}
