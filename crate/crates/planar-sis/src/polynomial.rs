//! Plateau-value systems in `(w, v, z, p)` for the motion and no-motion cases.
//!
//! `w`, `v`, `z` are the near-origin values of `xi_PsiPhi`, `xi_PhiPhi`, `xi_PsiPsi`.
//! Solutions are found by eliminating `w` (first-moment identity), `v` (the Phi,Phi
//! balance, a scalar equation) and `z`, bracketing every root of the remaining scalar
//! residual in `p`, then polishing with damped Newton on the full system.

use nalgebra::{Matrix4, Vector4};
use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::closures::{ClosureSpec, Compiled};
use crate::error::{Error, Result};
use crate::geometry::ModelParams;

pub fn mean_field_p(params: &ModelParams) -> f64 {
    mean_field(params.alpha, params.beta, params.mu())
}

pub fn mean_field(alpha: f64, beta: f64, mu: f64) -> f64 {
    (1.0 - beta / (alpha * mu)).max(0.0)
}

/// Logarithmic mean of `x^2` and `y^2`: `(x^2 - y^2) / (ln x^2 - ln y^2)`.
pub fn log_mean_sq(x: f64, y: f64) -> f64 {
    if (x - y).abs() < 1e-9 * x.abs().max(y.abs()) {
        return x * x;
    }
    (x - y) * (x + y) / (2.0 * (x.ln() - y.ln()))
}

/// Plateau form of a closure.
#[derive(Debug, Clone, PartialEq)]
pub enum PlateauModel {
    M2bi,
    B1i,
    /// b1g1, m-inf-bg1 and (no-motion) g1 share this system.
    B1g1,
    MinfBi,
    /// Any other closure, evaluated through its compiled form.
    Closure(Box<Compiled>),
}

impl PlateauModel {
    pub fn from_code(code: &str, case: &Case) -> Result<Self> {
        let motion = matches!(case, Case::Motion);
        Ok(match code {
            "m2bi" => Self::M2bi,
            "b1i" => Self::B1i,
            "b1g1" | "minfbg1" => Self::B1g1,
            "g1" if !motion => Self::B1g1,
            "minfbi" => Self::MinfBi,
            other => Self::Closure(Box::new(ClosureSpec::from_code(other)?.compile())),
        })
    }

    /// `C_PsiPhi(w, v, w)`: the Psi,Phi term of the Phi,Phi balance divided by `beta p`.
    pub fn t1(&self, w: f64, v: f64) -> f64 {
        match self {
            Self::M2bi => 0.5 * (w + v),
            Self::B1i => w.cbrt() * v.max(0.0).powf(2.0 / 3.0),
            Self::B1g1 => (w * v.max(0.0)).sqrt(),
            Self::MinfBi => log_mean_sq(v, w) / w,
            Self::Closure(c) => c.psiphi([w, v, w]),
        }
    }

    /// `z C_PsiPsi(w, w, z) / w`: the Psi,Psi term of the Psi,Phi balance divided by `beta p`.
    pub fn t2(&self, w: f64, z: f64) -> f64 {
        match self {
            Self::M2bi => 0.5 * (w + z),
            Self::B1i => w.cbrt() * z.max(0.0).powf(2.0 / 3.0),
            Self::B1g1 => (w * z.max(0.0)).sqrt(),
            Self::MinfBi => log_mean_sq(w, z) / w,
            Self::Closure(c) => z * c.psipsi([w, w, z]) / w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum Case {
    Motion,
    /// Cluster formulation with PCF constant `c` and cluster probability `q`.
    NoMotion { c: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Survival,
    Extinct,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSolution {
    pub spec: String,
    pub params: ModelParams,
    #[serde(flatten)]
    pub case: Case,
    pub w: f64,
    pub v: f64,
    pub z: f64,
    /// Infected fraction of the whole process (`q * p_tilde` in the no-motion case).
    pub p: f64,
    /// Infected fraction on the cluster, no-motion case only.
    pub p_tilde: Option<f64>,
    pub branch: Branch,
    pub residual: f64,
    pub multiplicity_flag: bool,
    /// Every admissible root in `p` (or `p_tilde`) that was found.
    pub roots: Vec<f64>,
}

struct System<'a> {
    model: &'a PlateauModel,
    alpha: f64,
    beta: f64,
    gamma: f64,
    /// `mu` or `mu_tilde`
    mu: f64,
    /// 1 for the motion case
    c: f64,
    motion: bool,
}

impl System<'_> {
    fn residuals(&self, x: [f64; 4]) -> [f64; 4] {
        let [w, v, z, p] = x;
        let (a, b, g) = (self.alpha, self.beta, if self.motion { self.gamma } else { 0.0 });
        let e1 = (g + b) * p * v - g * p - a * (1.0 - p) * w - b * p * self.model.t1(w, v);
        let e2 = b * p * w - (1.0 - p) * g * (z - 1.0) - b * p * self.model.t2(w, z);
        let e3 = b - (1.0 - p) * a * self.mu * w;
        let e4 = (1.0 - p).powi(2) * z + 2.0 * p * (1.0 - p) * w + p * p * v - self.c;
        [e1, e2, e3, e4]
    }

    fn norm(&self, x: [f64; 4]) -> f64 {
        self.residuals(x).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn w_of(&self, p: f64) -> f64 {
        self.beta / ((1.0 - p) * self.alpha * self.mu)
    }

    /// Smallest positive `v` solving the Phi,Phi balance, if any.
    fn v_of(&self, p: f64, w: f64) -> Option<f64> {
        let (a, b, g) = (self.alpha, self.beta, if self.motion { self.gamma } else { 0.0 });
        if let PlateauModel::M2bi = self.model {
            let v = (g * p + a * (1.0 - p) * w + 0.5 * b * p * w) / ((g + 0.5 * b) * p);
            return (v > 0.0).then_some(v);
        }
        let f = |v: f64| (g + b) * p * v - g * p - a * (1.0 - p) * w - b * p * self.model.t1(w, v);
        let n = 240;
        let (lo, hi) = (1e-12f64, 1e12f64);
        let ratio = (hi / lo).powf(1.0 / n as f64);
        let mut x0 = lo;
        let mut f0 = f(x0);
        for _ in 0..n {
            let x1 = x0 * ratio;
            let f1 = f(x1);
            if f0 < 0.0 && f1 >= 0.0 {
                return brent(x0, x1, f, 1e-15);
            }
            x0 = x1;
            f0 = f1;
        }
        None
    }

    /// Complete `(w, v, z)` from `p` and return the closing residual.
    fn reduce(&self, p: f64) -> Option<([f64; 4], f64)> {
        let w = self.w_of(p);
        let v = self.v_of(p, w)?;
        let q = 1.0 - p;
        if self.motion {
            let z = (1.0 - 2.0 * p * q * w - p * p * v) / (q * q);
            if !(z > 0.0) {
                return None;
            }
            let x = [w, v, z, p];
            Some((x, self.residuals(x)[1] / p))
        } else {
            // the Psi,Phi balance forces z = w for every registered no-motion system
            let z = if self.t2_is_identity_at(w) { w } else { self.z_no_motion(w)? };
            let x = [w, v, z, p];
            Some((x, self.residuals(x)[3]))
        }
    }

    fn t2_is_identity_at(&self, w: f64) -> bool {
        (self.model.t2(w, w) - w).abs() <= 1e-12 * w.max(1.0)
    }

    fn z_no_motion(&self, w: f64) -> Option<f64> {
        let f = |z: f64| self.model.t2(w, z) - w;
        let mut x0 = 1e-12;
        let mut f0 = f(x0);
        for k in 1..=240 {
            let x1 = 1e-12 * (1e24f64).powf(k as f64 / 240.0);
            let f1 = f(x1);
            if f0 * f1 <= 0.0 {
                return brent(x0, x1, f, 1e-15);
            }
            x0 = x1;
            f0 = f1;
        }
        None
    }

    fn admissible(&self, x: [f64; 4]) -> bool {
        let [w, v, z, p] = x;
        p > 0.0 && p < 1.0 && v >= 0.0 && z >= 0.0 && w > self.beta / (self.alpha * self.mu)
    }

    /// Damped Newton with a finite-difference Jacobian.
    fn polish(&self, mut x: [f64; 4]) -> [f64; 4] {
        let mut r = self.norm(x);
        for _ in 0..50 {
            if r < 1e-14 {
                break;
            }
            let f0 = Vector4::from(self.residuals(x));
            let mut jac = Matrix4::zeros();
            for j in 0..4 {
                let h = 1e-7 * x[j].abs().max(1e-3);
                let mut xp = x;
                xp[j] += h;
                let fp = Vector4::from(self.residuals(xp));
                jac.set_column(j, &((fp - f0) / h));
            }
            let Some(step) = jac.lu().solve(&(-f0)) else {
                break;
            };
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-6 {
                let cand = [
                    x[0] + t * step[0],
                    x[1] + t * step[1],
                    x[2] + t * step[2],
                    x[3] + t * step[3],
                ];
                let rc = self.norm(cand);
                if rc.is_finite() && rc < r && self.admissible(cand) {
                    x = cand;
                    r = rc;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        x
    }

    /// All admissible roots, sorted by `p`, plus whether the residual is defined near `p = 0`.
    fn roots(&self) -> (Vec<[f64; 4]>, bool) {
        let mut grid: Vec<f64> = (0..=120).map(|k| 1e-10 * (1e7f64).powf(k as f64 / 120.0)).collect();
        grid.extend((1..=2000).map(|k| 1e-3 + (1.0 - 1e-3 - 1e-9) * k as f64 / 2000.0));
        let coarse: Vec<bool> = grid.iter().map(|&p| self.reduce(p).is_some()).collect();
        // admissible windows can be narrower than the grid step: sample toward each edge
        let mut extra = Vec::new();
        for k in 0..grid.len() - 1 {
            if coarse[k] == coarse[k + 1] {
                continue;
            }
            let (mut inside, mut outside) = if coarse[k] { (grid[k], grid[k + 1]) } else { (grid[k + 1], grid[k]) };
            for _ in 0..60 {
                let mid = 0.5 * (inside + outside);
                if self.reduce(mid).is_some() {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            let anchor = if coarse[k] { grid[k] } else { grid[k + 1] };
            extra.extend((1..=48).map(|j| inside + (anchor - inside) * 0.5f64.powi(j)));
            extra.push(inside);
        }
        grid.extend(extra);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let vals: Vec<Option<f64>> = grid.iter().map(|&p| self.reduce(p).map(|r| r.1)).collect();
        let defined_near_zero = vals[..10].iter().all(|v| v.is_some_and(f64::is_finite));
        let mut out: Vec<[f64; 4]> = Vec::new();
        for k in 0..grid.len() - 1 {
            let (Some(a), Some(b)) = (vals[k], vals[k + 1]) else {
                continue;
            };
            if !(a.is_finite() && b.is_finite()) || a * b > 0.0 || (a == 0.0 && k > 0) {
                continue;
            }
            let f = |p: f64| self.reduce(p).map_or(f64::NAN, |r| r.1);
            let Some(p) = brent(grid[k], grid[k + 1], f, 1e-15) else {
                continue;
            };
            let Some((x, _)) = self.reduce(p) else {
                continue;
            };
            let x = self.polish(x);
            // a sign change across a pole is not a root
            if self.admissible(x) && self.norm(x) < 1e-8 && !out.iter().any(|y| (y[3] - x[3]).abs() < 1e-9) {
                out.push(x);
            }
        }
        out.sort_by(|a, b| a[3].partial_cmp(&b[3]).unwrap());
        (out, defined_near_zero)
    }
}

fn brent(lo: f64, hi: f64, f: impl FnMut(f64) -> f64, eps: f64) -> Option<f64> {
    let mut conv = SimpleConvergency { eps, max_iter: 500 };
    find_root_brent(lo, hi, f, &mut conv).ok()
}

fn validate(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if !(params.beta > 0.0) {
        return Err(crate::error::invalid("beta", "the plateau systems need beta > 0"));
    }
    Ok(())
}

fn extinct(spec: &str, params: &ModelParams, case: Case, branch: Branch) -> ClosureSolution {
    ClosureSolution {
        spec: spec.into(),
        params: *params,
        case,
        w: f64::NAN,
        v: f64::NAN,
        z: f64::NAN,
        p: 0.0,
        p_tilde: matches!(case, Case::NoMotion { .. }).then_some(0.0),
        branch,
        residual: 0.0,
        multiplicity_flag: false,
        roots: vec![],
    }
}

/// Motion-case plateau solution for closure `code`.
pub fn solve_motion_poly(code: &str, params: &ModelParams) -> Result<ClosureSolution> {
    validate(params)?;
    let model = PlateauModel::from_code(code, &Case::Motion)?;
    let sys = System {
        model: &model,
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
        mu: params.mu(),
        c: 1.0,
        motion: true,
    };
    if params.beta >= params.alpha * params.mu() {
        return Ok(extinct(code, params, Case::Motion, Branch::Extinct));
    }
    let (roots, defined) = sys.roots();
    let all: Vec<f64> = roots.iter().map(|x| x[3]).collect();
    let (x, multiple) = match roots.len() {
        0 => {
            let branch = if defined { Branch::Extinct } else { Branch::Unresolved };
            return Ok(extinct(code, params, Case::Motion, branch));
        }
        1 => (roots[0], false),
        _ => (continue_from_high_velocity(&model, params, &roots), true),
    };
    Ok(ClosureSolution {
        spec: code.into(),
        params: *params,
        case: Case::Motion,
        w: x[0],
        v: x[1],
        z: x[2],
        p: x[3],
        p_tilde: None,
        branch: Branch::Survival,
        residual: sys.norm(x),
        multiplicity_flag: multiple,
        roots: all,
    })
}

/// Track the root connected to the mean-field point as `gamma` decreases from `1e6`.
fn continue_from_high_velocity(model: &PlateauModel, params: &ModelParams, roots: &[[f64; 4]]) -> [f64; 4] {
    let target = params.gamma.max(1e-9);
    let steps = 60;
    let mut track = mean_field_p(params);
    for k in 0..=steps {
        let g = 1e6 * (target / 1e6).powf(k as f64 / steps as f64);
        let sys = System {
            model,
            alpha: params.alpha,
            beta: params.beta,
            gamma: g,
            mu: params.mu(),
            c: 1.0,
            motion: true,
        };
        let (rs, _) = sys.roots();
        match rs.iter().min_by(|a, b| (a[3] - track).abs().partial_cmp(&(b[3] - track).abs()).unwrap()) {
            Some(x) => track = x[3],
            // the branch died out along the path: fall back to the largest root
            None => return *roots.last().unwrap(),
        }
    }
    *roots
        .iter()
        .min_by(|a, b| (a[3] - track).abs().partial_cmp(&(b[3] - track).abs()).unwrap())
        .unwrap()
}

/// No-motion plateau solution on the Boolean cluster; `p = q * p_tilde`.
pub fn solve_no_motion_poly(code: &str, params: &ModelParams, c: f64, q: f64) -> Result<ClosureSolution> {
    validate(params)?;
    if !(c >= 1.0) || !(q > 0.0 && q <= 1.0) {
        return Err(crate::error::invalid("c,q", format!("need c >= 1 and q in (0,1], got c={c}, q={q}")));
    }
    let case = Case::NoMotion { c, q };
    let model = PlateauModel::from_code(code, &case)?;
    let mu_t = q * params.mu();
    let sys = System {
        model: &model,
        alpha: params.alpha,
        beta: params.beta,
        gamma: 0.0,
        mu: mu_t,
        c,
        motion: false,
    };
    if params.beta >= c * params.alpha * mu_t {
        return Ok(extinct(code, params, case, Branch::Extinct));
    }
    let (roots, defined) = sys.roots();
    let all: Vec<f64> = roots.iter().map(|x| x[3]).collect();
    let Some(&x) = roots.last() else {
        let branch = if defined { Branch::Extinct } else { Branch::Unresolved };
        return Ok(extinct(code, params, case, branch));
    };
    Ok(ClosureSolution {
        spec: code.into(),
        params: *params,
        case,
        w: x[0],
        v: x[1],
        z: x[2],
        p: q * x[3],
        p_tilde: Some(x[3]),
        branch: Branch::Survival,
        residual: sys.norm(x),
        multiplicity_flag: roots.len() > 1,
        roots: all,
    })
}

/// Full residual vector of the system at `(w, v, z, p)` (`p` is `p_tilde` in the no-motion case).
pub fn residuals(code: &str, params: &ModelParams, case: Case, x: [f64; 4]) -> Result<[f64; 4]> {
    let model = PlateauModel::from_code(code, &case)?;
    let (mu, c, motion) = match case {
        Case::Motion => (params.mu(), 1.0, true),
        Case::NoMotion { c, q } => (q * params.mu(), c, false),
    };
    Ok(System {
        model: &model,
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
        mu,
        c,
        motion,
    }
    .residuals(x))
}

/// The m2bi degree-4 equation in `w`, as `lhs - rhs`.
pub fn m2bi_quartic(w: f64, alpha: f64, beta: f64, gamma: f64, mu: f64) -> f64 {
    let s = alpha * mu * w - beta;
    let lhs = (2.0 * gamma + beta)
        * ((s + 2.0 * gamma) * (w * w * alpha * alpha * mu * mu - 2.0 * beta * s * w) - w * s * beta * beta
            - 2.0 * gamma * beta * beta);
    let rhs = s * (s + 2.0 * gamma) * (2.0 * gamma * s + 2.0 * alpha * beta * w + beta * w * s);
    lhs - rhs
}

/// The cubed no-motion b1i relation `v^2 w s^3 - (v s - alpha w)^3` with `s = alpha mu_t w - beta`.
pub fn b1i_cubed_residual(w: f64, v: f64, alpha: f64, beta: f64, mu_tilde: f64) -> f64 {
    let s = alpha * mu_tilde * w - beta;
    v * v * w * s.powi(3) - (v * s - alpha * w).powi(3)
}

/// Codes accepted by the motion solver.
pub const MOTION_CODES: [&str; 5] = ["m2bi", "b1i", "b1g1", "minfbi", "minfbg1"];
/// Codes accepted by the no-motion solver.
pub const NO_MOTION_CODES: [&str; 6] = ["b1i", "g1", "b1g1", "minfbg1", "m2bi", "minfbi"];

pub fn check_code(code: &str) -> Result<()> {
    ClosureSpec::from_code(code).map(|_| ()).map_err(|_| Error::UnknownSpec(code.into()))
}
