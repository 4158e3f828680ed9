//! Critical values of the m2bi and b1i polynomial heuristics and the Safe / UMI / UMS
//! classification of the (mu, beta) plane.

use roots::{find_root_brent, find_roots_cubic, Roots, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::percolation::MU_STAR;

/// `2 / (3 + sqrt 8)`, the m2bi threshold ratio.
pub fn m2bi_eta() -> f64 {
    2.0 / (3.0 + 8f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalSpec {
    M2bi,
    B1i,
}

impl CriticalSpec {
    pub fn from_code(code: &str) -> Result<Self> {
        match code {
            "m2bi" => Ok(Self::M2bi),
            "b1i" => Ok(Self::B1i),
            other => Err(Error::Unsupported(format!(
                "critical values are available for m2bi and b1i, not `{other}`"
            ))),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::M2bi => "m2bi",
            Self::B1i => "b1i",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criticals {
    /// Only defined for m2bi.
    pub mu0: Option<f64>,
    pub beta0: f64,
    pub gamma0: f64,
    pub gamma_minus: Option<f64>,
    pub gamma_plus: Option<f64>,
}

fn brent(lo: f64, hi: f64, f: impl FnMut(f64) -> f64, eps: f64) -> Option<f64> {
    let mut conv = SimpleConvergency { eps, max_iter: 1000 };
    find_root_brent(lo, hi, f, &mut conv).ok()
}

/// Roots of `8 m g^2 + 2 beta (3m - 2 alpha) g + beta^2 m` with `m = mu alpha - beta`.
pub fn m2bi_gamma_pair(mu: f64, beta: f64, alpha: f64) -> Option<(f64, f64)> {
    let m = mu * alpha - beta;
    if !(m > 0.0 && beta > 0.0) {
        return None;
    }
    let b = 2.0 * alpha - 3.0 * m;
    let disc = b * b - 8.0 * m * m;
    if disc < 0.0 || b <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((beta * (b - s) / (8.0 * m), beta * (b + s) / (8.0 * m)))
}

/// The m2bi criticality quadratic in `gamma`.
pub fn m2bi_quadratic(mu: f64, beta: f64, alpha: f64, gamma: f64) -> f64 {
    let m = mu * alpha - beta;
    8.0 * m * gamma * gamma + 2.0 * beta * (3.0 * m - 2.0 * alpha) * gamma + beta * beta * m
}

pub fn m2bi_criticals(mu: f64, beta: f64, alpha: f64) -> Criticals {
    let eta = m2bi_eta();
    let pair = m2bi_gamma_pair(mu, beta, alpha);
    Criticals {
        mu0: Some(alpha * eta),
        beta0: mu * alpha - eta * alpha,
        gamma0: alpha * (mu - eta) * (2.0 - 3.0 * eta) / (8.0 * eta),
        gamma_minus: pair.map(|p| p.0),
        gamma_plus: pair.map(|p| p.1),
    }
}

fn b1i_coeffs(mu: f64, beta: f64, alpha: f64) -> (f64, f64, f64) {
    let m = mu * alpha - beta;
    let rho = (alpha * mu / beta).powf(2.0 / 3.0);
    let b = 2.0 * beta * m + beta * beta * (rho - 1.0) - beta * alpha;
    (2.0 * m, b, beta.powi(3) * (rho - 1.0))
}

/// The b1i criticality quadratic in `gamma`.
pub fn b1i_quadratic(mu: f64, beta: f64, alpha: f64, gamma: f64) -> f64 {
    let (a2, a1, a0) = b1i_coeffs(mu, beta, alpha);
    a2 * gamma * gamma + a1 * gamma + a0
}

/// Discriminant of the b1i quadratic.
pub fn b1i_delta(mu: f64, beta: f64, alpha: f64) -> f64 {
    let (a2, a1, a0) = b1i_coeffs(mu, beta, alpha);
    a1 * a1 - 4.0 * a2 * a0
}

pub fn b1i_gamma_pair(mu: f64, beta: f64, alpha: f64) -> Option<(f64, f64)> {
    let m = mu * alpha - beta;
    if !(m > 0.0 && beta > 0.0) {
        return None;
    }
    let (a2, a1, _) = b1i_coeffs(mu, beta, alpha);
    let d = b1i_delta(mu, beta, alpha);
    if d < 0.0 || a1 >= 0.0 {
        return None;
    }
    let s = d.sqrt();
    Some(((-a1 - s) / (2.0 * a2), (-a1 + s) / (2.0 * a2)))
}

/// Largest `beta` in `(0, alpha mu)` where the b1i discriminant vanishes.
pub fn b1i_beta0(mu: f64, alpha: f64) -> Option<f64> {
    let top = alpha * mu;
    let f = |b: f64| b1i_delta(mu, b, alpha);
    // log-spaced gaps below alpha*mu, from 1e-12 up to the whole interval
    let mut hi = top * (1.0 - 1e-12);
    let mut fhi = f(hi);
    for k in 1..=600 {
        let gap = 1e-12 * (1e12f64).powf(k as f64 / 600.0);
        let lo = top * (1.0 - gap).max(1e-12);
        let flo = f(lo);
        if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
            return bisect(lo, hi, f, 1e-12);
        }
        hi = lo;
        fhi = flo;
    }
    None
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < tol * hi.abs().max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn b1i_criticals(mu: f64, beta: f64, alpha: f64) -> Criticals {
    let beta0 = b1i_beta0(mu, alpha).unwrap_or(f64::NAN);
    let (a2, a1, _) = b1i_coeffs(mu, beta0, alpha);
    let pair = b1i_gamma_pair(mu, beta, alpha);
    Criticals {
        mu0: None,
        beta0,
        gamma0: -a1 / (2.0 * a2),
        gamma_minus: pair.map(|p| p.0),
        gamma_plus: pair.map(|p| p.1),
    }
}

pub fn criticals(spec: CriticalSpec, mu: f64, beta: f64, alpha: f64) -> Criticals {
    match spec {
        CriticalSpec::M2bi => m2bi_criticals(mu, beta, alpha),
        CriticalSpec::B1i => b1i_criticals(mu, beta, alpha),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaC {
    /// Clamped critical recovery rate.
    pub value: f64,
    /// Positive real roots of the defining equation in `(0, alpha mu]`.
    pub raw_roots: Vec<f64>,
    /// True when `gamma < gamma0` and the value is `beta0`.
    pub clamped: bool,
    /// Set below `mu0`, where the critical curve is discontinuous.
    pub discontinuous: bool,
    pub unresolved: bool,
}

/// The m2bi critical cubic in `beta`.
pub fn m2bi_beta_cubic(mu: f64, gamma: f64, alpha: f64, beta: f64) -> f64 {
    beta.powi(3) + beta * beta * (6.0 * gamma - alpha * mu)
        + 2.0 * beta * gamma * (2.0 * alpha - 3.0 * mu * alpha + 4.0 * gamma)
        - 8.0 * mu * alpha * gamma * gamma
}

pub fn beta_c(spec: CriticalSpec, mu: f64, gamma: f64, alpha: f64) -> BetaC {
    let top = alpha * mu;
    let mut raw: Vec<f64> = match spec {
        CriticalSpec::M2bi => {
            let c2 = 6.0 * gamma - alpha * mu;
            let c1 = 2.0 * gamma * (2.0 * alpha - 3.0 * mu * alpha + 4.0 * gamma);
            let c0 = -8.0 * mu * alpha * gamma * gamma;
            let rs = match find_roots_cubic(1.0, c2, c1, c0) {
                Roots::No(_) => vec![],
                Roots::One(r) => r.to_vec(),
                Roots::Two(r) => r.to_vec(),
                Roots::Three(r) => r.to_vec(),
                Roots::Four(r) => r.to_vec(),
            };
            rs.into_iter()
                .filter(|&b| b > 0.0 && b <= top * (1.0 + 1e-12))
                .collect()
        }
        CriticalSpec::B1i => {
            // gamma solves the quadratic at beta; scan beta for sign changes
            let f = |b: f64| b1i_quadratic(mu, b, alpha, gamma);
            let n = 4000;
            let mut out = Vec::new();
            let mut prev = (top * 1e-6, f(top * 1e-6));
            for k in 1..=n {
                let b = top * (1e-6 + (1.0 - 1e-6 - 1e-12) * k as f64 / n as f64);
                let fb = f(b);
                if prev.1.is_finite() && fb.is_finite() && prev.1 * fb < 0.0 {
                    if let Some(r) = brent(prev.0, b, f, 1e-13) {
                        out.push(r);
                    }
                }
                prev = (b, fb);
            }
            out
        }
    };
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c = criticals(spec, mu, 0.5 * top, alpha);
    let discontinuous = matches!(spec, CriticalSpec::M2bi) && mu * alpha < m2bi_eta() * alpha;
    if gamma < c.gamma0 {
        return BetaC {
            value: c.beta0,
            raw_roots: raw,
            clamped: true,
            discontinuous,
            unresolved: !c.beta0.is_finite(),
        };
    }
    // physical branch: the upper critical curve, beta in [beta0, alpha mu)
    let pick = raw
        .iter()
        .copied()
        .filter(|&b| b >= c.beta0 - 1e-9)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
    BetaC {
        value: pick.unwrap_or(f64::NAN),
        raw_roots: raw,
        clamped: false,
        discontinuous,
        unresolved: pick.is_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Safe,
    #[serde(rename = "UMI")]
    Umi,
    #[serde(rename = "UMS")]
    Ums,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::Safe => "Safe",
            Region::Umi => "UMI",
            Region::Ums => "UMS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub region: Region,
    pub boolean_supercritical: bool,
    pub gamma_minus: Option<f64>,
    pub gamma_plus: Option<f64>,
}

pub fn classify(spec: CriticalSpec, mu: f64, beta: f64, alpha: f64) -> PhasePoint {
    let c = criticals(spec, mu, beta, alpha);
    let region = if beta > alpha * mu {
        Region::Safe
    } else if c.gamma_plus.is_some() {
        Region::Ums
    } else {
        Region::Umi
    };
    let ums = region == Region::Ums;
    PhasePoint {
        mu,
        beta,
        alpha,
        region,
        boolean_supercritical: mu > MU_STAR,
        gamma_minus: if ums { c.gamma_minus } else { None },
        gamma_plus: if ums { c.gamma_plus } else { None },
    }
}

pub fn sweep(spec: CriticalSpec, mus: &[f64], betas: &[f64], alpha: f64) -> Vec<PhasePoint> {
    let grid: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&m| betas.iter().map(move |&b| (m, b)))
        .collect();
    par::map(&grid, |&(m, b)| classify(spec, m, b, alpha))
}

/// Inclusive arithmetic range `start:stop:step`.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // snap to 12 significant digits so 4.6 + 0.05 prints as 4.65
    let snap = |x: f64| {
        if x == 0.0 {
            return x;
        }
        let scale = 10f64.powi(11 - x.abs().log10().floor() as i32);
        (x * scale).round() / scale
    };
    (0..=n).map(|i| snap(start + step * i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2bi_values() {
        let c = m2bi_criticals(5.0, 4.8, 1.0);
        assert!((c.mu0.unwrap() - 0.3431).abs() < 1e-4);
        assert!((c.beta0 - 4.657).abs() < 1e-3);
        assert!((c.gamma0 - 1.647).abs() < 1e-2);
        assert!((c.gamma_plus.unwrap() - 8.042).abs() < 1e-2);
        assert!((c.gamma_minus.unwrap() - 0.358).abs() < 1e-3);
    }

    #[test]
    fn b1i_values() {
        let c = b1i_criticals(5.0, 4.8, 1.0);
        assert!((c.beta0 - 4.798).abs() < 1e-3);
        // double root of the quadratic at beta0 (independent scipy oracle: 2.7609)
        assert!((c.gamma0 - 2.7609).abs() < 2e-3);
        let (a2, a1, _) = b1i_coeffs(5.0, c.beta0, 1.0);
        assert!((c.gamma0 + a1 / (2.0 * a2)).abs() < 1e-12);
        assert!((c.gamma_plus.unwrap() - 3.298).abs() < 1e-2);
        let c = b1i_criticals(5.0, 4.95, 1.0);
        assert!((c.gamma_plus.unwrap() - 42.711).abs() < 0.05);
    }

    #[test]
    fn low_mu_ums_point() {
        let p = classify(CriticalSpec::M2bi, 0.25, 0.2, 1.0);
        assert_eq!(p.region, Region::Ums);
        assert!((p.gamma_minus.unwrap() - 0.003).abs() < 1e-3);
        assert!((p.gamma_plus.unwrap() - 1.84).abs() < 1e-2);
        let p = classify(CriticalSpec::B1i, 0.25, 0.2, 1.0);
        assert!((p.gamma_minus.unwrap() - 0.007).abs() < 1e-3);
        assert!((p.gamma_plus.unwrap() - 1.73).abs() < 1e-2);
    }

    #[test]
    fn regions() {
        assert_eq!(classify(CriticalSpec::M2bi, 3.0, 2.0, 1.0).region, Region::Umi);
        assert_eq!(classify(CriticalSpec::M2bi, 5.0, 10.0, 1.0).region, Region::Safe);
        assert_eq!(classify(CriticalSpec::M2bi, 5.0, 6.0, 1.0).region, Region::Safe);
        assert!(!classify(CriticalSpec::M2bi, 3.0, 2.0, 1.0).boolean_supercritical);
    }

    #[test]
    fn beta_c_table() {
        for (g, want) in [(0.2, 4.657), (1.0, 4.657), (5.0, 4.740), (10.0, 4.826), (100.0, 4.976)] {
            let b = beta_c(CriticalSpec::M2bi, 5.0, g, 1.0);
            assert!((b.value - want).abs() < 1e-2, "gamma {g}: {}", b.value);
        }
        let b = beta_c(CriticalSpec::B1i, 5.0, 0.2, 1.0);
        assert!(b.clamped);
        assert!((b.value - 4.798).abs() < 1e-3);
    }
}
