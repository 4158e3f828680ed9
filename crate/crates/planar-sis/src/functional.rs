//! Damped Picard iteration of the second-moment integral equations on a radial grid.
//!
//! Both conditionings integrate a closure over the infection disc around the origin:
//! `I(r) = lambda p alpha \int_{|x| <= a} closure(xi(|x|), xi(|x - r|), xi(r)) dx`, evaluated in
//! polar form with midpoint nodes. The geometry of `|x - r|` is fixed, so interpolation
//! stencils are built once per grid.

use serde::{Deserialize, Serialize};

use crate::closures::{ClosureSpec, Compiled, PcfTriple, Term, PCF_FLOOR};
use crate::error::{invalid, Result};
use crate::geometry::ModelParams;
use crate::par;
use crate::polynomial::mean_field_p;
use crate::radial::RadialFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: f64,
    pub r_max: f64,
    pub n_v: usize,
    /// Angular nodes over the full circle; must be even.
    pub n_theta: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Sweeps with `p` below `p_floor` before reporting extinction.
    pub degenerate_sweeps: usize,
    pub p_floor: f64,
}

impl GridConfig {
    pub fn for_radius(a: f64) -> Self {
        Self {
            h: a / 16.0,
            r_max: 8.0 * a,
            n_v: 64,
            n_theta: 128,
            damping: 0.5,
            tol: 1e-6,
            max_iter: 10_000,
            degenerate_sweeps: 50,
            p_floor: 1e-6,
        }
    }

    fn validate(&self, a: f64) -> Result<()> {
        if !(self.h > 0.0 && self.r_max > a) {
            return Err(invalid("grid", "need h > 0 and r_max > a"));
        }
        if self.n_v == 0 || self.n_theta < 2 || !self.n_theta.is_multiple_of(2) {
            return Err(invalid("grid", "n_v must be positive and n_theta even"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        Ok(())
    }

    fn n_r(&self) -> usize {
        (self.r_max / self.h).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub spec: String,
    pub pcf: PcfTriple,
    /// Infected fraction of the whole population.
    pub p: f64,
    /// Infected fraction within the infinite cluster (no-motion case).
    pub p_tilde: Option<f64>,
    pub q: Option<f64>,
    pub iterations: usize,
    /// Sup-norm change of the last undamped update.
    pub residual: f64,
    pub converged: bool,
    /// `p` collapsed; reported as extinction with `p = 0`.
    pub degenerate: bool,
    /// `beta - (1-p) lambda \int xi_psiphi f` on the final iterate.
    pub first_moment_residual: f64,
    /// Some closure evaluation floored a zero PCF under a negative exponent.
    pub singular: bool,
}

impl SolveReport {
    /// Area-weighted means of `(xi_psiphi, xi_phiphi, xi_psipsi)` over grid nodes inside `(0, a)`.
    pub fn plateaus(&self, a: f64) -> (f64, f64, f64) {
        let mean = |f: &RadialFunction| {
            let (mut s, mut w) = (0.0, 0.0);
            for (r, x) in f.nodes().zip(&f.values) {
                if r < a {
                    s += r * x;
                    w += r;
                }
            }
            if w > 0.0 {
                s / w
            } else {
                f64::NAN
            }
        };
        (mean(&self.pcf.psi_phi), mean(&self.pcf.phi_phi), mean(&self.pcf.psi_psi))
    }
}

/// Stencil reproducing `RadialFunction::eval` at a fixed radius; index `n` is the tail.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    i0: u32,
    i1: u32,
    t: f64,
}

impl Stencil {
    fn new(d: f64, h: f64, n: usize) -> Self {
        let tail = n as u32;
        if d >= h * n as f64 {
            return Self { i0: tail, i1: tail, t: 0.0 };
        }
        let s = d / h - 0.5;
        if s <= 0.0 {
            return Self { i0: 0, i1: 0, t: 0.0 };
        }
        let i = s as usize;
        if i + 1 >= n {
            return Self {
                i0: (n - 1) as u32,
                i1: tail,
                t: (s - (n - 1) as f64) * 2.0,
            };
        }
        Self {
            i0: i as u32,
            i1: (i + 1) as u32,
            t: s - i as f64,
        }
    }

    #[inline]
    fn eval(&self, values: &[f64], tail: f64) -> f64 {
        let get = |i: u32| values.get(i as usize).copied().unwrap_or(tail);
        get(self.i0) * (1.0 - self.t) + get(self.i1) * self.t
    }
}

struct Quadrature {
    a: f64,
    n_v: usize,
    n_half: usize,
    v: Vec<f64>,
    /// `v dv * 2 dtheta`, the weight of each (v, theta) node over the half circle.
    weight: Vec<f64>,
    /// Per radial node, `n_v * n_half` stencils for `|x - r|`.
    stencils: Vec<Vec<Stencil>>,
}

impl Quadrature {
    fn new(a: f64, grid: &GridConfig, radii: &[f64], h: f64, n: usize) -> Self {
        let dv = a / grid.n_v as f64;
        let n_half = grid.n_theta / 2;
        let dth = 2.0 * std::f64::consts::PI / grid.n_theta as f64;
        let v: Vec<f64> = (0..grid.n_v).map(|k| (k as f64 + 0.5) * dv).collect();
        let cos: Vec<f64> = (0..n_half).map(|j| ((j as f64 + 0.5) * dth).cos()).collect();
        let stencils = par::map(radii, |&r| {
            let mut row = Vec::with_capacity(grid.n_v * n_half);
            for &vk in &v {
                for &c in &cos {
                    let d = (r * r + vk * vk - 2.0 * r * vk * c).max(0.0).sqrt();
                    row.push(Stencil::new(d, h, n));
                }
            }
            row
        });
        Self {
            a,
            n_v: grid.n_v,
            n_half,
            weight: v.iter().map(|vk| vk * dv * 2.0 * dth).collect(),
            v,
            stencils,
        }
    }

    /// `2 pi \int_0^a g(v) v dv` by the same radial nodes.
    fn disc_mean(&self, g: &RadialFunction) -> f64 {
        let dv = self.a / self.n_v as f64;
        2.0 * std::f64::consts::PI * self.v.iter().map(|&v| g.eval(v) * v * dv).sum::<f64>()
    }
}

#[inline]
fn pow_floor(x: f64, e: f64, singular: &mut bool) -> f64 {
    if e == 0.0 {
        return 1.0;
    }
    if e < 0.0 && x < PCF_FLOOR {
        *singular |= x <= 0.0;
        return PCF_FLOOR.powf(e);
    }
    if e == 1.0 {
        x
    } else {
        x.max(0.0).powf(e)
    }
}

/// `\int_{|x| <= a} closure(f1(|x|), f2(|x - r|), x3) dx` for one conditioning.
fn conditioned_integral(
    terms: &[(f64, Term)],
    q: &Quadrature,
    row: &[Stencil],
    f1_at_v: &[f64],
    f2: &RadialFunction,
    x3: f64,
    singular: &mut bool,
) -> f64 {
    let a2: Vec<f64> = row.iter().map(|s| s.eval(&f2.values, f2.tail)).collect();
    let mut total = 0.0;
    for &(w, term) in terms {
        let mut s = 0.0;
        match term {
            Term::Power(e) => {
                for k in 0..q.n_v {
                    let base = pow_floor(f1_at_v[k], e[0], singular);
                    if base == 0.0 {
                        continue;
                    }
                    let inner: f64 = if e[1] == 0.0 {
                        q.n_half as f64
                    } else {
                        a2[k * q.n_half..(k + 1) * q.n_half]
                            .iter()
                            .map(|&x| pow_floor(x, e[1], singular))
                            .sum()
                    };
                    s += q.weight[k] * base * inner;
                }
                s *= pow_floor(x3, e[2], singular);
            }
            Term::Arith(eta) => {
                for k in 0..q.n_v {
                    let inner: f64 = a2[k * q.n_half..(k + 1) * q.n_half].iter().sum();
                    s += q.weight[k] * (eta * f1_at_v[k] * q.n_half as f64 + (1.0 - eta) * inner);
                }
            }
        }
        total += w * s;
    }
    total
}

/// `alpha \int_0^a v dv \int_0^{2 pi} f1(v)^e1 f2(|x - r|)^e2 dtheta` by midpoint quadrature.
pub fn ring_kernel(
    f1: &RadialFunction,
    e1: f64,
    f2: &RadialFunction,
    e2: f64,
    r: f64,
    alpha: f64,
    a: f64,
    n_v: usize,
    n_theta: usize,
) -> f64 {
    let dv = a / n_v as f64;
    let dth = 2.0 * std::f64::consts::PI / n_theta as f64;
    let mut s = 0.0;
    for k in 0..n_v {
        let v = (k as f64 + 0.5) * dv;
        let base = f1.eval(v).powf(e1);
        let mut ring = 0.0;
        for j in 0..n_theta {
            let c = ((j as f64 + 0.5) * dth).cos();
            let d = (r * r + v * v - 2.0 * r * v * c).max(0.0).sqrt();
            ring += f2.eval(d).powf(e2);
        }
        s += base * ring * v;
    }
    alpha * s * dv * dth
}

enum Case<'a> {
    Motion,
    NoMotion { c: &'a RadialFunction, q: f64 },
}

struct Problem<'a> {
    spec: &'a ClosureSpec,
    compiled: Compiled,
    params: ModelParams,
    case: Case<'a>,
    grid: GridConfig,
}

impl Problem<'_> {
    fn lambda_eff(&self) -> f64 {
        match self.case {
            Case::Motion => self.params.lambda,
            Case::NoMotion { q, .. } => q * self.params.lambda,
        }
    }

    fn c_at(&self, r: f64) -> f64 {
        match self.case {
            Case::Motion => 1.0,
            Case::NoMotion { c, .. } => c.eval(r),
        }
    }

    fn p_of(&self, quad: &Quadrature, psi_phi: &RadialFunction) -> f64 {
        let m = self.lambda_eff() * self.params.alpha * quad.disc_mean(psi_phi);
        if m > 0.0 {
            1.0 - self.params.beta / m
        } else {
            f64::NEG_INFINITY
        }
    }

    fn psi_psi(&self, p: f64, phi_phi: &RadialFunction, psi_phi: &RadialFunction) -> RadialFunction {
        let q = 1.0 - p;
        let vals = phi_phi
            .nodes()
            .zip(phi_phi.values.iter().zip(&psi_phi.values))
            .map(|(r, (&ff, &pf))| (self.c_at(r) - p * p * ff - 2.0 * p * q * pf) / (q * q))
            .collect();
        let tail = match self.case {
            Case::Motion => 1.0,
            Case::NoMotion { c, .. } => (c.tail - p * p - 2.0 * p * q) / (q * q),
        };
        RadialFunction {
            h: phi_phi.h,
            values: vals,
            tail,
        }
    }

    fn solve(&self) -> Result<SolveReport> {
        let prm = self.params;
        prm.validate()?;
        if !(prm.beta > 0.0) {
            return Err(invalid("beta", "functional solver needs beta > 0"));
        }
        self.grid.validate(prm.a)?;
        let n = self.grid.n_r();
        let h = self.grid.h;
        let radii: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let quad = Quadrature::new(prm.a, &self.grid, &radii, h, n);
        let motion = matches!(self.case, Case::Motion);
        let f = |r: f64| if r <= prm.a { prm.alpha } else { 0.0 };

        let mut phi_phi = RadialFunction::constant(h, n, 1.0, 1.0);
        let mut psi_phi = RadialFunction::constant(h, n, 1.0, 1.0);
        let mut low = 0usize;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut singular = false;
        let mut degenerate = false;
        let mut p = match self.case {
            Case::Motion => mean_field_p(&prm),
            Case::NoMotion { .. } => self.p_of(&quad, &psi_phi).max(0.0),
        };

        for it in 1..=self.grid.max_iter {
            iterations = it;
            if p < self.grid.p_floor {
                low += 1;
                if low >= self.grid.degenerate_sweeps {
                    degenerate = true;
                    break;
                }
            } else {
                low = 0;
            }
            let pe = p.max(self.grid.p_floor);
            let psi_psi = self.psi_psi(pe, &phi_phi, &psi_phi);
            let lam_p = self.lambda_eff() * pe;
            let pf_v: Vec<f64> = quad.v.iter().map(|&v| psi_phi.eval(v)).collect();
            let updates = par::map_range(n, |i| {
                let r = radii[i];
                let row = &quad.stencils[i];
                let mut sing = false;
                let i_pf = lam_p
                    * prm.alpha
                    * conditioned_integral(
                        self.compiled.psiphi_terms(),
                        &quad,
                        row,
                        &pf_v,
                        &phi_phi,
                        psi_phi.values[i],
                        &mut sing,
                    );
                let i_pp = lam_p
                    * prm.alpha
                    * conditioned_integral(
                        self.compiled.psipsi_terms(),
                        &quad,
                        row,
                        &pf_v,
                        &psi_phi,
                        psi_psi.values[i],
                        &mut sing,
                    );
                // xi_psipsi eliminated through the superposition identity
                let g = if motion { prm.gamma } else { 0.0 };
                let c = self.c_at(r);
                let ff = if motion {
                    (pe * g + (1.0 - pe) * psi_phi.values[i] * (f(r) + i_pf)) / (pe * (prm.beta + g))
                } else {
                    (1.0 - pe) * psi_phi.values[i] * (f(r) + i_pf) / (pe * prm.beta)
                };
                let gi = g + i_pp;
                let pf = (gi * (c - pe * pe * phi_phi.values[i]) / (1.0 - pe) - (1.0 - pe) * g)
                    / (pe * (prm.beta + 2.0 * gi));
                (ff.max(0.0), pf.max(0.0), sing)
            });
            residual = 0.0;
            let d = self.grid.damping;
            for (i, &(ff, pf, sing)) in updates.iter().enumerate() {
                singular |= sing;
                residual = residual
                    .max((ff - phi_phi.values[i]).abs())
                    .max((pf - psi_phi.values[i]).abs());
                phi_phi.values[i] += d * (ff - phi_phi.values[i]);
                psi_phi.values[i] += d * (pf - psi_phi.values[i]);
            }
            p = self.p_of(&quad, &psi_phi);
            if !residual.is_finite() {
                break;
            }
            if residual < self.grid.tol {
                break;
            }
        }

        let converged = !degenerate && residual < self.grid.tol;
        let p_final = if degenerate { 0.0 } else { p.max(0.0) };
        let psi_psi = self.psi_psi(p_final.min(1.0 - 1e-12), &phi_phi, &psi_phi);
        let first_moment_residual = if degenerate {
            0.0
        } else {
            prm.beta - (1.0 - p_final) * self.lambda_eff() * prm.alpha * quad.disc_mean(&psi_phi)
        };
        let (p_out, p_tilde, q) = match self.case {
            Case::Motion => (p_final, None, None),
            Case::NoMotion { q, .. } => (q * p_final, Some(p_final), Some(q)),
        };
        Ok(SolveReport {
            spec: self.spec.name.clone(),
            pcf: PcfTriple {
                psi_phi,
                phi_phi,
                psi_psi,
            },
            p: p_out,
            p_tilde,
            q,
            iterations,
            residual,
            converged,
            degenerate,
            first_moment_residual,
            singular,
        })
    }
}

/// Motion-case fixed point for one closure.
pub fn solve_motion(spec: &ClosureSpec, params: &ModelParams, grid: &GridConfig) -> Result<SolveReport> {
    spec.validate()?;
    Problem {
        spec,
        compiled: spec.compile(),
        params: *params,
        case: Case::Motion,
        grid: *grid,
    }
    .solve()
}

/// No-motion fixed point on the infinite cluster (intensity `q lambda`) with cluster PCF `c`.
/// The report carries `p_tilde` and `p = q p_tilde`.
pub fn solve_no_motion(
    spec: &ClosureSpec,
    params: &ModelParams,
    c: &RadialFunction,
    q: f64,
    grid: &GridConfig,
) -> Result<SolveReport> {
    spec.validate()?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("q", "need q in (0, 1]"));
    }
    Problem {
        spec,
        compiled: spec.compile(),
        params: *params,
        case: Case::NoMotion { c, q },
        grid: *grid,
    }
    .solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_matches_eval() {
        let f = RadialFunction::from_fn(0.1, 20, 1.0, |r| 0.3 + r * r);
        for k in 0..500 {
            let d = k as f64 * 0.0051;
            let s = Stencil::new(d, f.h, f.len());
            assert!((s.eval(&f.values, f.tail) - f.eval(d)).abs() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn ring_kernel_constant_and_separable() {
        let one = RadialFunction::constant(0.1, 40, 1.0, 1.0);
        let k = ring_kernel(&one, 1.0, &one, 1.0, 0.7, 2.0, 1.0, 64, 128);
        assert!((k - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        let f1 = RadialFunction::from_fn(0.1, 40, 1.0, |r| 1.0 + r);
        let a = ring_kernel(&f1, 1.0, &one, 0.0, 0.0, 1.0, 1.0, 64, 128);
        let b = ring_kernel(&f1, 1.0, &f1, 0.0, 2.5, 1.0, 1.0, 64, 128);
        assert!((a - b).abs() < 1e-12);
        // 2 pi \int_0^1 (1 + v) v dv = 2 pi (1/2 + 1/3)
        assert!((a - 2.0 * std::f64::consts::PI * (0.5 + 1.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn large_gamma_is_mean_field() {
        let prm = ModelParams::with_mu(1.0, 8.0, 1e3, 1.0, 12.566).unwrap();
        let mut grid = GridConfig::for_radius(prm.a);
        grid.n_v = 16;
        grid.n_theta = 32;
        let spec = ClosureSpec::from_code("m2bi").unwrap();
        let rep = solve_motion(&spec, &prm, &grid).unwrap();
        assert!(rep.converged);
        assert!((rep.p - mean_field_p(&prm)).abs() < 2e-3, "{}", rep.p);
        let (w, v, z) = rep.plateaus(prm.a);
        for x in [w, v, z] {
            assert!((x - 1.0).abs() < 1e-2, "{x}");
        }
    }
}
