//! Boolean-model helpers for the no-motion case: the Lambert survival probability `q`,
//! the cluster constant `c = 1/q`, the connection-probability recursion `pi(r)` and an
//! empirical union-find estimate of `q`.

use petgraph::unionfind::UnionFind;
use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{sample_poisson, CellIndex, TorusDomain};
use crate::radial::RadialFunction;

/// Continuum percolation threshold of the radius-a Boolean model in mean-degree units.
pub const MU_STAR: f64 = 4.512;

/// Root in `(0, 1)` of `q = 1 - exp(-mu_tilde q)`, or 0 when `mu_tilde <= 1`.
pub fn lambert_q(mu_tilde: f64) -> f64 {
    if !(mu_tilde > 1.0) {
        return 0.0;
    }
    let f = |q: f64| q - 1.0 + (-mu_tilde * q).exp();
    let mut conv = SimpleConvergency {
        eps: 1e-16,
        max_iter: 500,
    };
    // below the nontrivial root: f(x) < 0 for x = (mu - 1)/mu^2
    let lo = (mu_tilde - 1.0) / (mu_tilde * mu_tilde);
    let mut q = find_root_brent(lo, 1.0, f, &mut conv).unwrap_or(1.0);
    // Newton polish
    for _ in 0..4 {
        let d = 1.0 - mu_tilde * (-mu_tilde * q).exp();
        if d.abs() < 1e-300 {
            break;
        }
        let next = q - f(q) / d;
        if !(next > 0.0 && next <= 1.0) {
            break;
        }
        q = next;
    }
    q
}

pub fn lambert_residual(mu_tilde: f64, q: f64) -> f64 {
    (q - 1.0 + (-mu_tilde * q).exp()).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGrid {
    pub h: f64,
    pub r_max: f64,
    pub n_v: usize,
    pub n_theta: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl PiGrid {
    pub fn for_radius(a: f64) -> Self {
        Self {
            h: a / 16.0,
            r_max: 8.0 * a,
            n_v: 64,
            n_theta: 128,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiSolution {
    pub pi: RadialFunction,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed point of the connection-probability recursion, iterated down from `pi = 1`.
pub fn pi_recursion(lambda: f64, a: f64, grid: &PiGrid) -> Result<PiSolution> {
    if !(lambda > 0.0 && a > 0.0 && grid.h > 0.0 && grid.r_max > a) {
        return Err(invalid("grid", "need lambda, a, h > 0 and r_max > a"));
    }
    let mu = lambda * std::f64::consts::PI * a * a;
    let q = lambert_q(mu);
    let n = (grid.r_max / grid.h).round() as usize;
    let mut pi = RadialFunction::from_fn(grid.h, n, q, |_| 1.0);
    let dv = a / grid.n_v as f64;
    let dth = 2.0 * std::f64::consts::PI / grid.n_theta as f64;
    let cos: Vec<f64> = (0..grid.n_theta).map(|j| ((j as f64 + 0.5) * dth).cos()).collect();
    for it in 1..=grid.max_iter {
        let next: Vec<f64> = pi
            .nodes()
            .map(|r| {
                if r <= a {
                    return 1.0;
                }
                let mut s = 0.0;
                for i in 0..grid.n_v {
                    let v = (i as f64 + 0.5) * dv;
                    let mut ring = 0.0;
                    for &c in &cos {
                        let d = (r * r + v * v + 2.0 * r * v * c).max(0.0).sqrt();
                        ring += if d <= a { 1.0 } else { pi.eval(d) };
                    }
                    s += ring * v;
                }
                1.0 - (-lambda * s * dv * dth).exp()
            })
            .collect();
        let next = RadialFunction {
            h: grid.h,
            values: next,
            tail: q,
        };
        let diff = next.sup_distance(&pi);
        pi = next;
        if diff < grid.tol {
            return Ok(PiSolution {
                pi,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(PiSolution {
        pi,
        iterations: grid.max_iter,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterApprox {
    pub mu_tilde: f64,
    pub q: f64,
    /// `1/q`; `None` when the model does not percolate.
    pub c: Option<f64>,
}

pub fn cluster_constants(mu_tilde: f64) -> ClusterApprox {
    let q = lambert_q(mu_tilde);
    ClusterApprox {
        mu_tilde,
        q,
        c: (q > 0.0).then(|| 1.0 / q),
    }
}

/// Radial cluster PCF `pi(r)/q`, usable as `c(r)` by the no-motion functional solver.
pub fn cluster_pcf(sol: &PiSolution) -> Option<RadialFunction> {
    let q = sol.pi.tail;
    (q > 0.0).then(|| RadialFunction {
        h: sol.pi.h,
        values: sol.pi.values.iter().map(|p| p / q).collect(),
        tail: 1.0,
    })
}

/// Fraction of points in the largest connected component of the radius-a geometric graph
/// on a sampled torus configuration.
pub fn empirical_q(lambda: f64, a: f64, side: f64, seed: u64) -> Result<f64> {
    let dom = TorusDomain::new(side, a)?;
    let pts = sample_poisson(lambda, &dom, seed)?;
    if pts.is_empty() {
        return Ok(0.0);
    }
    let idx = CellIndex::new(&pts, a, dom);
    let mut uf = UnionFind::<usize>::new(pts.len());
    for i in 0..pts.len() {
        idx.for_each_neighbor(idx.position(i), Some(i), |j| {
            if j > i {
                uf.union(i, j);
            }
        });
    }
    let mut sizes = vec![0usize; pts.len()];
    for i in 0..pts.len() {
        sizes[uf.find(i)] += 1;
    }
    Ok(*sizes.iter().max().unwrap() as f64 / pts.len() as f64)
}
