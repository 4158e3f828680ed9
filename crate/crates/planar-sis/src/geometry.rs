//! Torus geometry, Poisson sampling and the uniform-cell neighbor index.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Hard cap on sampled point counts.
pub const MAX_POINTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, lambda: f64, a: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            lambda,
            a,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with radius chosen so that `lambda * pi * a^2 == mu`.
    pub fn with_mu(alpha: f64, beta: f64, gamma: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda > 0.0) {
            return Err(invalid("mu", "mu and lambda must be positive"));
        }
        Self::new(alpha, beta, gamma, lambda, (mu / (lambda * std::f64::consts::PI)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("alpha", self.alpha, self.alpha > 0.0),
            ("beta", self.beta, self.beta >= 0.0),
            ("gamma", self.gamma, self.gamma >= 0.0),
            ("lambda", self.lambda, self.lambda > 0.0),
            ("a", self.a, self.a > 0.0),
        ];
        for (name, val, ok) in checks {
            if !ok || !val.is_finite() {
                return Err(invalid(name, format!("out of range: {val}")));
            }
        }
        Ok(())
    }

    /// Mean degree of the radius-a geometric graph.
    pub fn mu(&self) -> f64 {
        self.lambda * std::f64::consts::PI * self.a * self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    pub side: f64,
}

impl TorusDomain {
    /// A square torus of side `side`, which must exceed `2a`.
    pub fn new(side: f64, a: f64) -> Result<Self> {
        if !(side > 2.0 * a) || !side.is_finite() {
            return Err(invalid("side", format!("need side > 2a, got side={side}, a={a}")));
        }
        Ok(Self { side })
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.side);
        // rem_euclid can round up to side itself
        if r >= self.side {
            0.0
        } else {
            r
        }
    }

    /// Shortest signed displacement along one axis.
    pub fn delta(&self, d: f64) -> f64 {
        let l = self.side;
        let mut d = d.rem_euclid(l);
        if d > 0.5 * l {
            d -= l;
        }
        d
    }

    pub fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position {
            x: self.wrap(rng.random::<f64>() * self.side),
            y: self.wrap(rng.random::<f64>() * self.side),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

pub fn torus_distance_sq(p: Position, q: Position, dom: &TorusDomain) -> f64 {
    let dx = dom.delta(q.x - p.x);
    let dy = dom.delta(q.y - p.y);
    dx * dx + dy * dy
}

pub fn torus_distance(p: Position, q: Position, dom: &TorusDomain) -> f64 {
    torus_distance_sq(p, q, dom).sqrt()
}

/// Poisson process of intensity `lambda` on the torus, deterministic in `seed`.
pub fn sample_poisson(lambda: f64, dom: &TorusDomain, seed: u64) -> Result<Vec<Position>> {
    let mut r = rng::stream(seed, 0);
    sample_poisson_with(lambda, dom, &mut r)
}

pub fn sample_poisson_with<R: Rng + ?Sized>(
    lambda: f64,
    dom: &TorusDomain,
    rng: &mut R,
) -> Result<Vec<Position>> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "intensity must be positive"));
    }
    let mean = lambda * dom.area();
    if mean > MAX_POINTS as f64 {
        return Err(Error::CapExceeded {
            expected: mean,
            cap: MAX_POINTS,
        });
    }
    let n = Poisson::new(mean)
        .map_err(|e| invalid("lambda", e.to_string()))?
        .sample(rng) as usize;
    Ok((0..n).map(|_| dom.uniform(rng)).collect())
}

/// Uniform cell grid with edge at least `radius`, answering closed-ball queries.
#[derive(Debug, Clone)]
pub struct CellIndex {
    dom: TorusDomain,
    radius: f64,
    ncell: usize,
    edge: f64,
    cells: Vec<Vec<u32>>,
    cell_of: Vec<u32>,
    pos: Vec<Position>,
}

impl CellIndex {
    pub fn new(points: &[Position], radius: f64, dom: TorusDomain) -> Self {
        let ncell = ((dom.side / radius).floor() as usize).max(1);
        let edge = dom.side / ncell as f64;
        let mut idx = Self {
            dom,
            radius,
            ncell,
            edge,
            cells: vec![Vec::new(); ncell * ncell],
            cell_of: Vec::with_capacity(points.len()),
            pos: Vec::with_capacity(points.len()),
        };
        for (i, &p) in points.iter().enumerate() {
            let p = Position::new(dom.wrap(p.x), dom.wrap(p.y));
            let c = idx.cell_id(p);
            idx.cells[c].push(i as u32);
            idx.cell_of.push(c as u32);
            idx.pos.push(p);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.pos
    }

    pub fn position(&self, id: usize) -> Position {
        self.pos[id]
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.dom
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cell_edge(&self) -> f64 {
        self.edge
    }

    fn axis_cell(&self, x: f64) -> usize {
        ((x / self.edge) as usize).min(self.ncell - 1)
    }

    fn cell_id(&self, p: Position) -> usize {
        self.axis_cell(p.y) * self.ncell + self.axis_cell(p.x)
    }

    /// Move point `id` to `to` (wrapped onto the torus).
    pub fn relocate(&mut self, id: usize, to: Position) {
        let to = Position::new(self.dom.wrap(to.x), self.dom.wrap(to.y));
        let old = self.cell_of[id] as usize;
        let new = self.cell_id(to);
        if old != new {
            let cell = &mut self.cells[old];
            let k = cell.iter().position(|&j| j as usize == id).expect("indexed point");
            cell.swap_remove(k);
            self.cells[new].push(id as u32);
            self.cell_of[id] = new as u32;
        }
        self.pos[id] = to;
    }

    /// Visit every indexed point within the closed ball of radius `radius` around `p`,
    /// skipping `exclude`.
    pub fn for_each_neighbor<F: FnMut(usize)>(&self, p: Position, exclude: Option<usize>, mut f: F) {
        let r2 = self.radius * self.radius;
        let n = self.ncell;
        let cx = self.axis_cell(self.dom.wrap(p.x));
        let cy = self.axis_cell(self.dom.wrap(p.y));
        let span: &[isize] = if n >= 3 { &[-1, 0, 1] } else if n == 2 { &[0, 1] } else { &[0] };
        for &dy in span {
            let yy = (cy as isize + dy).rem_euclid(n as isize) as usize;
            for &dx in span {
                let xx = (cx as isize + dx).rem_euclid(n as isize) as usize;
                for &j in &self.cells[yy * n + xx] {
                    let j = j as usize;
                    if Some(j) == exclude {
                        continue;
                    }
                    if torus_distance_sq(p, self.pos[j], &self.dom) <= r2 {
                        f(j);
                    }
                }
            }
        }
    }

    pub fn neighbors_within(&self, p: Position, exclude: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_neighbor(p, exclude, |j| out.push(j));
        out
    }

    /// Neighbors of indexed point `id`, excluding itself.
    pub fn neighbors_of(&self, id: usize) -> Vec<usize> {
        self.neighbors_within(self.pos[id], Some(id))
    }
}

/// O(n^2) reference scan.
pub fn brute_force_neighbors(
    points: &[Position],
    p: Position,
    radius: f64,
    dom: &TorusDomain,
    exclude: Option<usize>,
) -> Vec<usize> {
    let r2 = radius * radius;
    (0..points.len())
        .filter(|&j| Some(j) != exclude && torus_distance_sq(p, points[j], dom) <= r2)
        .collect()
}
