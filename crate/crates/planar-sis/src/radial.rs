//! Radial functions sampled at cell midpoints with a constant tail.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    /// Grid step; node `i` sits at `(i + 1/2) h`.
    pub h: f64,
    pub values: Vec<f64>,
    /// Value for radii past the grid.
    pub tail: f64,
}

impl RadialFunction {
    pub fn constant(h: f64, n: usize, value: f64, tail: f64) -> Self {
        Self {
            h,
            values: vec![value; n],
            tail,
        }
    }

    pub fn from_fn(h: f64, n: usize, tail: f64, f: impl Fn(f64) -> f64) -> Self {
        Self {
            h,
            values: (0..n).map(|i| f((i as f64 + 0.5) * h)).collect(),
            tail,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Outer edge of the grid.
    pub fn r_max(&self) -> f64 {
        self.h * self.len() as f64
    }

    /// Piecewise-linear interpolation, flat below the first node, constant tail past `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.values.len();
        if n == 0 || r >= self.r_max() {
            return self.tail;
        }
        let s = r / self.h - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        let i = s as usize;
        if i + 1 >= n {
            // last half cell blends into the tail
            let t = (s - (n - 1) as f64) * 2.0;
            return self.values[n - 1] * (1.0 - t) + self.tail * t;
        }
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
