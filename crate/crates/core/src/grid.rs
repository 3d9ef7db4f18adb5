//! Sampled functions on a strictly increasing grid of `[0, pi]`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be linearly interpolated.
pub trait GridValue: Copy {
    fn lerp(a: Self, b: Self, t: f64) -> Self;
    fn norm(&self) -> f64;
    fn zero() -> Self;
}

impl GridValue for C64 {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        a + (b - a) * t
    }
    fn norm(&self) -> f64 {
        C64::norm(*self)
    }
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
}

impl GridValue for f64 {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        a + (b - a) * t
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn zero() -> Self {
        0.0
    }
}

impl GridValue for [C64; 2] {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
    }
    /// Euclidean norm of the pair.
    fn norm(&self) -> f64 {
        (self[0].norm_sqr() + self[1].norm_sqr()).sqrt()
    }
    fn zero() -> Self {
        [C64::new(0.0, 0.0); 2]
    }
}

/// A function sampled on a grid, interpolated piecewise linearly.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridFunction<V> {
    pub grid: Vec<f64>,
    pub values: Vec<V>,
}

pub type ScalarGrid = GridFunction<C64>;
pub type VectorGrid = GridFunction<[C64; 2]>;

/// Uniform grid on `[a, b]` with `cells` intervals.
pub fn uniform_grid(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let h = (b - a) / cells as f64;
    let mut g: Vec<f64> = (0..=cells).map(|k| a + h * k as f64).collect();
    g[cells] = b;
    g
}

impl<V: GridValue> GridFunction<V> {
    pub fn new(grid: Vec<f64>, values: Vec<V>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidInput("grid needs at least two points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> V) -> Self {
        let values = grid.iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Piecewise linear interpolation, clamped outside the grid.
    pub fn eval(&self, x: f64) -> V {
        let g = &self.grid;
        if x <= g[0] {
            return self.values[0];
        }
        let last = g.len() - 1;
        if x >= g[last] {
            return self.values[last];
        }
        let k = match g.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.values[k],
            Err(k) => k - 1,
        };
        let t = (x - g[k]) / (g[k + 1] - g[k]);
        V::lerp(self.values[k], self.values[k + 1], t)
    }

    pub fn map<W: GridValue>(&self, f: impl Fn(V) -> W) -> GridFunction<W> {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Integral of `w(|f|)` using Simpson's rule on uniform grids with an
    /// even number of cells and the trapezoid rule otherwise.
    fn integrate_weight(&self, w: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.values.iter().map(|v| w(v.norm())).collect();
        integrate_samples(&self.grid, &vals)
    }

    /// `L^p` norm; `p = f64::INFINITY` gives the maximum over grid points.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        self.integrate_weight(|a| a.powf(p)).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.integrate_weight(|a| a * a).sqrt()
    }
}

impl GridFunction<[C64; 2]> {
    /// `<f, g> = int f . conj(g)`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.grid.len(), other.grid.len());
        let re: Vec<f64>;
        let im: Vec<f64>;
        let prod: Vec<C64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0] * b[0].conj() + a[1] * b[1].conj())
            .collect();
        re = prod.iter().map(|z| z.re).collect();
        im = prod.iter().map(|z| z.im).collect();
        C64::new(
            integrate_samples(&self.grid, &re),
            integrate_samples(&self.grid, &im),
        )
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map(|v| [v[0] * a, v[1] * a])
    }

    pub fn component(&self, j: usize) -> ScalarGrid {
        self.map(|v| v[j])
    }
}

impl GridFunction<C64> {
    /// `int f dx`.
    pub fn integral(&self) -> C64 {
        let re: Vec<f64> = self.values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.values.iter().map(|z| z.im).collect();
        C64::new(
            integrate_samples(&self.grid, &re),
            integrate_samples(&self.grid, &im),
        )
    }
}

fn is_uniform(grid: &[f64]) -> bool {
    let n = grid.len() - 1;
    let h = (grid[n] - grid[0]) / n as f64;
    grid.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
}

/// Integrates sampled values over their grid.
pub fn integrate_samples(grid: &[f64], vals: &[f64]) -> f64 {
    let n = grid.len() - 1;
    if n >= 2 && n % 2 == 0 && is_uniform(grid) {
        let h = (grid[n] - grid[0]) / n as f64;
        let mut s = vals[0] + vals[n];
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        return s * h / 3.0;
    }
    grid.windows(2)
        .zip(vals.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interpolation_is_exact_on_linear_functions() {
        let f = GridFunction::from_fn(uniform_grid(0.0, PI, 10), |x| 2.0 * x + 1.0);
        assert!((f.eval(1.234) - 3.468).abs() < 1e-12);
        assert_eq!(f.eval(-1.0), 1.0);
    }

    #[test]
    fn simpson_norms() {
        let f = GridFunction::from_fn(uniform_grid(0.0, PI, 512), |x| C64::new(x.sin(), 0.0));
        assert!((f.l2_norm() - (PI / 2.0).sqrt()).abs() < 1e-9);
        assert!((f.lp_norm(1.0) - 2.0).abs() < 1e-9);
        assert!((f.lp_norm(f64::INFINITY) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_unsorted_grid() {
        assert!(GridFunction::new(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
    }
}
