//! Gauss-Legendre collocation (four stages, order eight) for the first-order
//! system `y' = B (lambda - Q) y + B f`, which is `-B y' + Q y = lambda y + f`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::boundary::{phi0, Mat2};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{gauss_legendre, graded_edges};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const STAGES: usize = 4;
const BASE_CELLS: usize = 64;
const MAX_LEVEL: usize = 16;

/// Step-size regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Accuracy {
    /// Enough for phase tracking on contours.
    Coarse,
    /// Near machine precision for smooth potentials.
    #[default]
    Fine,
}

impl Accuracy {
    fn step_times_lambda(self) -> f64 {
        match self {
            Accuracy::Coarse => 1.5,
            Accuracy::Fine => 0.3,
        }
    }

    fn min_level(self) -> usize {
        match self {
            Accuracy::Coarse => 0,
            Accuracy::Fine => 1,
        }
    }
}

struct Tableau {
    c: [f64; STAGES],
    a: [[f64; STAGES]; STAGES],
    b: [f64; STAGES],
}

fn tableau() -> &'static Tableau {
    static T: OnceLock<Tableau> = OnceLock::new();
    T.get_or_init(|| {
        let (x, w) = gauss_legendre(STAGES);
        let mut c = [0.0; STAGES];
        let mut b = [0.0; STAGES];
        for k in 0..STAGES {
            c[k] = 0.5 * (x[k] + 1.0);
            b[k] = 0.5 * w[k];
        }
        // a_ij = int_0^{c_i} l_j: solve sum_j a_ij c_j^m = c_i^{m+1} / (m + 1).
        let v = nalgebra::Matrix4::from_fn(|m, j| c[j].powi(m as i32));
        let vinv = v.try_inverse().expect("distinct nodes");
        let mut a = [[0.0; STAGES]; STAGES];
        for i in 0..STAGES {
            let rhs = nalgebra::Vector4::from_fn(|m, _| c[i].powi(m as i32 + 1) / (m as f64 + 1.0));
            let row = vinv * rhs;
            for j in 0..STAGES {
                a[i][j] = row[j];
            }
        }
        Tableau { c, a, b }
    })
}

/// Potential values at the collocation nodes of each cell.
#[derive(Clone, Debug)]
pub struct SampledMesh {
    pub edges: Vec<f64>,
    q: Vec<[[C64; 4]; STAGES]>,
}

impl SampledMesh {
    pub fn new(q: &Potential, edges: Vec<f64>) -> Self {
        let t = tableau();
        let samples = edges
            .windows(2)
            .map(|e| {
                let h = e[1] - e[0];
                let mut s = [[ZERO; 4]; STAGES];
                for (k, row) in s.iter_mut().enumerate() {
                    *row = q.eval(e[0] + t.c[k] * h);
                }
                s
            })
            .collect();
        Self { edges, q: samples }
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }
}

/// Coefficient matrix `B (lambda - Q)`.
#[inline]
fn coefficient(q: &[C64; 4], lambda: C64) -> [[C64; 2]; 2] {
    [[-q[2], lambda - q[3]], [q[0] - lambda, q[1]]]
}

type Sys = [[C64; 8]; 8];

/// In-place LU solve with partial pivoting for `NR` right-hand sides.
fn lu_solve<const NR: usize>(m: &mut Sys, rhs: &mut [[C64; NR]; 8]) -> bool {
    for col in 0..8 {
        let mut p = col;
        let mut best = m[col][col].norm_sqr();
        for r in col + 1..8 {
            let v = m[r][col].norm_sqr();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if p != col {
            m.swap(p, col);
            rhs.swap(p, col);
        }
        let inv = ONE / m[col][col];
        for r in col + 1..8 {
            let f = m[r][col] * inv;
            if f == ZERO {
                continue;
            }
            for k in col + 1..8 {
                let t = m[col][k];
                m[r][k] -= f * t;
            }
            for k in 0..NR {
                let t = rhs[col][k];
                rhs[r][k] -= f * t;
            }
        }
    }
    for col in (0..8).rev() {
        let inv = ONE / m[col][col];
        for k in 0..NR {
            let mut s = rhs[col][k];
            for j in col + 1..8 {
                s -= m[col][j] * rhs[j][k];
            }
            rhs[col][k] = s * inv;
        }
    }
    true
}

/// One collocation step: returns the propagator `P` and the forced part `d`
/// so that `y(x0 + h) = P y(x0) + d`.
fn step(
    h: f64,
    qs: &[[C64; 4]; STAGES],
    lambda: C64,
    g: Option<&[[C64; 2]; STAGES]>,
) -> Option<(Mat2, [C64; 2])> {
    let t = tableau();
    let a: Vec<[[C64; 2]; 2]> = qs.iter().map(|q| coefficient(q, lambda)).collect();
    let mut m: Sys = [[ZERO; 8]; 8];
    let mut rhs = [[ZERO; 3]; 8];
    for i in 0..STAGES {
        for r in 0..2 {
            let row = 2 * i + r;
            for j in 0..STAGES {
                let f = h * t.a[i][j];
                for s in 0..2 {
                    m[row][2 * j + s] = -a[i][r][s] * f;
                }
            }
            m[row][row] += ONE;
            rhs[row][0] = a[i][r][0];
            rhs[row][1] = a[i][r][1];
            rhs[row][2] = g.map(|g| g[i][r]).unwrap_or(ZERO);
        }
    }
    if !lu_solve(&mut m, &mut rhs) {
        return None;
    }
    let mut p = Mat2::identity();
    let mut d = [ZERO; 2];
    for j in 0..STAGES {
        let w = h * t.b[j];
        for r in 0..2 {
            p[(r, 0)] += rhs[2 * j + r][0] * w;
            p[(r, 1)] += rhs[2 * j + r][1] * w;
            d[r] += rhs[2 * j + r][2] * w;
        }
    }
    Some((p, d))
}

fn finite(m: &Mat2) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Integrator bound to one potential. Samples of the potential are cached
/// per mesh level, so repeated solves at many `lambda` stay cheap.
pub struct Integrator {
    q: Potential,
    zero: bool,
    breakpoints: Vec<f64>,
    cache: Mutex<HashMap<usize, Arc<SampledMesh>>>,
}

impl std::fmt::Debug for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrator").field("zero", &self.zero).finish()
    }
}

impl Integrator {
    pub fn new(q: &Potential) -> Self {
        Self {
            zero: q.is_zero(),
            breakpoints: q.breakpoints(),
            q: q.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.q
    }

    fn level_for(&self, lambda: C64, acc: Accuracy) -> usize {
        let need = PI * lambda.norm().max(1.0) / acc.step_times_lambda();
        let mut level = acc.min_level();
        while ((BASE_CELLS << level) as f64) < need && level < MAX_LEVEL {
            level += 1;
        }
        level
    }

    fn edges(&self, cells: usize) -> Vec<f64> {
        graded_edges(cells, &self.breakpoints, self.q.singular_points())
    }

    fn mesh(&self, level: usize) -> Arc<SampledMesh> {
        let mut cache = self.cache.lock().unwrap();
        cache
            .entry(level)
            .or_insert_with(|| Arc::new(SampledMesh::new(&self.q, self.edges(BASE_CELLS << level))))
            .clone()
    }

    fn propagate(&self, mesh: &SampledMesh, lambda: C64) -> Result<Mat2> {
        let mut y = Mat2::identity();
        for (k, e) in mesh.edges.windows(2).enumerate() {
            let (p, _) = step(e[1] - e[0], &mesh.q[k], lambda, None).ok_or(Error::Integration {
                x: e[0],
                reason: "singular collocation system".into(),
            })?;
            y = p * y;
        }
        if !finite(&y) {
            return Err(Error::Integration {
                x: PI,
                reason: "solution overflowed".into(),
            });
        }
        Ok(y)
    }

    /// Fundamental matrix `Y(pi) = [c(pi) s(pi)]`.
    pub fn transfer(&self, lambda: C64, acc: Accuracy) -> Result<Mat2> {
        if self.zero {
            return Ok(phi0(lambda, PI));
        }
        let level = self.level_for(lambda, acc);
        self.propagate(&self.mesh(level), lambda)
    }

    /// `Y(pi)` together with a step-doubling error estimate.
    pub fn transfer_with_error(&self, lambda: C64, acc: Accuracy) -> Result<(Mat2, f64)> {
        if self.zero {
            return Ok((phi0(lambda, PI), 0.0));
        }
        let level = self.level_for(lambda, acc);
        let coarse = self.propagate(&self.mesh(level), lambda)?;
        let fine = self.propagate(&self.mesh((level + 1).min(MAX_LEVEL + 1)), lambda)?;
        Ok((fine, (fine - coarse).norm()))
    }

    /// Solves from `y(0) = init[k]` for each column `k` and returns the
    /// solutions at the sorted points `out` (which must lie in `[0, pi]`).
    pub fn solve(
        &self,
        lambda: C64,
        init: &[[C64; 2]],
        forcing: Option<&(dyn Fn(f64) -> [C64; 2] + Sync)>,
        out: &[f64],
        acc: Accuracy,
    ) -> Result<Vec<Vec<[C64; 2]>>> {
        if out.iter().any(|&x| !(0.0..=PI).contains(&x)) {
            return Err(Error::InvalidInput("output points must lie in [0, pi]".into()));
        }
        if init.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { x: 0.0 });
        }
        if self.zero && forcing.is_none() {
            return Ok(init
                .iter()
                .map(|v| {
                    out.iter()
                        .map(|&x| {
                            let p = phi0(lambda, x);
                            [p[(0, 0)] * v[0] + p[(0, 1)] * v[1], p[(1, 0)] * v[0] + p[(1, 1)] * v[1]]
                        })
                        .collect()
                })
                .collect());
        }
        let level = self.level_for(lambda, acc);
        let hmax = PI / (BASE_CELLS << level) as f64;
        let mut cuts = self.edges(BASE_CELLS << level);
        cuts.extend(out.iter().copied());
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut edges = vec![cuts[0]];
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / hmax).ceil().max(1.0) as usize;
            for k in 1..n {
                edges.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
            edges.push(w[1]);
        }
        let t = tableau();
        let mut ys: Vec<[C64; 2]> = init.to_vec();
        let mut results: Vec<Vec<[C64; 2]>> = vec![Vec::with_capacity(out.len()); init.len()];
        let mut oi = 0;
        let emit = |x: f64, ys: &[[C64; 2]], oi: &mut usize, results: &mut Vec<Vec<[C64; 2]>>| {
            while *oi < out.len() && (out[*oi] - x).abs() < 1e-15 {
                for (r, y) in results.iter_mut().zip(ys) {
                    r.push(*y);
                }
                *oi += 1;
            }
        };
        emit(edges[0], &ys, &mut oi, &mut results);
        for e in edges.windows(2) {
            let h = e[1] - e[0];
            let mut qs = [[ZERO; 4]; STAGES];
            let mut gs = [[ZERO; 2]; STAGES];
            for k in 0..STAGES {
                let x = e[0] + t.c[k] * h;
                qs[k] = self.q.eval(x);
                if let Some(f) = forcing {
                    let v = f(x);
                    gs[k] = [v[1], -v[0]];
                }
            }
            let (p, d) = step(h, &qs, lambda, forcing.map(|_| &gs)).ok_or(Error::Integration {
                x: e[0],
                reason: "singular collocation system".into(),
            })?;
            for y in ys.iter_mut() {
                let n0 = p[(0, 0)] * y[0] + p[(0, 1)] * y[1] + d[0];
                let n1 = p[(1, 0)] * y[0] + p[(1, 1)] * y[1] + d[1];
                if !(n0.re.is_finite() && n0.im.is_finite() && n1.re.is_finite() && n1.im.is_finite()) {
                    return Err(Error::Integration {
                        x: e[1],
                        reason: "solution overflowed".into(),
                    });
                }
                *y = [n0, n1];
            }
            emit(e[1], &ys, &mut oi, &mut results);
        }
        if oi != out.len() {
            return Err(Error::InvalidInput("output points must be sorted".into()));
        }
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_grid;
    use crate::potential::ScalarFn;

    #[test]
    fn tableau_is_gauss() {
        let t = tableau();
        assert!((t.b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..STAGES {
            let s: f64 = t.a[i].iter().sum();
            assert!((s - t.c[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_potential_closed_form() {
        let q = Potential::zero();
        let ig = Integrator::new(&q);
        let y = ig.solve(ONE, &[[ONE, ZERO], [ZERO, ONE]], None, &[PI], Accuracy::Fine).unwrap();
        assert!((y[0][0][0] + 1.0).norm() < 1e-14 && y[0][0][1].norm() < 1e-14);
        assert!(y[1][0][0].norm() < 1e-14 && (y[1][0][1] + 1.0).norm() < 1e-14);
    }

    #[test]
    fn collocation_matches_closed_form_for_constant_potential() {
        // Q = a I shifts lambda by a.
        let a = C64::new(0.3, 0.1);
        let q = Potential::new(
            [ScalarFn::Constant(a), ScalarFn::Zero, ScalarFn::Zero, ScalarFn::Constant(a)],
            1.0,
        )
        .unwrap();
        let ig = Integrator::new(&q);
        for &l in &[C64::new(2.5, 0.0), C64::new(37.0, 0.4)] {
            let y = ig.transfer(l, Accuracy::Fine).unwrap();
            let e = phi0(l - a, PI);
            assert!((y - e).norm() < 5e-11 * e.norm(), "{l}: {}", (y - e).norm());
            let yc = ig.transfer(l, Accuracy::Coarse).unwrap();
            assert!((yc - e).norm() < 1e-5);
        }
    }

    #[test]
    fn gauge_exponential_solution() {
        // q2 = b, q3 = -b: y = exp(b x) times the free solution.
        let b = 0.4;
        let q = Potential::new(
            [ScalarFn::Zero, ScalarFn::Constant(C64::new(b, 0.0)), ScalarFn::Constant(C64::new(-b, 0.0)), ScalarFn::Zero],
            1.0,
        )
        .unwrap();
        let ig = Integrator::new(&q);
        let l = C64::new(5.0, 0.0);
        let y = ig.transfer(l, Accuracy::Fine).unwrap();
        let e = phi0(l, PI) * C64::new((b * PI).exp(), 0.0);
        assert!((y - e).norm() < 1e-11);
    }

    #[test]
    fn unit_determinant_for_trace_free_system() {
        let q = Potential::from_expressions(["0.5*cos(3*x)", "sin(x)", "0.2*x", "-0.5*cos(3*x)"], 2.0).unwrap();
        let ig = Integrator::new(&q);
        let (y, err) = ig.transfer_with_error(C64::new(11.0, 0.5), Accuracy::Fine).unwrap();
        // det Y = exp(int (q2 - q3))
        let tr = (1.0 - PI.cos()) - 0.1 * PI * PI;
        assert!((y.determinant() - C64::new(tr.exp(), 0.0)).norm() < 1e-10);
        assert!(err < 1e-9);
    }

    #[test]
    fn forcing_matches_variation_of_constants() {
        // Q = 0, f = (1, 0): y = R x with y(0) = 0 solved in closed form.
        let q = Potential::from_expressions(["0", "0", "0.0*x", "0"], 1.0).unwrap();
        let ig = Integrator::new(&q);
        let l = C64::new(1.7, 0.0);
        let f = |_x: f64| [ONE, ZERO];
        let out = uniform_grid(0.0, PI, 8);
        let y = ig.solve(l, &[[ZERO, ZERO]], Some(&f), &out, Accuracy::Fine).unwrap();
        for (k, &x) in out.iter().enumerate() {
            // -y2' = l y1 + 1, y1' = l y2
            let y1 = ((l * x).cos() - 1.0) / l;
            let y2 = -(l * x).sin() / l;
            assert!((y[0][k][0] - y1).norm() < 1e-12);
            assert!((y[0][k][1] - y2).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_potential_grading() {
        let q = Potential::with_singular(
            [
                ScalarFn::closure(|x| C64::new(0.2 / x.sqrt(), 0.0)),
                ScalarFn::Zero,
                ScalarFn::Zero,
                ScalarFn::closure(|x| C64::new(-0.2 / x.sqrt(), 0.0)),
            ],
            1.5,
            vec![0.0],
        )
        .unwrap();
        let ig = Integrator::new(&q);
        let (y, err) = ig.transfer_with_error(C64::new(3.0, 0.0), Accuracy::Fine).unwrap();
        assert!((y.determinant() - ONE).norm() < 1e-9);
        assert!(err < 1e-6, "{err}");
    }
}
