//! Gauss-Legendre rules, adaptive integration and product integration
//! against `exp(i omega t)` on cell meshes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64 as C64;

/// Nodes per cell used by [`CellMesh`].
pub const CELL_NODES: usize = 8;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(CELL_NODES))
}

fn gl_cell(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> C64 {
    let (u, w) = gl8();
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = C64::new(0.0, 0.0);
    for k in 0..u.len() {
        s += f(m + r * u[k]) * w[k];
    }
    s * r
}

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]`.
///
/// Endpoint singularities of integrable type are handled by repeated
/// bisection since the nodes never touch the interval ends.
pub fn integrate(f: impl Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> C64 {
    fn rec(
        f: &impl Fn(f64) -> C64,
        a: f64,
        b: f64,
        whole: C64,
        tol: f64,
        depth: usize,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let l = gl_cell(f, a, m);
        let r = gl_cell(f, m, b);
        let both = l + r;
        if depth == 0 || (both - whole).norm() <= tol || (b - a) < 1e-15 {
            return both;
        }
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    let mut total = C64::new(0.0, 0.0);
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    for k in 0..pieces {
        let (x0, x1) = (a + h * k as f64, a + h * (k + 1) as f64);
        let whole = gl_cell(&f, x0, x1);
        total += rec(&f, x0, x1, whole, tol / pieces as f64, 90);
    }
    total
}

/// Real-valued variant of [`integrate`].
pub fn integrate_real(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate(|x| C64::new(f(x), 0.0), a, b, tol).re
}

/// Inverse of the monomial Vandermonde matrix on the 8 Gauss nodes:
/// coefficients `c = V^{-1} g` with `g(u) = sum c_k u^k`.
fn vandermonde_inverse() -> &'static SMatrix<f64, CELL_NODES, CELL_NODES> {
    static V: OnceLock<SMatrix<f64, CELL_NODES, CELL_NODES>> = OnceLock::new();
    V.get_or_init(|| {
        let (u, _) = gl8();
        let v = SMatrix::<f64, CELL_NODES, CELL_NODES>::from_fn(|j, k| u[j].powi(k as i32));
        v.try_inverse().expect("Vandermonde matrix is invertible")
    })
}

/// Moments `nu_k(b) = int_{-1}^{b} u^k exp(i kappa u) du`, `k < CELL_NODES`.
pub fn moments(kappa: C64, b: f64) -> [C64; CELL_NODES] {
    let mut nu = [C64::new(0.0, 0.0); CELL_NODES];
    let ik = C64::new(0.0, 1.0) * kappa;
    if kappa.norm() <= 4.0 {
        let mut coef = C64::new(1.0, 0.0);
        for s in 0..80 {
            let mut small = true;
            for (k, slot) in nu.iter_mut().enumerate() {
                let e = (k + s + 1) as i32;
                let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
                let term = coef * ((b.powi(e) - sign) / e as f64);
                *slot += term;
                if term.norm() > 1e-18 {
                    small = false;
                }
            }
            if small && s > 4 {
                break;
            }
            coef = coef * ik / (s + 1) as f64;
        }
    } else {
        let eb = (ik * b).exp();
        let em = (-ik).exp();
        let mut bk = 1.0;
        let mut sign = 1.0;
        for k in 0..CELL_NODES {
            let boundary = (eb * bk - em * sign) / ik;
            nu[k] = if k == 0 {
                boundary
            } else {
                boundary - nu[k - 1] * (k as f64) / ik
            };
            bk *= b;
            sign = -sign;
        }
    }
    nu
}

/// Weights for the cumulative product rule on `[-1, 1]`.
///
/// Row `r < CELL_NODES` integrates up to the `r`-th Gauss node, the last
/// row over the whole interval.
#[derive(Clone, Debug)]
pub struct CellWeights {
    pub rows: Vec<[C64; CELL_NODES]>,
}

impl CellWeights {
    pub fn new(kappa: C64) -> Self {
        let (u, _) = gl8();
        let vinv = vandermonde_inverse();
        let mut rows = Vec::with_capacity(CELL_NODES + 1);
        for r in 0..=CELL_NODES {
            let b = if r < CELL_NODES { u[r] } else { 1.0 };
            let nu = moments(kappa, b);
            let mut w = [C64::new(0.0, 0.0); CELL_NODES];
            for (j, wj) in w.iter_mut().enumerate() {
                for (k, nuk) in nu.iter().enumerate() {
                    *wj += nuk * vinv[(k, j)];
                }
            }
            rows.push(w);
        }
        Self { rows }
    }
}

/// Cells on `[0, pi]` with `CELL_NODES` Gauss nodes each.
#[derive(Clone, Debug)]
pub struct CellMesh {
    pub edges: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CellMesh {
    /// Mesh with roughly `cells` uniform cells, split at `breakpoints` and
    /// graded geometrically towards the points in `singular`.
    pub fn new(cells: usize, breakpoints: &[f64], singular: &[f64]) -> Self {
        let edges = graded_edges(cells, breakpoints, singular);
        Self::from_edges(edges)
    }

    pub fn from_edges(edges: Vec<f64>) -> Self {
        let (u, gw) = gl8();
        let mut nodes = Vec::with_capacity((edges.len() - 1) * CELL_NODES);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (m, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            nodes.extend(u.iter().map(|&t| m + r * t));
            weights.extend(gw.iter().map(|&wk| wk * r));
        }
        Self { edges, nodes, weights }
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    /// All Gauss nodes, cell by cell.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Gauss weights matching [`CellMesh::nodes`].
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    /// Cumulative integrals `F(t) = int_0^t g(s) exp(i omega s) ds` where
    /// `g` is given at the nodes. Returns values at nodes and at edges.
    pub fn cumulative(&self, g: &[C64], omega: C64) -> (Vec<C64>, Vec<C64>) {
        debug_assert_eq!(g.len(), self.nodes.len());
        let mut cache: HashMap<u64, CellWeights> = HashMap::new();
        let mut at_nodes = Vec::with_capacity(g.len());
        let mut at_edges = Vec::with_capacity(self.edges.len());
        let mut acc = C64::new(0.0, 0.0);
        at_edges.push(acc);
        let i = C64::new(0.0, 1.0);
        for (c, e) in self.edges.windows(2).enumerate() {
            let (m, r) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            // Uniform cells differ only by rounding; share their weights.
            let key = r.to_bits() >> 12;
            let w = cache
                .entry(key)
                .or_insert_with(|| CellWeights::new(omega * r));
            let phase = (i * omega * m).exp() * r;
            let gc = &g[c * CELL_NODES..(c + 1) * CELL_NODES];
            for row in w.rows.iter().take(CELL_NODES) {
                let s: C64 = row.iter().zip(gc).map(|(a, b)| a * b).sum();
                at_nodes.push(acc + s * phase);
            }
            let s: C64 = w.rows[CELL_NODES].iter().zip(gc).map(|(a, b)| a * b).sum();
            acc += s * phase;
            at_edges.push(acc);
        }
        (at_nodes, at_edges)
    }

    /// `L^nu` norm of node data (`nu = inf` uses the node maximum).
    pub fn lp_norm_nodes(&self, vals: &[C64], nu: f64) -> f64 {
        if nu.is_infinite() {
            return vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let w = &self.weights;
        if nu == 2.0 {
            return vals.iter().zip(w).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt();
        }
        vals.iter()
            .zip(w)
            .map(|(v, w)| v.norm().powf(nu) * w)
            .sum::<f64>()
            .powf(1.0 / nu)
    }
}

/// Cell edges with breakpoints and geometric grading at singular points.
pub fn graded_edges(cells: usize, breakpoints: &[f64], singular: &[f64]) -> Vec<f64> {
    let h = PI / cells.max(1) as f64;
    let mut cuts: Vec<f64> = vec![0.0, PI];
    cuts.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < PI));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut edges = vec![0.0];
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let sing_a = singular.iter().any(|&s| (s - a).abs() < 1e-14);
        let sing_b = singular.iter().any(|&s| (s - b).abs() < 1e-14);
        let step = (b - a) / n as f64;
        let mut pts: Vec<f64> = (1..n).map(|k| a + step * k as f64).collect();
        if sing_a {
            let first = a + step.min(b - a) * if sing_b { 0.5 } else { 1.0 };
            let mut t = (first - a) * 0.5;
            while t > 1e-21 {
                pts.push(a + t);
                t *= 0.5;
            }
        }
        if sing_b {
            let last = b - step.min(b - a) * if sing_a { 0.5 } else { 1.0 };
            let mut t = (b - last) * 0.5;
            while t > 1e-21 {
                pts.push(b - t);
                t *= 0.5;
            }
        }
        pts.push(b);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for p in pts {
            if p > *edges.last().unwrap() {
                edges.push(p);
            }
        }
    }
    edges
}

/// Solves a dense complex linear system, returning `None` when singular.
pub fn solve_dense(a: DMatrix<C64>, b: DMatrix<C64>) -> Option<DMatrix<C64>> {
    a.lu().solve(&b)
}
