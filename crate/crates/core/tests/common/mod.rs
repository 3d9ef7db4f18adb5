//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64 as C64;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Chebyshev points on `[0, pi]` (descending order mapped to ascending `t`)
/// and the differentiation matrix with respect to `t`.
pub fn cheb(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let xs: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let cw = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = cw(i) / cw(j) * s / (xs[i] - xs[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    // t = pi (1 - x) / 2 increases with the node index.
    let ts: Vec<f64> = xs.iter().map(|x| PI * (1.0 - x) / 2.0).collect();
    (ts, d * (-2.0 / PI))
}

/// Eigenvalues of `-B y' + Q y = lambda y`, `U(y) = 0` by Chebyshev
/// collocation with row replacement for the boundary conditions.
/// Only eigenvalues that are stable under the choice of replaced rows are
/// returned.
pub fn collocation_eigenvalues(q: &dyn Fn(f64) -> [C64; 4], u: [[C64; 4]; 2], n: usize) -> Vec<C64> {
    let (ts, d) = cheb(n);
    let m = n + 1;
    let dim = 2 * m;
    // Unknown index: component j at node k -> j * m + k.
    let idx = |j: usize, k: usize| j * m + k;
    let mut op = DMatrix::from_element(dim, dim, c(0.0));
    for k in 0..m {
        let qv = q(ts[k]);
        for l in 0..m {
            // (-B y')_1 = -y2', (-B y')_2 = y1'.
            op[(idx(0, k), idx(1, l))] -= c(d[(k, l)]);
            op[(idx(1, k), idx(0, l))] += c(d[(k, l)]);
        }
        op[(idx(0, k), idx(0, k))] += qv[0];
        op[(idx(0, k), idx(1, k))] += qv[1];
        op[(idx(1, k), idx(0, k))] += qv[2];
        op[(idx(1, k), idx(1, k))] += qv[3];
    }
    let ends = [idx(0, 0), idx(1, 0), idx(0, n), idx(1, n)];
    let (mut pa, mut pb, mut best) = (0, 1, -1.0);
    for a in 0..4 {
        for b in a + 1..4 {
            let minor = (u[0][a] * u[1][b] - u[0][b] * u[1][a]).norm();
            if minor > best {
                best = minor;
                pa = a;
                pb = b;
            }
        }
    }
    let piv = [ends[pa], ends[pb]];
    let free: Vec<usize> = (0..dim).filter(|i| !piv.contains(i)).collect();
    // Pivot values as combinations of the free unknowns.
    let up = nalgebra::Matrix2::new(u[0][pa], u[0][pb], u[1][pa], u[1][pb]);
    let upi = up.try_inverse().expect("boundary minor");
    let mut t = DMatrix::from_element(dim, free.len(), c(0.0));
    for (col, &f) in free.iter().enumerate() {
        t[(f, col)] = c(1.0);
        let mut rhs = [c(0.0); 2];
        for (e, &end) in ends.iter().enumerate() {
            if end == f {
                rhs = [-u[0][e], -u[1][e]];
            }
        }
        for r in 0..2 {
            t[(piv[r], col)] = upi[(r, 0)] * rhs[0] + upi[(r, 1)] * rhs[1];
        }
    }
    let full = &op * &t;
    let pencil = |dropped: [usize; 2]| -> Vec<C64> {
        let kept: Vec<usize> = (0..dim).filter(|i| !dropped.contains(i)).collect();
        let a = DMatrix::from_fn(kept.len(), free.len(), |i, j| full[(kept[i], j)]);
        let b = DMatrix::from_fn(kept.len(), free.len(), |i, j| t[(kept[i], j)]);
        // (A - sigma B)^-1 B has eigenvalues 1 / (lambda - sigma).
        let sigma = C64::new(0.123, 0.317);
        let shifted = (&a - &b * sigma).try_inverse().expect("shifted pencil") * b;
        let mu = Schur::new(shifted).eigenvalues().expect("schur");
        mu.iter().filter(|z| z.norm() > 1e-12).map(|z| sigma + 1.0 / z).collect()
    };
    // Spurious modes move when a different pair of equations is replaced;
    // keep only eigenvalues on which both replacements agree.
    let partner = |e: usize| if e < m { e + m } else { e - m };
    let first = pencil(piv);
    let second = pencil([partner(piv[0]), partner(piv[1])]);
    first
        .into_iter()
        .filter(|z| second.iter().any(|w| (w - z).norm() < 1e-8 * (1.0 + z.norm())))
        .collect()
}

pub fn nearest(eigs: &[C64], target: C64) -> C64 {
    *eigs
        .iter()
        .min_by(|a, b| (*a - target).norm().partial_cmp(&(*b - target).norm()).unwrap())
        .unwrap()
}

/// Eigenvalues of the oracle within `radius` of `target`.
pub fn within(eigs: &[C64], target: C64, radius: f64) -> Vec<C64> {
    eigs.iter().copied().filter(|e| (e - target).norm() < radius).collect()
}
