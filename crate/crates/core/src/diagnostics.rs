//! Quantitative checks of eigenvalue and eigenfunction asymptotics and of
//! the basis properties of root functions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{delta0_weighted, null_space, phi0, BoundaryForm, RegularityKind};
use crate::error::{Error, Result};
use crate::grid::{uniform_grid, GridFunction, ScalarGrid, VectorGrid};
use crate::potential::{conjugate_exponent, Potential};
use crate::solutions::{remainder_cells, RemainderEvaluator};
use crate::spectrum::{
    adjoint_eigenfunctions, adjoint_problem, anchors_for, eigenfunction_with, localize_with, CharDet,
    Eigenpair, LocalizeOptions, SpectralPoint,
};
use crate::ode::Accuracy;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

const BOUNDARY_SAMPLES: usize = 48;

/// Points of the closed disk `|lambda - center| <= r`: 48 on the circle
/// and 16 inside.
fn disk_samples(center: C64, r: f64) -> Vec<C64> {
    let mut pts: Vec<C64> = (0..BOUNDARY_SAMPLES)
        .map(|k| center + C64::from_polar(r, 2.0 * PI * k as f64 / BOUNDARY_SAMPLES as f64))
        .collect();
    pts.push(center);
    for k in 0..5 {
        pts.push(center + C64::from_polar(r / 3.0, 2.0 * PI * (k as f64 + 0.5) / 5.0));
    }
    for k in 0..10 {
        pts.push(center + C64::from_polar(2.0 * r / 3.0, 2.0 * PI * k as f64 / 10.0));
    }
    pts
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Running `l^nu` norms of `values` ordered by `|n|`: `(N, (sum_{|n|<=N} |v|^nu)^{1/nu})`.
pub fn partial_lp_sums(ns: &[i64], values: &[f64], nu: f64) -> Vec<(i64, f64)> {
    let mut idx: Vec<usize> = (0..ns.len()).collect();
    idx.sort_by_key(|&i| (ns[i].abs(), ns[i]));
    let mut out: Vec<(i64, f64)> = Vec::new();
    let mut acc = 0.0_f64;
    for &i in &idx {
        let v = values[i].abs();
        acc = if nu.is_infinite() { acc.max(v) } else { acc + v.powf(nu) };
        let total = if nu.is_infinite() { acc } else { acc.powf(1.0 / nu) };
        let big_n = ns[i].abs();
        match out.last_mut() {
            Some(last) if last.0 == big_n => last.1 = total,
            _ => out.push((big_n, total)),
        }
    }
    out
}

/// Value of a running sum at `N`, i.e. the last entry with index `<= N`.
pub fn partial_sum_at(sums: &[(i64, f64)], n: i64) -> Option<f64> {
    sums.iter().take_while(|s| s.0 <= n).last().map(|s| s.1)
}

/// Settings for [`asymptotics_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsOptions {
    /// Disk radius around the unperturbed eigenvalues.
    pub epsilon: f64,
    /// Relative width of the final bracket for `r_n`.
    pub tol: f64,
    /// Cap on the monotone iterations that produce the bracket.
    pub max_iterations: usize,
}

impl Default for AsymptoticsOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            tol: 1e-6,
            max_iterations: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub n: i64,
    pub anchor: C64,
    pub lambda: C64,
    /// `|lambda_n - lambda_n^0|`, the largest over a cluster.
    pub dev: f64,
    pub s_n_eps: f64,
    /// `None` when `n` lies below the asymptotic regime.
    pub r_n: Option<f64>,
    /// `(M / c1) s_n(eps)`, or `sqrt((M / c2) s_n(eps))` for double anchors.
    pub bound: Option<f64>,
    /// `dev <= r_n <= bound` (strongly regular) or `dev <= r_n`,
    /// `dev^2 <= r_n`, `r_n <= bound` (double anchors).
    pub holds: Option<bool>,
    /// `dev^2 <= r_n`, reported for double anchors.
    pub squared_holds: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub kind: RegularityKind,
    pub epsilon: f64,
    /// The exponent `p'` of the remainder norm.
    pub p_conj: f64,
    /// `c1` (simple anchors) or `c2` (double anchors).
    pub c: f64,
    /// Fitted `M = max |Delta - Delta0| / (Upsilon(pi) + Upsilon_p')` over all samples.
    pub m_fit: f64,
    pub m_over_c: f64,
    pub rows: Vec<AsymptoticsRow>,
    pub lp_tail_s: Vec<(i64, f64)>,
    pub lp_tail_dev: Vec<(i64, f64)>,
    /// Log-log slope of `dev_n` against `|n|` over `n != 0`.
    pub dev_slope: Option<f64>,
    pub unresolved: Vec<i64>,
    pub violations: Vec<i64>,
}

impl AsymptoticsReport {
    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

struct DiskData {
    point: SpectralPoint,
    /// `Upsilon(pi) + Upsilon_p'` at the `epsilon` disk samples.
    ups: Vec<f64>,
    ratio_c: f64,
    m_ratio: f64,
}

/// Measures `|lambda_n - lambda_n^0|` against the radii `r_n` obtained from
/// the remainder integrals with constants fitted to the data.
pub fn asymptotics_report(
    q: &Potential,
    bf: &BoundaryForm,
    lo: i64,
    hi: i64,
    opts: &AsymptoticsOptions,
) -> Result<AsymptoticsReport> {
    if !(opts.epsilon > 0.0) || !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidInput("need epsilon > 0 and 0 < tol < 1".into()));
    }
    let (_, kind) = anchors_for(q, bf)?;
    let double = match kind {
        RegularityKind::StronglyRegular => false,
        RegularityKind::RegularNotStrong => true,
        k => return Err(Error::Precondition(format!("boundary form is {k:?}, not regular"))),
    };
    let det = CharDet::new(q, bf);
    let lopts = LocalizeOptions {
        epsilon: opts.epsilon,
        ..Default::default()
    };
    let points = localize_with(&det, lo, hi, &lopts)?;
    let nu = conjugate_exponent(q.p_class());
    let e = q.weight_e(PI);
    let top = points.iter().map(|p| p.anchor.re.abs()).fold(0.0, f64::max) + 2.0;
    let ev = RemainderEvaluator::new(q, 2 * remainder_cells(C64::new(top, 0.0)));
    let eps = opts.epsilon;
    let power = if double { 2 } else { 1 };
    let upsilon = |l: C64| {
        let (at_pi, nu_norm, _) = ev.scalars(l, nu);
        at_pi + nu_norm
    };
    let data: Vec<Result<DiskData>> = points
        .into_par_iter()
        .map(|p| {
            let samples = disk_samples(p.anchor, eps);
            let mut ups = Vec::with_capacity(samples.len());
            let mut m_ratio: f64 = 0.0;
            let mut ratio_c = f64::INFINITY;
            for (k, &l) in samples.iter().enumerate() {
                let u = upsilon(l);
                let d0 = delta0_weighted(bf, e, l);
                let d = det.eval(l, Accuracy::Fine)?;
                let diff = (d - d0).norm();
                if u > 0.0 {
                    m_ratio = m_ratio.max(diff / u);
                } else if diff > 1e-9 * d0.norm().max(1e-300) {
                    m_ratio = f64::INFINITY;
                }
                if k < BOUNDARY_SAMPLES {
                    ratio_c = ratio_c.min(d0.norm() / (l - p.anchor).norm().powi(power));
                }
                ups.push(u);
            }
            Ok(DiskData {
                point: p,
                ups,
                ratio_c,
                m_ratio,
            })
        })
        .collect();
    let data: Vec<DiskData> = data.into_iter().collect::<Result<_>>()?;
    let c = data.iter().map(|d| d.ratio_c).fold(f64::INFINITY, f64::min);
    let m_fit = data.iter().map(|d| d.m_ratio).fold(0.0, f64::max);
    let m_over_c = m_fit / c;
    let rows: Vec<AsymptoticsRow> = data
        .par_iter()
        .map(|d| {
            let p = &d.point;
            let s_eps = d.ups.iter().copied().fold(0.0, f64::max);
            let dev = if p.zeros.is_empty() {
                (p.lambda - p.anchor).norm()
            } else {
                p.zeros.iter().map(|z| (z - p.anchor).norm()).fold(0.0, f64::max)
            };
            let rhs = |r: f64| if m_over_c > 0.0 { r.powi(power) / m_over_c } else { f64::INFINITY };
            let s_of = |r: f64| {
                if r == 0.0 {
                    upsilon(p.anchor)
                } else {
                    disk_samples(p.anchor, r).into_iter().map(upsilon).fold(0.0, f64::max)
                }
            };
            let resolved = s_eps == 0.0 || s_eps <= rhs(eps);
            let (r_n, bound) = if !resolved {
                (None, None)
            } else if s_eps == 0.0 || m_over_c == 0.0 {
                (Some(0.0), Some(0.0))
            } else {
                let bound = (m_over_c * s_eps).powf(1.0 / power as f64);
                let g = |r: f64| s_of(r) - rhs(r);
                // The map r -> (M/c s_n(r))^(1/k) is nondecreasing, so its
                // iterates from 0 increase to the smallest root and give
                // the lower end of a bracket.
                let step = |r: f64| (m_over_c * s_of(r)).powf(1.0 / power as f64).min(eps);
                let mut a = 0.0;
                let mut next = step(0.0);
                let mut iters = 0;
                while next - a > opts.tol * next && iters < opts.max_iterations {
                    a = next;
                    next = step(a);
                    iters += 1;
                }
                let mut b = (next * (1.0 + opts.tol)).min(eps);
                let mut widen = 1.0;
                while g(b) > 0.0 && b < eps {
                    widen *= 4.0;
                    b = (next * (1.0 + widen * opts.tol)).min(eps);
                }
                while b - a > opts.tol * b {
                    let m = 0.5 * (a + b);
                    if g(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                (Some(b), Some(bound))
            };
            let (holds, squared_holds) = match (r_n, bound) {
                (Some(r), Some(bd)) => {
                    let tol = 1e-12 + 1e-9 * r;
                    let base = dev <= r + tol && r <= bd * (1.0 + 1e-9) + 1e-15;
                    if double {
                        let sq = dev * dev <= r + tol;
                        (Some(base && sq), Some(sq))
                    } else {
                        (Some(base), None)
                    }
                }
                _ => (None, None),
            };
            AsymptoticsRow {
                n: p.n,
                anchor: p.anchor,
                lambda: p.lambda,
                dev,
                s_n_eps: s_eps,
                r_n,
                bound,
                holds,
                squared_holds,
            }
        })
        .collect();
    let ns: Vec<i64> = rows.iter().map(|r| r.n).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.s_n_eps).collect();
    let dv: Vec<f64> = rows.iter().map(|r| r.dev).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.n != 0)
        .map(|r| (r.n.abs() as f64, r.dev))
        .unzip();
    Ok(AsymptoticsReport {
        kind,
        epsilon: eps,
        p_conj: nu,
        c,
        m_fit,
        m_over_c,
        lp_tail_s: partial_lp_sums(&ns, &s, nu),
        lp_tail_dev: partial_lp_sums(&ns, &dv, nu),
        dev_slope: loglog_slope(&xs, &ys),
        unresolved: rows.iter().filter(|r| r.r_n.is_none()).map(|r| r.n).collect(),
        violations: rows.iter().filter(|r| r.holds == Some(false)).map(|r| r.n).collect(),
        rows,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderRow {
    pub n: i64,
    pub lambda: C64,
    /// `|| a y_n - E y_n^0 ||_{p'}` with `a` the least-squares scalar.
    pub b_n: f64,
    /// `<y_n, E y_n^0>` before alignment.
    pub overlap: C64,
    /// The overlap is too small for a meaningful alignment.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenfunctionAsymptotics {
    pub p_conj: f64,
    pub rows: Vec<RemainderRow>,
    pub adjoint_rows: Vec<RemainderRow>,
    pub lp_tail: Vec<(i64, f64)>,
    pub adjoint_lp_tail: Vec<(i64, f64)>,
    /// Indices with a vanishing overlap or without a localized eigenvalue.
    pub flagged: Vec<i64>,
}

/// Remainders `R_n = y_n - E(x) y_n^0` of the eigenfunctions and of the
/// adjoint eigenfunctions (whose weight is `1 / conj(E)`).
pub fn eigenfunction_asymptotics(
    q: &Potential,
    bf: &BoundaryForm,
    lo: i64,
    hi: i64,
    epsilon: f64,
    cells: usize,
) -> Result<EigenfunctionAsymptotics> {
    let (_, kind) = anchors_for(q, bf)?;
    if kind != RegularityKind::StronglyRegular {
        return Err(Error::Precondition(format!("boundary form is {kind:?}, not strongly regular")));
    }
    let nu = conjugate_exponent(q.p_class());
    let (rows, skipped) = remainder_rows(q, bf, lo, hi, epsilon, cells, nu)?;
    let adj = adjoint_problem(q, bf)?;
    let (adjoint_rows, adjoint_skipped) = remainder_rows(&adj.q, &adj.bf, lo, hi, epsilon, cells, nu)?;
    let tail = |rs: &[RemainderRow]| {
        let ns: Vec<i64> = rs.iter().map(|r| r.n).collect();
        let b: Vec<f64> = rs.iter().map(|r| r.b_n).collect();
        partial_lp_sums(&ns, &b, nu)
    };
    let mut flagged: Vec<i64> = rows.iter().chain(&adjoint_rows).filter(|r| r.flagged).map(|r| r.n).collect();
    flagged.extend(skipped.into_iter().chain(adjoint_skipped));
    flagged.sort_unstable();
    flagged.dedup();
    Ok(EigenfunctionAsymptotics {
        p_conj: nu,
        lp_tail: tail(&rows),
        adjoint_lp_tail: tail(&adjoint_rows),
        rows,
        adjoint_rows,
        flagged,
    })
}

fn remainder_rows(
    q: &Potential,
    bf: &BoundaryForm,
    lo: i64,
    hi: i64,
    epsilon: f64,
    cells: usize,
    nu: f64,
) -> Result<(Vec<RemainderRow>, Vec<i64>)> {
    let det = CharDet::new(q, bf);
    let points = localize_with(
        &det,
        lo,
        hi,
        &LocalizeOptions {
            epsilon,
            ..Default::default()
        },
    )?;
    let assoc = bf.associated(q.weight_e(PI));
    // Points whose disk does not hold the expected zeros have no eigenfunction to measure.
    let (points, bad): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.anomaly.is_none());
    let skipped = bad.iter().map(|p| p.n).collect();
    let rows = points
        .par_iter()
        .map(|p| {
            let ep = eigenfunction_with(det.integrator(), bf, p, cells)?;
            let y = ep.y;
            let weight = q.weight_on_grid(&y.grid);
            let m0 = assoc.system_matrix(&phi0(p.anchor, PI));
            let g = null_space(&m0, 1e-9)?[0];
            let y0 = GridFunction::from_fn(y.grid.clone(), |x| {
                let f = phi0(p.anchor, x);
                [f[(0, 0)] * g[0] + f[(0, 1)] * g[1], f[(1, 0)] * g[0] + f[(1, 1)] * g[1]]
            });
            let y0 = y0.scale(ONE / y0.l2_norm());
            let ey0 = GridFunction {
                grid: y.grid.clone(),
                values: y0.values.iter().zip(&weight.values).map(|(v, w)| [v[0] * w, v[1] * w]).collect(),
            };
            let overlap = y.inner(&ey0);
            let flagged = overlap.norm() < 1e-3 * ey0.l2_norm();
            // Least-squares scalar: minimizes || a y - E y0 || for unit-norm y.
            let phase = overlap.conj();
            let r = GridFunction {
                grid: y.grid.clone(),
                values: y
                    .values
                    .iter()
                    .zip(&ey0.values)
                    .map(|(a, b)| [a[0] * phase - b[0], a[1] * phase - b[1]])
                    .collect(),
            };
            Ok(RemainderRow {
                n: p.n,
                lambda: p.lambda,
                b_n: r.lp_norm(nu),
                overlap,
                flagged,
            })
        })
        .collect::<Result<_>>()?;
    Ok((rows, skipped))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisReport {
    pub n_trunc: i64,
    /// Number of root functions in the truncation.
    pub size: usize,
    pub gram_cond: f64,
    /// Condition number after orthonormalizing each eigenvalue cluster.
    pub block_gram_cond: f64,
    pub biorth_max_err: f64,
    pub bessel_const: f64,
    pub bracket_mode: bool,
    /// `|<y_n, z_n> - 1|` before rescaling, largest over the truncation.
    pub pairing_dev: Vec<(i64, f64)>,
    pub partial: bool,
    pub flags: Vec<String>,
}

/// Eigen(root) functions with `|n| <= n_trunc`, adjoints attached, each
/// tagged with the index of its cluster.
pub fn root_functions(
    q: &Potential,
    bf: &BoundaryForm,
    n_trunc: i64,
    epsilon: f64,
    cells: usize,
) -> Result<(Vec<(i64, Eigenpair)>, Vec<String>)> {
    let det = CharDet::new(q, bf);
    let points = localize_with(
        &det,
        -n_trunc,
        n_trunc,
        &LocalizeOptions {
            epsilon,
            ..Default::default()
        },
    )?;
    let mut flags = Vec::new();
    let mut single: Vec<(i64, SpectralPoint)> = Vec::new();
    for p in &points {
        if let Some(a) = &p.anomaly {
            flags.push(format!("n = {}: {a}; left out of the basis", p.n));
            continue;
        }
        let distinct = p.zeros.len() == p.multiplicity
            && p.zeros
                .iter()
                .enumerate()
                .all(|(i, a)| p.zeros[i + 1..].iter().all(|b| (a - b).norm() > 1e-6));
        if p.multiplicity > 1 && distinct {
            let sep = p.zeros.iter().flat_map(|a| p.zeros.iter().map(move |b| (a - b).norm()))
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min);
            for &z in &p.zeros {
                let mut s = p.clone();
                s.lambda = z;
                s.zeros = vec![z];
                s.multiplicity = 1;
                s.radius = p.radius.min(0.25 * sep);
                single.push((p.n, s));
            }
        } else {
            single.push((p.n, p.clone()));
        }
    }
    let pairs: Vec<Result<(i64, Eigenpair)>> = single
        .par_iter()
        .map(|(n, s)| Ok((*n, eigenfunction_with(det.integrator(), bf, s, cells)?)))
        .collect();
    let mut tagged: Vec<(i64, Eigenpair)> = pairs.into_iter().collect::<Result<_>>()?;
    for (n, e) in &tagged {
        if e.point.multiplicity > e.basis.len() {
            flags.push(format!("n = {n}: root subspace has associated functions, eigenfunctions only"));
        }
    }
    let mut eps: Vec<Eigenpair> = tagged.iter().map(|t| t.1.clone()).collect();
    adjoint_eigenfunctions(q, bf, &mut eps, cells)?;
    for (t, e) in tagged.iter_mut().zip(eps) {
        t.1 = e;
    }
    Ok((tagged, flags))
}

fn cond(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 { max / min } else { f64::INFINITY }
}

fn gram(fs: &[VectorGrid]) -> DMatrix<C64> {
    let n = fs.len();
    let mut g = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        for j in i..n {
            let v = fs[j].inner(&fs[i]);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Gram/Riesz diagnostics of the eigenfunctions with `|n| <= n_trunc`.
pub fn basis_report(
    q: &Potential,
    bf: &BoundaryForm,
    n_trunc: i64,
    bracket: bool,
    seed: u64,
) -> Result<BasisReport> {
    let cells = 2048.max((64 * n_trunc) as usize);
    let (tagged, mut flags) = root_functions(q, bf, n_trunc, 0.3, cells)?;
    let mut ys: Vec<VectorGrid> = Vec::new();
    let mut zs: Vec<VectorGrid> = Vec::new();
    let mut cluster: Vec<i64> = Vec::new();
    let mut pairing_dev = Vec::new();
    for (n, e) in &tagged {
        for (k, y) in e.basis.iter().enumerate() {
            ys.push(y.clone());
            cluster.push(*n);
            match e.z_basis.get(k) {
                Some(z) => zs.push(z.clone()),
                None => flags.push(format!("n = {n}: missing adjoint function")),
            }
        }
        if let Some(a) = e.pairing {
            pairing_dev.push((*n, (a - ONE).norm()));
        }
        if e.near_degenerate {
            flags.push(format!("n = {n}: pairing with the adjoint nearly vanishes"));
        }
    }
    let partial = zs.len() != ys.len() || !flags.is_empty();
    let gram_cond = cond(&gram(&ys));
    let mut biorth: f64 = 0.0;
    if zs.len() == ys.len() {
        for (i, y) in ys.iter().enumerate() {
            for (j, z) in zs.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                biorth = biorth.max((y.inner(z) - target).norm());
            }
        }
    }
    let mut blocks: Vec<VectorGrid> = Vec::with_capacity(ys.len());
    let mut i = 0;
    while i < ys.len() {
        let mut j = i;
        while j < ys.len() && cluster[j] == cluster[i] {
            j += 1;
        }
        blocks.extend(orthonormal(&ys[i..j]));
        i = j;
    }
    let block_gram_cond = cond(&gram(&blocks));
    let probes = kadec_probes(seed, 2 * n_trunc as usize, &ys[0].grid);
    let used = if bracket { &blocks } else { &ys };
    let bessel_const = probes
        .iter()
        .map(|f| {
            let pf: VectorGrid = f.map(|v| [v, ZERO]);
            let pg: VectorGrid = f.map(|v| [ZERO, v]);
            let mut worst: f64 = 0.0;
            for g in [pf, pg] {
                let s: f64 = used.iter().map(|y| g.inner(y).norm_sqr()).sum();
                worst = worst.max(s / g.l2_norm().powi(2));
            }
            worst
        })
        .fold(0.0, f64::max);
    Ok(BasisReport {
        n_trunc,
        size: ys.len(),
        gram_cond,
        block_gram_cond,
        biorth_max_err: biorth,
        bessel_const,
        bracket_mode: bracket,
        pairing_dev,
        partial,
        flags,
    })
}

fn orthonormal(fs: &[VectorGrid]) -> Vec<VectorGrid> {
    let mut out: Vec<VectorGrid> = Vec::with_capacity(fs.len());
    for f in fs {
        let mut v = f.clone();
        for _ in 0..2 {
            for u in &out {
                let p = v.inner(u);
                for (a, b) in v.values.iter_mut().zip(&u.values) {
                    a[0] -= p * b[0];
                    a[1] -= p * b[1];
                }
            }
        }
        let n = v.l2_norm();
        out.push(v.scale(C64::new(1.0 / n, 0.0)));
    }
    out
}

/// 24 random complex trigonometric polynomials of degree `<= degree` and
/// 8 random step functions on `grid`.
pub fn kadec_probes(seed: u64, degree: usize, grid: &[f64]) -> Vec<ScalarGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(32);
    for _ in 0..24 {
        let deg = rng.gen_range(0..=degree.max(1));
        let coefs: Vec<(C64, C64)> = (0..=deg)
            .map(|_| {
                (
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        out.push(GridFunction::from_fn(grid.to_vec(), |x| {
            coefs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
                .sum()
        }));
    }
    for _ in 0..8 {
        let mut cuts: Vec<f64> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0.0..PI)).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let levels: Vec<C64> = (0..=cuts.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        out.push(GridFunction::from_fn(grid.to_vec(), |x| levels[cuts.iter().filter(|&&c| c <= x).count()]));
    }
    out
}

/// Empirical constant `max_f (sum_n |int_0^pi f e^{i lambda_n x} dx|^{p'})^{1/p'} / ||f||_p`.
///
/// Requires `sup_n |lambda_n - 2n| < 1 / (2p)`, with `lambdas[k]` carrying
/// the index `ns[k]`.
pub fn bessel_kadec_check(ns: &[i64], lambdas: &[C64], p: f64, probes: &[ScalarGrid]) -> Result<f64> {
    if ns.len() != lambdas.len() {
        return Err(Error::InvalidInput("indices and eigenvalues differ in length".into()));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidInput(format!("need 1 <= p <= 2, got {p}")));
    }
    let limit = 1.0 / (2.0 * p);
    for (n, l) in ns.iter().zip(lambdas) {
        let d = (l - C64::new(2.0 * *n as f64, 0.0)).norm();
        if !(d < limit) {
            return Err(Error::Precondition(format!(
                "|lambda_n - 2n| = {d:.3e} >= {limit} at n = {n}"
            )));
        }
    }
    let nu = conjugate_exponent(p);
    let mut best: f64 = 0.0;
    for f in probes {
        let nf = f.lp_norm(p);
        if nf == 0.0 {
            continue;
        }
        let coefs: Vec<f64> = lambdas
            .iter()
            .map(|l| {
                GridFunction {
                    grid: f.grid.clone(),
                    values: f
                        .grid
                        .iter()
                        .zip(&f.values)
                        .map(|(x, v)| v * (C64::new(0.0, *x) * l).exp())
                        .collect(),
                }
                .integral()
                .norm()
            })
            .collect();
        let total = if nu.is_infinite() {
            coefs.iter().copied().fold(0.0, f64::max)
        } else {
            coefs.iter().map(|c| c.powf(nu)).sum::<f64>().powf(1.0 / nu)
        };
        best = best.max(total / nf);
    }
    Ok(best)
}

/// Uniform grid suited to [`kadec_probes`] for exponents up to `lambda_max`.
pub fn kadec_grid(lambda_max: f64) -> Vec<f64> {
    let cells = ((32.0 * lambda_max.abs()) as usize).max(1024).next_power_of_two();
    uniform_grid(0.0, PI, cells)
}

/// Settings for [`verify`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub lo: i64,
    pub hi: i64,
    pub epsilon: f64,
    pub basis_n: i64,
    pub bracket: bool,
    pub cells: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            lo: 10,
            hi: 40,
            epsilon: 0.3,
            basis_n: 16,
            bracket: false,
            cells: 2048,
            seed: 0,
        }
    }
}

/// All diagnostics for one problem, with the list of failed hard checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub asymptotics: AsymptoticsReport,
    pub eigenfunctions: Option<EigenfunctionAsymptotics>,
    pub basis: BasisReport,
    pub flags: Vec<String>,
}

pub fn verify(q: &Potential, bf: &BoundaryForm, opts: &VerifyOptions) -> Result<DiagnosticsReport> {
    let asymptotics = asymptotics_report(
        q,
        bf,
        opts.lo,
        opts.hi,
        &AsymptoticsOptions {
            epsilon: opts.epsilon,
            ..Default::default()
        },
    )?;
    let mut flags: Vec<String> = asymptotics
        .violations
        .iter()
        .map(|n| format!("asymptotic bound fails at n = {n}"))
        .collect();
    let eigenfunctions = if asymptotics.kind == RegularityKind::StronglyRegular {
        let ea = eigenfunction_asymptotics(q, bf, opts.lo, opts.hi, opts.epsilon, opts.cells)?;
        flags.extend(ea.flagged.iter().map(|n| format!("eigenfunction alignment degenerate at n = {n}")));
        Some(ea)
    } else {
        None
    };
    let basis = basis_report(q, bf, opts.basis_n, opts.bracket, opts.seed)?;
    flags.extend(basis.flags.iter().cloned());
    Ok(DiagnosticsReport {
        asymptotics,
        eigenfunctions,
        basis,
        flags,
    })
}
