//! Characteristic determinant, eigenvalue localization, eigenfunctions and
//! the adjoint problem.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{
    classify, null_space, unperturbed_spectrum, BoundaryForm, Mat2, RegularityKind, SpectrumShape,
    UnperturbedSpectrum,
};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, VectorGrid};
use crate::ode::{Accuracy, Integrator};
use crate::potential::Potential;
use crate::solutions::{direct_pair, SolveOptions};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `Delta(lambda) = det(A + B [c(pi) s(pi)])` for a fixed problem.
pub struct CharDet {
    ig: Integrator,
    bf: BoundaryForm,
}

impl CharDet {
    pub fn new(q: &Potential, bf: &BoundaryForm) -> Self {
        Self {
            ig: Integrator::new(q),
            bf: bf.clone(),
        }
    }

    pub fn potential(&self) -> &Potential {
        self.ig.potential()
    }

    pub fn boundary(&self) -> &BoundaryForm {
        &self.bf
    }

    pub fn integrator(&self) -> &Integrator {
        &self.ig
    }

    pub fn matrix(&self, lambda: C64, acc: Accuracy) -> Result<Mat2> {
        Ok(self.bf.system_matrix(&self.ig.transfer(lambda, acc)?))
    }

    pub fn eval(&self, lambda: C64, acc: Accuracy) -> Result<C64> {
        Ok(self.matrix(lambda, acc)?.determinant())
    }
}

/// `Delta(lambda)` at one point.
pub fn char_det(q: &Potential, bf: &BoundaryForm, lambda: C64) -> Result<C64> {
    CharDet::new(q, bf).eval(lambda, Accuracy::Fine)
}

/// A localized eigenvalue (or cluster) with its index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub n: i64,
    /// The eigenvalue, or the barycenter of a two-zero cluster.
    pub lambda: C64,
    pub anchor: C64,
    pub radius: f64,
    /// Winding number of `Delta` around the disk.
    pub multiplicity: usize,
    pub gamma: [C64; 2],
    /// Individually refined zeros inside the disk.
    pub zeros: Vec<C64>,
    /// `|Delta(lambda)|`.
    pub det_abs: f64,
    /// `max |Delta|` on the circle.
    pub det_scale: f64,
    pub anomaly: Option<String>,
}

/// Settings for [`localize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizeOptions {
    pub epsilon: f64,
    pub min_samples: usize,
    pub max_samples: usize,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.4,
            min_samples: 256,
            max_samples: 4096,
        }
    }
}

/// Unperturbed spectrum of the form associated with `E(pi)` for `q`.
pub fn anchors_for(q: &Potential, bf: &BoundaryForm) -> Result<(UnperturbedSpectrum, RegularityKind)> {
    let e = q.weight_e(PI);
    let cls = classify(bf, e)?;
    Ok((unperturbed_spectrum(bf, e)?, cls.kind))
}

fn unwrap_winding(vals: &[C64]) -> (f64, f64) {
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..vals.len() {
        let (a, b) = (vals[k], vals[(k + 1) % vals.len()]);
        let d = (b / a).arg();
        worst = worst.max(d.abs());
        total += d;
    }
    (total / (2.0 * PI), worst)
}

struct Circle {
    center: C64,
    radius: f64,
    samples: Vec<C64>,
    winding: i64,
}

/// Samples `Delta` on a circle until the phase increments are small.
fn sample_circle(
    det: &CharDet,
    center: C64,
    radius: f64,
    opts: &LocalizeOptions,
    acc: Accuracy,
) -> Result<Option<Circle>> {
    let mut m = opts.min_samples.max(8);
    loop {
        let samples = (0..m)
            .map(|j| det.eval(center + radius * (2.0 * PI * I * j as f64 / m as f64).exp(), acc))
            .collect::<Result<Vec<_>>>()?;
        let scale = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let min = samples.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        let (w, worst) = unwrap_winding(&samples);
        if min > 1e-12 * scale && worst < PI / 3.0 && (w - w.round()).abs() < 1e-3 {
            return Ok(Some(Circle {
                center,
                radius,
                samples,
                winding: w.round() as i64,
            }));
        }
        if m >= opts.max_samples {
            return Ok(None);
        }
        m *= 2;
    }
}

/// Taylor coefficients of `Delta(center + radius w)` from circle samples.
fn taylor_from_samples(samples: &[C64], degree: usize) -> Vec<C64> {
    let m = samples.len();
    (0..=degree.min(m / 2))
        .map(|k| {
            let mut s = ZERO;
            for (j, v) in samples.iter().enumerate() {
                s += v * (-2.0 * PI * I * (j * k) as f64 / m as f64).exp();
            }
            s / m as f64
        })
        .collect()
}

/// Roots of `sum c_k w^k`, via the companion matrix.
fn poly_roots(c: &[C64]) -> Vec<C64> {
    let mut d = c.len() - 1;
    let big = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    while d > 0 && c[d].norm() <= 1e-14 * big {
        d -= 1;
    }
    if d == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        comp[(0, k)] = -c[d - 1 - k] / c[d];
        if k + 1 < d {
            comp[(k + 1, k)] = ONE;
        }
    }
    let t = comp.schur().unpack().1;
    (0..d).map(|k| t[(k, k)]).collect()
}

/// The `count` surrogate zeros inside the unit disk closest to the center,
/// mapped back to `lambda`.
fn surrogate_zeros(circle: &Circle, count: usize, noise: f64) -> Vec<C64> {
    let scale = circle.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut coef = taylor_from_samples(&circle.samples, 64);
    while coef.len() > count + 1 && coef.last().unwrap().norm() < noise * scale {
        coef.pop();
    }
    let mut roots = poly_roots(&coef);
    roots.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    roots
        .into_iter()
        .take(count)
        .map(|w| circle.center + circle.radius * w)
        .collect()
}

/// Muller iteration for a zero of `f` near `x2`.
pub fn muller(
    f: impl Fn(C64) -> Result<C64>,
    mut x0: C64,
    mut x1: C64,
    mut x2: C64,
    ftol: f64,
    max_iter: usize,
) -> Result<C64> {
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    for _ in 0..max_iter {
        if f2.norm() <= ftol {
            return Ok(x2);
        }
        let (h1, h2) = (x1 - x0, x2 - x1);
        let (d1, d2) = ((f1 - f0) / h1, (f2 - f1) / h2);
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * f2 * a).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        let dx = if den.norm() == 0.0 { C64::new(1e-8, 0.0) } else { -2.0 * f2 / den };
        let x3 = x2 + dx;
        let f3 = f(x3)?;
        x0 = x1;
        x1 = x2;
        x2 = x3;
        f0 = f1;
        f1 = f2;
        f2 = f3;
        if dx.norm() <= 1e-15 * x2.norm().max(1.0) {
            return Ok(x2);
        }
    }
    if f2.norm() <= ftol * 1e3 {
        return Ok(x2);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_update: f2.norm(),
    })
}

fn refine(det: &CharDet, seed: C64, radius: f64, ftol: f64) -> Result<C64> {
    let h = 1e-3 * radius;
    let z = muller(
        |l| det.eval(l, Accuracy::Fine),
        seed - h,
        seed + I * h,
        seed,
        ftol,
        60,
    )?;
    Ok(z)
}

fn null_vector(m: &Mat2) -> [C64; 2] {
    match null_space(m, 1.0) {
        Ok(v) => [v[0][0], v[0][1]],
        Err(_) => [ZERO, ONE],
    }
}

fn check_disjoint(spec: &UnperturbedSpectrum, lo: i64, hi: i64, eps: f64) -> Result<()> {
    let pts = spec.anchors(lo - 1, hi + 1);
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let d = (a.lambda - b.lambda).norm();
            if d <= 2.0 * eps {
                return Err(Error::InvalidInput(format!(
                    "disks of radius {eps} around anchors {} and {} overlap (distance {d:.3e})",
                    a.n, b.n
                )));
            }
        }
    }
    Ok(())
}

/// Localizes the eigenvalues with indices `lo..=hi` in disks of radius
/// `epsilon` about their unperturbed anchors.
pub fn localize(q: &Potential, bf: &BoundaryForm, lo: i64, hi: i64, opts: &LocalizeOptions) -> Result<Vec<SpectralPoint>> {
    let det = CharDet::new(q, bf);
    localize_with(&det, lo, hi, opts)
}

/// [`localize`] reusing a prepared determinant.
pub fn localize_with(det: &CharDet, lo: i64, hi: i64, opts: &LocalizeOptions) -> Result<Vec<SpectralPoint>> {
    if lo > hi {
        return Ok(Vec::new());
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let (spec, kind) = anchors_for(det.potential(), det.boundary())?;
    if !matches!(kind, RegularityKind::StronglyRegular | RegularityKind::RegularNotStrong) {
        return Err(Error::Precondition(format!("boundary form is {kind:?}, not regular")));
    }
    if !matches!(spec.shape, SpectrumShape::TwoSeries | SpectrumShape::Double) {
        return Err(Error::Precondition("the unperturbed spectrum has no anchors".into()));
    }
    check_disjoint(&spec, lo, hi, opts.epsilon)?;
    (lo..=hi)
        .into_par_iter()
        .map(|n| localize_one(det, &spec, n, opts))
        .collect()
}

fn localize_one(det: &CharDet, spec: &UnperturbedSpectrum, n: i64, opts: &LocalizeOptions) -> Result<SpectralPoint> {
    let anchor = spec.anchor(n).unwrap();
    let mut eps = opts.epsilon;
    let mut circle = None;
    for factor in [1.0, 1.1, 0.9] {
        eps = opts.epsilon * factor;
        if let Some(c) = sample_circle(det, anchor.lambda, eps, opts, Accuracy::Coarse)? {
            circle = Some(c);
            break;
        }
    }
    let circle = circle.ok_or(Error::ContourThroughZero)?;
    let scale = circle.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ftol = 1e-10 * scale;
    let mut point = SpectralPoint {
        n,
        lambda: anchor.lambda,
        anchor: anchor.lambda,
        radius: eps,
        multiplicity: circle.winding.max(0) as usize,
        gamma: [ZERO, ONE],
        zeros: Vec::new(),
        det_abs: f64::NAN,
        det_scale: scale,
        anomaly: None,
    };
    if circle.winding <= 0 {
        point.anomaly = Some(format!(
            "winding {} where {} zero(s) are expected",
            circle.winding, anchor.multiplicity
        ));
        return Ok(point);
    }
    if circle.winding as usize != anchor.multiplicity {
        point.anomaly = Some(format!(
            "winding {} differs from the anchor multiplicity {}",
            circle.winding, anchor.multiplicity
        ));
    }
    let m = circle.winding as usize;
    let seeds = surrogate_zeros(&circle, m, 1e-9);
    let inside = |z: C64| (z - anchor.lambda).norm() < eps;
    if m == 1 {
        let z = refine(det, seeds[0], eps, ftol)?;
        if !inside(z) {
            return Err(Error::Inconsistent(format!("refined zero {z} left the disk around {}", anchor.lambda)));
        }
        point.lambda = z;
        point.zeros = vec![z];
    } else {
        let separated = seeds.len() == m
            && seeds.iter().enumerate().all(|(i, a)| seeds[i + 1..].iter().all(|b| (a - b).norm() > 1e-6));
        let mut zeros = Vec::new();
        if separated {
            for s in &seeds {
                if let Ok(z) = refine(det, *s, eps, ftol) {
                    if inside(z) && zeros.iter().all(|w: &C64| (w - z).norm() > 1e-9) {
                        zeros.push(z);
                    }
                }
            }
        }
        if zeros.len() == m {
            point.lambda = zeros.iter().sum::<C64>() / m as f64;
        } else {
            // Sum of zeros is well conditioned even when they nearly coincide.
            let fine = sample_circle(det, anchor.lambda, eps, opts, Accuracy::Fine)?
                .ok_or(Error::ContourThroughZero)?;
            let roots = surrogate_zeros(&fine, m, 1e-13);
            point.lambda = roots.iter().sum::<C64>() / m as f64;
            zeros = roots;
        }
        point.zeros = zeros;
    }
    let mm = det.matrix(point.lambda, Accuracy::Fine)?;
    point.det_abs = mm.determinant().norm();
    point.gamma = null_vector(&mm);
    Ok(point)
}

/// Axis-aligned rectangle `[re0, re1] x [im0, im1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

fn boundary_winding(det: &CharDet, r: &Rect) -> Result<Option<i64>> {
    let corners = [
        C64::new(r.re.0, r.im.0),
        C64::new(r.re.1, r.im.0),
        C64::new(r.re.1, r.im.1),
        C64::new(r.re.0, r.im.1),
    ];
    let mut total = 0.0;
    let mut scale: f64 = 0.0;
    let mut min = f64::INFINITY;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = (b - a).norm();
        let n = ((len * 16.0).ceil() as usize).max(16);
        let mut prev_l = a;
        let mut prev = det.eval(a, Accuracy::Coarse)?;
        for j in 1..=n {
            let l = a + (b - a) * (j as f64 / n as f64);
            let v = det.eval(l, Accuracy::Coarse)?;
            let (d, lo, sc) = edge_phase(det, prev_l, prev, l, v, 0)?;
            total += d;
            min = min.min(lo);
            scale = scale.max(sc);
            prev_l = l;
            prev = v;
        }
    }
    if min < 1e-8 * scale {
        return Ok(None);
    }
    let w = total / (2.0 * PI);
    if (w - w.round()).abs() > 1e-3 {
        return Ok(None);
    }
    Ok(Some(w.round() as i64))
}

/// Phase change from `a` to `b`, bisecting while it exceeds `pi/4`.
fn edge_phase(det: &CharDet, a: C64, fa: C64, b: C64, fb: C64, depth: usize) -> Result<(f64, f64, f64)> {
    let d = (fb / fa).arg();
    if d.abs() < PI / 4.0 || depth > 24 {
        return Ok((d, fa.norm().min(fb.norm()), fa.norm().max(fb.norm())));
    }
    let m = 0.5 * (a + b);
    let fm = det.eval(m, Accuracy::Coarse)?;
    let (d1, l1, s1) = edge_phase(det, a, fa, m, fm, depth + 1)?;
    let (d2, l2, s2) = edge_phase(det, m, fm, b, fb, depth + 1)?;
    Ok((d1 + d2, l1.min(l2), s1.max(s2)))
}

/// Number of zeros of `Delta` inside `rect`, counted with multiplicity.
/// The rectangle is inflated slightly when a zero lies too close to its edge.
pub fn global_count_check(q: &Potential, bf: &BoundaryForm, rect: Rect) -> Result<i64> {
    global_count_with(&CharDet::new(q, bf), rect)
}

pub fn global_count_with(det: &CharDet, rect: Rect) -> Result<i64> {
    if !(rect.re.0 < rect.re.1 && rect.im.0 < rect.im.1) {
        return Err(Error::InvalidInput("empty rectangle".into()));
    }
    let mut r = rect;
    for _ in 0..4 {
        if let Some(w) = boundary_winding(det, &r)? {
            return Ok(w);
        }
        let (dx, dy) = (0.03 * (r.re.1 - r.re.0), 0.03 * (r.im.1 - r.im.0));
        r = Rect {
            re: (r.re.0 - dx, r.re.1 + dx),
            im: (r.im.0 - dy, r.im.1 + dy),
        };
    }
    Err(Error::ContourThroughZero)
}

/// An eigenvalue with eigenfunction(s) and, when computed, adjoint ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Eigenpair {
    pub point: SpectralPoint,
    /// Unit-norm eigenfunction.
    pub y: VectorGrid,
    /// All eigenfunctions (two for a semisimple double eigenvalue).
    pub basis: Vec<VectorGrid>,
    /// Adjoint eigenfunction with `<y, z> = 1`.
    pub z: Option<VectorGrid>,
    pub z_basis: Vec<VectorGrid>,
    /// `<y, z>` for unit-norm `y` and `z` before rescaling.
    pub pairing: Option<C64>,
    pub near_degenerate: bool,
}

/// Eigenfunction(s) at a localized eigenvalue.
pub fn eigenfunction(q: &Potential, bf: &BoundaryForm, point: &SpectralPoint, cells: usize) -> Result<Eigenpair> {
    eigenfunction_with(&Integrator::new(q), bf, point, cells)
}

pub fn eigenfunction_with(ig: &Integrator, bf: &BoundaryForm, point: &SpectralPoint, cells: usize) -> Result<Eigenpair> {
    let opts = SolveOptions {
        cells,
        ..Default::default()
    };
    let fp = direct_pair(ig, point.lambda, &opts)?;
    let m = bf.system_matrix(&fp.at_pi());
    let null = null_space(&m, 1e-6)?;
    let basis: Vec<VectorGrid> = null
        .iter()
        .map(|g| {
            let y = GridFunction {
                grid: fp.c.grid.clone(),
                values: fp
                    .c
                    .values
                    .iter()
                    .zip(&fp.s.values)
                    .map(|(c, s)| [g[0] * c[0] + g[1] * s[0], g[0] * c[1] + g[1] * s[1]])
                    .collect(),
            };
            let nrm = y.l2_norm();
            y.scale(C64::new(1.0 / nrm, 0.0))
        })
        .collect();
    let basis = if basis.len() == 2 { orthonormalize(basis) } else { basis };
    let mut pt = point.clone();
    pt.gamma = [null[0][0], null[0][1]];
    Ok(Eigenpair {
        point: pt,
        y: basis[0].clone(),
        basis,
        z: None,
        z_basis: Vec::new(),
        pairing: None,
        near_degenerate: false,
    })
}

fn orthonormalize(mut b: Vec<VectorGrid>) -> Vec<VectorGrid> {
    let p = b[1].inner(&b[0]);
    let mut v = b[1].clone();
    for (x, y) in v.values.iter_mut().zip(&b[0].values) {
        x[0] -= p * y[0];
        x[1] -= p * y[1];
    }
    let n = v.l2_norm();
    b[1] = v.scale(C64::new(1.0 / n, 0.0));
    b
}

/// The adjoint problem `l*(z) = -B z' + Q^H z` with its boundary form.
#[derive(Clone, Debug)]
pub struct AdjointProblem {
    pub q: Potential,
    pub bf: BoundaryForm,
    /// Residual of `A J A^^H = B J B^^H`.
    pub j_relation_residual: f64,
    /// Residual of `A B A^^H = B B B^^H` (B symplectic), which the Lagrange
    /// bracket forces.
    pub bracket_relation_residual: f64,
}

pub fn adjoint_problem(q: &Potential, bf: &BoundaryForm) -> Result<AdjointProblem> {
    let cls = classify(bf, q.weight_e(PI))?;
    if !matches!(cls.kind, RegularityKind::StronglyRegular | RegularityKind::RegularNotStrong) {
        return Err(Error::Degenerate(format!("boundary form is {:?}", cls.kind)));
    }
    let abf = bf.adjoint();
    Ok(AdjointProblem {
        q: q.adjoint(),
        j_relation_residual: bf.j_relation_residual(&abf),
        bracket_relation_residual: bf.bracket_relation_residual(&abf),
        bf: abf,
    })
}

/// Fills in adjoint eigenfunctions for each pair, rescaled so `<y, z> = 1`.
pub fn adjoint_eigenfunctions(
    q: &Potential,
    bf: &BoundaryForm,
    pairs: &mut [Eigenpair],
    cells: usize,
) -> Result<AdjointProblem> {
    let adj = adjoint_problem(q, bf)?;
    let det = CharDet::new(&adj.q, &adj.bf);
    let results: Vec<Result<(Vec<VectorGrid>, SpectralPoint)>> = pairs
        .par_iter()
        .map(|p| {
            let target = p.point.lambda.conj();
            let mut pt = p.point.clone();
            pt.anchor = p.point.anchor.conj();
            pt.zeros = p.point.zeros.iter().map(|z| z.conj()).collect();
            if pt.multiplicity == 1 {
                let scale = p.point.det_scale.max(1e-300);
                pt.lambda = refine(&det, target, p.point.radius, 1e-10 * scale).unwrap_or(target);
            } else {
                pt.lambda = target;
            }
            let e = eigenfunction_with(det.integrator(), &adj.bf, &pt, cells)?;
            Ok((e.basis, e.point))
        })
        .collect();
    for (p, r) in pairs.iter_mut().zip(results) {
        let (zb, _) = r?;
        if p.basis.len() == 1 || zb.len() == 1 {
            let z = &zb[0];
            let a = p.y.inner(z);
            p.pairing = Some(a);
            p.near_degenerate = a.norm() < 1e-6;
            let zz = z.scale(ONE / a.conj());
            p.z = Some(zz.clone());
            p.z_basis = vec![zz];
        } else {
            // Biorthogonalize the two-dimensional eigenspaces.
            let g = Mat2::from_fn(|i, j| p.basis[i].inner(&zb[j]));
            let det_g = g.determinant();
            p.pairing = Some(det_g);
            p.near_degenerate = det_g.norm() < 1e-6;
            let gi = g.try_inverse().ok_or_else(|| Error::Inconsistent("singular pairing".into()))?;
            let c = gi.map(|z| z.conj());
            let zs: Vec<VectorGrid> = (0..2)
                .map(|j| GridFunction {
                    grid: zb[0].grid.clone(),
                    values: zb[0]
                        .values
                        .iter()
                        .zip(&zb[1].values)
                        .map(|(a, b)| {
                            [a[0] * c[(0, j)] + b[0] * c[(1, j)], a[1] * c[(0, j)] + b[1] * c[(1, j)]]
                        })
                        .collect(),
                })
                .collect();
            p.z = Some(zs[0].clone());
            p.z_basis = zs;
        }
    }
    Ok(adj)
}

/// `|| -B y' + Q y - lambda y ||_{L^2}` by sixth-order differences on
/// uniform stretches of the grid away from breakpoints.
pub fn ode_residual(q: &Potential, lambda: C64, y: &VectorGrid) -> f64 {
    let g = &y.grid;
    let n = g.len();
    let bps = q.breakpoints();
    let coef = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let mut sum = 0.0;
    let mut weight = 0.0;
    for k in 3..n.saturating_sub(3) {
        let h = g[k + 1] - g[k];
        let uniform = (k - 3..k + 3).all(|j| ((g[j + 1] - g[j]) - h).abs() < 1e-9 * h);
        let (a, b) = (g[k - 3], g[k + 3]);
        if !uniform || bps.iter().any(|&p| p > a && p < b) {
            continue;
        }
        let mut d = [ZERO; 2];
        for (j, cf) in coef.iter().enumerate() {
            let v = y.values[k + j - 3];
            d[0] += v[0] * (cf / h);
            d[1] += v[1] * (cf / h);
        }
        let qv = q.eval(g[k]);
        let v = y.values[k];
        // -B y' = (-y2', y1')
        let r0 = -d[1] + qv[0] * v[0] + qv[1] * v[1] - lambda * v[0];
        let r1 = d[0] + qv[2] * v[0] + qv[3] * v[1] - lambda * v[1];
        sum += (r0.norm_sqr() + r1.norm_sqr()) * h;
        weight += h;
    }
    if weight == 0.0 {
        return f64::NAN;
    }
    (sum * PI / weight).sqrt()
}
