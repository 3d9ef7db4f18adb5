//! Boundary forms `U(y) = A y(0) + B y(pi)` and the unperturbed operator
//! `-B y' = lambda y` under them.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SMatrix, Vector2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{uniform_grid, GridFunction, VectorGrid};

pub type Mat2 = Matrix2<C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// The symplectic matrix `B = [[0, 1], [-1, 0]]`.
pub fn symplectic() -> Mat2 {
    Mat2::new(ZERO, ONE, -ONE, ZERO)
}

/// Fundamental matrix `[c0 s0]` of `-B y' = lambda y` at `x`:
/// `c0 = (cos lx, -sin lx)`, `s0 = (sin lx, cos lx)`.
pub fn phi0(lambda: C64, x: f64) -> Mat2 {
    let (co, si) = ((lambda * x).cos(), (lambda * x).sin());
    Mat2::new(co, si, -si, co)
}

fn adj(m: &Mat2) -> Mat2 {
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// A pair of boundary conditions given by a 2x4 matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForm {
    pub u: [[C64; 4]; 2],
}

/// All six independent 2x2 column minors `J_ab` of the boundary matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minors {
    pub j12: C64,
    pub j13: C64,
    pub j14: C64,
    pub j23: C64,
    pub j24: C64,
    pub j34: C64,
}

impl Minors {
    /// `J_ab` for any `1 <= a, b <= 4` (antisymmetric).
    pub fn get(&self, a: usize, b: usize) -> C64 {
        if a == b {
            return ZERO;
        }
        let (lo, hi, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let v = match (lo, hi) {
            (1, 2) => self.j12,
            (1, 3) => self.j13,
            (1, 4) => self.j14,
            (2, 3) => self.j23,
            (2, 4) => self.j24,
            (3, 4) => self.j34,
            _ => panic!("minor index out of range"),
        };
        v * s
    }

    pub fn j32(&self) -> C64 {
        -self.j23
    }

    pub fn j42(&self) -> C64 {
        -self.j24
    }

    /// The regularity witnesses `J14 + J32 + i(J42 - J13)` and
    /// `J14 + J32 - i(J42 - J13)`.
    pub fn witnesses(&self) -> [C64; 2] {
        let a = self.j14 + self.j32();
        let b = self.j42() - self.j13;
        [a + I * b, a - I * b]
    }

    fn scale(&self) -> f64 {
        [self.j12, self.j13, self.j14, self.j23, self.j24, self.j34]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Regularity class of a boundary form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularityKind {
    StronglyRegular,
    RegularNotStrong,
    NondegenerateOnly,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityClass {
    pub kind: RegularityKind,
    pub witnesses: [C64; 2],
    /// `J12 + E^2 J34`.
    pub middle: C64,
    pub discriminant: C64,
    pub e: C64,
}

/// Shape of the unperturbed spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumShape {
    /// Two distinct roots: simple eigenvalues `kappa_{j(n)} + n`.
    TwoSeries,
    /// A double root: clusters `kappa0 + 2n` of multiplicity two.
    Double,
    /// Leading or constant coefficient vanishes: one series `kappa0 + 2n`.
    SingleSeries,
    Empty,
    WholePlane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnperturbedSpectrum {
    pub shape: SpectrumShape,
    pub z0: C64,
    pub z1: C64,
    pub kappa0: C64,
    pub kappa1: C64,
    pub multiplicity: usize,
}

/// An unperturbed eigenvalue with its index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub n: i64,
    pub lambda: C64,
    pub multiplicity: usize,
}

impl UnperturbedSpectrum {
    /// The anchor with index `n`. For double and single series `n` labels
    /// the cluster `kappa0 + 2n`.
    pub fn anchor(&self, n: i64) -> Option<Anchor> {
        match self.shape {
            SpectrumShape::TwoSeries => {
                let k = if n.rem_euclid(2) == 0 { self.kappa0 } else { self.kappa1 };
                Some(Anchor {
                    n,
                    lambda: k + n as f64,
                    multiplicity: 1,
                })
            }
            SpectrumShape::Double => Some(Anchor {
                n,
                lambda: self.kappa0 + 2.0 * n as f64,
                multiplicity: 2,
            }),
            SpectrumShape::SingleSeries => Some(Anchor {
                n,
                lambda: self.kappa0 + 2.0 * n as f64,
                multiplicity: 1,
            }),
            _ => None,
        }
    }

    pub fn anchors(&self, lo: i64, hi: i64) -> Vec<Anchor> {
        (lo..=hi).filter_map(|n| self.anchor(n)).collect()
    }

    /// Largest `|Im lambda|` over the anchors.
    pub fn strip_half_width(&self) -> f64 {
        match self.shape {
            SpectrumShape::TwoSeries => self.kappa0.im.abs().max(self.kappa1.im.abs()),
            SpectrumShape::Double | SpectrumShape::SingleSeries => self.kappa0.im.abs(),
            _ => 0.0,
        }
    }
}

/// `-(i/pi) Ln z` on the principal branch, shifted so `Re` lies in `(-1, 1]`.
fn base_exponent(z: C64) -> C64 {
    let mut k = -I / PI * z.ln();
    while k.re <= -1.0 {
        k.re += 2.0;
    }
    while k.re > 1.0 {
        k.re -= 2.0;
    }
    k
}

impl BoundaryForm {
    pub fn new(u: [[C64; 4]; 2]) -> Result<Self> {
        if u.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("boundary matrix has non-finite entries".into()));
        }
        let bf = Self { u };
        let m = bf.minors();
        let scale = u.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if m.scale() <= 1e-12 * scale * scale || scale == 0.0 {
            return Err(Error::Degenerate("boundary matrix must have rank 2".into()));
        }
        Ok(bf)
    }

    /// Like [`BoundaryForm::new`] but accepts rank-deficient matrices.
    pub fn new_unchecked(u: [[C64; 4]; 2]) -> Self {
        Self { u }
    }

    pub fn from_real(rows: [[f64; 4]; 2]) -> Result<Self> {
        Self::new(rows.map(|r| r.map(c)))
    }

    pub fn dirichlet() -> Self {
        Self::from_real([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]).unwrap()
    }

    pub fn dirichlet_neumann() -> Self {
        Self::from_real([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]]).unwrap()
    }

    pub fn periodic() -> Self {
        Self::from_real([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]).unwrap()
    }

    pub fn antiperiodic() -> Self {
        Self::from_real([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]).unwrap()
    }

    /// `y(0) = exp(i alpha) y(pi)`.
    pub fn quasiperiodic(alpha: f64) -> Self {
        let w = -(I * alpha).exp();
        Self::new([[ONE, ZERO, w, ZERO], [ZERO, ONE, ZERO, w]]).unwrap()
    }

    /// Named presets: `dirichlet`, `dirichlet-neumann`, `periodic`,
    /// `antiperiodic`, `quasiperiodic(alpha)`.
    pub fn preset(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "dirichlet" => Ok(Self::dirichlet()),
            "dirichlet-neumann" => Ok(Self::dirichlet_neumann()),
            "periodic" => Ok(Self::periodic()),
            "antiperiodic" => Ok(Self::antiperiodic()),
            _ => {
                if let Some(arg) = name
                    .strip_prefix("quasiperiodic(")
                    .and_then(|r| r.strip_suffix(')'))
                {
                    let a: f64 = arg.trim().parse().map_err(|_| {
                        Error::InvalidInput(format!("bad quasiperiodic parameter '{arg}'"))
                    })?;
                    return Ok(Self::quasiperiodic(a));
                }
                Err(Error::InvalidInput(format!("unknown boundary preset '{name}'")))
            }
        }
    }

    /// Block `A` (columns 1-2).
    pub fn a(&self) -> Mat2 {
        Mat2::new(self.u[0][0], self.u[0][1], self.u[1][0], self.u[1][1])
    }

    /// Block `B` (columns 3-4).
    pub fn b(&self) -> Mat2 {
        Mat2::new(self.u[0][2], self.u[0][3], self.u[1][2], self.u[1][3])
    }

    pub fn minors(&self) -> Minors {
        let j = |a: usize, b: usize| {
            self.u[0][a] * self.u[1][b] - self.u[0][b] * self.u[1][a]
        };
        Minors {
            j12: j(0, 1),
            j13: j(0, 2),
            j14: j(0, 3),
            j23: j(1, 2),
            j24: j(1, 3),
            j34: j(2, 3),
        }
    }

    /// `U(y) = A y0 + B y_pi`.
    pub fn apply(&self, y0: [C64; 2], ypi: [C64; 2]) -> [C64; 2] {
        let mut out = [ZERO; 2];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.u[r][0] * y0[0]
                + self.u[r][1] * y0[1]
                + self.u[r][2] * ypi[0]
                + self.u[r][3] * ypi[1];
        }
        out
    }

    /// `U(y)` relative to the size of the boundary values.
    pub fn residual(&self, y: &VectorGrid) -> f64 {
        let (y0, ypi) = (y.values[0], y.values[y.len() - 1]);
        let r = self.apply(y0, ypi);
        let scale = self.u.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        (r[0].norm() + r[1].norm()) / scale.max(1e-300)
    }

    /// `M(lambda) = A + B Y(pi)` for a fundamental matrix `Y(pi) = [c s]`.
    pub fn system_matrix(&self, y_pi: &Mat2) -> Mat2 {
        self.a() + self.b() * y_pi
    }

    /// The matrix with columns 3-4 multiplied by `e`.
    pub fn associated(&self, e: C64) -> BoundaryForm {
        let mut u = self.u;
        for row in u.iter_mut() {
            row[2] *= e;
            row[3] *= e;
        }
        BoundaryForm { u }
    }

    /// Coefficients `(a, b, c)` of `a z^2 + b z + c = 0` whose roots give
    /// the unperturbed spectrum of the form associated with weight `e`.
    pub fn quadratic(&self, e: C64) -> [C64; 3] {
        let m = self.minors();
        let d = m.j14 - m.j23;
        let s = m.j13 + m.j24;
        [e * (d - I * s), 2.0 * (m.j12 + e * e * m.j34), e * (d + I * s)]
    }

    /// True when both rows describe the same pair of conditions.
    pub fn equivalent(&self, other: &BoundaryForm, tol: f64) -> bool {
        let m = Matrix4::<C64>::from_fn(|r, k| {
            if r < 2 {
                self.u[r][k]
            } else {
                other.u[r - 2][k]
            }
        });
        let sv = m.svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s[2] <= tol * s[0]
    }

    /// Basis of the boundary data `(y(0), y(pi))` annihilated by `U`.
    fn kernel(&self) -> SMatrix<C64, 4, 2> {
        let u = SMatrix::<C64, 2, 4>::from_fn(|r, k| self.u[r][k]);
        let uh = u.adjoint();
        let gram = u * uh;
        let inv = gram.try_inverse().expect("rank-2 boundary matrix");
        let proj = Matrix4::<C64>::identity() - uh * inv * u;
        let mut cols: Vec<(f64, usize)> = (0..4).map(|k| (proj.column(k).norm(), k)).collect();
        cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let v1 = proj.column(cols[0].1).into_owned();
        let v1 = v1.clone() / C64::new(v1.norm(), 0.0);
        let mut best = None;
        let mut best_norm = 0.0;
        for &(_, k) in &cols[1..] {
            let w = proj.column(k).into_owned();
            let w = w.clone() - v1.clone() * (v1.dotc(&w));
            if w.norm() > best_norm {
                best_norm = w.norm();
                best = Some(w);
            }
        }
        let v2 = best.unwrap();
        let v2 = v2.clone() / C64::new(v2.norm(), 0.0);
        SMatrix::<C64, 4, 2>::from_columns(&[v1, v2])
    }

    /// Boundary form of the adjoint operator, from the Lagrange identity
    /// `<l f, g> - <f, l* g> = g(0)^H B f(0) - g(pi)^H B f(pi)`.
    pub fn adjoint(&self) -> BoundaryForm {
        let f = self.kernel();
        let b = symplectic();
        let mut d = Matrix4::<C64>::zeros();
        for r in 0..2 {
            for k in 0..2 {
                d[(r, k)] = -b[(k, r)];
                d[(r + 2, k + 2)] = b[(k, r)];
            }
        }
        let ustar = f.adjoint() * d;
        let mut u = [[ZERO; 4]; 2];
        for (r, row) in u.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = ustar[(r, k)];
            }
        }
        BoundaryForm { u }.canonical()
    }

    /// Row-reduced form with unit pivots.
    pub fn canonical(&self) -> BoundaryForm {
        let mut u = self.u;
        let mut row = 0;
        for col in 0..4 {
            if row == 2 {
                break;
            }
            let piv = (row..2).max_by(|&a, &b| u[a][col].norm().partial_cmp(&u[b][col].norm()).unwrap());
            let p = piv.unwrap();
            if u[p][col].norm() < 1e-12 {
                continue;
            }
            u.swap(row, p);
            let pv = u[row][col];
            for v in u[row].iter_mut() {
                *v /= pv;
            }
            for r in 0..2 {
                if r != row {
                    let f = u[r][col];
                    for k in 0..4 {
                        let t = u[row][k];
                        u[r][k] -= f * t;
                    }
                }
            }
            row += 1;
        }
        for v in u.iter_mut().flatten() {
            if v.norm() < 1e-15 {
                *v = ZERO;
            }
        }
        BoundaryForm { u }
    }

    /// Residual of the relation `A J A^^H = B J B^^H` between this form and
    /// `adj`, with `J = [[0, 1], [1, 0]]`, relative to the block sizes.
    pub fn j_relation_residual(&self, adj: &BoundaryForm) -> f64 {
        let j = Mat2::new(ZERO, ONE, ONE, ZERO);
        let lhs = self.a() * j * adj.a().adjoint();
        let rhs = self.b() * j * adj.b().adjoint();
        (lhs - rhs).norm() / (lhs.norm() + rhs.norm()).max(1e-300)
    }

    /// Residual of `A B A^^H = B B B^^H` (the identity implied by the
    /// Lagrange bracket with `B` the symplectic matrix).
    pub fn bracket_relation_residual(&self, adj: &BoundaryForm) -> f64 {
        let s = symplectic();
        let lhs = self.a() * s * adj.a().adjoint();
        let rhs = self.b() * s * adj.b().adjoint();
        (lhs - rhs).norm() / (lhs.norm() + rhs.norm()).max(1e-300)
    }
}

/// Classifies `bf` with the weight `e`.
pub fn classify(bf: &BoundaryForm, e: C64) -> Result<RegularityClass> {
    if e.norm() == 0.0 {
        return Err(Error::InvalidInput("the weight E must be nonzero".into()));
    }
    let m = bf.minors();
    let w = m.witnesses();
    let [qa, qb, qc] = bf.quadratic(e);
    let middle = qb / 2.0;
    let disc = qb * qb - 4.0 * qa * qc;
    let scale = m.scale().max(1e-300) * (1.0 + e.norm()).powi(2);
    let nz = |z: C64| z.norm() > 1e-12 * scale;
    let regular = nz(w[0]) && nz(w[1]);
    let coef_scale = qa.norm().max(qb.norm()).max(qc.norm());
    let kind = if regular {
        if disc.norm() < 1e-9 * coef_scale * coef_scale {
            RegularityKind::RegularNotStrong
        } else {
            RegularityKind::StronglyRegular
        }
    } else if [nz(middle), nz(w[0]), nz(w[1])].iter().filter(|&&b| b).count() >= 2 {
        RegularityKind::NondegenerateOnly
    } else {
        RegularityKind::Degenerate
    };
    Ok(RegularityClass {
        kind,
        witnesses: w,
        middle,
        discriminant: disc,
        e,
    })
}

/// Unperturbed spectrum of the form associated with weight `e`.
pub fn unperturbed_spectrum(bf: &BoundaryForm, e: C64) -> Result<UnperturbedSpectrum> {
    let cls = classify(bf, e)?;
    let [qa, qb, qc] = bf.quadratic(e);
    let scale = qa.norm().max(qb.norm()).max(qc.norm());
    let tiny = |z: C64| z.norm() <= 1e-12 * scale.max(1e-300);
    let single = |z: C64| -> UnperturbedSpectrum {
        let k = base_exponent(z);
        UnperturbedSpectrum {
            shape: SpectrumShape::SingleSeries,
            z0: z,
            z1: z,
            kappa0: k,
            kappa1: k,
            multiplicity: 1,
        }
    };
    let empty = |shape| UnperturbedSpectrum {
        shape,
        z0: ZERO,
        z1: ZERO,
        kappa0: ZERO,
        kappa1: ZERO,
        multiplicity: 0,
    };
    if scale == 0.0 {
        return Ok(empty(SpectrumShape::WholePlane));
    }
    match (tiny(qa), tiny(qc)) {
        (true, true) => return Ok(empty(SpectrumShape::Empty)),
        (true, false) => {
            if tiny(qb) {
                return Ok(empty(SpectrumShape::Empty));
            }
            return Ok(single(-qc / qb));
        }
        (false, true) => {
            if tiny(qb) {
                return Ok(empty(SpectrumShape::Empty));
            }
            return Ok(single(-qb / qa));
        }
        _ => {}
    }
    let disc = qb * qb - 4.0 * qa * qc;
    let sq = disc.sqrt();
    let (r1, r2) = if cls.kind == RegularityKind::RegularNotStrong {
        let r = -qb / (2.0 * qa);
        (r, r)
    } else {
        let q = if (qb.conj() * sq).re >= 0.0 {
            -0.5 * (qb + sq)
        } else {
            -0.5 * (qb - sq)
        };
        (q / qa, qc / q)
    };
    let (b1, b2) = (base_exponent(r1), base_exponent(r2));
    let key = |k: C64| (k.re, k.im);
    let ((z0, k0), (z1, k1b)) = if key(b1) <= key(b2) {
        ((r1, b1), (r2, b2))
    } else {
        ((r2, b2), (r1, b1))
    };
    if cls.kind == RegularityKind::RegularNotStrong {
        return Ok(UnperturbedSpectrum {
            shape: SpectrumShape::Double,
            z0,
            z1: z0,
            kappa0: k0,
            kappa1: k0,
            multiplicity: 2,
        });
    }
    let kappa1 = if k1b.re > 0.0 { k1b - 1.0 } else { k1b + 1.0 };
    Ok(UnperturbedSpectrum {
        shape: SpectrumShape::TwoSeries,
        z0,
        z1,
        kappa0: k0,
        kappa1,
        multiplicity: 1,
    })
}

/// `Delta0(lambda)` by the three-term exponential formula.
pub fn delta0(bf: &BoundaryForm, lambda: C64) -> C64 {
    delta0_weighted(bf, ONE, lambda)
}

/// The determinant of the form associated with weight `e`:
/// `J12 + e^2 J34 + e/2 [..] exp(i pi l) + e/2 [..] exp(-i pi l)`.
pub fn delta0_weighted(bf: &BoundaryForm, e: C64, lambda: C64) -> C64 {
    let [qa, qb, qc] = bf.quadratic(e);
    let z = (I * PI * lambda).exp();
    0.5 * (qb + qa * z + qc / z)
}

/// `det M0(lambda)` assembled from the closed-form fundamental matrix.
pub fn det_m0(bf: &BoundaryForm, lambda: C64) -> C64 {
    bf.system_matrix(&phi0(lambda, PI)).determinant()
}

/// Null vectors of a 2x2 matrix: one vector when the rank is 1, two when
/// the matrix vanishes to `tol`.
pub fn null_space(m: &Mat2, tol: f64) -> Result<Vec<Vector2<C64>>> {
    let svd = m.svd(false, true);
    let s = svd.singular_values;
    let vt = svd.v_t.unwrap();
    let scale = m.norm().max(1.0);
    let (smax, smin) = if s[0] >= s[1] { (s[0], s[1]) } else { (s[1], s[0]) };
    let imin = if s[0] >= s[1] { 1 } else { 0 };
    if smax <= tol * scale {
        return Ok(vec![
            Vector2::new(ONE, ZERO),
            Vector2::new(ZERO, ONE),
        ]);
    }
    if smin > tol * scale {
        return Err(Error::NotEigenvalue {
            smallest: smin,
            largest: smax,
        });
    }
    let v = vt.row(imin).adjoint();
    Ok(vec![normalize_phase(Vector2::new(v[0], v[1]))])
}

/// Scales a vector to unit norm with its largest entry real and positive.
pub fn normalize_phase(v: Vector2<C64>) -> Vector2<C64> {
    let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let ph = big / big.norm();
    let n = v.norm();
    Vector2::new(v[0] / ph / n, v[1] / ph / n)
}

/// Unperturbed eigenfunctions (and associated functions) at the anchor `n`.
#[derive(Clone, Debug)]
pub struct UnperturbedEigen {
    pub lambda: C64,
    /// Eigenfunctions, unit `L^2` norm.
    pub eigen: Vec<VectorGrid>,
    /// Associated function `y1` with `(-B d/dx - lambda) y1 = y0`, when
    /// the eigenvalue is double with a one-dimensional eigenspace.
    pub associated: Option<VectorGrid>,
    pub gamma: Vec<[C64; 2]>,
    /// Coefficient of `y0` added to make `<y0, y1> = 0`.
    pub beta: Option<C64>,
}

/// Eigenfunctions of `-B y' = lambda y, U(y) = 0` at the anchor with index `n`,
/// sampled on a uniform grid with `cells` intervals.
pub fn unperturbed_eigenfunctions(
    spec: &UnperturbedSpectrum,
    bf: &BoundaryForm,
    n: i64,
    cells: usize,
) -> Result<UnperturbedEigen> {
    let anchor = spec
        .anchor(n)
        .ok_or_else(|| Error::Precondition("no unperturbed spectrum for this form".into()))?;
    eigen_at(bf, anchor.lambda, anchor.multiplicity, cells)
}

/// Eigenfunctions of the unperturbed problem at a known eigenvalue.
pub fn eigen_at(
    bf: &BoundaryForm,
    lambda: C64,
    multiplicity: usize,
    cells: usize,
) -> Result<UnperturbedEigen> {
    let m0 = bf.system_matrix(&phi0(lambda, PI));
    let null = null_space(&m0, 1e-9).map_err(|e| {
        Error::Inconsistent(format!("no null vector at an unperturbed eigenvalue: {e}"))
    })?;
    let grid = uniform_grid(0.0, PI, cells);
    let combo = |g: &Vector2<C64>| -> VectorGrid {
        let f = GridFunction::from_fn(grid.clone(), |x| {
            let p = phi0(lambda, x);
            [p[(0, 0)] * g[0] + p[(0, 1)] * g[1], p[(1, 0)] * g[0] + p[(1, 1)] * g[1]]
        });
        let nrm = f.l2_norm();
        f.scale(c(1.0 / nrm))
    };
    if null.len() == 2 {
        let eigen = vec![combo(&null[0]), combo(&null[1])];
        return Ok(UnperturbedEigen {
            lambda,
            eigen,
            associated: None,
            gamma: null.iter().map(|g| [g[0], g[1]]).collect(),
            beta: None,
        });
    }
    let g = null[0];
    let y0 = combo(&g);
    let gamma = vec![[g[0], g[1]]];
    if multiplicity < 2 {
        return Ok(UnperturbedEigen {
            lambda,
            eigen: vec![y0],
            associated: None,
            gamma,
            beta: None,
        });
    }
    // Jordan chain: y1 = x (g2 c0 - g1 s0) + a c0 + b s0 solves
    // (-B d/dx - lambda) y1 = g1 c0 + g2 s0; (a, b) from the boundary rows.
    let norm0 = {
        let raw = GridFunction::from_fn(grid.clone(), |x| {
            let p = phi0(lambda, x);
            [p[(0, 0)] * g[0] + p[(0, 1)] * g[1], p[(1, 0)] * g[0] + p[(1, 1)] * g[1]]
        });
        raw.l2_norm()
    };
    let p = phi0(lambda, PI);
    let part_pi = Vector2::new(
        PI * (g[1] * p[(0, 0)] - g[0] * p[(0, 1)]),
        PI * (g[1] * p[(1, 0)] - g[0] * p[(1, 1)]),
    );
    let rhs = -(bf.b() * part_pi);
    let svd = m0.svd(true, true);
    let ab = svd
        .solve(&rhs, 1e-9 * m0.norm().max(1.0))
        .map_err(|e| Error::Inconsistent(e.to_string()))?;
    let check = m0 * ab - rhs;
    if check.norm() > 1e-8 * (1.0 + rhs.norm()) {
        return Ok(UnperturbedEigen {
            lambda,
            eigen: vec![y0],
            associated: None,
            gamma,
            beta: None,
        });
    }
    let y1_raw = GridFunction::from_fn(grid.clone(), |x| {
        let p = phi0(lambda, x);
        let cx = [p[(0, 0)], p[(1, 0)]];
        let sx = [p[(0, 1)], p[(1, 1)]];
        let mut v = [ZERO; 2];
        for k in 0..2 {
            v[k] = x * (g[1] * cx[k] - g[0] * sx[k]) + ab[0] * cx[k] + ab[1] * sx[k];
        }
        [v[0] / norm0, v[1] / norm0]
    });
    let beta = -y1_raw.inner(&y0);
    let y1 = GridFunction {
        grid: y1_raw.grid.clone(),
        values: y1_raw
            .values
            .iter()
            .zip(&y0.values)
            .map(|(a, b)| [a[0] + beta * b[0], a[1] + beta * b[1]])
            .collect(),
    };
    Ok(UnperturbedEigen {
        lambda,
        eigen: vec![y0],
        associated: Some(y1),
        gamma,
        beta: Some(beta),
    })
}

/// Green's matrix `G0(x, t, lambda)` of `-B y' - lambda y = f, U(y) = 0`.
///
/// For `t < x`: `[J12 Phi(x - t) + Phi(x - pi) adj(B) A Phi(-t)] B / Delta0`;
/// for `t > x`: `-[J34 Phi(x - t) + Phi(x) adj(A) B Phi(pi - t)] B / Delta0`,
/// with `Phi = [c0 s0]`. Every term stays bounded for large `|Im lambda|`.
pub fn green0_kernel(bf: &BoundaryForm, lambda: C64, x: f64, t: f64) -> Mat2 {
    let m = bf.minors();
    let d0 = delta0(bf, lambda);
    let (a, b) = (bf.a(), bf.b());
    let s = symplectic();
    let g = if t < x {
        phi0(lambda, x - t) * m.j12 + phi0(lambda, x - PI) * adj(&b) * a * phi0(lambda, -t)
    } else {
        -(phi0(lambda, x - t) * m.j34 + phi0(lambda, x) * adj(&a) * b * phi0(lambda, PI - t))
    };
    g * s / d0
}

fn near_eigenvalue_check(bf: &BoundaryForm, lambda: C64) -> Result<C64> {
    let d0 = delta0(bf, lambda);
    let m = bf.minors();
    let w = m.witnesses();
    let scale = (m.j12.norm() + m.j34.norm() + w[0].norm() + w[1].norm())
        * (PI * lambda.im.abs()).exp();
    if d0.norm() < 1e-10 * scale {
        return Err(Error::NearEigenvalue(d0.norm()));
    }
    Ok(d0)
}

fn mat_vec(m: &Mat2, v: [C64; 2]) -> [C64; 2] {
    [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]]
}

fn add(a: [C64; 2], b: [C64; 2]) -> [C64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

/// Applies the resolvent `R0(lambda) = (L0 - lambda)^{-1}` to `f`.
///
/// Uses cumulative integrals of the separable pieces of the kernel so the
/// cost is linear in the grid size; the result lives on `f`'s grid.
pub fn green0_apply(bf: &BoundaryForm, lambda: C64, f: &VectorGrid) -> Result<VectorGrid> {
    let d0 = near_eigenvalue_check(bf, lambda)?;
    let m = bf.minors();
    let (a, b) = (bf.a(), bf.b());
    let s = symplectic();
    let nmat = adj(&b) * a;
    let kmat = adj(&a) * b;
    let (u, w) = crate::quadrature::gauss_legendre(8);
    let grid = &f.grid;
    let n = grid.len();
    let cf = |t: f64| mat_vec(&s, f.eval(t));

    // Per-cell integrals of kernel pieces against C f.
    let cell_int = |x0: f64, x1: f64, kern: &dyn Fn(f64) -> Mat2| -> [C64; 2] {
        let (mid, r) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
        let mut acc = [ZERO; 2];
        for k in 0..8 {
            let t = mid + r * u[k];
            let v = mat_vec(&kern(t), cf(t));
            acc[0] += v[0] * (w[k] * r);
            acc[1] += v[1] * (w[k] * r);
        }
        acc
    };

    let mut vfwd = vec![[ZERO; 2]; n];
    let mut wfwd = vec![[ZERO; 2]; n];
    for k in 0..n - 1 {
        let (x0, x1) = (grid[k], grid[k + 1]);
        let step = phi0(lambda, x1 - x0);
        let inc = cell_int(x0, x1, &|t| phi0(lambda, x1 - t));
        vfwd[k + 1] = add(mat_vec(&step, vfwd[k]), inc);
        wfwd[k + 1] = add(wfwd[k], cell_int(x0, x1, &|t| phi0(lambda, -t)));
    }
    let mut vbwd = vec![[ZERO; 2]; n];
    let mut zbwd = vec![[ZERO; 2]; n];
    for k in (0..n - 1).rev() {
        let (x0, x1) = (grid[k], grid[k + 1]);
        let step = phi0(lambda, x0 - x1);
        let inc = cell_int(x0, x1, &|t| phi0(lambda, x0 - t));
        vbwd[k] = add(mat_vec(&step, vbwd[k + 1]), inc);
        zbwd[k] = add(zbwd[k + 1], cell_int(x0, x1, &|t| phi0(lambda, PI - t)));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let x = grid[k];
        let lower = add(
            [vfwd[k][0] * m.j12, vfwd[k][1] * m.j12],
            mat_vec(&(phi0(lambda, x - PI) * nmat), wfwd[k]),
        );
        let upper = add(
            [vbwd[k][0] * m.j34, vbwd[k][1] * m.j34],
            mat_vec(&(phi0(lambda, x) * kmat), zbwd[k]),
        );
        out.push([(lower[0] - upper[0]) / d0, (lower[1] - upper[1]) / d0]);
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values: out,
    })
}

/// Probe inputs for operator-norm estimates.
fn norm_probes(seed: u64, count: usize, cells: usize) -> Vec<VectorGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = uniform_grid(0.0, PI, cells);
    let mut probes = Vec::with_capacity(count);
    // Low-order trigonometric vectors including the constants.
    probes.push(GridFunction::from_fn(grid.clone(), |_| [ZERO, ONE]));
    probes.push(GridFunction::from_fn(grid.clone(), |_| [ONE, ZERO]));
    while probes.len() < count / 2 {
        let deg = rng.gen_range(1..=6);
        let coefs: Vec<[C64; 4]> = (0..=deg)
            .map(|_| {
                [0; 4].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        probes.push(GridFunction::from_fn(grid.clone(), |x| {
            let mut v = [ZERO; 2];
            for (k, cf) in coefs.iter().enumerate() {
                let (co, si) = ((k as f64 * x).cos(), (k as f64 * x).sin());
                v[0] += cf[0] * co + cf[1] * si;
                v[1] += cf[2] * co + cf[3] * si;
            }
            v
        }));
    }
    let widths = [0.004, 0.008, 0.016, 0.05];
    let mut k = 0;
    while probes.len() < count {
        let wd = widths[k % widths.len()];
        k += 1;
        let center = rng.gen_range(wd..PI - wd);
        let dir = [
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        ];
        probes.push(GridFunction::from_fn(grid.clone(), |x| {
            let d = (x - center) / wd;
            if d.abs() >= 0.5 {
                [ZERO; 2]
            } else {
                let a = (PI * d).cos().powi(2);
                [dir[0] * a, dir[1] * a]
            }
        }));
    }
    probes
}

/// Estimates `|R0(i tau)|_{L^p -> L^q}` for each `tau` by maximizing over a
/// fixed family of 64 probes.
pub fn resolvent0_norm_scan(
    bf: &BoundaryForm,
    taus: &[f64],
    p: f64,
    q: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(1.0..=2.0).contains(&p) || q < 2.0 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= p <= 2 <= q, got p = {p}, q = {q}"
        )));
    }
    let spec = unperturbed_spectrum(bf, ONE)?;
    let strip = spec.strip_half_width();
    if let Some(t) = taus.iter().find(|t| t.abs() <= strip + 1e-9) {
        return Err(Error::InvalidInput(format!(
            "tau = {t} lies inside the spectral strip |Im lambda| <= {strip}"
        )));
    }
    let probes = norm_probes(seed, 64, 8192);
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let lambda = C64::new(0.0, tau);
        let mut best: f64 = 0.0;
        for f in &probes {
            let nf = f.lp_norm(p);
            if nf == 0.0 {
                continue;
            }
            let r = green0_apply(bf, lambda, f)?;
            best = best.max(r.lp_norm(q) / nf);
        }
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_lambda(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-20.0..20.0), rng.gen_range(-2.0..2.0))
    }

    fn rand_form(rng: &mut ChaCha8Rng) -> BoundaryForm {
        let mut u = [[ZERO; 4]; 2];
        for v in u.iter_mut().flatten() {
            *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        BoundaryForm::new(u).unwrap()
    }

    #[test]
    fn minors_examples() {
        let m = BoundaryForm::dirichlet().minors();
        assert_eq!(m.j13, ONE);
        for z in [m.j12, m.j14, m.j23, m.j24, m.j34] {
            assert_eq!(z, ZERO);
        }
        let m = BoundaryForm::periodic().minors();
        assert_eq!((m.j12, m.j34, m.j14, m.j23), (ONE, ONE, -ONE, ONE));
        assert_eq!((m.j13, m.j24), (ZERO, ZERO));
        let z = BoundaryForm::new_unchecked([[ONE, ONE, ONE, ONE], [ZERO; 4]]).minors();
        assert_eq!(z.scale(), 0.0);
        assert_eq!(m.get(3, 2), -m.j23);
    }

    #[test]
    fn classify_examples() {
        let d = classify(&BoundaryForm::dirichlet(), ONE).unwrap();
        assert_eq!(d.kind, RegularityKind::StronglyRegular);
        assert_eq!(d.witnesses, [-I, I]);
        let p = classify(&BoundaryForm::periodic(), ONE).unwrap();
        assert_eq!(p.kind, RegularityKind::RegularNotStrong);
        assert_eq!(p.witnesses, [c(-2.0), c(-2.0)]);
        let beta = 0.7;
        let r = BoundaryForm::from_real([[1.0, 1.0, -1.0, -1.0], [beta, -beta, beta, -beta]]).unwrap();
        assert_eq!(classify(&r, ONE).unwrap().kind, RegularityKind::Degenerate);
        assert!(classify(&r, ZERO).is_err());
        let e = c(1.3);
        assert_eq!(
            classify(&BoundaryForm::periodic(), e).unwrap().kind,
            RegularityKind::StronglyRegular
        );
    }

    #[test]
    fn associated_examples() {
        let d = BoundaryForm::dirichlet();
        assert_eq!(d.associated(ONE), d);
        assert_eq!(
            d.associated(c(2.0)).u,
            BoundaryForm::from_real([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0]]).unwrap().u
        );
        let e = std::f64::consts::E;
        assert_eq!(
            BoundaryForm::periodic().associated(c(e)).u,
            BoundaryForm::from_real([[1.0, 0.0, -e, 0.0], [0.0, 1.0, 0.0, -e]]).unwrap().u
        );
    }

    #[test]
    fn spectrum_examples() {
        let s = unperturbed_spectrum(&BoundaryForm::dirichlet(), ONE).unwrap();
        assert_eq!(s.shape, SpectrumShape::TwoSeries);
        for n in -6..=6 {
            assert!((s.anchor(n).unwrap().lambda - c(n as f64)).norm() < 1e-14);
        }
        let s = unperturbed_spectrum(&BoundaryForm::periodic(), ONE).unwrap();
        assert_eq!(s.shape, SpectrumShape::Double);
        assert_eq!(s.multiplicity, 2);
        for n in -3..=3 {
            let a = s.anchor(n).unwrap();
            assert!((a.lambda - c(2.0 * n as f64)).norm() < 1e-7);
            assert_eq!(a.multiplicity, 2);
        }
        let s = unperturbed_spectrum(&BoundaryForm::dirichlet_neumann(), ONE).unwrap();
        for n in -5..=5 {
            let l = s.anchor(n).unwrap().lambda;
            assert!((l - c(n as f64 - 0.5)).norm() < 1e-14, "{n}: {l}");
        }
    }

    #[test]
    fn branch_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let bf = rand_form(&mut rng);
            let s = unperturbed_spectrum(&bf, ONE).unwrap();
            if s.shape != SpectrumShape::TwoSeries {
                continue;
            }
            assert!(((I * PI * s.kappa0).exp() - s.z0).norm() < 1e-12 * s.z0.norm().max(1.0));
            assert!(((I * PI * (s.kappa1 - 1.0)).exp() - s.z1).norm() < 1e-12 * s.z1.norm().max(1.0));
            assert!(s.kappa0.re > -1.0 && s.kappa0.re <= 1.0);
            assert!(s.kappa1.re > -1.0 && s.kappa1.re <= 1.0);
            for n in -4..=4 {
                let l = s.anchor(n).unwrap().lambda;
                assert!(delta0(&bf, l).norm() < 1e-10 * (1.0 + (PI * l.im.abs()).exp()));
            }
        }
    }

    #[test]
    fn delta0_matches_det_m0() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let bf = rand_form(&mut rng);
            let l = rand_lambda(&mut rng);
            let (a, b) = (delta0(&bf, l), det_m0(&bf, l));
            assert!((a - b).norm() <= 1e-10 * a.norm().max(b.norm()).max(1.0));
        }
        let l = C64::new(0.3, 0.2);
        assert!((delta0(&BoundaryForm::dirichlet(), l) - (PI * l).sin()).norm() < 1e-14);
        assert!((delta0(&BoundaryForm::periodic(), l) - (2.0 - 2.0 * (PI * l).cos())).norm() < 1e-14);
    }

    #[test]
    fn weighted_delta_is_delta_of_associated_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let bf = rand_form(&mut rng);
            let e = C64::new(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
            let l = rand_lambda(&mut rng);
            let (a, b) = (delta0_weighted(&bf, e, l), delta0(&bf.associated(e), l));
            assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
        }
    }

    fn numeric_derivative(f: impl Fn(C64) -> C64, l: C64, k: usize) -> C64 {
        let h = 1e-3;
        match k {
            1 => (f(l + h) - f(l - h)) / (2.0 * h),
            _ => (f(l + h) - 2.0 * f(l) + f(l - h)) / (h * h),
        }
    }

    #[test]
    fn anchors_have_correct_order_of_vanishing() {
        let bf = BoundaryForm::dirichlet();
        let s = unperturbed_spectrum(&bf, ONE).unwrap();
        for a in s.anchors(-3, 3) {
            assert!(numeric_derivative(|l| delta0(&bf, l), a.lambda, 1).norm() > 1.0);
        }
        let bf = BoundaryForm::periodic();
        let s = unperturbed_spectrum(&bf, ONE).unwrap();
        for a in s.anchors(-3, 3) {
            assert!(delta0(&bf, a.lambda).norm() < 1e-12);
            assert!(numeric_derivative(|l| delta0(&bf, l), a.lambda, 1).norm() < 1e-5);
            assert!(numeric_derivative(|l| delta0(&bf, l), a.lambda, 2).norm() > 1.0);
        }
    }

    fn ode_residual(y: &VectorGrid, lambda: C64, forcing: Option<&VectorGrid>) -> f64 {
        // (-B y')_1 = -y2', (-B y')_2 = y1'.
        let g = &y.grid;
        let mut worst: f64 = 0.0;
        for k in 1..g.len() - 1 {
            let h = g[k + 1] - g[k - 1];
            let d = [
                (y.values[k + 1][0] - y.values[k - 1][0]) / h,
                (y.values[k + 1][1] - y.values[k - 1][1]) / h,
            ];
            let f = forcing.map(|f| f.values[k]).unwrap_or([ZERO; 2]);
            let r0 = -d[1] - lambda * y.values[k][0] - f[0];
            let r1 = d[0] - lambda * y.values[k][1] - f[1];
            worst = worst.max(r0.norm().max(r1.norm()));
        }
        worst
    }

    #[test]
    fn eigenfunction_examples() {
        let bf = BoundaryForm::dirichlet();
        let s = unperturbed_spectrum(&bf, ONE).unwrap();
        let e = unperturbed_eigenfunctions(&s, &bf, 3, 2048).unwrap();
        assert_eq!(e.eigen.len(), 1);
        let y = &e.eigen[0];
        let expect = GridFunction::from_fn(y.grid.clone(), |x| {
            [c((3.0 * x).sin() / PI.sqrt()), c((3.0 * x).cos() / PI.sqrt())]
        });
        let ov = y.inner(&expect);
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        assert!(bf.residual(y) < 1e-10);
        assert!(ode_residual(y, c(3.0), None) < 1e-4);

        let bf = BoundaryForm::periodic();
        let s = unperturbed_spectrum(&bf, ONE).unwrap();
        let e = unperturbed_eigenfunctions(&s, &bf, 2, 512).unwrap();
        assert_eq!(e.eigen.len(), 2);
        assert!(e.associated.is_none());
    }

    #[test]
    fn jordan_chain() {
        let alpha = 2.0;
        let bf = BoundaryForm::from_real([[1.0, 0.0, -alpha, 0.0], [0.0, 1.0, 0.0, -1.0]]).unwrap();
        let s = unperturbed_spectrum(&bf, ONE).unwrap();
        assert_eq!(s.shape, SpectrumShape::Double);
        let mut norms = Vec::new();
        for n in -8..=8 {
            let e = unperturbed_eigenfunctions(&s, &bf, n, 4096).unwrap();
            assert_eq!(e.eigen.len(), 1);
            let y0 = &e.eigen[0];
            let y1 = e.associated.as_ref().expect("associated function");
            let lam = s.anchor(n).unwrap().lambda;
            // eigenfunction is s0 up to a factor
            assert!(e.gamma[0][0].norm() < 1e-9);
            assert!(bf.residual(y0) < 1e-10 && bf.residual(y1) < 1e-10);
            let tol = 1e-5 * (1.0 + lam.norm()).powi(3);
            assert!(ode_residual(y1, lam, Some(y0)) < tol);
            assert!(y0.inner(y1).norm() < 1e-9);
            norms.push((y1.l2_norm(), e.beta.unwrap().norm()));
        }
        for w in norms.windows(2) {
            assert!((w[0].0 - w[1].0).abs() < 1e-8);
            assert!((w[0].1 - w[1].1).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_two_forms_agree() {
        // Direct (unstable) formula for moderate lambda.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let bf = rand_form(&mut rng);
            let l = C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
            let (x, t) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..PI));
            let m0 = bf.system_matrix(&phi0(l, PI));
            let inv = m0.try_inverse().unwrap();
            let s = symplectic();
            let direct = if t < x {
                phi0(l, x) * inv * bf.a() * phi0(l, -t) * s
            } else {
                -(phi0(l, x) * inv * bf.b() * phi0(l, PI - t) * s)
            };
            let k = green0_kernel(&bf, l, x, t);
            assert!((k - direct).norm() < 1e-10 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn resolvent_residual_and_boundary() {
        let bf = BoundaryForm::dirichlet();
        let l = C64::new(0.37, 0.2);
        let f = GridFunction::from_fn(uniform_grid(0.0, PI, 4096), |x| {
            [c(x.cos() + 0.3), C64::new(0.0, x * x)]
        });
        let y = green0_apply(&bf, l, &f).unwrap();
        assert!(bf.residual(&y) < 1e-8);
        let mut res = Vec::new();
        let g = &y.grid;
        for k in 1..g.len() - 1 {
            let h = g[k + 1] - g[k - 1];
            let d0 = (y.values[k + 1][0] - y.values[k - 1][0]) / h;
            let d1 = (y.values[k + 1][1] - y.values[k - 1][1]) / h;
            res.push([
                -d1 - l * y.values[k][0] - f.values[k][0],
                d0 - l * y.values[k][1] - f.values[k][1],
            ]);
        }
        let r = GridFunction::from_fn(g[1..g.len() - 1].to_vec(), |x| {
            let k = ((x / PI) * 4096.0).round() as usize - 1;
            res[k]
        });
        assert!(r.l2_norm() < 1e-6, "{}", r.l2_norm());
    }

    #[test]
    fn resolvent_matches_kernel_quadrature() {
        let bf = BoundaryForm::quasiperiodic(0.7);
        let l = C64::new(1.3, -0.4);
        let f = GridFunction::from_fn(uniform_grid(0.0, PI, 1024), |x| [c(x.sin()), c(1.0)]);
        let y = green0_apply(&bf, l, &f).unwrap();
        for &x in &[0.4, 1.5, 2.9] {
            let k = (x / PI * 1024.0).round() as usize;
            let got = y.eval(y.grid[k]);
            let xg = y.grid[k];
            let mut acc2 = [ZERO; 2];
            for (lo, hi) in [(0.0, xg), (xg, PI)] {
                for comp in 0..2 {
                    acc2[comp] += crate::quadrature::integrate(
                        |t| {
                            let g = green0_kernel(&bf, l, xg, t);
                            g[(comp, 0)] * t.sin() + g[(comp, 1)]
                        },
                        lo,
                        hi,
                        1e-13,
                    );
                }
            }
            // linear interpolation of f: O(h^2) with h = pi/1024
            assert!((got[0] - acc2[0]).norm() < 2e-6 && (got[1] - acc2[1]).norm() < 2e-6);
        }
    }

    #[test]
    fn resolvent_stable_far_from_axis() {
        let bf = BoundaryForm::dirichlet();
        let f = GridFunction::from_fn(uniform_grid(0.0, PI, 4096), |_| [ZERO, ONE]);
        let y = green0_apply(&bf, C64::new(0.0, 60.0), &f).unwrap();
        // eigenfunction (0, 1) of eigenvalue 0
        let expect = 1.0 / 60.0;
        for v in &y.values {
            assert!((v[1] - C64::new(0.0, expect)).norm() < 1e-10);
            assert!(v[0].norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_forms() {
        let d = BoundaryForm::dirichlet();
        assert!(d.adjoint().equivalent(&d, 1e-10));
        let p = BoundaryForm::periodic();
        assert!(p.adjoint().equivalent(&p, 1e-10));
        let q = BoundaryForm::quasiperiodic(0.4);
        assert!(q.adjoint().equivalent(&q, 1e-10));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let bf = rand_form(&mut rng);
            let a = bf.adjoint();
            assert!(bf.bracket_relation_residual(&a) < 1e-12);
            assert!(a.adjoint().equivalent(&bf, 1e-9));
        }
    }
}
