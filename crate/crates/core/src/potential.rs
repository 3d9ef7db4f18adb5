//! The matrix potential `Q`, its norms, the weight `E(x)` and gauge
//! rotations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridFunction, ScalarGrid};
use crate::quadrature::{graded_edges, integrate};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// One scalar entry of the potential.
#[derive(Clone)]
pub enum ScalarFn {
    Zero,
    Constant(C64),
    Expr(Arc<Expr>),
    /// Samples interpolated piecewise linearly.
    Grid(Arc<ScalarGrid>),
    /// Pieces on consecutive intervals; each piece may itself be any `ScalarFn`.
    Piecewise(Arc<Vec<Piece>>),
    Closure(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
}

#[derive(Clone)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub f: ScalarFn,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Zero => write!(f, "0"),
            ScalarFn::Constant(c) => write!(f, "{c}"),
            ScalarFn::Expr(e) => write!(f, "{}", e.source()),
            ScalarFn::Grid(g) => write!(f, "grid[{}]", g.len()),
            ScalarFn::Piecewise(p) => write!(f, "piecewise[{}]", p.len()),
            ScalarFn::Closure(_) => write!(f, "closure"),
        }
    }
}

impl ScalarFn {
    pub fn expr(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.is_zero() {
            return Ok(ScalarFn::Zero);
        }
        Ok(ScalarFn::Expr(Arc::new(e)))
    }

    pub fn closure(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        ScalarFn::Closure(Arc::new(f))
    }

    pub fn grid(g: ScalarGrid) -> Result<Self> {
        if (g.grid[0]).abs() > 1e-12 || (g.grid[g.len() - 1] - PI).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "grid potential must be sampled from 0 to pi".into(),
            ));
        }
        Ok(ScalarFn::Grid(Arc::new(g)))
    }

    /// Pieces must tile `[0, pi]` in order.
    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidInput("piecewise function has no pieces".into()));
        }
        let mut at = 0.0;
        for p in &pieces {
            if (p.start - at).abs() > 1e-12 || !(p.end > p.start) {
                return Err(Error::InvalidInput(format!(
                    "pieces must tile [0, pi] in order; gap or overlap at {at}"
                )));
            }
            at = p.end;
        }
        if (at - PI).abs() > 1e-12 {
            return Err(Error::InvalidInput("pieces must end at pi".into()));
        }
        Ok(ScalarFn::Piecewise(Arc::new(pieces)))
    }

    pub fn eval(&self, x: f64) -> C64 {
        match self {
            ScalarFn::Zero => ZERO,
            ScalarFn::Constant(c) => *c,
            ScalarFn::Expr(e) => e.eval(x),
            ScalarFn::Grid(g) => g.eval(x),
            ScalarFn::Piecewise(pieces) => {
                let k = pieces.partition_point(|p| p.end <= x).min(pieces.len() - 1);
                pieces[k].f.eval(x)
            }
            ScalarFn::Closure(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Zero => true,
            ScalarFn::Constant(c) => *c == ZERO,
            ScalarFn::Piecewise(p) => p.iter().all(|p| p.f.is_zero()),
            _ => false,
        }
    }

    /// Points where the function may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarFn::Grid(g) => g.grid.clone(),
            ScalarFn::Expr(e) => e.kinks().to_vec(),
            ScalarFn::Piecewise(p) => {
                let mut v = Vec::new();
                for piece in p.iter() {
                    v.push(piece.start);
                    v.extend(piece.f.breakpoints());
                }
                v
            }
            _ => Vec::new(),
        }
    }
}

/// The 2x2 potential `Q = [[q1, q2], [q3, q4]]` on `[0, pi]`.
#[derive(Clone, Debug)]
pub struct Potential {
    q: [ScalarFn; 4],
    p_class: f64,
    r_bound: f64,
    singular: Vec<f64>,
}

/// Prefactor convention for the weight `E(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightPrefactor {
    /// `E(x) = exp(1/2 int_0^x (q2 - q3))`.
    #[default]
    Unit,
    /// The same exponential multiplied by 1/2, kept for comparison only.
    Half,
}

impl Potential {
    /// Builds a potential and sets `R` to `max(|q1|_p, |q2 + q3|_p)`.
    pub fn new(q: [ScalarFn; 4], p_class: f64) -> Result<Self> {
        Self::with_singular(q, p_class, Vec::new())
    }

    /// Like [`Potential::new`] with integrable singularities at the given points.
    pub fn with_singular(q: [ScalarFn; 4], p_class: f64, singular: Vec<f64>) -> Result<Self> {
        if !(p_class >= 1.0) {
            return Err(Error::InvalidInput(format!("p_class must be >= 1, got {p_class}")));
        }
        if singular.iter().any(|&s| !(0.0..=PI).contains(&s)) {
            return Err(Error::InvalidInput("singular points must lie in [0, pi]".into()));
        }
        let mut pot = Self {
            q,
            p_class,
            r_bound: 0.0,
            singular,
        };
        let (a, b) = pot.ball_norms()?;
        pot.r_bound = a.max(b);
        Ok(pot)
    }

    pub fn from_expressions(src: [&str; 4], p_class: f64) -> Result<Self> {
        let q = [
            ScalarFn::expr(src[0])?,
            ScalarFn::expr(src[1])?,
            ScalarFn::expr(src[2])?,
            ScalarFn::expr(src[3])?,
        ];
        Self::new(q, p_class)
    }

    pub fn zero() -> Self {
        Self {
            q: [ScalarFn::Zero, ScalarFn::Zero, ScalarFn::Zero, ScalarFn::Zero],
            p_class: 2.0,
            r_bound: 0.0,
            singular: Vec::new(),
        }
    }

    /// Replaces the automatically computed ball radius, checking that the
    /// numerical norms do not exceed it.
    pub fn with_r_bound(mut self, r: f64) -> Result<Self> {
        let (a, b) = self.ball_norms()?;
        if a > r * (1.0 + 1e-6) || b > r * (1.0 + 1e-6) {
            return Err(Error::InvalidInput(format!(
                "R = {r} is smaller than the norms |q1|_p = {a:.6e}, |q2+q3|_p = {b:.6e}"
            )));
        }
        self.r_bound = r;
        Ok(self)
    }

    pub fn components(&self) -> &[ScalarFn; 4] {
        &self.q
    }

    pub fn p_class(&self) -> f64 {
        self.p_class
    }

    /// Conjugate exponent `p'` (infinite for `p = 1`).
    pub fn p_conjugate(&self) -> f64 {
        conjugate_exponent(self.p_class)
    }

    pub fn r_bound(&self) -> f64 {
        self.r_bound
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    #[inline]
    pub fn eval(&self, x: f64) -> [C64; 4] {
        [
            self.q[0].eval(x),
            self.q[1].eval(x),
            self.q[2].eval(x),
            self.q[3].eval(x),
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|q| q.is_zero())
    }

    /// Sorted union of component breakpoints inside `(0, pi)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .q
            .iter()
            .flat_map(|q| q.breakpoints())
            .chain(self.singular.iter().copied())
            .filter(|&x| x > 0.0 && x < PI)
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        v
    }

    /// Cell edges suitable for integrating functions of this potential.
    pub fn cell_edges(&self, cells: usize) -> Vec<f64> {
        graded_edges(cells, &self.breakpoints(), &self.singular)
    }

    /// The adjoint potential `conj(Q)^T`.
    pub fn adjoint(&self) -> Self {
        let conj = |f: &ScalarFn| -> ScalarFn {
            if f.is_zero() {
                return ScalarFn::Zero;
            }
            let bp = f.breakpoints();
            let f = f.clone();
            attach_breakpoints(ScalarFn::Closure(Arc::new(move |x| f.eval(x).conj())), &bp)
        };
        Self {
            q: [conj(&self.q[0]), conj(&self.q[2]), conj(&self.q[1]), conj(&self.q[3])],
            p_class: self.p_class,
            r_bound: self.r_bound,
            singular: self.singular.clone(),
        }
    }

    /// The potential `t Q`.
    pub fn scaled(&self, t: C64) -> Self {
        let scale = |f: &ScalarFn| -> ScalarFn {
            if f.is_zero() {
                return ScalarFn::Zero;
            }
            let bp = f.breakpoints();
            let f = f.clone();
            attach_breakpoints(ScalarFn::Closure(Arc::new(move |x| f.eval(x) * t)), &bp)
        };
        Self {
            q: [
                scale(&self.q[0]),
                scale(&self.q[1]),
                scale(&self.q[2]),
                scale(&self.q[3]),
            ],
            p_class: self.p_class,
            r_bound: self.r_bound * t.norm(),
            singular: self.singular.clone(),
        }
    }

    /// `(|q1|_p, |q2 + q3|_p)`.
    pub fn ball_norms(&self) -> Result<(f64, f64)> {
        let bp = self.breakpoints();
        let q1 = self.q[0].clone();
        let (q2, q3) = (self.q[1].clone(), self.q[2].clone());
        let a = lp_norm_with(|x| q1.eval(x), self.p_class, &bp, &self.singular)?;
        let b = lp_norm_with(|x| q2.eval(x) + q3.eval(x), self.p_class, &bp, &self.singular)?;
        Ok((a, b))
    }

    /// `L^p` norm of the entry `j` (0-based).
    pub fn component_norm(&self, j: usize, p: f64) -> Result<f64> {
        let f = self.q[j].clone();
        lp_norm_with(|x| f.eval(x), p, &self.breakpoints(), &self.singular)
    }

    /// Sum of the `L^1` norms of the four entries.
    pub fn l1_norm(&self) -> Result<f64> {
        (0..4).map(|j| self.component_norm(j, 1.0)).sum()
    }

    /// `L^1` distance between two potentials (sum over entries).
    pub fn l1_distance(&self, other: &Potential) -> Result<f64> {
        let mut bp = self.breakpoints();
        bp.extend(other.breakpoints());
        bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut sing = self.singular.clone();
        sing.extend(other.singular.iter().copied());
        let mut total = 0.0;
        for j in 0..4 {
            let (a, b) = (self.q[j].clone(), other.q[j].clone());
            total += lp_norm_with(|x| a.eval(x) - b.eval(x), 1.0, &bp, &sing)?;
        }
        Ok(total)
    }

    /// `|q1 + q4|_{L^1}`.
    pub fn trace_l1(&self) -> Result<f64> {
        let (a, b) = (self.q[0].clone(), self.q[3].clone());
        lp_norm_with(|x| a.eval(x) + b.eval(x), 1.0, &self.breakpoints(), &self.singular)
    }

    /// True when `q4 = -q1` holds to `tol` in `L^1`.
    pub fn is_trace_normalized(&self, tol: f64) -> bool {
        if self.q[0].is_zero() && self.q[3].is_zero() {
            return true;
        }
        self.trace_l1().map(|t| t <= tol).unwrap_or(false)
    }

    /// `int_0^x g(t) dt` for `g` built from the entries.
    fn antiderivative(&self, x: f64, g: impl Fn([C64; 4]) -> C64) -> C64 {
        if x <= 0.0 {
            return ZERO;
        }
        let mut cuts: Vec<f64> = vec![0.0];
        cuts.extend(self.breakpoints().into_iter().filter(|&b| b < x));
        cuts.push(x);
        cuts.windows(2)
            .map(|w| integrate(|t| g(self.eval(t)), w[0], w[1], 1e-13))
            .sum()
    }

    /// The weight `E(x) = exp(1/2 int_0^x (q2 - q3))`.
    pub fn weight_e(&self, x: f64) -> C64 {
        self.weight_e_with(x, WeightPrefactor::Unit)
    }

    pub fn weight_e_with(&self, x: f64, pref: WeightPrefactor) -> C64 {
        let base = if self.q[1].is_zero() && self.q[2].is_zero() || x <= 0.0 {
            C64::new(1.0, 0.0)
        } else {
            (0.5 * self.antiderivative(x, |q| q[1] - q[2])).exp()
        };
        match pref {
            WeightPrefactor::Unit => base,
            WeightPrefactor::Half => 0.5 * base,
        }
    }

    /// `E(x)` sampled on `grid`, accumulated cell by cell.
    pub fn weight_on_grid(&self, grid: &[f64]) -> ScalarGrid {
        let mut vals = Vec::with_capacity(grid.len());
        if self.q[1].is_zero() && self.q[2].is_zero() {
            return GridFunction::from_fn(grid.to_vec(), |_| C64::new(1.0, 0.0));
        }
        let bp = self.breakpoints();
        let mut acc = ZERO;
        let mut prev = 0.0;
        for &x in grid {
            if x > prev {
                let mut cuts = vec![prev];
                cuts.extend(bp.iter().copied().filter(|&b| b > prev && b < x));
                cuts.push(x);
                for w in cuts.windows(2) {
                    acc += integrate(|t| { let q = self.eval(t); q[1] - q[2] }, w[0], w[1], 1e-14);
                }
                prev = x;
            }
            vals.push((0.5 * acc).exp());
        }
        GridFunction {
            grid: grid.to_vec(),
            values: vals,
        }
    }
}


/// Conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p <= 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `L^p` norm of `f` on `[0, pi]`; `p = inf` samples a dense grid.
pub fn lp_norm(f: impl Fn(f64) -> C64, p: f64) -> Result<f64> {
    lp_norm_with(f, p, &[], &[])
}

/// `L^p` norm with known breakpoints and singular points.
pub fn lp_norm_with(
    f: impl Fn(f64) -> C64,
    p: f64,
    breakpoints: &[f64],
    singular: &[f64],
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        let mut pts: Vec<f64> = crate::grid::uniform_grid(0.0, PI, 4096);
        pts.extend(breakpoints.iter().copied());
        let mut m: f64 = 0.0;
        for x in pts {
            let v = f(x);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite { x });
            }
            m = m.max(v.norm());
        }
        return Ok(m);
    }
    let edges = graded_edges(32, breakpoints, singular);
    let mut bad: Option<f64> = None;
    let g = |x: f64| {
        let v = f(x);
        if !v.re.is_finite() || !v.im.is_finite() {
            return C64::new(f64::NAN, 0.0);
        }
        C64::new(v.norm().powf(p), 0.0)
    };
    let mut total = 0.0;
    for w in edges.windows(2) {
        let s = integrate(g, w[0], w[1], 1e-12 * (w[1] - w[0]).max(1e-300)).re;
        if !s.is_finite() {
            bad = Some(0.5 * (w[0] + w[1]));
            break;
        }
        total += s;
    }
    if let Some(x) = bad {
        return Err(Error::NonFinite { x });
    }
    Ok(total.powf(1.0 / p))
}

/// A complex phase `phi` together with its derivative.
#[derive(Clone)]
pub struct Phase {
    pub phi: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
    pub dphi: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
}

impl Phase {
    pub fn new(
        phi: impl Fn(f64) -> C64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
        }
    }
}

/// Rotation gauge: `y = H z` with `H = [[cos phi, -sin phi], [sin phi, cos phi]]`
/// turns `L_Q` into `L_Q~` with `Q~ = H^{-1} Q H - phi' I`.
pub fn gauge_transform(q: &Potential, phase: &Phase) -> Potential {
    let make = |j: usize| -> ScalarFn {
        let q = q.clone();
        let ph = phase.clone();
        ScalarFn::Closure(Arc::new(move |x| {
            let v = q.eval(x);
            let p = (ph.phi)(x);
            let dp = (ph.dphi)(x);
            let (c, s) = (p.cos(), p.sin());
            let (cc, ss, cs) = (c * c, s * s, c * s);
            match j {
                0 => -dp + v[0] * cc + (v[1] + v[2]) * cs + v[3] * ss,
                1 => v[1] * cc - (v[0] - v[3]) * cs - v[2] * ss,
                2 => v[2] * cc - (v[0] - v[3]) * cs - v[1] * ss,
                _ => -dp + v[3] * cc - (v[1] + v[2]) * cs + v[0] * ss,
            }
        }))
    };
    let comps = [make(0), make(1), make(2), make(3)];
    let mut out = Potential {
        q: comps,
        p_class: q.p_class,
        r_bound: q.r_bound,
        singular: q.singular.clone(),
    };
    // The rotated entries inherit the breakpoints of the original potential.
    let bp = q.breakpoints();
    if !bp.is_empty() {
        out.q = out.q.map(|f| attach_breakpoints(f, &bp));
    }
    if let Ok((a, b)) = out.ball_norms() {
        out.r_bound = a.max(b);
    }
    out
}

fn attach_breakpoints(f: ScalarFn, bp: &[f64]) -> ScalarFn {
    let mut cuts = vec![0.0];
    cuts.extend(bp.iter().copied().filter(|&b| b > 0.0 && b < PI));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    if cuts.len() == 1 {
        return f;
    }
    cuts.push(PI);
    let pieces = cuts
        .windows(2)
        .map(|w| Piece {
            start: w[0],
            end: w[1],
            f: f.clone(),
        })
        .collect();
    ScalarFn::Piecewise(Arc::new(pieces))
}

/// Gauge rotation that removes the trace `q1 + q4`.
///
/// Returns `Q^` with `q^4 = -q^1` and the shift `c` such that
/// `spec(L_Q) = spec(L_Q^) + c` for every boundary form.
pub fn normalize_trace(q: &Potential) -> Result<(Potential, C64)> {
    if q.components()[0].is_zero() && q.components()[3].is_zero() {
        return Ok((q.clone(), ZERO));
    }
    let table = Arc::new(TraceTable::new(q));
    let c = table.half_total() / PI;
    let t1 = table.clone();
    let qc = q.clone();
    let phase = Phase::new(
        move |x| t1.half_integral(x) - c * x,
        move |x| {
            let v = qc.eval(x);
            0.5 * (v[0] + v[3]) - c
        },
    );
    let rotated = gauge_transform(q, &phase);
    let shift = |f: &ScalarFn| -> ScalarFn {
        let f = f.clone();
        ScalarFn::Closure(Arc::new(move |x| f.eval(x) - c))
    };
    let comps = rotated.components();
    let bp = q.breakpoints();
    let mut qs = [
        shift(&comps[0]),
        comps[1].clone(),
        comps[2].clone(),
        shift(&comps[3]),
    ];
    if !bp.is_empty() {
        qs = qs.map(|f| attach_breakpoints(f, &bp));
    }
    let out = Potential::with_singular(qs, q.p_class, q.singular.clone())?;
    Ok((out, c))
}

/// Tabulated `1/2 int_0^x (q1 + q4)` for fast repeated evaluation.
struct TraceTable {
    q: Potential,
    edges: Vec<f64>,
    cum: Vec<C64>,
}

impl TraceTable {
    fn new(q: &Potential) -> Self {
        let edges = q.cell_edges(256);
        let mut cum = vec![ZERO];
        let mut acc = ZERO;
        for w in edges.windows(2) {
            acc += integrate(|t| { let v = q.eval(t); v[0] + v[3] }, w[0], w[1], 1e-15);
            cum.push(acc);
        }
        Self {
            q: q.clone(),
            edges,
            cum,
        }
    }

    fn half_total(&self) -> C64 {
        0.5 * self.cum[self.cum.len() - 1]
    }

    fn half_integral(&self, x: f64) -> C64 {
        if x <= 0.0 {
            return ZERO;
        }
        let k = match self
            .edges
            .binary_search_by(|e| e.partial_cmp(&x).unwrap())
        {
            Ok(k) => return 0.5 * self.cum[k],
            Err(k) => k - 1,
        };
        let a = self.edges[k];
        let (u, w) = crate::quadrature::gauss_legendre(8);
        let (m, r) = (0.5 * (a + x), 0.5 * (x - a));
        let mut s = ZERO;
        for i in 0..8 {
            let v = self.q.eval(m + r * u[i]);
            s += (v[0] + v[3]) * w[i];
        }
        0.5 * (self.cum[k] + s * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn lp_norm_examples() {
        assert!((lp_norm(|_| c(1.0), 1.0).unwrap() - PI).abs() < 1e-12);
        assert_eq!(lp_norm(|_| c(0.0), 3.0).unwrap(), 0.0);
        let v = lp_norm_with(|x| c(x.powf(-0.5)), 1.0, &[], &[0.0]).unwrap();
        assert!((v - 2.0 * PI.sqrt()).abs() < 1e-9, "{v}");
        assert!(lp_norm(|x| c(1.0 / x), f64::INFINITY).is_err());
    }

    #[test]
    fn weight_examples() {
        let q = Potential::from_expressions(["0", "0.2*x", "0.2*x", "0"], 2.0).unwrap();
        assert!((q.weight_e(2.0) - c(1.0)).norm() < 1e-14);
        let q = Potential::from_expressions(["0", "0", "2", "0"], 2.0).unwrap();
        assert!((q.weight_e(PI) - c((-PI).exp())).norm() < 1e-12);
        assert_eq!(q.weight_e(0.0), c(1.0));
        assert_eq!(Potential::zero().weight_e(1.0), c(1.0));
        let half = q.weight_e_with(PI, WeightPrefactor::Half);
        assert!((half - 0.5 * q.weight_e(PI)).norm() < 1e-15);
    }

    #[test]
    fn weight_grid_matches_pointwise() {
        let q = Potential::from_expressions(["0", "sin(x)", "0.3*i", "0"], 2.0).unwrap();
        let g = q.weight_on_grid(&crate::grid::uniform_grid(0.0, PI, 16));
        for (x, v) in g.grid.iter().zip(&g.values) {
            assert!((q.weight_e(*x) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_examples() {
        let q = Potential::from_expressions(["1", "0", "0", "1"], 2.0).unwrap();
        let t = gauge_transform(&q, &Phase::new(|x| c(x), |_| c(1.0)));
        for x in [0.1, 1.0, 2.5] {
            assert!(t.eval(x).iter().all(|v| v.norm() < 1e-14));
        }
        let q = Potential::from_expressions(["cos(x)", "0", "0", "-cos(x)"], 2.0).unwrap();
        let t = gauge_transform(&q, &Phase::new(|_| c(0.0), |_| c(0.0)));
        for x in [0.3, 2.0] {
            let (a, b) = (q.eval(x), t.eval(x));
            assert!((0..4).all(|j| (a[j] - b[j]).norm() < 1e-15));
        }
    }

    #[test]
    fn gauge_round_trip() {
        let q = Potential::from_expressions(
            ["0.3*cos(x)", "0.2*sin(2*x) + 0.1*i", "x/5", "0.7 - 0.2*i*x"],
            2.0,
        )
        .unwrap();
        let fwd = gauge_transform(&q, &Phase::new(|x| c(0.4 * x.sin()), |x| c(0.4 * x.cos())));
        let back = gauge_transform(&fwd, &Phase::new(|x| c(-0.4 * x.sin()), |x| c(-0.4 * x.cos())));
        for x in [0.0, 0.5, 1.7, PI] {
            let (a, b) = (q.eval(x), back.eval(x));
            for j in 0..4 {
                assert!((a[j] - b[j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn normalize_trace_examples() {
        let q = Potential::from_expressions(["cos(x)", "0.2", "0.1", "-cos(x)"], 2.0).unwrap();
        let (t, s) = normalize_trace(&q).unwrap();
        assert!(s.norm() < 1e-14);
        for x in [0.2, 1.9] {
            let (a, b) = (q.eval(x), t.eval(x));
            assert!((0..4).all(|j| (a[j] - b[j]).norm() < 1e-12));
        }

        let q = Potential::from_expressions(["1", "0", "0", "1"], 2.0).unwrap();
        let (t, s) = normalize_trace(&q).unwrap();
        assert!((s - c(1.0)).norm() < 1e-12);
        assert!(t.l1_norm().unwrap() < 1e-10);

        let q = Potential::from_expressions(["0.5*i", "0", "0", "0.5*i"], 2.0).unwrap();
        let (_, s) = normalize_trace(&q).unwrap();
        assert!((s - C64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn normalize_trace_general() {
        let q = Potential::from_expressions(
            ["0.4 + 0.3*cos(x)", "0.2*sin(x)", "0.1*i", "0.1*sin(x) + 0.2*i"],
            2.0,
        )
        .unwrap();
        let (t, _) = normalize_trace(&q).unwrap();
        assert!(t.trace_l1().unwrap() < 1e-8);
    }

    #[test]
    fn r_bound_is_validated() {
        let q = Potential::from_expressions(["1", "0", "0", "-1"], 1.0).unwrap();
        assert!((q.r_bound() - PI).abs() < 1e-10);
        assert!(q.clone().with_r_bound(3.0).is_err());
        assert!(q.with_r_bound(4.0).is_ok());
    }

    #[test]
    fn adjoint_swaps_and_conjugates() {
        let q = Potential::from_expressions(["i", "2", "3*i", "x"], 2.0).unwrap();
        let a = q.adjoint();
        let v = a.eval(1.0);
        assert_eq!(v[0], C64::new(0.0, -1.0));
        assert_eq!(v[1], C64::new(0.0, -3.0));
        assert_eq!(v[2], c(2.0));
        assert_eq!(v[3], c(1.0));
    }
}
