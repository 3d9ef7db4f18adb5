//! Fundamental solutions `c(x, lambda)`, `s(x, lambda)` of `-B y' + Q y = lambda y`
//! with `c(0) = (1, 0)`, `s(0) = (0, 1)`, the oscillatory remainder
//! integrals and the Pruefer (polar) construction.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{uniform_grid, GridFunction, ScalarGrid, VectorGrid};
use crate::ode::{Accuracy, Integrator};
use crate::potential::Potential;
use crate::quadrature::CellMesh;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// How a fundamental pair was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectOde,
    Pruefer,
}

/// Shared numerical settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Uniform cells of the output grid (breakpoints are added).
    pub cells: usize,
    /// Strip half-width `alpha` of the admissible domain.
    pub alpha: f64,
    pub accuracy: Accuracy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            cells: 2048,
            alpha: 1.0,
            accuracy: Accuracy::Fine,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FundamentalPair {
    pub lambda: C64,
    pub c: VectorGrid,
    pub s: VectorGrid,
    pub method: Method,
    pub err_estimate: f64,
}

impl FundamentalPair {
    /// `det(c(x) | s(x))` at every grid point.
    pub fn wronskian(&self) -> ScalarGrid {
        GridFunction {
            grid: self.c.grid.clone(),
            values: self
                .c
                .values
                .iter()
                .zip(&self.s.values)
                .map(|(c, s)| c[0] * s[1] - c[1] * s[0])
                .collect(),
        }
    }

    /// `[c(pi) s(pi)]`.
    pub fn at_pi(&self) -> crate::boundary::Mat2 {
        let (c, s) = (self.c.values.last().unwrap(), self.s.values.last().unwrap());
        crate::boundary::Mat2::new(c[0], s[0], c[1], s[1])
    }
}

/// Output grid for solutions of `q`: uniform cells plus breakpoints and
/// grading near singular points.
pub fn solution_grid(q: &Potential, cells: usize) -> Vec<f64> {
    let mut pts = uniform_grid(0.0, PI, cells);
    pts.extend(q.breakpoints());
    let h = PI / cells.max(1) as f64;
    for &s in q.singular_points() {
        let mut t = 0.5 * h;
        while t > 1e-21 {
            pts.extend([s - t, s + t].into_iter().filter(|&p| p > 0.0 && p < PI));
            t *= 0.5;
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last() {
            Some(&l) if p - l <= 8.0 * f64::EPSILON * p.abs().max(l.abs()) => {}
            _ => out.push(p),
        }
    }
    out
}

/// Solves `-B y' + Q y = lambda y + f` with `y(0) = init`. The result lives on
/// the forcing grid when one is given.
pub fn integrate_system(
    q: &Potential,
    lambda: C64,
    init: [C64; 2],
    forcing: Option<&VectorGrid>,
    opts: &SolveOptions,
) -> Result<VectorGrid> {
    let grid = match forcing {
        Some(f) => {
            if f.grid[0] != 0.0 || (f.grid[f.len() - 1] - PI).abs() > 1e-12 {
                return Err(Error::InvalidInput("forcing must be sampled on [0, pi]".into()));
            }
            f.grid.clone()
        }
        None => solution_grid(q, opts.cells),
    };
    let ig = Integrator::new(q);
    let fclos = forcing.map(|f| move |x: f64| f.eval(x));
    let fref: Option<&(dyn Fn(f64) -> [C64; 2] + Sync)> = match &fclos {
        Some(f) => Some(f),
        None => None,
    };
    let out = ig.solve(lambda, &[init], fref, &grid, opts.accuracy)?;
    Ok(GridFunction {
        grid,
        values: out.into_iter().next().unwrap(),
    })
}

/// The fundamental pair by direct integration or by the Pruefer construction.
pub fn fundamental_pair(
    q: &Potential,
    lambda: C64,
    method: Method,
    opts: &SolveOptions,
) -> Result<FundamentalPair> {
    match method {
        Method::DirectOde => direct_pair(&Integrator::new(q), lambda, opts),
        Method::Pruefer => {
            let prof = remainder_profile(q, lambda, opts.alpha, q.p_conjugate())?;
            if !prof.in_domain {
                return Err(Error::OutsideDomain {
                    lambda,
                    upsilon: prof.upsilon_sup,
                    threshold: prof.threshold(),
                });
            }
            let s = pruefer_iterate(q, lambda, 1.0, opts.cells)?;
            let c = pruefer_iterate(q, lambda, -1.0, opts.cells)?;
            let build = |p: &PrueferSolution, cos_type: bool| -> VectorGrid {
                GridFunction {
                    grid: p.theta.grid.clone(),
                    values: p
                        .theta
                        .values
                        .iter()
                        .zip(&p.r.values)
                        .map(|(&th, &r)| {
                            if cos_type {
                                [r * th.cos(), -r * th.sin()]
                            } else {
                                [r * th.sin(), r * th.cos()]
                            }
                        })
                        .collect(),
                }
            };
            let mut cc = build(&c, true);
            let mut ss = build(&s, false);
            cc.values[0] = [ONE, ZERO];
            ss.values[0] = [ZERO, ONE];
            Ok(FundamentalPair {
                lambda,
                c: cc,
                s: ss,
                method,
                err_estimate: s.last_update.max(c.last_update),
            })
        }
    }
}

/// Direct pair using an existing integrator (shares its sample cache).
pub fn direct_pair(ig: &Integrator, lambda: C64, opts: &SolveOptions) -> Result<FundamentalPair> {
    let grid = solution_grid(ig.potential(), opts.cells);
    let out = ig.solve(lambda, &[[ONE, ZERO], [ZERO, ONE]], None, &grid, opts.accuracy)?;
    let (_, err) = ig.transfer_with_error(lambda, opts.accuracy)?;
    let mut it = out.into_iter();
    let c = GridFunction {
        grid: grid.clone(),
        values: it.next().unwrap(),
    };
    let s = GridFunction {
        grid,
        values: it.next().unwrap(),
    };
    Ok(FundamentalPair {
        lambda,
        c,
        s,
        method: Method::DirectOde,
        err_estimate: err,
    })
}

/// Fundamental pairs for many `lambda` in parallel.
pub fn fundamental_sweep(
    q: &Potential,
    lambdas: &[C64],
    method: Method,
    opts: &SolveOptions,
) -> Vec<Result<FundamentalPair>> {
    let ig = Integrator::new(q);
    lambdas
        .par_iter()
        .map(|&l| match method {
            Method::DirectOde => direct_pair(&ig, l, opts),
            Method::Pruefer => fundamental_pair(q, l, method, opts),
        })
        .collect()
}

/// The oscillatory integrals `upsilon_1..4` and their norms at one `lambda`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderProfile {
    pub lambda: C64,
    pub upsilon: [ScalarGrid; 4],
    pub upsilon_x: GridFunction<f64>,
    pub upsilon_sup: f64,
    pub upsilon_nu: f64,
    pub nu: f64,
    pub k_const: f64,
    pub alpha: f64,
    pub in_domain: bool,
}

impl RemainderProfile {
    /// The domain threshold `1 / (8 k^4)`.
    pub fn threshold(&self) -> f64 {
        1.0 / (8.0 * self.k_const.powi(4))
    }
}

/// `k = 2 + 12 R cosh(2 pi alpha + 1)`.
pub fn k_constant(r: f64, alpha: f64) -> f64 {
    2.0 + 12.0 * r * (2.0 * PI * alpha + 1.0).cosh()
}

/// Samples of `q1` and `(q2 + q3) / 2` on a Gauss mesh, reusable across `lambda`.
pub struct RemainderEvaluator {
    mesh: CellMesh,
    q1: Vec<C64>,
    hh: Vec<C64>,
    r_bound: f64,
}

impl RemainderEvaluator {
    pub fn new(q: &Potential, cells: usize) -> Self {
        let mesh = CellMesh::from_edges(solution_grid(q, cells));
        let vals: Vec<[C64; 4]> = mesh.nodes().iter().map(|&x| q.eval(x)).collect();
        Self {
            q1: vals.iter().map(|v| v[0]).collect(),
            hh: vals.iter().map(|v| 0.5 * (v[1] + v[2])).collect(),
            mesh,
            r_bound: q.r_bound(),
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.mesh.edges
    }

    /// `(upsilon_j at nodes, upsilon_j at edges)` for `j = 1..4`.
    fn upsilons(&self, lambda: C64) -> [(Vec<C64>, Vec<C64>); 4] {
        let w = 2.0 * lambda;
        let split = |g: &[C64]| {
            let (pn, pe) = self.mesh.cumulative(g, w);
            let (mn, me) = self.mesh.cumulative(g, -w);
            let sin = |a: &[C64], b: &[C64]| -> Vec<C64> {
                a.iter().zip(b).map(|(a, b)| (a - b) / (2.0 * I)).collect()
            };
            let cos = |a: &[C64], b: &[C64]| -> Vec<C64> {
                a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect()
            };
            ((sin(&pn, &mn), sin(&pe, &me)), (cos(&pn, &mn), cos(&pe, &me)))
        };
        let ((s1n, s1e), (c1n, c1e)) = split(&self.q1);
        let ((s2n, s2e), (c2n, c2e)) = split(&self.hh);
        [(s1n, s1e), (c1n, c1e), (s2n, s2e), (c2n, c2e)]
    }

    /// `(Upsilon(pi, lambda), Upsilon_nu(lambda), Upsilon(lambda))` without grids.
    pub fn scalars(&self, lambda: C64, nu: f64) -> (f64, f64, f64) {
        let u = self.upsilons(lambda);
        let at_pi: f64 = u.iter().map(|(_, e)| e.last().unwrap().norm()).sum();
        let nu_norm: f64 = u.iter().map(|(n, _)| self.mesh.lp_norm_nodes(n, nu)).sum();
        let sup = sup_sum(&u);
        (at_pi, nu_norm, sup)
    }

    pub fn profile(&self, lambda: C64, alpha: f64, nu: f64) -> RemainderProfile {
        let u = self.upsilons(lambda);
        let edges = self.mesh.edges.clone();
        let nu_norm: f64 = u.iter().map(|(n, _)| self.mesh.lp_norm_nodes(n, nu)).sum();
        let upsilon_sup = sup_sum(&u);
        let upsilon_x = GridFunction {
            grid: edges.clone(),
            values: (0..edges.len())
                .map(|k| u.iter().map(|(_, e)| e[k].norm()).sum())
                .collect(),
        };
        let upsilon = u.map(|(_, e)| GridFunction {
            grid: edges.clone(),
            values: e,
        });
        let k_const = k_constant(self.r_bound, alpha);
        let in_domain =
            lambda.im.abs() < alpha && upsilon_sup < 1.0 / (8.0 * k_const.powi(4));
        RemainderProfile {
            lambda,
            upsilon,
            upsilon_x,
            upsilon_sup,
            upsilon_nu: nu_norm,
            nu,
            k_const,
            alpha,
            in_domain,
        }
    }
}

fn sup_sum(u: &[(Vec<C64>, Vec<C64>); 4]) -> f64 {
    let nn = u[0].0.len();
    let ne = u[0].1.len();
    let a = (0..nn)
        .map(|k| u.iter().map(|(n, _)| n[k].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let b = (0..ne)
        .map(|k| u.iter().map(|(_, e)| e[k].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    a.max(b)
}

/// Mesh size resolving `e^{2 i lambda t}` with at least ten nodes per period.
pub fn remainder_cells(lambda: C64) -> usize {
    let need = (1.25 * lambda.re.abs()).ceil() as usize;
    need.max(256).next_power_of_two()
}

/// Remainder profile with `nu` the norm index (usually `p'`).
pub fn remainder_profile(q: &Potential, lambda: C64, alpha: f64, nu: f64) -> Result<RemainderProfile> {
    if !(alpha > 0.0) || !(nu >= 1.0) {
        return Err(Error::InvalidInput(format!("need alpha > 0 and nu >= 1, got {alpha}, {nu}")));
    }
    Ok(RemainderEvaluator::new(q, remainder_cells(lambda)).profile(lambda, alpha, nu))
}

/// Polar form `theta = lambda x + eta`, `r` of a fundamental solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrueferSolution {
    pub lambda: C64,
    /// `+1` for the sine-type solution `s = (r sin theta, r cos theta)`,
    /// `-1` for the cosine-type `c = (r cos theta, -r sin theta)`.
    pub sigma: f64,
    pub theta: ScalarGrid,
    pub r: ScalarGrid,
    pub eta: ScalarGrid,
    pub rho: ScalarGrid,
    /// First-order term `f0`.
    pub center: ScalarGrid,
    pub iterations: usize,
    pub contraction_factor: f64,
    pub last_update: f64,
    /// True when plain iteration stalled and the linearized form was used.
    pub preconditioned: bool,
}

/// Solves the phase equation in the admissible domain for the sine-type solution.
pub fn pruefer_solve(q: &Potential, lambda: C64, alpha: f64) -> Result<PrueferSolution> {
    let prof = remainder_profile(q, lambda, alpha, q.p_conjugate())?;
    if !prof.in_domain {
        return Err(Error::OutsideDomain {
            lambda,
            upsilon: prof.upsilon_sup,
            threshold: prof.threshold(),
        });
    }
    pruefer_iterate(q, lambda, 1.0, SolveOptions::default().cells)
}

struct PhaseMap<'a> {
    mesh: &'a CellMesh,
    lambda: C64,
    sigma: f64,
    q1: Vec<C64>,
    hh: Vec<C64>,
}

impl PhaseMap<'_> {
    /// `F(eta) = sigma int_0^x [q1 cos(2 eta + 2 l t) - h sin(2 eta + 2 l t)]`
    /// with `h = (q2 + q3) / 2`, at nodes and edges.
    fn apply(&self, eta: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let (mut a, mut b) = (Vec::with_capacity(eta.len()), Vec::with_capacity(eta.len()));
        for k in 0..eta.len() {
            let e = (2.0 * I * eta[k]).exp();
            a.push(self.sigma * e * (0.5 * self.q1[k] + 0.5 * I * self.hh[k]));
            b.push(self.sigma * (0.5 * self.q1[k] - 0.5 * I * self.hh[k]) / e);
        }
        let (pn, pe) = self.mesh.cumulative(&a, 2.0 * self.lambda);
        let (mn, me) = self.mesh.cumulative(&b, -2.0 * self.lambda);
        (
            pn.iter().zip(&mn).map(|(x, y)| x + y).collect(),
            pe.iter().zip(&me).map(|(x, y)| x + y).collect(),
        )
    }

    /// Kernel of the derivative of `F` at `eta` (node values).
    fn kernel(&self, eta: &[C64]) -> Vec<C64> {
        (0..eta.len())
            .map(|k| {
                let u = 2.0 * eta[k] + 2.0 * self.lambda * self.mesh.nodes()[k];
                self.sigma * (-2.0 * self.q1[k] * u.sin() - 2.0 * self.hh[k] * u.cos())
            })
            .collect()
    }
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Iterates the integral form of the phase equation without a domain check.
/// `sigma = +1` gives the sine-type solution, `-1` the cosine-type one.
pub fn pruefer_iterate(q: &Potential, lambda: C64, sigma: f64, cells: usize) -> Result<PrueferSolution> {
    if !q.is_trace_normalized(1e-10) {
        return Err(Error::Precondition(
            "the polar form needs q4 = -q1 (apply normalize_trace first)".into(),
        ));
    }
    let cells = cells.max(remainder_cells(lambda));
    let mesh = CellMesh::from_edges(solution_grid(q, cells));
    let vals: Vec<[C64; 4]> = mesh.nodes().iter().map(|&x| q.eval(x)).collect();
    let map = PhaseMap {
        mesh: &mesh,
        lambda,
        sigma,
        q1: vals.iter().map(|v| v[0]).collect(),
        hh: vals.iter().map(|v| 0.5 * (v[1] + v[2])).collect(),
    };
    let n = mesh.nodes().len();
    let (f0n, f0e) = map.apply(&vec![ZERO; n]);
    let (mut eta_n, mut eta_e) = (f0n.clone(), f0e.clone());
    let mut prev_diff = f64::NAN;
    let mut factor: f64 = 0.0;
    let mut iterations = 1;
    let mut last = 0.0;
    let mut converged = false;
    let mut stalled = false;
    for it in 0..50 {
        let (nn, ne) = map.apply(&eta_n);
        let d = sup_diff(&nn, &eta_n).max(sup_diff(&ne, &eta_e));
        if !d.is_finite() {
            stalled = true;
            break;
        }
        if prev_diff > 1e-11 {
            factor = factor.max(d / prev_diff);
        }
        eta_n = nn;
        eta_e = ne;
        iterations = it + 1;
        last = d;
        if d < 1e-12 {
            converged = true;
            break;
        }
        if prev_diff.is_finite() && d / prev_diff > 0.9 {
            stalled = true;
            break;
        }
        prev_diff = d;
    }
    let mut preconditioned = false;
    if !converged {
        let _ = stalled;
        preconditioned = true;
        // Chord iteration eta <- eta + (I - G1)^{-1} (F(eta) - eta), with G1
        // the derivative at the center; (I - G1)^{-1} r = r + u where
        // u' = k u + k r, u(0) = 0.
        let k = map.kernel(&f0n);
        let (kn, ke) = mesh.cumulative(&k, ZERO);
        let (mut en, mut ee) = (f0n.clone(), f0e.clone());
        prev_diff = f64::NAN;
        factor = 0.0;
        converged = false;
        for it in 0..50 {
            let (fn_, fe) = map.apply(&en);
            let rn: Vec<C64> = fn_.iter().zip(&en).map(|(a, b)| a - b).collect();
            let re: Vec<C64> = fe.iter().zip(&ee).map(|(a, b)| a - b).collect();
            let g: Vec<C64> = (0..n).map(|j| (-kn[j]).exp() * k[j] * rn[j]).collect();
            let (gn, ge) = mesh.cumulative(&g, ZERO);
            let d = rn
                .iter()
                .zip(&gn)
                .zip(&kn)
                .map(|((r, g), kk)| r + kk.exp() * g)
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            for j in 0..n {
                en[j] += rn[j] + kn[j].exp() * gn[j];
            }
            for j in 0..ee.len() {
                ee[j] += re[j] + ke[j].exp() * ge[j];
            }
            if !d.is_finite() {
                break;
            }
            if prev_diff > 1e-11 {
                factor = factor.max(d / prev_diff);
            }
            iterations = it + 1;
            last = d;
            if d < 1e-12 {
                converged = true;
                break;
            }
            prev_diff = d;
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations,
                last_update: last,
            });
        }
        eta_n = en;
        eta_e = ee;
    }
    // ln r = 1/2 int (q2 - q3) + sigma int [q1 sin 2theta + h cos 2theta].
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let dn: Vec<C64> = vals.iter().map(|v| 0.5 * (v[1] - v[2])).collect();
    for j in 0..n {
        let e = (2.0 * I * eta_n[j]).exp();
        a.push(sigma * e * (-0.5 * I * map.q1[j] + 0.5 * map.hh[j]));
        b.push(sigma * (0.5 * I * map.q1[j] + 0.5 * map.hh[j]) / e);
    }
    let (_, pe) = mesh.cumulative(&a, 2.0 * lambda);
    let (_, me) = mesh.cumulative(&b, -2.0 * lambda);
    let (_, de) = mesh.cumulative(&dn, ZERO);
    let edges = mesh.edges.clone();
    let grid = |v: Vec<C64>| GridFunction {
        grid: edges.clone(),
        values: v,
    };
    let osc: Vec<C64> = pe.iter().zip(&me).map(|(x, y)| x + y).collect();
    let r: Vec<C64> = osc.iter().zip(&de).map(|(o, d)| (o + d).exp()).collect();
    let rho: Vec<C64> = osc.iter().map(|o| o.exp() - 1.0).collect();
    let theta: Vec<C64> = edges.iter().zip(&eta_e).map(|(&x, e)| lambda * x + e).collect();
    Ok(PrueferSolution {
        lambda,
        sigma,
        theta: grid(theta),
        r: grid(r),
        eta: grid(eta_e),
        rho: grid(rho),
        center: grid(f0e),
        iterations,
        contraction_factor: factor,
        last_update: last,
        preconditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::ScalarFn;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn smooth() -> Potential {
        Potential::from_expressions(["0.02*cos(x)", "0.01*sin(2*x)", "0.005*x", "-0.02*cos(x)"], 2.0).unwrap()
    }

    #[test]
    fn zero_potential_pair() {
        let q = Potential::zero();
        for &l in &[c(1.0), C64::new(3.3, -0.7)] {
            let fp = fundamental_pair(&q, l, Method::DirectOde, &SolveOptions::default()).unwrap();
            for (k, &x) in fp.c.grid.iter().enumerate() {
                let (co, si) = ((l * x).cos(), (l * x).sin());
                assert!((fp.c.values[k][0] - co).norm() < 1e-12);
                assert!((fp.c.values[k][1] + si).norm() < 1e-12);
                assert!((fp.s.values[k][0] - si).norm() < 1e-12);
                assert!((fp.s.values[k][1] - co).norm() < 1e-12);
            }
        }
        let y = integrate_system(&q, c(1.0), [ONE, ZERO], None, &SolveOptions::default()).unwrap();
        let end = y.values.last().unwrap();
        assert!((end[0] + 1.0).norm() < 1e-14 && end[1].norm() < 1e-14);
        let y = integrate_system(&q, c(1.0), [ZERO, ONE], None, &SolveOptions::default()).unwrap();
        let end = y.values.last().unwrap();
        assert!(end[0].norm() < 1e-14 && (end[1] + 1.0).norm() < 1e-14);
    }

    #[test]
    fn wronskian_is_constant() {
        let q = smooth();
        let fp = fundamental_pair(&q, C64::new(7.5, 0.3), Method::DirectOde, &SolveOptions::default()).unwrap();
        let w = fp.wronskian();
        // trace of the system matrix is q2 - q3
        let e2 = q.weight_on_grid(&w.grid);
        for (v, e) in w.values.iter().zip(&e2.values) {
            assert!((v - e * e).norm() < 1e-10);
        }
    }

    #[test]
    fn remainder_closed_forms() {
        let q = Potential::from_expressions(["1", "0", "0", "-1"], 2.0).unwrap();
        let l = c(3.7);
        let p = remainder_profile(&q, l, 1.0, 2.0).unwrap();
        for (k, &x) in p.upsilon[0].grid.iter().enumerate() {
            let u1 = (1.0 - (2.0 * l * x).cos()) / (2.0 * l);
            let u2 = (2.0 * l * x).sin() / (2.0 * l);
            assert!((p.upsilon[0].values[k] - u1).norm() < 1e-12);
            assert!((p.upsilon[1].values[k] - u2).norm() < 1e-12);
        }
        assert!(p.upsilon_nu <= PI.sqrt() * p.upsilon_sup + 1e-12);
        assert!(p.upsilon_x.values.iter().all(|&v| v <= p.upsilon_sup + 1e-15));
        let z = remainder_profile(&Potential::zero(), C64::new(2.0, 0.5), 1.0, 2.0).unwrap();
        assert_eq!(z.upsilon_sup, 0.0);
        assert!(z.in_domain);
    }

    #[test]
    fn riemann_lebesgue_decay_for_indicator() {
        let q = Potential::new(
            [
                ScalarFn::piecewise(vec![
                    crate::potential::Piece { start: 0.0, end: PI / 2.0, f: ScalarFn::Constant(ONE) },
                    crate::potential::Piece { start: PI / 2.0, end: PI, f: ScalarFn::Zero },
                ])
                .unwrap(),
                ScalarFn::Zero,
                ScalarFn::Zero,
                ScalarFn::Zero,
            ],
            2.0,
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for m in 1..=8 {
            let l = c(2f64.powi(m) + 0.25);
            let u = remainder_profile(&q, l, 1.0, 2.0).unwrap().upsilon_sup;
            assert!(u < prev);
            prev = u;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn pruefer_zero_potential() {
        let q = Potential::zero();
        let p = pruefer_solve(&q, c(4.0), 1.0).unwrap();
        assert_eq!(p.iterations, 1);
        assert!(p.eta.sup_norm() == 0.0);
        assert!(p.r.values.iter().all(|&r| r == ONE));
    }

    #[test]
    fn pruefer_matches_direct() {
        let q = smooth();
        let opts = SolveOptions { alpha: 0.05, ..Default::default() };
        for &l in &[c(25.0), C64::new(12.0, 0.03)] {
            let d = fundamental_pair(&q, l, Method::DirectOde, &opts).unwrap();
            let p = fundamental_pair(&q, l, Method::Pruefer, &opts).unwrap();
            assert_eq!(d.s.grid, p.s.grid);
            let ds = d.s.values.iter().zip(&p.s.values).map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm())).fold(0.0, f64::max);
            let dc = d.c.values.iter().zip(&p.c.values).map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm())).fold(0.0, f64::max);
            assert!(ds < 1e-9 && dc < 1e-9, "{l}: {ds:e} {dc:e}");
        }
    }

    #[test]
    fn pruefer_bounds() {
        let q = smooth();
        let l = c(20.0);
        let prof = remainder_profile(&q, l, 0.05, q.p_conjugate()).unwrap();
        assert!(prof.in_domain);
        let p = pruefer_solve(&q, l, 0.05).unwrap();
        let k = prof.k_const;
        let up = prof.upsilon_nu;
        assert!(p.contraction_factor <= 2.0 * k.powi(4) * up);
        let zeta = p.eta.values.iter().zip(&p.center.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(zeta <= k * k * up);
        let ux = RemainderEvaluator::new(&q, 2048).profile(l, 0.05, q.p_conjugate());
        assert_eq!(ux.upsilon_x.grid, p.eta.grid);
        for (j, e) in p.eta.values.iter().enumerate() {
            assert!(e.norm() <= ux.upsilon_x.values[j] + k * k * up);
            assert!(p.rho.values[j].norm() <= ux.upsilon_x.values[j] + 2.0 * k * (2.0 + PI * k * k) * up);
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let q = Potential::from_expressions(["2*cos(x)", "0", "0", "-2*cos(x)"], 2.0).unwrap();
        let e = fundamental_pair(&q, c(3.0), Method::Pruefer, &SolveOptions::default());
        assert!(matches!(e, Err(Error::OutsideDomain { .. })));
        let e = pruefer_solve(&Potential::from_expressions(["1", "0", "0", "0"], 2.0).unwrap(), c(50.0), 1.0);
        assert!(e.is_err());
    }

    #[test]
    fn preconditioned_iteration_handles_large_potentials() {
        // Far outside the admissible domain the linearized iteration still
        // recovers the phase computed by direct integration.
        let q = Potential::from_expressions(["0.8*cos(x)", "0.3", "0.3", "-0.8*cos(x)"], 2.0).unwrap();
        let l = c(6.0);
        let p = pruefer_iterate(&q, l, 1.0, 1024).unwrap();
        let d = fundamental_pair(&q, l, Method::DirectOde, &SolveOptions { cells: 1024, ..Default::default() }).unwrap();
        let end = d.s.values.last().unwrap();
        let th = p.theta.values.last().unwrap();
        let r = p.r.values.last().unwrap();
        assert!((r * th.sin() - end[0]).norm() < 1e-8);
        assert!((r * th.cos() - end[1]).norm() < 1e-8);
    }
}
