mod common;

use std::f64::consts::PI;

use common::{c, collocation_eigenvalues, nearest};
use dirac_spectral::boundary::{delta0, BoundaryForm, Mat2};
use dirac_spectral::potential::Potential;
use dirac_spectral::solutions::{fundamental_pair, Method, SolveOptions};
use dirac_spectral::spectrum::{char_det, localize, LocalizeOptions};
use dirac_spectral::Complex64 as C64;

/// `exp(m)` by scaling and squaring of a Taylor series.
fn expm(m: Mat2) -> Mat2 {
    let s = (m.norm().max(1.0).log2().ceil() as i32 + 4).max(0);
    let a = m / c(2f64.powi(s));
    let mut term = Mat2::identity();
    let mut sum = Mat2::identity();
    for k in 1..30 {
        term = term * a / c(k as f64);
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

#[test]
fn constant_potential_matches_matrix_exponential() {
    let q0 = [C64::new(0.3, 0.1), c(-0.2), C64::new(0.0, 0.4), c(0.15)];
    let q = Potential::from_expressions(["0.3+0.1*i", "-0.2", "0.4*i", "0.15"], 2.0).unwrap();
    let b = Mat2::new(c(0.0), c(1.0), c(-1.0), c(0.0));
    let qm = Mat2::new(q0[0], q0[1], q0[2], q0[3]);
    for lam in [c(2.5), C64::new(-7.0, 0.6), c(31.0)] {
        let fp = fundamental_pair(&q, lam, Method::DirectOde, &SolveOptions::default()).unwrap();
        let expect = expm(b * (Mat2::identity() * lam - qm) * c(PI));
        let got = fp.at_pi();
        assert!((got - expect).norm() < 1e-9 * expect.norm(), "{lam}: {}", (got - expect).norm());
    }
}

#[test]
fn zero_potential_determinant_is_closed_form() {
    let forms = [
        BoundaryForm::dirichlet(),
        BoundaryForm::periodic(),
        BoundaryForm::quasiperiodic(1.1),
        BoundaryForm::from_real([[1.0, 2.0, 0.5, -1.0], [0.0, 1.0, 3.0, 0.2]]).unwrap(),
    ];
    for bf in &forms {
        for lam in [c(0.3), C64::new(4.2, -1.0), c(17.5)] {
            let d = char_det(&Potential::zero(), bf, lam).unwrap();
            let d0 = delta0(bf, lam);
            assert!((d - d0).norm() < 1e-10 * (1.0 + d0.norm()));
        }
    }
}

#[test]
fn scalar_shift_moves_dirichlet_spectrum() {
    let q = Potential::from_expressions(["0.25", "0", "0", "0.25"], 2.0).unwrap();
    let pts = localize(&q, &BoundaryForm::dirichlet(), -10, 10, &LocalizeOptions::default()).unwrap();
    for p in pts {
        assert!((p.lambda - c(p.n as f64 + 0.25)).norm() < 1e-10);
    }
}

#[test]
fn general_form_matches_collocation() {
    let bf = BoundaryForm::from_real([[1.0, 0.5, 0.0, 0.0], [0.0, 0.0, 0.3, 1.0]]).unwrap();
    let q = Potential::from_expressions(["0.2*cos(x)", "0.1*x", "0.3*sin(x)", "-0.2*cos(x)"], 2.0).unwrap();
    let oracle = collocation_eigenvalues(
        &|x: f64| [c(0.2 * x.cos()), c(0.1 * x), c(0.3 * x.sin()), c(-0.2 * x.cos())],
        bf.u,
        120,
    );
    let pts = localize(&q, &bf, -8, 8, &LocalizeOptions::default()).unwrap();
    assert!(!pts.is_empty());
    for p in pts {
        for z in p.zeros {
            assert!((nearest(&oracle, z) - z).norm() < 1e-6, "{z}");
        }
    }
}
