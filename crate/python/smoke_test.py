"""Smoke test for the dirac_spectral_py extension module."""

import math

import dirac_spectral_py as ds


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok: {msg}")


def main():
    print("version", ds.__version__)

    zero = ds.Potential.zero()
    dirichlet = ds.BoundaryForm.preset("dirichlet")
    kind, _ = dirichlet.classify()
    check(kind == "StronglyRegular", "dirichlet is strongly regular")

    pts = ds.localize(zero, dirichlet, -3, 3)
    check(all(abs(p.value - p.n) < 1e-10 for p in pts), "zero potential gives integer eigenvalues")

    periodic = ds.BoundaryForm.preset("periodic")
    anchors = periodic.spectrum0(-2, 2)
    check(all(m == 2 and abs(lam - 2 * n) < 1e-12 for n, lam, m in anchors), "periodic anchors are double at 2n")

    q = ds.Potential("0.3*cos(x)+0.1", "0.2*sin(x)", "0.1*x", "-0.3*cos(x)+0.05")
    qt, shift = q.normalize_trace()
    a = ds.localize(q, dirichlet, -5, 5)
    b = ds.localize(qt, dirichlet, -5, 5)
    err = max(abs(x.value - y.value - shift) for x, y in zip(a, b))
    check(err < 1e-8, f"trace normalization shifts the spectrum (err {err:.1e})")

    grid, c, s = ds.fundamental_pair(q, 7.5, cells=512)
    w = [ci[0] * si[1] - ci[1] * si[0] for ci, si in zip(c, s)]
    e2 = [q.weight(x) ** 2 for x in grid]
    check(max(abs(u - v) for u, v in zip(w, e2)) < 1e-8, "wronskian equals E(x)^2")

    d = ds.char_det(zero, dirichlet, 0.25)
    check(abs(d - math.sin(0.25 * math.pi)) < 1e-10, "char_det equals sin(pi lambda) for dirichlet")

    try:
        ds.BoundaryForm([[1, 0, 0, 0], [2, 0, 0, 0]])
    except ValueError:
        print("ok: rank-deficient form rejected")
    else:
        raise SystemExit("FAIL: rank-deficient form accepted")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
