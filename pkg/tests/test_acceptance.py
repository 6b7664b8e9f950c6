"""Acceptance criteria. One test per criterion; each prints a single
pass/fail line with its pinned tolerance and measured wall time."""

import time
from fractions import Fraction

import pytest

from bianchix.exprs import (
    Expr,
    Mat4,
    PI,
    gamma_rep,
    q_cleared_equal,
    u,
)
from bianchix.mc import DEFAULT_ASSIGNMENT, mc_period, mc_sdw
from bianchix.motives import (
    CountSpec,
    LOCI,
    LPoly,
    L,
    c2n_closed,
    c2n_rec,
    complement_c2,
    complement_c2_h,
    count_points,
    quadric_class,
    split_form_check,
    union_class,
)
from bianchix.pipeline import run_pipeline
from bianchix.residue import cycle_integral, eval_alpha_exact, parity_filter
from bianchix.symbols import cotangent_degree, zeta_q_expr, zeta_substitution_rules

from conftest import CACHE_DIR

ANCHOR = DEFAULT_ASSIGNMENT  # w = (1,2,3), w' = (1/2,-1,1), w'' = (0,0,2)


def _report(num, desc, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {desc} ({detail})"
    print(line)
    assert ok, line


def test_criterion_01_clifford_relations():
    t0 = time.monotonic()
    for name in ("split", "chiral"):
        gamma_rep(name).check()
    dt = time.monotonic() - t0
    _report(1, "Clifford relations hold exactly in both representations",
            dt < 1.0, f"{dt:.2f}s < 1s")


def test_criterion_02_principal_symbol_diagonalizes(triple):
    t0 = time.monotonic()
    got = triple.p2.substitute(zeta_substitution_rules(1))
    ok = got == Mat4.from_scalar(zeta_q_expr(1))
    dt = time.monotonic() - t0
    _report(2, "p2 becomes the anisotropy quadric times I in the zeta frame",
            ok and dt < 10.0, f"exact equality, {dt:.2f}s < 10s")


def test_criterion_03_base_layer_and_homogeneity(rs):
    t0 = time.monotonic()
    base_ok = q_cleared_equal(rs.layer(-2).scalar * rs.qctx.expr,
                              Expr.one(), rs.qctx)
    hom_ok = all(
        cotangent_degree(exps, qpow) == m
        for m, mat in rs.layers.items()
        for row in mat.rows for e in row for (exps, qpow) in e.d)
    dt = time.monotonic() - t0
    _report(3, "base layer inverts Q and every layer is homogeneous",
            base_ok and hom_ok and dt < 60.0, f"{dt:.2f}s < 1min")


def test_criterion_04_parity_filter_is_free(pipe):
    t0 = time.monotonic()
    raw = cycle_integral(pipe.density)
    filt = cycle_integral(parity_filter(pipe.density))
    ok = raw == filt
    dt = time.monotonic() - t0
    _report(4, "cycle integral of the raw and parity-filtered densities "
               "agree exactly", ok and dt < 300.0, f"{dt:.2f}s < 5min")


def test_criterion_05_alpha_is_a_rational_invariant(pipe):
    t0 = time.monotonic()
    a = pipe.sdw.alpha
    ok = (a.is_trig_free() and a.is_real()
          and all(v != PI for t in a.terms() for v, _e in t.exps)
          and all(e % 2 == 0 for t in a.terms() for v, e in t.exps
                  if v[0] == u(1)[0])
          and eval_alpha_exact(a, (1, 1, 1), {}) == Fraction(-1, 2)
          and eval_alpha_exact(a, ANCHOR.w, ANCHOR.omega_dict())
          == Fraction(143, 72))
    dt = time.monotonic() - t0
    _report(5, "alpha_2 is trig-free, pi-free, real, even in the factors, "
               "with frozen values -1/2 and 143/72",
            ok and dt < 300.0, f"{dt:.2f}s < 5min")


def test_criterion_06_monte_carlo_agreement(pipe):
    t0 = time.monotonic()
    exact = float(eval_alpha_exact(pipe.sdw.alpha, ANCHOR.w,
                                   ANCHOR.omega_dict()))
    est_d = mc_sdw(pipe.density, ANCHOR, 10 ** 6, seed=0)
    est_p = mc_period(pipe.period, ANCHOR, 10 ** 6, seed=1)
    zd = abs(est_d.estimate - exact) / est_d.stderr
    zp = abs(est_p.estimate - exact) / est_p.stderr
    ok = est_d.agrees_with(exact, k=3.0) and est_p.agrees_with(exact, k=3.0)
    dt = time.monotonic() - t0
    _report(6, "both estimators at N=10^6 (seeds 0, 1) sit within 3 sigma "
               "of 143/72", ok and dt < 600.0,
            f"z = {zd:.2f}, {zp:.2f}; {dt:.1f}s < 10min")


def test_criterion_07_class_identities():
    t0 = time.monotonic()
    ok = c2n_closed(1) == LPoly.L(4) - LPoly.L(3) - LPoly.L(2) + L
    ok = ok and quadric_class(1) == 1 + 2 * L + L * L
    for n in range(1, 65):
        ok = ok and c2n_rec(n) == c2n_closed(n)
    for n in range(1, 33):
        z = quadric_class(n)
        ok = ok and complement_c2(z, n) == LPoly.L(2) * c2n_closed(n)
        ok = ok and complement_c2_h(z, n) == \
            LPoly.L(n + 1) * (L - 1) * (L - 2) * (LPoly.L(n + 1) - 1)
        ok = ok and complement_c2_h(z, n) + union_class(z, n) == \
            LPoly.L(2 * n + 4)
    dt = time.monotonic() - t0
    _report(7, "class recursion and closed forms agree to n=64, complements "
               "factor to n=32", ok and dt < 1.0, f"{dt:.2f}s < 1s")


def test_criterion_08_point_counts():
    t0 = time.monotonic()
    ok = True
    for q in (5, 13):
        for w in ((1, 1, 1, 1), (1, 2, 1, 3)):
            for locus in LOCI:
                spec = CountSpec(1, q, w, locus)
                ok = ok and count_points(spec) == spec.class_poly().eval_at(q)
    ok = ok and count_points(
        CountSpec(1, 5, (1, 1, 1, 1),
                  "cone2-complement-minus-hyperplanes")) == 7200
    dt = time.monotonic() - t0
    _report(8, "brute-force counts over F_5 and F_13 match the class "
               "polynomials for all four loci and both weight vectors",
            ok and dt < 60.0, f"{dt:.1f}s < 1min")


def test_criterion_09_split_form():
    t0 = time.monotonic()
    ok = all(split_form_check(q, w)
             for q in (5, 13) for w in ((1, 1, 1, 1), (1, 2, 1, 3)))
    dt = time.monotonic() - t0
    _report(9, "the splitting substitution is a polynomial identity over "
               "F_5 and F_13", ok and dt < 1.0, f"{dt:.2f}s < 1s")


@pytest.mark.skipif("not config.getoption('--stretch-n2')",
                    reason="stretch criterion; enable with --stretch-n2")
def test_criterion_10_stretch_n2():
    """Non-gating: a failure or overrun is reported, not an error."""
    t0 = time.monotonic()
    try:
        pipe2 = run_pipeline(2, cache_dir=CACHE_DIR)
        a = pipe2.sdw.alpha
        ok = (a.is_trig_free() and a.is_real()
              and all(cotangent_degree(exps, qpow) == -6
                      for (exps, qpow) in pipe2.density.expr.d))
        detail = f"alpha_4 has {a.term_count()} terms"
    except Exception as exc:  # report the failure mode, do not gate on it
        ok = False
        detail = f"{type(exc).__name__}: {exc}"
    dt = time.monotonic() - t0
    line = (f"{'PASS' if ok and dt < 3600 else 'FAIL'} criterion 10 "
            f"(stretch): n=2 pipeline; {detail}; {dt:.0f}s vs 1h budget")
    print(line)
    if not (ok and dt < 3600):
        pytest.xfail(line)
