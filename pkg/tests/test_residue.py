"""Parity filter, exact sphere moments, cycle integration, assembly, and the
period-integrand emitter."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bianchix.exprs import (
    AlgebraError,
    COS_ETA,
    COS_PSI,
    Expr,
    PI,
    SIN_ETA,
    SIN_PSI,
    gr,
    mu,
    om,
    u,
    zeta,
)
from bianchix.residue import (
    Density,
    PeriodTerm,
    assemble_alpha,
    cycle_integral,
    emit_period_form,
    eval_alpha_exact,
    parity_filter,
    period_terms_as_expr_pair,
    zeta_moment,
)
from bianchix.symbols import zeta_q_context


def _density(expr, n=1):
    return Density(n=n, expr=expr, qctx=zeta_q_context(n))


# ---------------------------------------------------------------------------
# sphere moments
# ---------------------------------------------------------------------------

def test_moment_examples():
    assert zeta_moment((0, 0, 0, 0)) == (Fraction(2), 2)
    assert zeta_moment((2, 0, 0, 0)) == (Fraction(1, 2), 2)
    assert zeta_moment((2, 2, 0, 0)) == (Fraction(1, 12), 2)
    assert zeta_moment((1, 0, 0, 0)) == (Fraction(0), 0)
    assert zeta_moment((3, 2, 1, 0)) == (Fraction(0), 0)


def test_moment_rejects_bad_input():
    with pytest.raises(AlgebraError):
        zeta_moment(())
    with pytest.raises(AlgebraError):
        zeta_moment((0, 0, 0))
    with pytest.raises(AlgebraError):
        zeta_moment((2, -2, 0, 0))


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def _moment_oracle(beta):
    """Monomial sphere moment via double factorials instead of Gamma values:
    2 prod (b_k - 1)!! / (2^(|b|/2) ((|b| + d)/2 - 1)!) times pi^(d/2)."""
    d = len(beta)
    if any(b % 2 for b in beta):
        return Fraction(0), 0
    num = Fraction(2)
    for b in beta:
        num *= _double_factorial(b - 1)
    tot = sum(beta)
    num /= 2 ** (tot // 2)
    num /= math.factorial((tot + d) // 2 - 1)
    return num, d // 2


@given(st.lists(st.integers(0, 4).map(lambda k: 2 * k), min_size=4, max_size=4)
       | st.lists(st.integers(0, 4).map(lambda k: 2 * k), min_size=6, max_size=6))
@settings(max_examples=80, deadline=None)
def test_moment_matches_double_factorial_oracle(beta):
    assert zeta_moment(beta) == _moment_oracle(beta)


# ---------------------------------------------------------------------------
# parity filter
# ---------------------------------------------------------------------------

def test_parity_filter_examples():
    keep = Expr.monomial(1, {SIN_ETA: 2, SIN_PSI: 4, zeta(1): 2}, qpow=2)
    drop_sin = Expr.monomial(1, {SIN_PSI: 1, zeta(2): 2}, qpow=2)
    drop_cos = Expr.monomial(1, {COS_ETA: 1, SIN_ETA: 2}, qpow=2)
    d = _density(keep + drop_sin + drop_cos)
    assert parity_filter(d).expr == keep
    # negative even sin powers survive the filter
    csc = Expr.monomial(1, {SIN_ETA: -2}, qpow=2)
    assert parity_filter(_density(csc)).expr == csc


def test_parity_filter_is_idempotent(pipe):
    once = parity_filter(pipe.density)
    assert parity_filter(once).expr == once.expr
    assert once.term_count() == 435


def test_dropped_terms_integrate_to_zero(pipe):
    """The cycle integral of the raw density equals that of its filtered
    part, exactly: everything the filter removes has zero integral."""
    raw = cycle_integral(pipe.density)
    filt = cycle_integral(parity_filter(pipe.density))
    assert raw == filt


# ---------------------------------------------------------------------------
# cycle integration
# ---------------------------------------------------------------------------

def test_cycle_integral_of_inverse_q():
    d = _density(Expr.monomial(1, {}, qpow=1))
    want = Expr.monomial(2, {u(1): 2, u(2): 2, u(3): 2, PI: 2})
    assert cycle_integral(d) == want


def test_cycle_integral_of_zeta1_squared():
    d = _density(Expr.monomial(1, {zeta(1): 2}, qpow=2))
    want = Expr.monomial(Fraction(1, 2), {u(1): 4, u(2): 4, u(3): 4, PI: 2})
    assert cycle_integral(d) == want


def test_cycle_integral_kills_odd_terms():
    d = _density(Expr.monomial(1, {zeta(1): 1, zeta(2): 2}, qpow=2))
    assert cycle_integral(d).is_zero()


def test_cycle_integral_keeps_angular_factors():
    d = _density(Expr.monomial(1, {SIN_PSI: 1}, qpow=1))
    got = cycle_integral(d)
    assert not got.is_trig_free()


def test_cycle_integral_rejects_out_of_range_zeta():
    d = _density(Expr.monomial(1, {zeta(5): 2}, qpow=1))
    with pytest.raises(AlgebraError):
        cycle_integral(d)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_alpha_structure(pipe):
    a = pipe.sdw.alpha
    assert a.term_count() == 15
    assert a.is_trig_free()
    assert a.is_real()
    for t in a.terms():
        assert t.qpow == 0
        for v, e in t.exps:
            assert v != PI
            if v[0] == u(1)[0]:
                assert e % 2 == 0


def test_alpha_frozen_values(pipe):
    a = pipe.sdw.alpha
    assert eval_alpha_exact(a, (1, 1, 1), {}) == Fraction(-1, 2)
    anchor = {(1, 1): Fraction(1, 2), (2, 1): -1, (3, 1): 1, (3, 2): 2}
    assert eval_alpha_exact(a, (1, 2, 3), anchor) == Fraction(143, 72)


def test_alpha_is_symmetric_under_factor_relabeling(pipe):
    a = pipe.sdw.alpha
    ks = sorted({v[2] for v, _e in
                 (p for t in a.terms() for p in t.exps) if v[0] == om(1, 1)[0]})
    for i, j in ((1, 2), (1, 3), (2, 3)):
        rules = {u(i): Expr.var(u(j)), u(j): Expr.var(u(i))}
        for k in ks:
            rules[om(i, k)] = Expr.var(om(j, k))
            rules[om(j, k)] = Expr.var(om(i, k))
        assert a.substitute(rules) == a


def test_assemble_stats(pipe):
    s = pipe.sdw.stats
    assert s["density_terms"] == 914
    assert s["filtered_terms"] == 435
    assert s["alpha_terms"] == 15
    assert s["neg_sin_eta_terms"] == 445
    assert s["neg_sin_psi_terms"] == 0
    assert s["layer_-3_terms"] == 944
    assert s["layer_-4_terms"] == 51300


def test_assemble_rejects_surviving_angles():
    d = _density(Expr.monomial(1, {SIN_ETA: 2, zeta(1): 2}, qpow=2))
    with pytest.raises(AlgebraError, match="angular"):
        assemble_alpha(d)


def test_eval_alpha_exact_validates():
    a = Expr.monomial(1, {u(1): 2})
    assert eval_alpha_exact(a, (Fraction(3, 2), 1, 1), {}) == Fraction(3, 2)
    with pytest.raises(AlgebraError):
        eval_alpha_exact(a, (0, 1, 1), {})
    with pytest.raises(AlgebraError):
        eval_alpha_exact(Expr.monomial(1, {u(1): 1}), (1, 1, 1), {})
    with pytest.raises(AlgebraError):
        eval_alpha_exact(Expr.monomial(1, {}, qpow=1), (1, 1, 1), {})


def test_alpha_matches_angular_quadrature(pipe):
    """Independent numeric check: fold exact double-factorial sphere moments
    into each raw density term, then integrate the angles by Gauss-Legendre
    at a generic point. Twelve digits against the exact evaluation."""
    ld = np.longdouble
    w = (ld(1), ld(2), ld(3))
    omega = {(1, 1): ld(1) / 2, (2, 1): ld(-1), (3, 1): ld(1), (3, 2): ld(2)}
    us = [np.sqrt(x) for x in w]
    wabs = [1 / (us[0] * us[1] * us[2]), us[0] / (us[1] * us[2]),
            us[1] / (us[0] * us[2]), us[2] / (us[0] * us[1])]
    pi_ld = ld("3.141592653589793238462643383279")

    nodes, weights = np.polynomial.legendre.leggauss(24)
    # extended precision: the csc^2(eta) terms cancel through large partial
    # sums near eta = 0 and would cost a couple of digits in float64
    ang = (nodes.astype(ld) + 1) * (pi_ld / 4)
    wq = weights.astype(ld) * (pi_ld / 4)
    eta = ang[:, None]
    psi = ang[None, :]
    se, ce = np.sin(eta), np.cos(eta)
    sp, cp = np.sin(psi), np.cos(psi)

    kinds = {"u": u(1)[0], "om": om(1, 1)[0], "zeta": zeta(1)[0]}
    total = np.zeros((24, 24), dtype=np.longdouble)
    for t in pipe.density.expr.terms():
        const = ld(t.coeff.re.numerator) / ld(t.coeff.re.denominator)
        beta = [0, 0, 0, 0]
        for v, e in t.exps:
            if v[0] == kinds["u"]:
                const *= us[v[1] - 1] ** e
            elif v[0] == kinds["om"]:
                const *= omega.get((v[1], v[2]), ld(0)) ** e
            elif v[0] == kinds["zeta"]:
                beta[v[1] - 1] = e
        rat, pi_pow = _moment_oracle(beta)
        if rat == 0 or const == 0:
            continue
        const *= ld(rat.numerator) / ld(rat.denominator) * pi_ld ** pi_pow
        for i in range(4):
            const *= wabs[i] ** -(beta[i] + 1)
        grid = np.full((24, 24), const, dtype=np.longdouble)
        for v, e in t.exps:
            if v == SIN_ETA:
                grid = grid * se ** e
            elif v == COS_ETA:
                grid = grid * ce ** e
            elif v == SIN_PSI:
                grid = grid * sp ** e
            elif v == COS_PSI:
                grid = grid * cp ** e
        total += grid

    integral = wq @ (se[:, 0] * total) @ wq
    alpha_num = float(integral / pi_ld ** 3)
    anchor = {(1, 1): Fraction(1, 2), (2, 1): -1, (3, 1): 1, (3, 2): 2}
    exact = float(eval_alpha_exact(pipe.sdw.alpha, (1, 2, 3), anchor))
    assert alpha_num == pytest.approx(exact, rel=1e-12)


# ---------------------------------------------------------------------------
# period form
# ---------------------------------------------------------------------------

def test_period_form_of_constant_density():
    pf = emit_period_form(_density(Expr.one()))
    assert pf.terms == [PeriodTerm(gr(1), (), 0, 1, 0)]
    assert pf.stats["max_mden"] == 1


def test_period_form_of_sin_squares():
    pf = emit_period_form(_density(Expr.monomial(1, {SIN_ETA: 2, SIN_PSI: 2})))
    num, qpow, mden, sden = period_terms_as_expr_pair(pf.terms)
    want = Expr.var(mu(2), 2) * (
        Expr.one() - Expr.var(mu(1), 2) - Expr.var(mu(2), 2))
    assert (num, qpow, mden, sden) == (want, 0, 2, 0)


def test_period_form_of_csc_squared():
    pf = emit_period_form(_density(Expr.monomial(1, {SIN_ETA: -2}, qpow=2)))
    assert pf.terms == [PeriodTerm(gr(1), (), 2, 0, 1)]


def test_period_form_of_sin_eta_fourth():
    pf = emit_period_form(_density(Expr.monomial(1, {SIN_ETA: 4})))
    num, qpow, mden, sden = period_terms_as_expr_pair(pf.terms)
    circle = Expr.one() - Expr.var(mu(1), 2) - Expr.var(mu(2), 2)
    assert (num, qpow, mden, sden) == (circle * circle, 0, 3, 0)


def test_period_form_requires_filtered_input():
    with pytest.raises(AlgebraError, match="parity"):
        emit_period_form(_density(Expr.var(SIN_PSI)))


def test_period_pair_rejects_mixed_q_powers():
    terms = [PeriodTerm(gr(1), (), 0, 1, 0), PeriodTerm(gr(1), (), 1, 1, 0)]
    with pytest.raises(AlgebraError, match="mixed Q"):
        period_terms_as_expr_pair(terms)


def test_period_form_stats(pipe):
    s = pipe.period.stats
    assert s["period_terms"] == 435
    assert s["circle_denominator_terms"] == 75
    assert s["max_mden"] == 1
    assert pipe.period.domain.sphere_dim == 3
    obj = pipe.period.domain.to_obj()
    assert "mu1^2 + mu2^2 < 1" in obj["constraints"]


def test_period_form_matches_density_exactly(pipe):
    """Full exact round trip: substitute the angle images of mu back into
    every period term, clear the two polynomial denominators, and compare
    with the filtered density times the Jacobian factor."""
    terms = pipe.period.terms
    M = max(t.mden for t in terms)
    S = max(t.sden for t in terms)
    mu_rules = {mu(1): Expr.monomial(1, {COS_ETA: 1, COS_PSI: 1}),
                mu(2): Expr.var(SIN_PSI)}
    one_minus_mu2sq = Expr.one() - Expr.var(SIN_PSI, 2)
    circle = Expr.monomial(1, {SIN_ETA: 2}) * one_minus_mu2sq

    lhs = Expr.zero()
    for t in terms:
        e = Expr.monomial(t.coeff, dict(t.exps), qpow=t.qpow)
        e = e.substitute(mu_rules)
        e = e * one_minus_mu2sq ** (M - t.mden) * circle ** (S - t.sden)
        lhs = lhs + e
    rhs = pipe.filtered.expr * one_minus_mu2sq ** (M - 1) * circle ** S
    assert lhs == rhs


def test_period_form_json_and_render(pipe):
    obj = pipe.period.to_obj()
    assert obj["n"] == 1
    assert len(obj["terms"]) == 435
    sample = obj["terms"][0]
    assert set(sample) == {"re", "im", "exps", "qpow", "mden", "sden"}
    text = pipe.period.render()
    assert "Q" in text and "mu2" in text
