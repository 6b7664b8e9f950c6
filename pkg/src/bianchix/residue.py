"""From the traced zeta-density to the exact heat coefficient and its
period-integrand form.

The pipeline here is: parity-filter the density, integrate the zeta variables
over the cycle Q_W = 1 with exact sphere moments (rational times an explicit
pi power), check that the angular dependence has cancelled, and apply the
overall angular prefactor, which must kill every pi power. Everything is an
exact statement about canonical expressions; any residue of trig, pi, or an
imaginary part is an error, not a tolerance.

The period emitter rewrites the filtered density in the square coordinates
mu_1 = -cos(eta)cos(psi), mu_2 = sin(psi). Terms with negative even sin(eta)
powers put the boundary circle 1 - mu_1^2 - mu_2^2 in the denominator; such
terms genuinely occur, so period terms carry that power explicitly and the
count is reported in the stats rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

from .exprs import (
    AlgebraError,
    COS_ETA,
    COS_PSI,
    Expr,
    GaussianRational,
    PI,
    QContext,
    SIN_ETA,
    SIN_PSI,
    gr,
    K_MU,
    K_OMEGA,
    K_PI,
    K_U,
    K_XI,
    K_ZETA,
    mu,
    var_name,
)
from .symbols import w_abs_exps

_TRIG = (SIN_ETA, COS_ETA, SIN_PSI, COS_PSI)


@dataclass
class Density:
    """A traced symbol layer in zeta coordinates over its Q context."""

    n: int
    expr: Expr
    qctx: QContext

    def term_count(self) -> int:
        return self.expr.term_count()


# ---------------------------------------------------------------------------
# parity filter
# ---------------------------------------------------------------------------

def _term_parities(exps: tuple) -> tuple[int, int, int, int]:
    m = dict(exps)
    return (m.get(SIN_ETA, 0), m.get(COS_ETA, 0), m.get(SIN_PSI, 0), m.get(COS_PSI, 0))


def _is_even_term(exps: tuple) -> bool:
    se, ce, sp, cp = _term_parities(exps)
    return se % 2 == 0 and ce == 0 and sp % 2 == 0 and cp == 0


def parity_filter(d: Density) -> Density:
    """Drop terms odd in either angle.

    A term survives iff its sin exponents are even and its (canonical, 0/1)
    cos exponents are 0. The dropped terms integrate to zero over the cycle;
    that this is so is a theorem checked by a dedicated test, not assumed by
    the integrator itself.
    """
    kept = {k: c for k, c in d.expr.d.items() if _is_even_term(k[0])}
    return Density(n=d.n, expr=Expr(kept), qctx=d.qctx)


# ---------------------------------------------------------------------------
# exact sphere moments
# ---------------------------------------------------------------------------

def _gamma_half(a: int) -> Fraction:
    """Gamma(a + 1/2) as rational * sqrt(pi): returns the rational part."""
    return Fraction(factorial(2 * a), 4 ** a * factorial(a))


def zeta_moment(beta) -> tuple[Fraction, int]:
    """Monomial moment over the unit sphere in R^d, d = len(beta) even.

    Returns (rational, pi power). Zero when any exponent is odd; otherwise
    2 * prod Gamma((b_k + 1)/2) / Gamma((|beta| + d)/2) with every
    half-integer Gamma expanded exactly, so the pi power is always d/2.
    """
    beta = tuple(beta)
    d = len(beta)
    if d == 0 or d % 2:
        raise AlgebraError(f"moment needs an even number of exponents, got {d}")
    if any(b < 0 for b in beta):
        raise AlgebraError("negative sphere-moment exponent")
    if any(b % 2 for b in beta):
        return Fraction(0), 0
    num = Fraction(2)
    for b in beta:
        num *= _gamma_half(b // 2)
    s = (sum(beta) + d) // 2
    return num / factorial(s - 1), d // 2


# ---------------------------------------------------------------------------
# cycle integration
# ---------------------------------------------------------------------------

def cycle_integral(d: Density) -> Expr:
    """Integrate the zeta variables over the cycle Q_W = 1.

    Per term: Q^rho restricts to 1; rescaling zeta_i by |W_i| (i = 1..4,
    trailing coordinates have weight one) maps the cycle onto the unit
    sphere, costing |W_i|^-(beta_i + 1) per coordinate, one power from the
    volume form; then the monomial sphere moment. Trig factors ride along
    untouched, so the result may still carry angular dependence: deciding
    that it must not is the assembler's job.
    """
    nz = 2 * d.n + 2
    out: dict = {}
    for (exps, qpow), c in d.expr.d.items():
        beta = [0] * nz
        rest = []
        for v, e in exps:
            if v[0] == K_ZETA:
                if v[1] > nz:
                    raise AlgebraError(f"{var_name(v)} out of range for n={d.n}")
                beta[v[1] - 1] = e
            else:
                rest.append((v, e))
        rat, pi_pow = zeta_moment(beta)
        if rat == 0:
            continue
        for i in range(1, 5):
            for uv, ue in w_abs_exps(i).items():
                rest.append((uv, -ue * (beta[i - 1] + 1)))
        rest.append((PI, pi_pow))
        from .exprs import _acc  # shared canonical accumulator
        _acc(out, c * rat, rest, 0)
    return Expr(out)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass
class SdwResult:
    """Exact anisotropy coefficient with pipeline statistics."""

    n: int
    alpha: Expr
    stats: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {"n": self.n, "alpha": self.alpha.to_obj(), "stats": self.stats}

    def render(self) -> str:
        return self.alpha.render(w_form=True)


def assemble_alpha(d: Density, extra_stats: dict | None = None) -> SdwResult:
    """Parity-filter, integrate the cycle, apply the angular prefactor.

    The eta and psi integrals contribute 1 and pi/2 once the integrand is
    angle-free; with the residue normalization 1/pi^(n+2) every pi power must
    cancel exactly. Trig survival, pi survival, an imaginary part, or an odd
    u exponent are each hard errors.
    """
    filt = parity_filter(d)
    integ = cycle_integral(filt)
    if not integ.is_trig_free():
        raise AlgebraError("angular independence violated: trig survives the cycle integral")
    prefactor = Expr.monomial(1, {PI: -(d.n + 2)}) * Expr.monomial(Fraction(1, 2), {PI: 1})
    alpha = integ * prefactor
    for (exps, qpow) in alpha.d:
        if qpow:
            raise AlgebraError("Q power survived the cycle integral")
        for v, e in exps:
            if v[0] == K_PI:
                raise AlgebraError("rationality violated: pi power survives the prefactor")
            if v[0] in (K_ZETA, K_XI, K_MU):
                raise AlgebraError(f"unexpected variable {var_name(v)} in alpha")
            if v[0] == K_U and e % 2:
                raise AlgebraError(f"odd u exponent in alpha: {var_name(v)}^{e}")
    if not alpha.is_real():
        raise AlgebraError("alpha has an imaginary part")

    stats = dict(extra_stats or {})
    stats.update({
        "density_terms": d.term_count(),
        "filtered_terms": filt.term_count(),
        "alpha_terms": alpha.term_count(),
        "neg_sin_psi_terms": sum(
            1 for (exps, _q) in d.expr.d
            for v, e in exps if v == SIN_PSI and e < 0),
        "neg_sin_eta_terms": sum(
            1 for (exps, _q) in d.expr.d
            for v, e in exps if v == SIN_ETA and e < 0),
    })
    return SdwResult(n=d.n, alpha=alpha, stats=stats)


def eval_alpha_exact(alpha: Expr, w: tuple, omega: dict) -> Fraction:
    """Evaluate alpha at exact rational anisotropy data.

    ``w`` are the three (positive) factors, ``omega[(i, j)]`` their j-th
    derivatives (absent keys read 0). Valid because every u exponent in
    alpha is even.
    """
    w = tuple(Fraction(x) for x in w)
    if any(x <= 0 for x in w):
        raise AlgebraError("w values must be positive")
    tot = Fraction(0)
    for (exps, qpow), c in alpha.d.items():
        if qpow or c.im != 0:
            raise AlgebraError("not an exact coefficient expression")
        val = c.re
        for v, e in exps:
            if v[0] == K_U:
                if e % 2:
                    raise AlgebraError("odd u exponent")
                val *= w[v[1] - 1] ** (e // 2)
            elif v[0] == K_OMEGA:
                val *= Fraction(omega.get((v[1], v[2]), 0)) ** e
            else:
                raise AlgebraError(f"unexpected variable {var_name(v)}")
        tot += val
    return tot


# ---------------------------------------------------------------------------
# period form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainDescriptor:
    """Semialgebraic integration domain of the period integrand."""

    sphere_dim: int
    disk: bool = True  # mu_1^2 + mu_2^2 < 1 (the image of the angle square)

    def to_obj(self) -> dict:
        cons = ["0 < mu1 < 1", "0 < mu2 < 1"]
        if self.disk:
            cons.append("mu1^2 + mu2^2 < 1")
        return {"constraints": cons, "zeta": f"unit sphere S^{self.sphere_dim}"}


@dataclass(frozen=True)
class PeriodTerm:
    """One monomial of the period integrand.

    value = coeff * monomial(exps) / (Q^qpow (1-mu2^2)^mden (1-mu1^2-mu2^2)^sden)
    """

    coeff: GaussianRational
    exps: tuple
    qpow: int
    mden: int
    sden: int

    def to_obj(self) -> dict:
        return {
            "re": [self.coeff.re.numerator, self.coeff.re.denominator],
            "im": [self.coeff.im.numerator, self.coeff.im.denominator],
            "exps": {var_name(v): e for v, e in self.exps},
            "qpow": self.qpow,
            "mden": self.mden,
            "sden": self.sden,
        }


@dataclass
class PeriodForm:
    """The filtered density over the square coordinates, divided by 1-mu2^2."""

    n: int
    terms: list
    domain: DomainDescriptor
    qctx: QContext
    stats: dict = field(default_factory=dict)

    def term_count(self) -> int:
        return len(self.terms)

    def to_obj(self) -> dict:
        return {"n": self.n, "domain": self.domain.to_obj(),
                "terms": [t.to_obj() for t in self.terms], "stats": self.stats}

    def render(self) -> str:
        parts = []
        for t in self.terms:
            body = "*".join([str(t.coeff)] + [
                f"{var_name(v)}^{e}" if e != 1 else var_name(v) for v, e in t.exps])
            dens = []
            if t.qpow:
                dens.append("Q" if t.qpow == 1 else f"Q^{t.qpow}")
            if t.mden:
                dens.append(f"(1-mu2^2)^{t.mden}" if t.mden > 1 else "(1-mu2^2)")
            if t.sden:
                dens.append(f"(1-mu1^2-mu2^2)^{t.sden}" if t.sden > 1
                            else "(1-mu1^2-mu2^2)")
            parts.append(body + (" / (" + "*".join(dens) + ")" if dens else ""))
        return "  +  ".join(parts) if parts else "0"


def emit_period_form(filtered: Density) -> PeriodForm:
    """Rewrite a parity-filtered density as the period integrand.

    sin(psi)^2b -> mu2^2b; sin(eta)^2a -> ((1-mu1^2-mu2^2)/(1-mu2^2))^a; the
    volume-form Jacobian divides by one more power of 1-mu2^2. Positive a
    expands the circle polynomial into the numerator; negative a lands it in
    the denominator (reported in stats, see module docstring).
    """
    acc: dict = {}
    for (exps, qpow), c in filtered.expr.d.items():
        se, ce, sp, cp = _term_parities(exps)
        if se % 2 or ce or sp % 2 or cp:
            raise AlgebraError("period emitter needs a parity-filtered density")
        a, b = se // 2, sp // 2
        base = [(v, e) for v, e in exps if v not in _TRIG]
        if b:
            base.append((mu(2), 2 * b))
        mden, sden = 1, 0
        numer: list[tuple[Fraction, tuple]] = [(Fraction(1), ())]
        if a > 0:
            mden += a
            numer = _circle_pow(a)
        elif a < 0:
            sden = -a
            numer = _square_pow(-a - 1)  # (1-mu2^2)^{-a} over the Jacobian power
            mden = 0
        for cf, mexps in numer:
            key_exps = _merge_mu(base, mexps)
            key = (key_exps, qpow, mden, sden)
            prev = acc.get(key, GaussianRational(0))
            tot = prev + c * cf
            if tot.is_zero():
                acc.pop(key, None)
            else:
                acc[key] = tot

    terms = [PeriodTerm(c, k[0], k[1], k[2], k[3]) for k, c in sorted(
        acc.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3]))]
    stats = {
        "period_terms": len(terms),
        "circle_denominator_terms": sum(1 for t in terms if t.sden),
        "max_mden": max((t.mden for t in terms), default=0),
    }
    return PeriodForm(
        n=filtered.n,
        terms=terms,
        domain=DomainDescriptor(sphere_dim=2 * filtered.n + 1),
        qctx=filtered.qctx,
        stats=stats,
    )


def _circle_pow(p: int) -> list[tuple[Fraction, tuple]]:
    """(1 - mu1^2 - mu2^2)^p as (coeff, mu exps) monomials."""
    out: dict = {}
    for k1 in range(p + 1):
        for k2 in range(p - k1 + 1):
            c = Fraction(factorial(p), factorial(k1) * factorial(k2)
                         * factorial(p - k1 - k2)) * (-1) ** (k1 + k2)
            key = ((mu(1), 2 * k1), (mu(2), 2 * k2))
            out[key] = out.get(key, Fraction(0)) + c
    return [(c, e) for e, c in out.items() if c]


def _square_pow(p: int) -> list[tuple[Fraction, tuple]]:
    """(1 - mu2^2)^p as (coeff, mu exps) monomials."""
    return [(Fraction(comb(p, k) * (-1) ** k), ((mu(2), 2 * k),))
            for k in range(p + 1)]


def _merge_mu(base: list, extra: tuple) -> tuple:
    d: dict = {}
    for v, e in list(base) + list(extra):
        if e:
            ne = d.get(v, 0) + e
            if ne:
                d[v] = ne
            elif v in d:
                del d[v]
    return tuple(sorted(d.items()))


def period_terms_as_expr_pair(terms) -> tuple[Expr, int, int, int]:
    """Common-denominator view: (numerator Expr, qpow, mden, sden).

    Used by tests to compare period data as rational functions. All terms
    must share one Q power (clearing mixed Q powers would need the explicit
    Q polynomial); the mu denominators are cleared exactly.
    """
    if not terms:
        return Expr.zero(), 0, 0, 0
    Q = {t.qpow for t in terms}
    if len(Q) > 1:
        raise AlgebraError("mixed Q powers in rational-function comparison")
    M = max(t.mden for t in terms)
    S = max(t.sden for t in terms)
    total = Expr.zero()
    for t in terms:
        e = Expr.monomial(t.coeff, dict(t.exps))
        e = e * _pairs_to_expr(_square_pow(M - t.mden))
        e = e * _pairs_to_expr(_circle_pow(S - t.sden))
        total = total + e
    return total, Q.pop(), M, S


def _pairs_to_expr(pairs) -> Expr:
    return Expr.from_terms([(gr(c), e, 0) for c, e in pairs])
