"""Exact expression algebra for the anisotropy pipeline.

Everything downstream (symbol calculus, residue integration, the numeric
verifier) works with one canonical expression type: finite sums of Laurent
monomials over the Gaussian rationals, with a formal power of a registered
quadratic denominator Q attached to each term.

Variable universe (total order is the declaration order below):

* ``u1, u2, u3``      square roots of the anisotropy factors; ``w_i`` itself is
                      always ``u_i^2``, never a separate symbol.
* ``om{i}_{j}``       j-th time derivative of ``w_i`` (j >= 1).
* ``sin_eta, cos_eta, sin_psi, cos_psi``
                      canonical trig: a cos power of 2 is rewritten as
                      ``1 - sin^2`` on construction, so cos exponents are
                      always 0 or 1 while sin exponents range over all of Z
                      (csc and cot give negative powers).
* ``xi{k}, zeta{k}``  cotangent coordinates before / after the quadratic-form
                      change of variables; exponents must stay >= 0.
* ``mu1, mu2``        square coordinates of the period domain.
* ``pi``              explicit pi power carried by sphere moments so that the
                      final rationality cancellation is an exact check.

There is deliberately no variable for the third Euler angle: the geometry is
independent of it and no operation here can introduce it.

``Q^rho`` is never expanded; derivations apply the chain rule through a
registered :class:`QContext`. All normalization happens on construction, so
every :class:`Expr` in the wild is canonical and equality is plain dict
equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from hashlib import sha256
from math import comb

__all__ = [
    "AlgebraError",
    "GaussianRational",
    "GR_ZERO",
    "GR_ONE",
    "GR_I",
    "gr",
    "u",
    "om",
    "SIN_ETA",
    "COS_ETA",
    "SIN_PSI",
    "COS_PSI",
    "xi",
    "zeta",
    "mu",
    "PI",
    "var_name",
    "var_from_name",
    "Term",
    "Expr",
    "QContext",
    "Mat4",
    "GammaRep",
    "gamma_rep",
    "GAMMA_SPLIT",
    "GAMMA_CHIRAL",
]


class AlgebraError(ValueError):
    """Raised when an operation would leave the representable algebra."""


# ---------------------------------------------------------------------------
# variables
# ---------------------------------------------------------------------------

K_U, K_OMEGA, K_SIN_ETA, K_COS_ETA, K_SIN_PSI, K_COS_PSI, K_XI, K_ZETA, K_MU, K_PI = range(10)

_TRIG_KINDS = (K_SIN_ETA, K_COS_ETA, K_SIN_PSI, K_COS_PSI)

# A variable id is an interned (kind, a, b) tuple; tuple comparison realizes
# the documented total order.
_VAR_CACHE: dict[tuple, tuple] = {}


def _v(kind: int, a: int = 0, b: int = 0) -> tuple:
    key = (kind, a, b)
    got = _VAR_CACHE.get(key)
    if got is None:
        got = _VAR_CACHE.setdefault(key, key)
    return got


def u(i: int) -> tuple:
    """sqrt(w_i), i in {1, 2, 3}."""
    if i not in (1, 2, 3):
        raise AlgebraError(f"u index out of range: {i}")
    return _v(K_U, i)


def om(i: int, j: int) -> tuple:
    """j-th time derivative of w_i, j >= 1 (w_i itself is u(i)**2)."""
    if i not in (1, 2, 3):
        raise AlgebraError(f"om index out of range: {i}")
    if j < 1:
        raise AlgebraError(f"om derivative order must be >= 1, got {j}")
    return _v(K_OMEGA, i, j)


SIN_ETA = _v(K_SIN_ETA)
COS_ETA = _v(K_COS_ETA)
SIN_PSI = _v(K_SIN_PSI)
COS_PSI = _v(K_COS_PSI)


def xi(k: int) -> tuple:
    if k < 1:
        raise AlgebraError(f"xi index out of range: {k}")
    return _v(K_XI, k)


def zeta(k: int) -> tuple:
    if k < 1:
        raise AlgebraError(f"zeta index out of range: {k}")
    return _v(K_ZETA, k)


def mu(i: int) -> tuple:
    if i not in (1, 2):
        raise AlgebraError(f"mu index out of range: {i}")
    return _v(K_MU, i)


PI = _v(K_PI)

_FIXED_NAMES = {
    SIN_ETA: "sin_eta",
    COS_ETA: "cos_eta",
    SIN_PSI: "sin_psi",
    COS_PSI: "cos_psi",
    PI: "pi",
}
_FIXED_BY_NAME = {name: v for v, name in _FIXED_NAMES.items()}


def var_name(v: tuple) -> str:
    """Stable string id used in JSON ("u1", "om1_2", "zeta3", ...)."""
    kind = v[0]
    if kind == K_U:
        return f"u{v[1]}"
    if kind == K_OMEGA:
        return f"om{v[1]}_{v[2]}"
    if kind == K_XI:
        return f"xi{v[1]}"
    if kind == K_ZETA:
        return f"zeta{v[1]}"
    if kind == K_MU:
        return f"mu{v[1]}"
    return _FIXED_NAMES[v]


def var_from_name(name: str) -> tuple:
    if name in _FIXED_BY_NAME:
        return _FIXED_BY_NAME[name]
    if name.startswith("om"):
        i, _, j = name[2:].partition("_")
        return om(int(i), int(j))
    for prefix, ctor in (("zeta", zeta), ("xi", xi), ("mu", mu), ("u", u)):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            return ctor(int(name[len(prefix):]))
    raise AlgebraError(f"unknown variable name: {name!r}")


# ---------------------------------------------------------------------------
# Gaussian rationals
# ---------------------------------------------------------------------------

_ZERO = Fraction(0)
_ONE = Fraction(1)


class GaussianRational:
    """Exact element of Q(i). Fractions keep everything in lowest terms."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", re if isinstance(re, Fraction) else Fraction(re))
        object.__setattr__(self, "im", im if isinstance(im, Fraction) else Fraction(im))

    def __setattr__(self, *a):
        raise AttributeError("GaussianRational is immutable")

    def __add__(self, other):
        return GaussianRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re * other, self.im * other)
        if self.im == 0:
            if other.im == 0:
                return GaussianRational(self.re * other.re)
            return GaussianRational(self.re * other.re, self.re * other.im)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        nrm = self.re * self.re + self.im * self.im
        if nrm == 0:
            raise AlgebraError("division by zero in Q(i)")
        return GaussianRational(self.re / nrm, -self.im / nrm)

    def conj(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        return (
            isinstance(other, GaussianRational)
            and self.re == other.re
            and self.im == other.im
        )

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"gr({self.re}, {self.im})" if self.im else f"gr({self.re})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re} {sign} {abs(self.im)}*i)"


def gr(re=0, im=0) -> GaussianRational:
    return GaussianRational(re, im)


GR_ZERO = gr(0)
GR_ONE = gr(1)
GR_I = gr(0, 1)


# ---------------------------------------------------------------------------
# canonical term accumulation
# ---------------------------------------------------------------------------

def _acc(store: dict, coeff: GaussianRational, exps, qpow: int) -> None:
    """Merge one raw term into ``store`` in canonical form.

    ``exps`` is an iterable of (var, exponent) pairs, not necessarily sorted
    or nonzero. Reduces cos powers >= 2 via cos^2 = 1 - sin^2 (which may fan
    out into several stored terms) and validates the exponent-range
    invariants.
    """
    if coeff.is_zero():
        return
    if qpow < 0:
        raise AlgebraError("negative Q power")
    ed: dict = {}
    for v, e in exps:
        if e:
            ne = ed.get(v, 0) + e
            if ne:
                ed[v] = ne
            elif v in ed:
                del ed[v]
    for v, e in ed.items():
        kind = v[0]
        if kind in (K_XI, K_ZETA) and e < 0:
            raise AlgebraError(f"negative exponent on {var_name(v)}")
        if kind in (K_COS_ETA, K_COS_PSI) and e < 0:
            raise AlgebraError(f"negative exponent on {var_name(v)}")
    ce = ed.pop(COS_ETA, 0)
    cp = ed.pop(COS_PSI, 0)
    if ce >= 2 or cp >= 2:
        # (1 - sin^2)^m expansion for each cos pair, done in one double loop
        me, re_ = divmod(ce, 2)
        mp, rp = divmod(cp, 2)
        se = ed.get(SIN_ETA, 0)
        sp = ed.get(SIN_PSI, 0)
        base = [(v, e) for v, e in ed.items() if v not in (SIN_ETA, SIN_PSI)]
        for a in range(me + 1):
            for b in range(mp + 1):
                c2 = coeff * Fraction(comb(me, a) * comb(mp, b) * (-1) ** (a + b))
                pairs = base + [
                    (SIN_ETA, se + 2 * a),
                    (SIN_PSI, sp + 2 * b),
                    (COS_ETA, re_),
                    (COS_PSI, rp),
                ]
                _acc(store, c2, pairs, qpow)
        return
    if ce:
        ed[COS_ETA] = ce
    if cp:
        ed[COS_PSI] = cp
    key = (tuple(sorted(ed.items())), qpow)
    prev = store.get(key)
    tot = coeff if prev is None else prev + coeff
    if tot.is_zero():
        if prev is not None:
            del store[key]
    else:
        store[key] = tot


@dataclass(frozen=True)
class Term:
    """Read-only view of one canonical term."""

    coeff: GaussianRational
    exps: tuple  # sorted ((var, exp), ...)
    qpow: int

    def exp_of(self, v: tuple) -> int:
        for w, e in self.exps:
            if w == v:
                return e
        return 0


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

class Expr:
    """Canonical sum of terms ``coeff * monomial * Q^-qpow``.

    Internally a dict {(sorted exps tuple, qpow): GaussianRational}. All
    constructors normalize, so two expressions are equal as rational
    expressions in this grammar iff their dicts are equal.
    """

    __slots__ = ("d",)

    def __init__(self, d: dict | None = None):
        self.d = d if d is not None else {}

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "Expr":
        return Expr()

    @staticmethod
    def one() -> "Expr":
        return Expr.const(1)

    @staticmethod
    def const(c) -> "Expr":
        if not isinstance(c, GaussianRational):
            c = gr(c)
        out: dict = {}
        _acc(out, c, (), 0)
        return Expr(out)

    @staticmethod
    def var(v: tuple, e: int = 1) -> "Expr":
        return Expr.monomial(GR_ONE, {v: e})

    @staticmethod
    def monomial(coeff, exps: dict, qpow: int = 0) -> "Expr":
        if not isinstance(coeff, GaussianRational):
            coeff = gr(coeff)
        out: dict = {}
        _acc(out, coeff, tuple(exps.items()), qpow)
        return Expr(out)

    @staticmethod
    def from_terms(terms) -> "Expr":
        """Normalize an iterable of (coeff, exps-pairs, qpow) raw terms."""
        out: dict = {}
        for coeff, exps, qpow in terms:
            if not isinstance(coeff, GaussianRational):
                coeff = gr(coeff)
            _acc(out, coeff, exps, qpow)
        return Expr(out)

    # -- views --------------------------------------------------------------

    def terms(self) -> list[Term]:
        return [Term(c, k[0], k[1]) for k, c in sorted(self.d.items())]

    def term_count(self) -> int:
        return len(self.d)

    def is_zero(self) -> bool:
        return not self.d

    def is_real(self) -> bool:
        return all(c.im == 0 for c in self.d.values())

    def is_trig_free(self) -> bool:
        return not any(v[0] in _TRIG_KINDS for ex, _ in self.d for v, _e in ex)

    def vars_present(self) -> set:
        return {v for ex, _q in self.d for v, _e in ex}

    def max_qpow(self) -> int:
        return max((q for _ex, q in self.d), default=0)

    def constant_value(self) -> GaussianRational:
        """The value of a constant expression (raises otherwise)."""
        if self.is_zero():
            return GR_ZERO
        if len(self.d) == 1:
            (exps, qpow), c = next(iter(self.d.items()))
            if not exps and qpow == 0:
                return c
        raise AlgebraError("expression is not a constant")

    # -- ring operations ----------------------------------------------------

    def __add__(self, other: "Expr") -> "Expr":
        if not isinstance(other, Expr):
            return NotImplemented
        a, b = self.d, other.d
        if len(a) < len(b):
            a, b = b, a
        out = dict(a)
        for k, c in b.items():
            prev = out.get(k)
            tot = c if prev is None else prev + c
            if tot.is_zero():
                if prev is not None:
                    del out[k]
            else:
                out[k] = tot
        return Expr(out)

    def __sub__(self, other: "Expr") -> "Expr":
        return self + (-other)

    def __neg__(self) -> "Expr":
        return Expr({k: -c for k, c in self.d.items()})

    def scale(self, c) -> "Expr":
        """Multiply by a constant (int, Fraction, or GaussianRational)."""
        if not isinstance(c, GaussianRational):
            c = gr(c)
        if c.is_zero():
            return Expr()
        return Expr({k: v * c for k, v in self.d.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self.scale(other)
        if not isinstance(other, Expr):
            return NotImplemented
        out: dict = {}
        a, b = self.d, other.d
        if len(a) > len(b):
            a, b = b, a
        for (e1, q1), c1 in a.items():
            for (e2, q2), c2 in b.items():
                _acc(out, c1 * c2, e1 + e2, q1 + q2)
        return Expr(out)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "Expr":
        if e < 0:
            # only single-term monomials with qpow 0 are invertible here
            if len(self.d) != 1:
                raise AlgebraError("negative power of a non-monomial")
            (exps, qpow), c = next(iter(self.d.items()))
            if qpow:
                raise AlgebraError("negative power of a Q-denominator term")
            inv = Expr.monomial(c.inverse(), {v: -x for v, x in exps})
            return inv ** (-e)
        out = Expr.one()
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, Expr) and self.d == other.d

    def __hash__(self):
        return hash(frozenset(self.d.items()))

    def __repr__(self):
        return f"Expr({self.render()})"

    # -- calculus -----------------------------------------------------------

    def derive(self, dtag, qctx: "QContext | None" = None) -> "Expr":
        """Formal derivative along ``dtag``: "t", "eta", "psi", or ("xi", k).

        Terms with qpow > 0 need ``qctx`` for the chain rule
        d(Q^-r) = -r Q^-(r+1) dQ.
        """
        _check_dtag(dtag)
        out: dict = {}
        for (exps, qpow), c in self.d.items():
            for v, e in exps:
                kind = v[0]
                if dtag == "t":
                    if kind == K_U:
                        # d/dt u^e = (e/2) om(i,1) u^(e-2)
                        _acc(out, c * Fraction(e, 2),
                             exps + ((v, -2), (om(v[1], 1), 1)), qpow)
                    elif kind == K_OMEGA:
                        _acc(out, c * Fraction(e),
                             exps + ((v, -1), (om(v[1], v[2] + 1), 1)), qpow)
                elif dtag == "eta":
                    if kind == K_SIN_ETA:
                        _acc(out, c * Fraction(e), exps + ((v, -1), (COS_ETA, 1)), qpow)
                    elif kind == K_COS_ETA:
                        # canonical cos exponent is 1: d cos = -sin
                        _acc(out, -c * Fraction(e), exps + ((v, -1), (SIN_ETA, 1)), qpow)
                elif dtag == "psi":
                    if kind == K_SIN_PSI:
                        _acc(out, c * Fraction(e), exps + ((v, -1), (COS_PSI, 1)), qpow)
                    elif kind == K_COS_PSI:
                        _acc(out, -c * Fraction(e), exps + ((v, -1), (SIN_PSI, 1)), qpow)
                else:
                    if kind == K_XI and v[1] == dtag[1]:
                        _acc(out, c * Fraction(e), exps + ((v, -1),), qpow)
            if qpow:
                if qctx is None:
                    raise AlgebraError("derivative of Q^-rho needs a QContext")
                for (e2, q2), c2 in qctx.deriv(dtag).d.items():
                    _acc(out, c * c2 * Fraction(-qpow), exps + e2, qpow + 1 + q2)
        return Expr(out)

    def substitute(self, rules: dict) -> "Expr":
        """Simultaneously replace variables per ``rules`` (var -> Expr).

        Positive exponents accept any replacement expression; negative
        exponents only a single-term monomial one (its inverse is formed).
        Q-denominators pass through untouched; rewriting Q itself is the
        caller's job (see the zeta-stage transform).
        """
        pow_cache: dict = {}

        def rpow(v, e):
            got = pow_cache.get((v, e))
            if got is None:
                r = rules[v]
                if e >= 0:
                    got = r ** e
                else:
                    if len(r.d) != 1:
                        raise AlgebraError(
                            f"negative power of {var_name(v)} needs a monomial rule")
                    got = r ** e
                pow_cache[(v, e)] = got
            return got

        out: dict = {}
        for (exps, qpow), c in self.d.items():
            plain = []
            repl = None
            for v, e in exps:
                if v in rules:
                    f = rpow(v, e)
                    repl = f if repl is None else repl * f
                    if repl.is_zero():
                        break
                else:
                    plain.append((v, e))
            else:
                if repl is None:
                    _acc(out, c, plain, qpow)
                else:
                    for (e2, q2), c2 in repl.d.items():
                        _acc(out, c * c2, tuple(plain) + e2, qpow + q2)
        return Expr(out)

    # -- numeric ------------------------------------------------------------

    def eval_float(self, point: dict, qvalue: float | None = None) -> float:
        """Evaluate at float values (pi is implied). Real result expected."""
        tot = 0.0
        tot_im = 0.0
        for (exps, qpow), c in self.d.items():
            x = 1.0
            for v, e in exps:
                if v == PI:
                    x *= math.pi ** e
                    continue
                try:
                    x *= point[v] ** e
                except KeyError:
                    raise AlgebraError(f"assignment missing {var_name(v)}") from None
            if qpow:
                if qvalue is None:
                    raise AlgebraError("expression has Q powers but no Q value given")
                x *= qvalue ** (-qpow)
            tot += float(c.re) * x
            tot_im += float(c.im) * x
        if abs(tot_im) > 1e-9 * (1.0 + abs(tot)):
            raise AlgebraError(f"evaluation is not real (im = {tot_im})")
        return tot

    # -- serialization ------------------------------------------------------

    def to_obj(self) -> list:
        out = []
        for t in self.terms():
            out.append({
                "re": [t.coeff.re.numerator, t.coeff.re.denominator],
                "im": [t.coeff.im.numerator, t.coeff.im.denominator],
                "exps": {var_name(v): e for v, e in t.exps},
                "qpow": t.qpow,
            })
        return out

    @staticmethod
    def from_obj(obj: list) -> "Expr":
        raw = []
        for t in obj:
            c = gr(Fraction(t["re"][0], t["re"][1]), Fraction(t["im"][0], t["im"][1]))
            exps = tuple((var_from_name(nm), e) for nm, e in t["exps"].items())
            raw.append((c, exps, t.get("qpow", 0)))
        return Expr.from_terms(raw)

    def canonical_json(self) -> str:
        return json.dumps(self.to_obj(), separators=(",", ":"))

    def content_hash(self) -> str:
        return sha256(self.canonical_json().encode()).hexdigest()

    # -- rendering ----------------------------------------------------------

    def render(self, w_form: bool = False) -> str:
        """Human-readable form; ``w_form`` prints even u powers as w powers."""
        if self.is_zero():
            return "0"
        parts = []
        for t in self.terms():
            factors = []
            for v, e in t.exps:
                factors.append(_render_var(v, e, w_form))
            coeff = str(t.coeff)
            if factors and coeff == "1":
                body = "*".join(factors)
            elif factors and coeff == "-1":
                body = "-" + "*".join(factors)
            else:
                body = "*".join([coeff] + factors)
            if t.qpow:
                body += "/Q" if t.qpow == 1 else f"/Q^{t.qpow}"
            parts.append(body)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


def _render_var(v: tuple, e: int, w_form: bool) -> str:
    kind = v[0]
    if kind == K_U and w_form and e % 2 == 0:
        name, e = f"w{v[1]}", e // 2
    elif kind == K_OMEGA:
        i, j = v[1], v[2]
        name = f"w{i}" + ("'" * j if j <= 2 else f"^({j})")
    elif kind == K_SIN_ETA:
        name = "sin(eta)"
    elif kind == K_COS_ETA:
        name = "cos(eta)"
    elif kind == K_SIN_PSI:
        name = "sin(psi)"
    elif kind == K_COS_PSI:
        name = "cos(psi)"
    else:
        name = var_name(v)
    if e == 1:
        return name
    if "'" in name or "(" in name:
        name = f"({name})"
    return f"{name}^{e}" if e > 0 else f"{name}^({e})"


def _check_dtag(dtag) -> None:
    if dtag in ("t", "eta", "psi"):
        return
    if isinstance(dtag, tuple) and len(dtag) == 2 and dtag[0] == "xi" and dtag[1] >= 1:
        return
    raise AlgebraError(f"unknown derivation tag: {dtag!r}")


class QContext:
    """A registered denominator: Q as a plain expression (no Q powers itself).

    Derivatives of Q along each derivation are memoized; expressions carrying
    ``qpow`` cite this object for the chain rule.
    """

    def __init__(self, expr: Expr, label: str):
        if expr.max_qpow() != 0:
            raise AlgebraError("Q context must itself be free of Q powers")
        self.expr = expr
        self.label = label
        self._derivs: dict = {}

    def deriv(self, dtag) -> Expr:
        got = self._derivs.get(dtag)
        if got is None:
            got = self.expr.derive(dtag)  # qpow-free, no context needed
            self._derivs[dtag] = got
        return got

    def eval_float(self, point: dict) -> float:
        return self.expr.eval_float(point)

    def __repr__(self):
        return f"QContext({self.label}, {self.expr.term_count()} terms)"


def q_clear(e: Expr, qctx: QContext, power: int) -> Expr:
    """``e * Q^power`` with every formal Q power expanded away.

    Requires ``power >= e.max_qpow()`` so the result is an ordinary
    polynomial (qpow 0 throughout).
    """
    if power < e.max_qpow():
        raise AlgebraError("clearing power below the maximal Q power")
    groups: dict = {}
    for (exps, qpow), c in e.d.items():
        groups.setdefault(qpow, []).append((c, exps, 0))
    out = Expr.zero()
    for qpow, raw in sorted(groups.items()):
        out = out + Expr.from_terms(raw) * (qctx.expr ** (power - qpow))
    return out


def q_cleared_equal(a: Expr, b: Expr, qctx: QContext) -> bool:
    """Equality in the localization at Q.

    The canonical form never cancels an expanded Q against a formal Q
    power, so identities like sigma * Q = 1 only hold after clearing
    denominators; Q is not a zero divisor, so this comparison is exact.
    """
    p = max(a.max_qpow(), b.max_qpow())
    return q_clear(a, qctx, p) == q_clear(b, qctx, p)


# ---------------------------------------------------------------------------
# 4x4 matrices of expressions
# ---------------------------------------------------------------------------

class Mat4:
    """Dense 4x4 matrix over Expr with a scalar fast path.

    Symbol products multiply many matrices that are secretly scalar * I
    (the squared principal symbol, the base resolvent layer); detecting that
    on construction turns those 64-product multiplications into one.
    """

    __slots__ = ("rows", "scalar")

    def __init__(self, rows):
        self.rows = tuple(tuple(r) for r in rows)
        if len(self.rows) != 4 or any(len(r) != 4 for r in self.rows):
            raise AlgebraError("Mat4 needs 4x4 entries")
        diag = self.rows[0][0]
        is_scalar = all(
            (self.rows[i][j].is_zero() if i != j else self.rows[i][j] == diag)
            for i in range(4) for j in range(4)
        )
        self.scalar = diag if is_scalar else None

    @staticmethod
    def from_scalar(e: Expr) -> "Mat4":
        z = Expr.zero()
        return Mat4([[e if i == j else z for j in range(4)] for i in range(4)])

    @staticmethod
    def identity() -> "Mat4":
        return Mat4.from_scalar(Expr.one())

    @staticmethod
    def zero() -> "Mat4":
        return Mat4.from_scalar(Expr.zero())

    def __add__(self, other: "Mat4") -> "Mat4":
        return Mat4([[self.rows[i][j] + other.rows[i][j] for j in range(4)]
                     for i in range(4)])

    def __sub__(self, other: "Mat4") -> "Mat4":
        return Mat4([[self.rows[i][j] - other.rows[i][j] for j in range(4)]
                     for i in range(4)])

    def __neg__(self) -> "Mat4":
        return Mat4([[-self.rows[i][j] for j in range(4)] for i in range(4)])

    def scale(self, e) -> "Mat4":
        if isinstance(e, Expr):
            return Mat4([[self.rows[i][j] * e for j in range(4)] for i in range(4)])
        return Mat4([[self.rows[i][j].scale(e) for j in range(4)] for i in range(4)])

    def __mul__(self, other: "Mat4") -> "Mat4":
        if not isinstance(other, Mat4):
            return NotImplemented
        # order matters: entries do not commute with matrix structure
        if self.scalar is not None:
            return other.scale(self.scalar)
        if other.scalar is not None:
            return self.scale(other.scalar)
        a, b = self.rows, other.rows
        out = []
        for i in range(4):
            row = []
            for j in range(4):
                s = a[i][0] * b[0][j]
                for k in range(1, 4):
                    s = s + a[i][k] * b[k][j]
                row.append(s)
            out.append(row)
        return Mat4(out)

    def trace(self) -> Expr:
        if self.scalar is not None:
            return self.scalar.scale(4)
        t = self.rows[0][0]
        for i in range(1, 4):
            t = t + self.rows[i][i]
        return t

    def map(self, f) -> "Mat4":
        return Mat4([[f(self.rows[i][j]) for j in range(4)] for i in range(4)])

    def derive(self, dtag, qctx=None) -> "Mat4":
        return self.map(lambda e: e.derive(dtag, qctx))

    def substitute(self, rules: dict) -> "Mat4":
        return self.map(lambda e: e.substitute(rules))

    def __eq__(self, other):
        return isinstance(other, Mat4) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def is_zero(self) -> bool:
        return all(e.is_zero() for r in self.rows for e in r)

    def term_count(self) -> int:
        return sum(e.term_count() for r in self.rows for e in r)

    def to_obj(self) -> list:
        return [[e.to_obj() for e in r] for r in self.rows]

    @staticmethod
    def from_obj(obj) -> "Mat4":
        return Mat4([[Expr.from_obj(e) for e in r] for r in obj])


# ---------------------------------------------------------------------------
# gamma representations
# ---------------------------------------------------------------------------

def _const_mat(entries) -> Mat4:
    return Mat4([[Expr.const(entries[i][j]) for j in range(4)] for i in range(4)])


_I = gr(0, 1)
_NI = gr(0, -1)

# Built from the Pauli blocks; all entries stay in {0, +-1, +-i}.
GAMMA_SPLIT = (
    # gamma^j = [[0, i sig_j], [i sig_j, 0]],  gamma^4 = [[0, I], [-I, 0]]
    _const_mat([[0, 0, 0, _I], [0, 0, _I, 0], [0, _I, 0, 0], [_I, 0, 0, 0]]),
    _const_mat([[0, 0, 0, gr(1)], [0, 0, gr(-1), 0], [0, gr(1), 0, 0], [gr(-1), 0, 0, 0]]),
    _const_mat([[0, 0, _I, 0], [0, 0, 0, _NI], [_I, 0, 0, 0], [0, _NI, 0, 0]]),
    _const_mat([[0, 0, gr(1), 0], [0, 0, 0, gr(1)], [gr(-1), 0, 0, 0], [0, gr(-1), 0, 0]]),
)

GAMMA_CHIRAL = (
    # gamma^j = [[i sig_j, 0], [0, -i sig_j]], gamma^4 = [[0, I], [-I, 0]]
    _const_mat([[0, _I, 0, 0], [_I, 0, 0, 0], [0, 0, 0, _NI], [0, 0, _NI, 0]]),
    _const_mat([[0, gr(1), 0, 0], [gr(-1), 0, 0, 0], [0, 0, 0, gr(-1)], [0, 0, gr(1), 0]]),
    _const_mat([[_I, 0, 0, 0], [0, _NI, 0, 0], [0, 0, _NI, 0], [0, 0, 0, _I]]),
    _const_mat([[0, 0, gr(1), 0], [0, 0, 0, gr(1)], [gr(-1), 0, 0, 0], [0, gr(-1), 0, 0]]),
)


@dataclass(frozen=True)
class GammaRep:
    """Four anticommuting square-roots of -I with exact entries."""

    name: str
    gammas: tuple

    def check(self) -> None:
        minus_id = Mat4.identity().scale(gr(-1))
        for a in range(4):
            ga = self.gammas[a]
            if not ga.trace().is_zero():
                raise AlgebraError(f"{self.name}: gamma^{a + 1} has nonzero trace")
            for b in range(4):
                prod = ga * self.gammas[b] + self.gammas[b] * ga
                want = minus_id.scale(gr(2)) if a == b else Mat4.zero()
                if prod != want:
                    raise AlgebraError(
                        f"{self.name}: Clifford relation fails at ({a + 1},{b + 1})")

    def gamma(self, i: int) -> Mat4:
        """1-based index, matching the frame labels."""
        return self.gammas[i - 1]


_REPS = {
    "split": GammaRep("split", GAMMA_SPLIT),
    "chiral": GammaRep("chiral", GAMMA_CHIRAL),
}


def gamma_rep(name: str = "split") -> GammaRep:
    try:
        return _REPS[name]
    except KeyError:
        raise AlgebraError(f"unknown gamma representation: {name!r}") from None


if __debug__:
    for _rep in _REPS.values():
        _rep.check()
