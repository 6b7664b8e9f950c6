"""Exact class computations for the quadric and cone complements, with a
finite-field point-count oracle.

Classes live in Z[L], L the class of the affine line. The point counter
realizes L = q on honest enumerations over F_q; it is restricted to
q = 1 mod 4 with unit weights so the quadratic form is split and the class
polynomials apply as stated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprs import AlgebraError


class LPoly:
    """Polynomial in L with integer coefficients, sparse by degree."""

    __slots__ = ("d",)

    def __init__(self, d: dict | None = None):
        dd = {}
        for k, c in (d or {}).items():
            if not isinstance(k, int) or k < 0:
                raise AlgebraError(f"bad degree {k!r}")
            if not isinstance(c, int):
                raise AlgebraError(f"bad coefficient {c!r}")
            if c:
                dd[k] = c
        self.d = dd

    @classmethod
    def L(cls, k: int = 1, coeff: int = 1) -> "LPoly":
        return cls({k: coeff})

    @classmethod
    def one(cls) -> "LPoly":
        return cls({0: 1})

    @classmethod
    def zero(cls) -> "LPoly":
        return cls()

    @classmethod
    def const(cls, c: int) -> "LPoly":
        return cls({0: c})

    def __add__(self, other):
        other = _coerce(other)
        out = dict(self.d)
        for k, c in other.d.items():
            out[k] = out.get(k, 0) + c
        return LPoly(out)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        other = _coerce(other)
        out = dict(self.d)
        for k, c in other.d.items():
            out[k] = out.get(k, 0) - c
        return LPoly(out)

    def __rsub__(self, other):
        return _coerce(other).__sub__(self)

    def __neg__(self):
        return LPoly({k: -c for k, c in self.d.items()})

    def __mul__(self, other):
        other = _coerce(other)
        out: dict = {}
        for k1, c1 in self.d.items():
            for k2, c2 in other.d.items():
                k = k1 + k2
                out[k] = out.get(k, 0) + c1 * c2
        return LPoly(out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, p: int):
        if p < 0:
            raise AlgebraError("negative LPoly power")
        out = LPoly.one()
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base
            p >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, LPoly) and self.d == other.d

    def __hash__(self):
        return hash(frozenset(self.d.items()))

    def is_zero(self) -> bool:
        return not self.d

    def degree(self) -> int:
        return max(self.d, default=-1)

    def eval_at(self, q: int) -> int:
        return sum(c * q ** k for k, c in self.d.items())

    def coeffs(self) -> dict:
        return dict(self.d)

    def render(self) -> str:
        if not self.d:
            return "0"
        parts = []
        for k in sorted(self.d, reverse=True):
            c = self.d[k]
            mag = abs(c)
            if k == 0:
                body = str(mag)
            else:
                lp = "L" if k == 1 else f"L^{k}"
                body = lp if mag == 1 else f"{mag}*{lp}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self):
        return f"LPoly({self.render()})"


def _coerce(x) -> LPoly:
    if isinstance(x, LPoly):
        return x
    if isinstance(x, int):
        return LPoly.const(x)
    raise TypeError(f"cannot coerce {x!r} to LPoly")


L = LPoly.L()


# ---------------------------------------------------------------------------
# classes
# ---------------------------------------------------------------------------

def proj_space(m: int) -> LPoly:
    """1 + L + ... + L^m, the class of projective m-space."""
    if m < 0:
        raise AlgebraError("projective space dimension must be >= 0")
    return LPoly({k: 1 for k in range(m + 1)})


def affine_cone(z: LPoly) -> LPoly:
    """(L - 1) z + 1: affine cone over a projective variety of class z."""
    return (L - 1) * z + 1


def proj_cone(z: LPoly) -> LPoly:
    """L z + 1: projective cone (the variety plus its affine cone)."""
    return L * z + 1


def complement_c2(z: LPoly, n: int) -> LPoly:
    """Class of the ambient affine space minus the double affine cone."""
    return LPoly.L(2 * n + 4) - LPoly.L(3) * z + LPoly.L(2) * (z - 1)


def complement_c2_h(z: LPoly, n: int) -> LPoly:
    """Same complement with the two mu_2 = +-1 hyperplanes also removed."""
    return (LPoly.L(2 * n + 4) - 2 * LPoly.L(2 * n + 3) - LPoly.L(3) * z
            + 3 * LPoly.L(2) * z - 2 * L * z - LPoly.L(2) + 2 * L)


def union_class(z: LPoly, n: int) -> LPoly:
    """Class of the union (double cone with both hyperplanes)."""
    return (2 * LPoly.L(2 * n + 3) + LPoly.L(3) * z - 3 * LPoly.L(2) * z
            + 2 * L * z + LPoly.L(2) - 2 * L)


def quadric_class(n: int) -> LPoly:
    """Split even-dimensional projective quadric: P^(2n) cells plus an
    extra middle L^n."""
    if n < 1:
        raise AlgebraError("quadric index must be >= 1")
    return proj_space(2 * n) + LPoly.L(n)


def c2n_closed(n: int) -> LPoly:
    """Closed form of the affine quadric-complement class."""
    if n < 1:
        raise AlgebraError("index must be >= 1")
    return (LPoly.L(2 * n + 2) - LPoly.L(2 * n + 1)
            - LPoly.L(n + 1) + LPoly.L(n))


def c2n_rec(n: int) -> LPoly:
    """Same class by iterating the splitting recursion from the base case."""
    if n < 1:
        raise AlgebraError("index must be >= 1")
    c = c2n_closed(1)
    for m in range(2, n + 1):
        c = (LPoly.L(2 * m + 2) - 2 * LPoly.L(2 * m + 1) + LPoly.L(2 * m)
             + L * c)
    return c


def _lp(k: int) -> str:
    return "L" if k == 1 else f"L^{k}"


CLASS_TABLE = (
    ("quadric-projective", lambda n: quadric_class(n),
     lambda n: f"P^{2*n} + {_lp(n)}"),
    ("quadric-complement-affine", lambda n: c2n_closed(n),
     lambda n: f"{_lp(n)} (L - 1) ({_lp(n+1)} - 1)"),
    ("cone2-complement", lambda n: complement_c2(quadric_class(n), n),
     lambda n: f"{_lp(n+2)} (L - 1) ({_lp(n+1)} - 1)"),
    ("cone2-complement-minus-hyperplanes",
     lambda n: complement_c2_h(quadric_class(n), n),
     lambda n: f"{_lp(n+1)} (L - 1) (L - 2) ({_lp(n+1)} - 1)"),
)


# ---------------------------------------------------------------------------
# finite-field oracle
# ---------------------------------------------------------------------------

LOCI = tuple(name for name, _f, _s in CLASS_TABLE)

_GUARD = 10 ** 8


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def sqrt_minus_one(q: int) -> int:
    """A square root of -1 in F_q; exists exactly when q = 1 mod 4."""
    if q % 4 != 1:
        raise AlgebraError(f"-1 is not a square mod {q}")
    for g in range(2, q):
        r = pow(g, (q - 1) // 4, q)
        if (r * r) % q == q - 1:
            return r
    raise AlgebraError(f"no square root of -1 mod {q}")  # unreachable for prime q


@dataclass(frozen=True)
class CountSpec:
    """Validated request for one brute-force count over F_q."""

    n: int
    q: int
    W: tuple
    locus: str

    def __init__(self, n: int, q: int, W, locus: str):
        if n < 1:
            raise AlgebraError("count index must be >= 1")
        if not _is_prime(q):
            raise AlgebraError(f"q must be prime, got {q}")
        if q % 4 != 1:
            raise AlgebraError(f"q must be 1 mod 4 (so the form splits), got {q}")
        W = tuple(int(w) % q for w in W)
        if len(W) != 4:
            raise AlgebraError("W needs exactly four entries")
        if any(w == 0 for w in W):
            raise AlgebraError("W entries must be nonzero mod q")
        if locus not in LOCI:
            raise AlgebraError(f"unknown locus {locus!r}; choose from {LOCI}")
        if q ** (2 * n + 4) > _GUARD:
            raise AlgebraError(
                f"search space q^(2n+4) = {q ** (2 * n + 4)} exceeds {_GUARD}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "locus", locus)

    def class_poly(self) -> LPoly:
        for name, f, _s in CLASS_TABLE:
            if name == self.locus:
                return f(self.n)
        raise AlgebraError(f"unknown locus {self.locus!r}")


def _quadric_values(spec: CountSpec) -> np.ndarray:
    """Q_W(zeta) mod q over the full zeta box, flattened."""
    q, n = spec.q, spec.n
    nz = 2 * n + 2
    coeffs = [pow(w, 2, q) for w in spec.W] + [1] * (nz - 4)
    vals = np.zeros((1,), dtype=np.int64)
    for k in range(nz):
        col = (coeffs[k] * np.arange(q, dtype=np.int64) ** 2) % q
        vals = (vals[:, None] + col[None, :]).reshape(-1) % q
    return vals


def count_points(spec: CountSpec) -> int:
    """Brute-force count of the selected locus over F_q.

    The zeta scan is hoisted (it does not depend on mu); the mu layers are
    explicit loops over field elements so the hyperplane loci are counted,
    not inferred from the class polynomial.
    """
    q = spec.q
    vals = _quadric_values(spec)
    nonzero = int(np.count_nonzero(vals))
    zero = vals.size - nonzero
    if spec.locus == "quadric-complement-affine":
        return nonzero
    if spec.locus == "quadric-projective":
        affine_cone_points = zero  # includes the origin
        assert (affine_cone_points - 1) % (q - 1) == 0
        return (affine_cone_points - 1) // (q - 1)
    total = 0
    for mu1 in range(q):
        for mu2 in range(q):
            if spec.locus == "cone2-complement-minus-hyperplanes" and (
                    mu2 == 1 % q or mu2 == (q - 1)):
                continue
            total += nonzero
    return total


def split_form_check(q: int, W) -> bool:
    """Verify the splitting change of variables as a polynomial identity.

    Over F_q with i = sqrt(-1): X1 = W1 z1 + i W2 z2, Y1 = W1 z1 - i W2 z2,
    X2 = i(W3 z3 + i W4 z4), Y2 = i(W3 z3 - i W4 z4); then X1 Y1 - X2 Y2
    must equal sum W_k^2 z_k^2 coefficient by coefficient.
    """
    if not _is_prime(q):
        raise AlgebraError(f"q must be prime, got {q}")
    if q % 4 != 1:
        raise AlgebraError(f"-1 is not a square mod {q}")
    W = tuple(int(w) % q for w in W)
    if len(W) != 4 or any(w == 0 for w in W):
        raise AlgebraError("W needs four nonzero entries")
    i = sqrt_minus_one(q)

    def poly_mul(a: dict, b: dict) -> dict:
        out: dict = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = (out.get(e, 0) + c1 * c2) % q
        return {e: c for e, c in out.items() if c}

    def lin(*coeffs) -> dict:
        out = {}
        for k, c in enumerate(coeffs):
            c %= q
            if c:
                e = [0, 0, 0, 0]
                e[k] = 1
                out[tuple(e)] = c
        return out

    x1 = lin(W[0], (i * W[1]) % q, 0, 0)
    y1 = lin(W[0], (-i * W[1]) % q, 0, 0)
    x2 = lin(0, 0, (i * W[2]) % q, (i * i * W[3]) % q)
    y2 = lin(0, 0, (i * W[2]) % q, (-i * i * W[3]) % q)
    lhs = poly_mul(x1, y1)
    for e, c in poly_mul(x2, y2).items():
        lhs[e] = (lhs.get(e, 0) - c) % q
    lhs = {e: c for e, c in lhs.items() if c}
    rhs = {}
    for k in range(4):
        e = [0, 0, 0, 0]
        e[k] = 2
        rhs[tuple(e)] = pow(W[k], 2, q)
    return lhs == rhs
