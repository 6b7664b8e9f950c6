"""Symbol calculus for the anisotropic Dirac-Laplacian.

Builds the first-order operator symbol (q1, q0) in the left-invariant frame,
squares it into the Laplacian-type triple (p2, p1, p0), runs the resolvent
parametrix recursion down to the layer that carries the heat coefficient, and
rewrites the result in the diagonalizing cotangent coordinates where the
denominator becomes the anisotropy quadric ``Q_W``.

Conventions baked in here:

* base coordinates are ordered (t, eta, phi, psi); nothing depends on phi, so
  mixed symbol derivatives only ever pair xi_1, xi_2, xi_4 with t, eta, psi;
* ``n`` counts extra torus dimensions in pairs: cotangent coordinates run
  1..2n+2 and only n = 1, 2 are supported (the layer data grows fast);
* each recursion layer m is xi-homogeneous of degree m when a Q-power counts
  as degree -2*qpow, which is asserted after every build.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from hashlib import sha256
from pathlib import Path

from .exprs import (
    AlgebraError,
    COS_ETA,
    COS_PSI,
    Expr,
    GammaRep,
    Mat4,
    QContext,
    SIN_ETA,
    SIN_PSI,
    gamma_rep,
    gr,
    K_XI,
    K_ZETA,
    om,
    u,
    xi,
    zeta,
)

SUPPORTED_N = (1, 2)

# (xi index, matching base-coordinate derivation) for the mixed-derivative
# sums; the third base coordinate is the ignorable angle and never appears.
XI_X_PAIRS = ((1, "t"), (2, "eta"), (4, "psi"))


class CacheError(RuntimeError):
    """A cache file is unreadable or stale; callers recompute."""


# ---------------------------------------------------------------------------
# frame weights
# ---------------------------------------------------------------------------

def w_coeff(i: int) -> Expr:
    """Signed frame weight W_i as a u-monomial (W_2 carries the minus)."""
    p = {1: {u(1): -1, u(2): -1, u(3): -1},
         2: {u(1): 1, u(2): -1, u(3): -1},
         3: {u(1): -1, u(2): 1, u(3): -1},
         4: {u(1): -1, u(2): -1, u(3): 1}}[i]
    return Expr.monomial(gr(-1 if i == 2 else 1), p)


def w_abs_exps(i: int) -> dict:
    """Exponent map of |W_i| (the positive u-monomial)."""
    return {1: {u(1): -1, u(2): -1, u(3): -1},
            2: {u(1): 1, u(2): -1, u(3): -1},
            3: {u(1): -1, u(2): 1, u(3): -1},
            4: {u(1): -1, u(2): -1, u(3): 1}}[i]


# ---------------------------------------------------------------------------
# Dirac symbol and its square
# ---------------------------------------------------------------------------

def dirac_symbol(rep: GammaRep | None = None) -> tuple[Mat4, Mat4]:
    """The full symbol of the first-order operator, split by degree.

    Returns (q1, q0): q1 is linear in xi_1..xi_4 with csc/cot factors from
    the frame, q0 collects the time-derivative and curvature zero-order
    parts. Transcribed directly from the operator in the left-invariant
    frame; the diagonal structure in the zeta coordinates is *checked*
    downstream, never assumed here.
    """
    if rep is None:
        rep = gamma_rep()
    i_ = gr(0, 1)

    def mono(c, e):
        return Expr.monomial(c, e)

    csc_cot_cospsi = mono(1, {SIN_ETA: -1, COS_ETA: 1, COS_PSI: 1, xi(4): 1})
    csc_cospsi = mono(1, {SIN_ETA: -1, COS_PSI: 1, xi(3): 1})
    sinpsi_xi2 = mono(1, {SIN_PSI: 1, xi(2): 1})
    # csc(eta)cos(psi)(xi4 cos(eta) - xi3) + xi2 sin(psi)
    bracket2 = csc_cot_cospsi - csc_cospsi + sinpsi_xi2

    csc_sinpsi = mono(1, {SIN_ETA: -1, SIN_PSI: 1, xi(3): 1})
    cot_sinpsi = mono(1, {SIN_ETA: -1, COS_ETA: 1, SIN_PSI: 1, xi(4): 1})
    cospsi_xi2 = mono(1, {COS_PSI: 1, xi(2): 1})
    # sin(psi)(xi3 csc(eta) - xi4 cot(eta)) + xi2 cos(psi)
    bracket3 = csc_sinpsi - cot_sinpsi + cospsi_xi2

    q1 = (
        rep.gamma(2).scale(mono(-i_, {u(1): 1, u(2): -1, u(3): -1}) * bracket2)
        + rep.gamma(3).scale(mono(i_, {u(1): -1, u(2): 1, u(3): -1}) * bracket3)
        + rep.gamma(1).scale(mono(i_, {u(1): -1, u(2): -1, u(3): -1, xi(1): 1}))
        + rep.gamma(4).scale(mono(i_, {u(1): -1, u(2): -1, u(3): 1, xi(4): 1}))
    )

    dlog = Expr.zero()
    curv = Expr.zero()
    for i in (1, 2, 3):
        de = {u(1): -1, u(2): -1, u(3): -1, om(i, 1): 1}
        de[u(i)] -= 2  # w_i'/w_i contributes u_i^-2 on top of the volume factor
        dlog = dlog + mono(Fraction(1, 4), de)
        ce = {u(1): 1, u(2): 1, u(3): 1}
        ce[u(i)] -= 4  # 1/w_i^2 against u_1 u_2 u_3
        curv = curv + mono(Fraction(-1, 4), ce)
    g234 = rep.gamma(2) * rep.gamma(3) * rep.gamma(4)
    q0 = rep.gamma(1).scale(dlog) + g234.scale(curv)
    return q1, q0


@dataclass(frozen=True)
class SymbolTriple:
    """Squared-operator symbol split by xi-degree, plus the scalar of p2."""

    p2: Mat4
    p1: Mat4
    p0: Mat4
    p2_scalar: Expr
    rep: GammaRep


def square_symbol(q1: Mat4, q0: Mat4, rep: GammaRep | None = None) -> SymbolTriple:
    """Compose the first-order symbol with itself.

    p2 = q1^2 must come out as scalar * I (fatal if not: that scalar is the
    quadric the whole pipeline divides by); p1 and p0 pick up the mixed
    xi/base-coordinate derivative corrections.
    """
    if rep is None:
        rep = gamma_rep()
    mi = gr(0, -1)
    p2 = q1 * q1
    if p2.scalar is None:
        raise AlgebraError("q1^2 is not scalar: squared symbol is inconsistent")
    p1 = q0 * q1 + q1 * q0
    p0 = q0 * q0
    for k, dtag in XI_X_PAIRS:
        dxi_q1 = q1.derive(("xi", k))
        p1 = p1 + (dxi_q1 * q1.derive(dtag)).scale(mi)
        p0 = p0 + (dxi_q1 * q0.derive(dtag)).scale(mi)
    return SymbolTriple(p2=p2, p1=p1, p0=p0, p2_scalar=p2.scalar, rep=rep)


def xi_q_context(triple: SymbolTriple, n: int) -> QContext:
    """Q in the xi stage: the p2 scalar plus the torus directions."""
    q = triple.p2_scalar
    for k in range(5, 2 * n + 3):
        q = q + Expr.var(xi(k), 2)
    return QContext(q, f"xi-stage n={n}")


# ---------------------------------------------------------------------------
# homogeneity bookkeeping
# ---------------------------------------------------------------------------

def cotangent_degree(exps: tuple, qpow: int) -> int:
    """xi/zeta degree of a term, a Q power counting as degree -2*qpow."""
    d = -2 * qpow
    for v, e in exps:
        if v[0] in (K_XI, K_ZETA):
            d += e
    return d


def assert_homogeneous(obj, want: int, what: str) -> None:
    exprs = [e for r in obj.rows for e in r] if isinstance(obj, Mat4) else [obj]
    for e in exprs:
        for (exps, qpow) in e.d:
            got = cotangent_degree(exps, qpow)
            if got != want:
                raise AlgebraError(
                    f"{what}: term of cotangent degree {got}, expected {want}")


# ---------------------------------------------------------------------------
# resolvent recursion
# ---------------------------------------------------------------------------

def admissible_tuples(m: int) -> list[tuple[int, int, tuple, object]]:
    """All (j, k, alpha, coefficient) contributing to layer m.

    Constraint: m < j <= -2, 0 <= k <= 2, alpha = (a1, a2, a4) >= 0 with
    j - |alpha| + k = m + 2. The coefficient is (-i)^|alpha| / alpha!.
    """
    out = []
    i_pow = (gr(1), gr(0, -1), gr(-1), gr(0, 1))  # (-i)^s cycle
    for j in range(m + 1, -1):
        for k in range(3):
            s = j + k - m - 2
            if s < 0:
                continue
            for a1 in range(s + 1):
                for a2 in range(s - a1 + 1):
                    a4 = s - a1 - a2
                    denom = 1
                    for a in (a1, a2, a4):
                        for f in range(2, a + 1):
                            denom *= f
                    coeff = i_pow[s % 4] * Fraction(1, denom)
                    out.append((j, k, (a1, a2, a4), coeff))
    return out


@dataclass
class Resolvent:
    """Layers of the parametrix symbol plus the stage data they live over."""

    n: int
    rep: GammaRep
    triple: SymbolTriple
    qctx: QContext
    layers: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    chain: str = ""  # content hash over rep, symbols, and all built layers

    def layer(self, m: int) -> Mat4:
        return self.layers[m]


class _DerivCache:
    """Iterated-derivative memo; decrement order fixed for determinism."""

    def __init__(self, base: dict, dtags: tuple, qctx: QContext):
        self.base = base
        self.dtags = dtags
        self.qctx = qctx
        self.memo: dict = {}

    def get(self, key, alpha: tuple) -> Mat4:
        if alpha == (0, 0, 0):
            return self.base[key]
        got = self.memo.get((key, alpha))
        if got is None:
            for pos in range(3):
                if alpha[pos]:
                    prev = list(alpha)
                    prev[pos] -= 1
                    got = self.get(key, tuple(prev)).derive(self.dtags[pos], self.qctx)
                    break
            self.memo[(key, alpha)] = got
        return got


def resolvent(n: int, rep_name: str = "split", cache_dir: str | Path | None = None,
              progress=None) -> Resolvent:
    """Run (or reload) the layer recursion down to m = -2n-2.

    sigma_{-2} = Q^{-1} I; for m <= -3,
    sigma_m = -(sum over admissible tuples of
               coeff * (d_xi^alpha sigma_j)(d_x^alpha p_k)) * sigma_{-2}.
    Layers are cached one file per (n, m) with a chained content hash; stale
    or unreadable files are reported and rebuilt.
    """
    if n not in SUPPORTED_N:
        raise AlgebraError(f"n out of supported range {SUPPORTED_N}: {n}")
    rep = gamma_rep(rep_name)
    q1, q0 = dirac_symbol(rep)
    triple = square_symbol(q1, q0, rep)
    qctx = xi_q_context(triple, n)
    rs = Resolvent(n=n, rep=rep, triple=triple, qctx=qctx)
    rs.layers[-2] = Mat4.from_scalar(Expr.monomial(1, {}, qpow=1))
    assert_homogeneous(rs.layers[-2], -2, "layer -2")

    chain = _chain_seed(n, rep, triple)
    cache = Path(cache_dir) if cache_dir is not None else None
    sig_der = _DerivCache(rs.layers, (("xi", 1), ("xi", 2), ("xi", 4)), qctx)
    p_base = {0: triple.p0, 1: triple.p1, 2: triple.p2}
    p_der = _DerivCache(p_base, ("t", "eta", "psi"), qctx)

    for m in range(-3, -2 * n - 3, -1):
        t0 = time.monotonic()
        mat = None
        path = cache / f"layer_n{n}_m{m}.json" if cache else None
        if path is not None and path.exists():
            try:
                mat = _load_layer(path, n, m, chain)
            except CacheError as err:
                print(f"cache ignored: {err}")
                mat = None
        if mat is None:
            acc = Mat4.zero()
            for j, k, alpha, coeff in admissible_tuples(m):
                acc = acc + (sig_der.get(j, alpha) * p_der.get(k, alpha)).scale(coeff)
            mat = (acc * rs.layers[-2]).scale(gr(-1))
            assert_homogeneous(mat, m, f"layer {m}")
            if path is not None:
                _save_layer(path, n, m, chain, mat)
        rs.layers[m] = mat
        chain = _advance_chain(chain, mat)
        rs.stats[f"layer_{m}_terms"] = mat.term_count()
        rs.stats[f"layer_{m}_seconds"] = round(time.monotonic() - t0, 3)
        if progress:
            progress(f"layer {m}: {mat.term_count()} terms "
                     f"in {rs.stats[f'layer_{m}_seconds']}s")
    rs.chain = chain
    return rs


def _mat_hash(mat: Mat4) -> str:
    return sha256(json.dumps(mat.to_obj(), separators=(",", ":")).encode()).hexdigest()


def _chain_seed(n: int, rep: GammaRep, triple: SymbolTriple) -> str:
    seed = json.dumps({
        "fmt": "bianchix-layer-chain-v1",
        "n": n,
        "rep": rep.name,
        "p2": _mat_hash(triple.p2),
        "p1": _mat_hash(triple.p1),
        "p0": _mat_hash(triple.p0),
    }, sort_keys=True)
    return sha256(seed.encode()).hexdigest()


def _advance_chain(chain: str, mat: Mat4) -> str:
    return sha256((chain + _mat_hash(mat)).encode()).hexdigest()


def _save_layer(path: Path, n: int, m: int, upstream: str, mat: Mat4) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    obj = {"schema": 1, "n": n, "m": m, "term_count": mat.term_count(),
           "upstream_hash": upstream, "mat": mat.to_obj()}
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(obj, separators=(",", ":")))
    tmp.replace(path)


def _load_layer(path: Path, n: int, m: int, upstream: str) -> Mat4:
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise CacheError(f"unreadable cache file {path}: {err}") from None
    if obj.get("schema") != 1 or obj.get("n") != n or obj.get("m") != m:
        raise CacheError(f"cache file {path} does not match requested layer")
    if obj.get("upstream_hash") != upstream:
        raise CacheError(f"stale cache file {path} (upstream hash mismatch)")
    try:
        return Mat4.from_obj(obj["mat"])
    except (KeyError, AlgebraError, TypeError) as err:
        raise CacheError(f"corrupt cache payload in {path}: {err}") from None


# ---------------------------------------------------------------------------
# zeta-stage change of coordinates
# ---------------------------------------------------------------------------

def zeta_substitution_rules(n: int) -> dict:
    """xi in terms of zeta (the inverse of the diagonalizing map)."""
    sin_eta = Expr.var(SIN_ETA)
    cos_eta = Expr.var(COS_ETA)
    sin_psi = Expr.var(SIN_PSI)
    cos_psi = Expr.var(COS_PSI)
    z = [None] + [Expr.var(zeta(k)) for k in range(1, 2 * n + 3)]
    rules = {
        xi(1): z[1],
        xi(2): z[2] * sin_psi + z[3] * cos_psi,
        xi(3): sin_eta * (z[3] * sin_psi - z[2] * cos_psi) + z[4] * cos_eta,
        xi(4): z[4],
    }
    for k in range(5, 2 * n + 3):
        rules[xi(k)] = z[k]
    return rules


def zeta_forward_rules(n: int) -> dict:
    """zeta in terms of xi (used to check the two maps compose to identity)."""
    def mono(c, e):
        return Expr.monomial(c, e)

    rules = {
        zeta(1): Expr.var(xi(1)),
        zeta(2): (mono(1, {xi(4): 1, SIN_ETA: -1, COS_ETA: 1, COS_PSI: 1})
                  - mono(1, {xi(3): 1, SIN_ETA: -1, COS_PSI: 1})
                  + mono(1, {xi(2): 1, SIN_PSI: 1})),
        zeta(3): (-mono(1, {xi(4): 1, SIN_ETA: -1, COS_ETA: 1, SIN_PSI: 1})
                  + mono(1, {xi(3): 1, SIN_ETA: -1, SIN_PSI: 1})
                  + mono(1, {xi(2): 1, COS_PSI: 1})),
        zeta(4): Expr.var(xi(4)),
    }
    for k in range(5, 2 * n + 3):
        rules[zeta(k)] = Expr.var(xi(k))
    return rules


def zeta_q_expr(n: int) -> Expr:
    """The anisotropy quadric Q_W in zeta coordinates."""
    q = Expr.zero()
    for i in range(1, 5):
        q = q + (w_coeff(i) ** 2) * Expr.var(zeta(i), 2)
    for k in range(5, 2 * n + 3):
        q = q + Expr.var(zeta(k), 2)
    return q


def zeta_q_context(n: int) -> QContext:
    return QContext(zeta_q_expr(n), f"zeta-stage n={n}")


def _checked_zeta_transform(rs: Resolvent) -> tuple[dict, QContext]:
    """Rules plus target context, after verifying Q transforms on the nose.

    Carrying qpow through the substitution is only sound because the xi-stage
    denominator maps exactly onto Q_W; that identity is re-verified here on
    every call rather than trusted.
    """
    rules = zeta_substitution_rules(rs.n)
    target = zeta_q_expr(rs.n)
    got = rs.qctx.expr.substitute(rules)
    if got != target:
        raise AlgebraError("Q does not transform onto the anisotropy quadric")
    return rules, QContext(target, f"zeta-stage n={rs.n}")


def to_zeta(rs: Resolvent) -> tuple[Mat4, QContext]:
    """Deepest layer rewritten in zeta coordinates, with its new Q context."""
    rules, qctx = _checked_zeta_transform(rs)
    mat = rs.layer(-2 * rs.n - 2).substitute(rules)
    _ensure_no_xi(mat)
    assert_homogeneous(mat, -2 * rs.n - 2, "zeta layer")
    return mat, qctx


def traced_zeta_density(rs: Resolvent) -> tuple[Expr, QContext]:
    """Trace first, then substitute: same result as tracing to_zeta (the
    trace is linear and substitution is a ring map), at a quarter the cost."""
    rules, qctx = _checked_zeta_transform(rs)
    tr = rs.layer(-2 * rs.n - 2).trace().substitute(rules)
    _ensure_no_xi(tr)
    assert_homogeneous(tr, -2 * rs.n - 2, "traced zeta density")
    return tr, qctx


def _ensure_no_xi(obj) -> None:
    exprs = [e for r in obj.rows for e in r] if isinstance(obj, Mat4) else [obj]
    for e in exprs:
        for v in e.vars_present():
            if v[0] == K_XI:
                raise AlgebraError("xi variable survived the zeta substitution")
