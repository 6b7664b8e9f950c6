"""Monte Carlo verification of the exact residue pipeline.

Two estimators, both deterministic for a given (seed, sample count, block
size): one integrates the raw traced density over angles times the rescaled
cycle, the other integrates the period form over the mu square times the
sphere. They share the coefficient normalization with the exact assembler,
so their expectations are the coefficient itself.

Sampling layout (fixed, part of the determinism contract): per 2^15-sample
block, a child seed spawned from the base SeedSequence drives a Philox
generator; within a block the draws are eta uniforms, then psi uniforms,
then the (2n+2)-column standard normals for the sphere direction.

The integrands have heavy tails: the filtered density carries genuine
1/sin(eta)^2 terms whose sphere average cancels, so per-sample values near
eta = 0 (equivalently near the disk boundary in mu coordinates) are large
with mean zero. The reported standard error is the empirical one; it is
valid for the self-normalized comparisons done here, but tail shocks make it
noisy, which is why agreement checks use it rather than an absolute
tolerance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exprs import (
    AlgebraError,
    K_COS_ETA,
    K_COS_PSI,
    K_MU,
    K_OMEGA,
    K_SIN_ETA,
    K_SIN_PSI,
    K_U,
    K_ZETA,
    var_name,
)
from .residue import Density, PeriodForm

BLOCK = 1 << 15


# ---------------------------------------------------------------------------
# evaluation points
# ---------------------------------------------------------------------------

_KEY_RE = re.compile(r"^w([123])(p{0,2}|_([0-9]+))$")


@dataclass(frozen=True)
class Assignment:
    """Exact rational values for the anisotropy factors and derivatives.

    ``w`` are the three factors (must be positive); ``omega[(i, k)]`` is the
    k-th derivative of w_i, absent keys meaning zero.
    """

    w: tuple
    omega: tuple  # sorted ((i, k), Fraction) pairs; dict-like access via get

    def __init__(self, w, omega=None):
        w = tuple(Fraction(x) for x in w)
        if len(w) != 3:
            raise AlgebraError("assignment needs exactly w1, w2, w3")
        if any(x <= 0 for x in w):
            raise AlgebraError("w values must be positive")
        om = {}
        for (i, k), val in (omega or {}).items():
            if i not in (1, 2, 3) or k < 1:
                raise AlgebraError(f"bad derivative index ({i}, {k})")
            val = Fraction(val)
            if val != 0:
                om[(i, k)] = val
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "omega", tuple(sorted(om.items())))

    def omega_dict(self) -> dict:
        return dict(self.omega)

    def get(self, i: int, k: int) -> Fraction:
        return dict(self.omega).get((i, k), Fraction(0))

    def u_floats(self) -> tuple:
        return tuple(math.sqrt(float(x)) for x in self.w)

    def w_weights(self) -> np.ndarray:
        """|W_i| for i = 1..4 as floats."""
        u1, u2, u3 = self.u_floats()
        return np.array([1 / (u1 * u2 * u3), u1 / (u2 * u3),
                         u2 / (u1 * u3), u3 / (u1 * u2)])

    @classmethod
    def parse(cls, text: str) -> "Assignment":
        """Parse "w1=1,w2=2,w3=3,w1p=1/2,w3pp=2,w2_3=0" style assignments."""
        w = {1: None, 2: None, 3: None}
        om = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise AlgebraError(f"bad assignment item {item!r}")
            key, _, val = item.partition("=")
            m = _KEY_RE.match(key.strip())
            if not m:
                raise AlgebraError(f"unknown assignment key {key.strip()!r}")
            try:
                frac = Fraction(val.strip())
            except (ValueError, ZeroDivisionError):
                raise AlgebraError(f"bad assignment value {val.strip()!r}") from None
            i = int(m.group(1))
            suffix = m.group(2)
            if suffix == "":
                w[i] = frac
            elif suffix in ("p", "pp"):
                om[(i, len(suffix))] = frac
            else:
                om[(i, int(m.group(3)))] = frac
        missing = [f"w{i}" for i in (1, 2, 3) if w[i] is None]
        if missing:
            raise AlgebraError(f"assignment missing {', '.join(missing)}")
        return cls((w[1], w[2], w[3]), om)

    def describe(self) -> str:
        parts = [f"w{i}={self.w[i - 1]}" for i in (1, 2, 3)]
        for (i, k), val in self.omega:
            suffix = "p" * k if k <= 2 else f"_{k}"
            parts.append(f"w{i}{suffix}={val}")
        return ",".join(parts)


DEFAULT_ASSIGNMENT = Assignment(
    (1, 2, 3),
    {(1, 1): Fraction(1, 2), (2, 1): -1, (3, 1): 1, (3, 2): 2},
)


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    n_samples: int
    seed: int
    label: str = ""

    def agrees_with(self, value: float, k: float = 3.0,
                    other_stderr: float = 0.0) -> bool:
        tol = k * math.hypot(self.stderr, other_stderr)
        return abs(self.estimate - value) <= tol

    def to_obj(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr,
                "n_samples": self.n_samples, "seed": self.seed,
                "label": self.label}


# ---------------------------------------------------------------------------
# compiled term groups
# ---------------------------------------------------------------------------

def _fold_density_terms(density: Density, assignment: Assignment):
    """Fold exact u/omega data into float constants, group by sample shape."""
    us = assignment.u_floats()
    om = {k: float(v) for k, v in assignment.omega}
    groups: dict = {}
    for (exps, qpow), c in density.expr.d.items():
        if c.im != 0:
            raise AlgebraError("density coefficient has an imaginary part")
        const = float(c.re)
        shape = []
        for v, e in exps:
            kind = v[0]
            if kind == K_U:
                const *= us[v[1] - 1] ** e
            elif kind == K_OMEGA:
                const *= om.get((v[1], v[2]), 0.0) ** e
            elif kind == K_SIN_ETA:
                shape.append(("se", e))
            elif kind == K_COS_ETA:
                shape.append(("ce", e))
            elif kind == K_SIN_PSI:
                shape.append(("sp", e))
            elif kind == K_COS_PSI:
                shape.append(("cp", e))
            elif kind == K_ZETA:
                shape.append((f"z{v[1]}", e))
            else:
                raise AlgebraError(f"unexpected variable {var_name(v)} in density")
        if const == 0.0:
            continue
        key = (tuple(shape), qpow)
        groups[key] = groups.get(key, 0.0) + const
    return [(shape, qpow, const) for (shape, qpow), const in sorted(groups.items())]


def _fold_period_terms(pform: PeriodForm, assignment: Assignment):
    us = assignment.u_floats()
    om = {k: float(v) for k, v in assignment.omega}
    groups: dict = {}
    for t in pform.terms:
        if t.coeff.im != 0:
            raise AlgebraError("period coefficient has an imaginary part")
        const = float(t.coeff.re)
        shape = []
        for v, e in t.exps:
            kind = v[0]
            if kind == K_U:
                const *= us[v[1] - 1] ** e
            elif kind == K_OMEGA:
                const *= om.get((v[1], v[2]), 0.0) ** e
            elif kind == K_MU:
                shape.append((f"m{v[1]}", e))
            elif kind == K_ZETA:
                shape.append((f"z{v[1]}", e))
            else:
                raise AlgebraError(f"unexpected variable {var_name(v)} in period form")
        if const == 0.0:
            continue
        key = (tuple(shape), t.qpow, t.mden, t.sden)
        groups[key] = groups.get(key, 0.0) + const
    return [(shape, q, m, s, const)
            for (shape, q, m, s), const in sorted(groups.items())]


def _group_value(shape, arrays, out_len, const, powcache):
    val = None
    for name, e in shape:
        p = powcache.get((name, e))
        if p is None:
            p = arrays[name] ** e
            powcache[(name, e)] = p
        val = p if val is None else val * p
    if val is None:
        return np.full(out_len, const)
    return const * val


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _block_plan(n_samples: int, seed: int, block: int):
    if n_samples <= 0:
        raise AlgebraError("sample count must be positive")
    n_blocks = (n_samples + block - 1) // block
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [block] * (n_blocks - 1) + [n_samples - block * (n_blocks - 1)]
    return zip(children, sizes)


def mc_sdw(density: Density, assignment: Assignment, n_samples: int,
           seed: int = 0, block: int = BLOCK) -> McEstimate:
    """Sample the coefficient straight from the traced density.

    cos(eta) = 1 - U makes sin(eta) d(eta) the exact eta law on (0, pi/2);
    psi is uniform; zeta is uniform on the Euclidean unit sphere with the
    Q(zeta) powers evaluated explicitly, so this estimator shares neither
    the cycle replacement nor the parity filter with the exact pipeline.
    The angular prefactors collapse to 1/n!.
    """
    n = density.n
    nz = 2 * n + 2
    groups = _fold_density_terms(density, assignment)
    wabs = assignment.w_weights()
    w2 = wabs * wabs
    pref = 1.0 / math.factorial(n)
    s1 = s2 = 0.0
    for child, b in _block_plan(n_samples, seed, block):
        rng = np.random.Generator(np.random.Philox(child))
        ce = 1.0 - rng.random(b)
        se = np.sqrt(1.0 - ce * ce)
        psi = rng.random(b) * (math.pi / 2)
        gauss = rng.standard_normal((b, nz))
        gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
        q = gauss[:, :4] ** 2 @ w2 + (gauss[:, 4:] ** 2).sum(axis=1)
        arrays = {"se": se, "ce": ce, "sp": np.sin(psi), "cp": np.cos(psi)}
        for k in range(1, nz + 1):
            arrays[f"z{k}"] = gauss[:, k - 1]
        powcache: dict = {}
        val = np.zeros(b)
        for shape, qpow, const in groups:
            term = _group_value(shape, arrays, b, const, powcache)
            if qpow:
                term = term / q ** qpow
            val += term
        val *= pref
        s1 += float(val.sum())
        s2 += float((val * val).sum())
    return _finish(s1, s2, n_samples, seed, "density-sphere")


def mc_period(pform: PeriodForm, assignment: Assignment, n_samples: int,
              seed: int = 0, block: int = BLOCK,
              calibration: bool = False) -> McEstimate:
    """Sample the coefficient from the period integrand over the mu square.

    mu_1, mu_2 are uniform on (0,1)^2 with the domain's disk constraint as
    an indicator; the sphere direction is *not* rescaled, the explicit
    Q(zeta) powers do the work. Prefactor 2/(n! pi). With ``calibration``
    the integrand is replaced by 1 and the indicator dropped, so the
    estimate must equal 2/(n! pi) exactly (zero variance).
    """
    n = pform.n
    nz = 2 * n + 2
    groups = _fold_period_terms(pform, assignment)
    wabs = assignment.w_weights()
    w2 = wabs * wabs
    pref = 2.0 / (math.factorial(n) * math.pi)
    use_disk = pform.domain.disk and not calibration
    s1 = s2 = 0.0
    for child, b in _block_plan(n_samples, seed, block):
        rng = np.random.Generator(np.random.Philox(child))
        mu1 = rng.random(b)
        mu2 = rng.random(b)
        bad = 1.0 - mu2 * mu2 < 1e-12
        while bad.any():
            mu2[bad] = rng.random(int(bad.sum()))
            bad = 1.0 - mu2 * mu2 < 1e-12
        gauss = rng.standard_normal((b, nz))
        gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
        if calibration:
            val = np.full(b, pref)
        else:
            q = gauss[:, :4] ** 2 @ w2 + (gauss[:, 4:] ** 2).sum(axis=1)
            mden_base = 1.0 - mu2 * mu2
            sden_base = mden_base - mu1 * mu1
            arrays = {"m1": mu1, "m2": mu2}
            for k in range(1, nz + 1):
                arrays[f"z{k}"] = gauss[:, k - 1]
            powcache: dict = {}
            val = np.zeros(b)
            for shape, qpow, mden, sden, const in groups:
                term = _group_value(shape, arrays, b, const, powcache)
                if qpow:
                    term = term / q ** qpow
                if mden:
                    term = term / mden_base ** mden
                if sden:
                    term = term / sden_base ** sden
                val += term
            if use_disk:
                val = np.where(mu1 * mu1 + mu2 * mu2 < 1.0, val, 0.0)
            val *= pref
        s1 += float(val.sum())
        s2 += float((val * val).sum())
    return _finish(s1, s2, n_samples, seed, "period-square")


def _finish(s1: float, s2: float, n: int, seed: int, label: str) -> McEstimate:
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    stderr = math.sqrt(var / (n - 1)) if n > 1 else float("inf")
    return McEstimate(estimate=mean, stderr=stderr, n_samples=n,
                      seed=seed, label=label)
