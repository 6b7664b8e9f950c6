"""End-to-end runs shared by the command-line tool and the tests.

One call takes n from the symbol recursion through the traced density to the
exact coefficient and the period integrand, reusing the layer cache plus one
extra cached artifact for the traced density (the zeta substitution is the
dominant cost once layers are cached).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

from .exprs import AlgebraError, Expr
from .residue import (
    Density,
    PeriodForm,
    SdwResult,
    assemble_alpha,
    emit_period_form,
    parity_filter,
)
from .symbols import (
    CacheError,
    Resolvent,
    resolvent,
    traced_zeta_density,
    zeta_q_context,
)

_DENSITY_FMT = "bianchix-traced-density-v1"


@dataclass
class PipelineResult:
    """Everything a caller can ask of one (n, representation) run."""

    n: int
    rep_name: str
    resolvent: Resolvent
    density: Density
    filtered: Density
    sdw: SdwResult
    period: PeriodForm
    stats: dict = field(default_factory=dict)


def _density_cache_path(cache_dir, n: int) -> Path:
    return Path(cache_dir) / f"density_n{n}.json"


def _save_density(path: Path, n: int, upstream: str, expr: Expr) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    obj = {"schema": 1, "fmt": _DENSITY_FMT, "n": n, "upstream_hash": upstream,
           "term_count": expr.term_count(), "expr": expr.to_obj()}
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(obj, separators=(",", ":")))
    tmp.replace(path)


def _load_density(path: Path, n: int, upstream: str) -> Expr:
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise CacheError(f"unreadable cache file {path}: {err}") from None
    if obj.get("schema") != 1 or obj.get("fmt") != _DENSITY_FMT or obj.get("n") != n:
        raise CacheError(f"cache file {path} does not match requested density")
    if obj.get("upstream_hash") != upstream:
        raise CacheError(f"stale cache file {path} (upstream hash mismatch)")
    try:
        return Expr.from_obj(obj["expr"])
    except (KeyError, AlgebraError, TypeError) as err:
        raise CacheError(f"corrupt cache payload in {path}: {err}") from None


def run_pipeline(n: int, rep_name: str = "split", cache_dir=None,
                 progress=None) -> PipelineResult:
    """Layers, traced density, exact coefficient, period form, in that order."""
    rs = resolvent(n, rep_name=rep_name, cache_dir=cache_dir, progress=progress)
    upstream = sha256((rs.chain + _DENSITY_FMT).encode()).hexdigest()

    expr = None
    path = _density_cache_path(cache_dir, n) if cache_dir is not None else None
    if path is not None and path.exists():
        try:
            expr = _load_density(path, n, upstream)
            if progress:
                progress(f"traced density: {expr.term_count()} terms (cached)")
        except CacheError as err:
            print(f"cache ignored: {err}")
            expr = None
    if expr is None:
        expr, qctx = traced_zeta_density(rs)
        if path is not None:
            _save_density(path, n, upstream, expr)
        if progress:
            progress(f"traced density: {expr.term_count()} terms")
    qctx = zeta_q_context(n)

    density = Density(n=n, expr=expr, qctx=qctx)
    filtered = parity_filter(density)
    sdw = assemble_alpha(density, extra_stats=rs.stats)
    period = emit_period_form(filtered)
    stats = dict(sdw.stats)
    stats.update(period.stats)
    return PipelineResult(n=n, rep_name=rep_name, resolvent=rs, density=density,
                          filtered=filtered, sdw=sdw, period=period, stats=stats)
