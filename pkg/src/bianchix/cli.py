"""Command-line entry point.

Subcommands: alpha, verify, period-form, classes, count, selftest.
Exit codes: 0 success, 1 usage error, 2 computation error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .exprs import AlgebraError
from .mc import DEFAULT_ASSIGNMENT, Assignment, mc_period, mc_sdw
from .motives import LOCI, CLASS_TABLE, CountSpec, count_points, split_form_check
from .pipeline import run_pipeline
from .residue import eval_alpha_exact
from .symbols import CacheError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2
EXIT_VERIFY = 3

SUPPORTED_N = (1, 2)

_LOCUS_ALIASES = {"quadric-complement": "quadric-complement-affine"}


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _usage_fail(message: str) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(EXIT_USAGE)


def resolve_cache_dir(flag_value) -> str:
    """Flag beats environment beats the working-directory default."""
    if flag_value:
        return str(flag_value)
    env = os.environ.get("BIANCHIX_CACHE_DIR")
    if env:
        return env
    return os.path.join(os.getcwd(), ".bianchix-cache")


def _emit(obj, args, human) -> None:
    if args.format == "json":
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        print(human)


def _check_n(n: int) -> None:
    if n not in SUPPORTED_N:
        raise _usage_fail("n out of supported range")


def _parse_assignment(text) -> Assignment:
    if text is None:
        return DEFAULT_ASSIGNMENT
    try:
        return Assignment.parse(text)
    except AlgebraError as exc:
        raise _usage_fail(str(exc))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_alpha(args) -> int:
    _check_n(args.n)
    result = run_pipeline(args.n, cache_dir=resolve_cache_dir(args.cache_dir))
    sdw = result.sdw
    lines = [f"alpha_{2 * args.n} = {sdw.render()}"]
    obj = sdw.to_obj()
    if args.eval is not None:
        a = _parse_assignment(args.eval)
        value = eval_alpha_exact(sdw.alpha, a.w, a.omega_dict())
        lines.append(f"assignment: {a.describe()}")
        lines.append(f"alpha_{2 * args.n}(assignment) = {value} "
                     f"= {float(value):.12g}")
        obj["eval"] = {"assignment": a.describe(), "value": str(value),
                       "value_float": float(value)}
    _emit(obj, args, "\n".join(lines))
    return EXIT_OK


def cmd_verify(args) -> int:
    _check_n(args.n)
    a = _parse_assignment(args.assignment)
    result = run_pipeline(args.n, cache_dir=resolve_cache_dir(args.cache_dir))
    exact = eval_alpha_exact(result.sdw.alpha, a.w, a.omega_dict())
    target = float(exact) + args.offset
    est_d = mc_sdw(result.density, a, args.samples, seed=args.seed)
    est_p = mc_period(result.period, a, args.samples, seed=args.seed + 1)
    report = {"n": args.n, "assignment": a.describe(),
              "exact": str(exact), "exact_float": float(exact),
              "offset": args.offset, "target": target,
              "estimates": [], "pass": True}
    lines = [f"n = {args.n}",
             f"assignment: {a.describe()}",
             f"exact value: {exact} = {float(exact):.12g}"]
    if args.offset:
        lines.append(f"offset applied for comparison: {args.offset:+g} "
                     f"-> target {target:.12g}")
    for est in (est_d, est_p):
        ok = est.agrees_with(target)
        z = (abs(est.estimate - target) / est.stderr
             if est.stderr > 0 else float("inf"))
        report["estimates"].append(dict(est.to_obj(), z=z, agrees=ok))
        report["pass"] = report["pass"] and ok
        lines.append(f"{est.label:>14s}: {est.estimate: .6f} "
                     f"+- {est.stderr:.6f}  (z = {z:.2f})  "
                     f"{'PASS' if ok else 'FAIL'}")
    lines.append(f"overall: {'PASS' if report['pass'] else 'FAIL'}")
    _emit(report, args, "\n".join(lines))
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_period_form(args) -> int:
    _check_n(args.n)
    result = run_pipeline(args.n, cache_dir=resolve_cache_dir(args.cache_dir))
    pf = result.period
    human = (f"period form for alpha_{2 * args.n} "
             f"({pf.term_count()} terms):\n{pf.render()}")
    _emit(pf.to_obj(), args, human)
    return EXIT_OK


def cmd_classes(args) -> int:
    if args.n_max < 1:
        raise _usage_fail("--n-max must be >= 1")
    rows = []
    for n in range(1, args.n_max + 1):
        for name, f, factored in CLASS_TABLE:
            poly = f(n)
            rows.append({"n": n, "class_name": name,
                         "coeffs": {str(k): c for k, c in poly.coeffs().items()},
                         "rendered": poly.render(),
                         "factored": factored(n)})
    width = max(len(r["class_name"]) for r in rows)
    lines = []
    for r in rows:
        lines.append(f"n={r['n']}  {r['class_name']:<{width}}  "
                     f"{r['rendered']}  =  {r['factored']}")
    _emit({"classes": rows}, args, "\n".join(lines))
    return EXIT_OK


def cmd_count(args) -> int:
    locus = _LOCUS_ALIASES.get(args.locus, args.locus)
    try:
        w = tuple(int(x) for x in args.w.split(","))
    except ValueError:
        raise _usage_fail(f"bad weight list {args.w!r}")
    try:
        spec = CountSpec(args.n, args.q, w, locus)
    except AlgebraError as exc:
        raise _usage_fail(str(exc))
    counted = count_points(spec)
    predicted = spec.class_poly().eval_at(args.q)
    ok = counted == predicted
    split_ok = split_form_check(args.q, w)
    obj = {"n": args.n, "q": args.q, "W": list(spec.W), "locus": locus,
           "counted": counted, "class_value": predicted, "match": ok,
           "split_form": split_ok}
    human = (f"locus {locus}, n={args.n}, q={args.q}, W={spec.W}\n"
             f"counted {counted} vs class value {predicted}: "
             f"{'PASS' if ok else 'FAIL'}\n"
             f"split-form identity over F_{args.q}: "
             f"{'PASS' if split_ok else 'FAIL'}")
    _emit(obj, args, human)
    return EXIT_OK if ok and split_ok else EXIT_VERIFY


def cmd_selftest(args) -> int:
    checks = _selftest_checks(resolve_cache_dir(args.cache_dir))
    results = []
    for name, fn in checks:
        try:
            fn()
            results.append((name, True, ""))
        except Exception as exc:  # report, do not abort the suite
            results.append((name, False, f"{type(exc).__name__}: {exc}"))
    passed = sum(1 for _n, ok, _m in results if ok)
    lines = []
    for name, ok, msg in results:
        lines.append(f"{'ok  ' if ok else 'FAIL'}  {name}"
                     + (f"  ({msg})" if msg else ""))
    lines.append(f"{passed}/{len(results)} invariant checks passed")
    obj = {"checks": [{"name": n, "pass": ok, "detail": m}
                      for n, ok, m in results],
           "passed": passed, "total": len(results)}
    _emit(obj, args, "\n".join(lines))
    return EXIT_OK if passed == len(results) else EXIT_VERIFY


def _selftest_checks(cache_dir):
    """The fast invariant suite, named by what each check asserts."""
    from fractions import Fraction as F

    from .exprs import Expr, Mat4, gamma_rep, q_cleared_equal
    from .motives import LPoly, c2n_closed, c2n_rec, complement_c2, \
        complement_c2_h, quadric_class
    from .residue import zeta_moment
    from .symbols import cotangent_degree, dirac_symbol, square_symbol, \
        zeta_q_expr, zeta_substitution_rules

    def clifford():
        for rep in ("split", "chiral"):
            g = gamma_rep(rep).gammas
            for i in range(4):
                assert (g[i] * g[i] + Mat4.identity()).is_zero()
                for j in range(i + 1, 4):
                    assert (g[i] * g[j] + g[j] * g[i]).is_zero()
                assert g[i].trace().is_zero()

    def square_is_quadric():
        q1, q0 = dirac_symbol()
        trip = square_symbol(q1, q0)
        p2z = trip.p2.substitute(zeta_substitution_rules(1))
        assert (p2z - Mat4.from_scalar(zeta_q_expr(1))).is_zero()

    def base_inverse():
        res = run_pipeline(1, cache_dir=cache_dir)
        qc = res.resolvent.qctx
        core = res.resolvent.layers[-2].scalar * qc.expr
        assert q_cleared_equal(core, Expr.one(), qc)

    def homogeneity():
        res = run_pipeline(1, cache_dir=cache_dir)
        for m, layer in res.resolvent.layers.items():
            for row in layer.rows:
                for e in row:
                    for t in e.terms():
                        assert cotangent_degree(t.exps, t.qpow) == m

    def moment_oracle():
        v, p = zeta_moment((2, 0, 2, 0))
        assert (v, p) == (F(1, 12), 2)
        v, p = zeta_moment((0, 0, 0, 0))
        assert (v, p) == (F(2), 2)

    def alpha_regression():
        res = run_pipeline(1, cache_dir=cache_dir)
        iso = eval_alpha_exact(res.sdw.alpha, (F(1), F(1), F(1)), {})
        assert iso == F(-1, 2), iso
        a = DEFAULT_ASSIGNMENT
        anchor = eval_alpha_exact(res.sdw.alpha, a.w, a.omega_dict())
        assert anchor == F(143, 72), anchor

    def mc_calibration():
        res = run_pipeline(1, cache_dir=cache_dir)
        import math
        est = mc_period(res.period, DEFAULT_ASSIGNMENT, 4096, seed=7,
                        calibration=True)
        assert abs(est.estimate - 2 / math.pi) < 1e-12

    def class_identities():
        for n in range(1, 65):
            assert c2n_rec(n) == c2n_closed(n)
        for n in range(1, 33):
            z = quadric_class(n)
            assert complement_c2(z, n) == LPoly.L(2) * c2n_closed(n)
            assert complement_c2_h(z, n) == \
                (LPoly.L(1) - 2) * LPoly.L(1) * c2n_closed(n)

    def point_counts():
        spec = CountSpec(1, 5, (1, 2, 1, 3), "quadric-complement-affine")
        assert count_points(spec) == 480
        spec = CountSpec(1, 5, (1, 2, 1, 3),
                         "cone2-complement-minus-hyperplanes")
        assert count_points(spec) == 7200

    def split_forms():
        assert split_form_check(5, (1, 2, 1, 3))
        assert split_form_check(13, (1, 1, 1, 1))

    return [
        ("clifford-relations", clifford),
        ("principal-symbol-is-quadric", square_is_quadric),
        ("resolvent-base-inverse", base_inverse),
        ("layer-homogeneity", homogeneity),
        ("sphere-moment-oracle", moment_oracle),
        ("alpha-frozen-values", alpha_regression),
        ("period-calibration", mc_calibration),
        ("class-identities", class_identities),
        ("point-count-oracle", point_counts),
        ("split-form-identity", split_forms),
    ]


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="bianchix",
                description="Exact anisotropic heat-coefficient pipeline "
                            "with numeric and finite-field verifiers.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cache=True):
        sp.add_argument("--format", choices=("human", "json"),
                        default="human")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker cap; computations are single-process, "
                             "so this only validates")
        if cache:
            sp.add_argument("--cache-dir", default=None,
                            help="layer cache directory (default: "
                                 "$BIANCHIX_CACHE_DIR or ./.bianchix-cache)")

    sp = sub.add_parser("alpha", help="exact heat coefficient")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--eval", default=None, metavar="ASSIGNMENT",
                    help="also evaluate at w1=..,w2=..,w3=..[,w1p=..,...]")
    common(sp)
    sp.set_defaults(fn=cmd_alpha)

    sp = sub.add_parser("verify", help="Monte Carlo cross-check of alpha")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--assignment", default=None)
    sp.add_argument("--samples", type=int, default=10 ** 6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--offset", type=float, default=0.0,
                    help="shift the exact value before comparison "
                         "(negative-control hook)")
    common(sp)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("period-form",
                        help="integrand over the mu square and sphere")
    sp.add_argument("--n", type=int, required=True)
    common(sp)
    sp.set_defaults(fn=cmd_period_form)

    sp = sub.add_parser("classes", help="class polynomial table")
    sp.add_argument("--n-max", type=int, required=True)
    common(sp, cache=False)
    sp.set_defaults(fn=cmd_classes)

    sp = sub.add_parser("count", help="finite-field point count vs class")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--w", required=True, metavar="W1,W2,W3,W4")
    sp.add_argument("--locus", default="quadric-complement-affine",
                    choices=sorted(set(LOCI) | set(_LOCUS_ALIASES)))
    common(sp, cache=False)
    sp.set_defaults(fn=cmd_count)

    sp = sub.add_parser("selftest", help="run the fast invariant suite")
    common(sp)
    sp.set_defaults(fn=cmd_selftest)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except AlgebraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
