"""Command-line front end: gen, exact, simulate, verify, identities.

Exit codes: 0 success or verification pass, 1 verification failure,
2 usage error, 3 input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .distributions import RngStream
from .errors import LeafElectError, ParameterError, SchemeError, TreeError
from .exact import EXACT_MEMORYLESS, check_identity, q_first_category, q_stable
from .montecarlo import ORACLE_MAX_N, brute_force_memoryless, monte_carlo
from .simulate import (
    SCHEME_NAMES,
    ConstantRate,
    FirstCategory,
    PoissonWeighted,
    SecondCategoryStable,
    run_election,
    scheme_from_spec,
)
from .trees import Tree, generate, parse_tree

DEFAULT_SEED = 20240611
DEFAULT_TRIALS = 100_000
Z_LIMIT = 4.0
ORACLE_SE = 3.0

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# --- argument helpers ---------------------------------------------------------


def parse_gen_spec(spec: str, seed: int | None = None) -> Tree:
    """``shape:p1,p2,...``, e.g. ``star:6``, ``caterpillar:2,3,1``, ``random:10[,seed]``."""
    shape, _, rest = spec.partition(":")
    params = [p for p in rest.replace(" ", "").split(",") if p]
    try:
        return generate(shape.strip().lower(), *params, seed=seed)
    except ParameterError as exc:
        raise UsageError(f"bad --gen spec {spec!r}: {exc}") from None


def load_tree(args) -> Tree:
    if args.tree and args.gen:
        raise UsageError("give either --tree or --gen, not both")
    if args.gen:
        return parse_gen_spec(args.gen)
    if not args.tree:
        raise UsageError("a tree is required: --tree FILE or --gen SPEC")
    path = Path(args.tree)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    fmt = "json" if path.suffix.lower() == ".json" or data.lstrip()[:1] == b"{" else "edgelist"
    try:
        return parse_tree(data, fmt)
    except TreeError as exc:
        raise InputError(f"{path}: [{exc.code}] {exc}") from None


def load_scheme(spec: str):
    try:
        return scheme_from_spec(spec)
    except (SchemeError, ParameterError) as exc:
        raise UsageError(str(exc)) from None


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _z(q_hat: float, q: float, trials: int) -> float:
    se = math.sqrt(q * (1.0 - q) / trials) if trials else 0.0
    if se == 0.0:
        return 0.0 if q_hat == q else math.inf
    return (q_hat - q) / se


# --- commands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.spec:
        shape, *params = args.spec
        if len(params) == 1 and "," in params[0]:
            params = params[0].split(",")
        spec = f"{shape}:{','.join(params)}"
    elif args.gen:
        spec = args.gen
    else:
        raise UsageError("gen needs a shape, e.g. 'gen star 6' or '--gen star:6'")
    tree = parse_gen_spec(spec, args.seed)
    emit(tree.to_json(), args.out)
    print(f"n={tree.n} edges={len(tree.edges)}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def exact_table(tree: Tree, scheme):
    if isinstance(scheme, SecondCategoryStable):
        return q_stable(tree)
    if isinstance(scheme, FirstCategory):
        if not scheme.rule.commutative:
            raise UsageError(
                f"{scheme.rule!r} depends on the order of its children and has no closed form; "
                "use 'simulate'"
            )
        try:
            return q_first_category(tree, scheme.rule)
        except SchemeError as exc:
            raise InputError(str(exc)) from None
    raise UsageError(f"scheme {scheme.name!r} has no closed form; use 'simulate' instead")


def cmd_exact(args) -> int:
    tree = load_tree(args)
    scheme = load_scheme(args.scheme)
    table = exact_table(tree, scheme)
    if args.format == "csv":
        emit(table.to_csv(), args.out)
    else:
        doc = table.to_dict()
        doc["scheme"] = args.scheme
        emit(dump_json(doc), args.out)
    return EXIT_OK


def _check_trials(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")


def _write_trace(tree, scheme, seed, path):
    out = run_election(tree, scheme, RngStream(seed, 0), trace=True)
    lines = "".join(json.dumps(ev) + "\n" for ev in out.trace)
    Path(path).write_text(lines, encoding="utf-8")


def _run_mc(tree, scheme, args):
    try:
        return monte_carlo(tree, scheme, args.trials, args.seed, workers=args.workers)
    except SchemeError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args) -> int:
    _check_trials(args)
    tree = load_tree(args)
    scheme = load_scheme(args.scheme)
    res = _run_mc(tree, scheme, args)
    if args.trace:
        _write_trace(tree, scheme, args.seed, args.trace)
    if args.format == "csv":
        emit(res.table.to_csv(), args.out)
    else:
        doc = res.to_dict()
        doc["scheme"] = args.scheme
        emit(dump_json(doc), args.out)
    return EXIT_OK


def verify_report(tree: Tree, scheme, scheme_spec: str, trials: int, seed: int, workers: int = 1) -> dict:
    """Compare Monte Carlo estimates with the exact reference for ``scheme``.

    Passes iff every node's |z| <= 4; for the constant-rate scheme the
    reference is the enumeration oracle and the bound is 3 standard errors.
    For the Poisson-weighted scheme the winner frequencies are conditioned on
    success and compared with w_u / w(T); the failure rate is checked against
    exp(-scale * w(T)).
    """
    extra = {}
    limit = Z_LIMIT
    # settle the reference first so bad requests fail before any simulation
    if isinstance(scheme, ConstantRate):
        if tree.n > ORACLE_MAX_N:
            raise UsageError(f"constant-rate verification needs n <= {ORACLE_MAX_N} for the oracle")
        ref = brute_force_memoryless(tree).q
        limit = min(limit, ORACLE_SE)
        provenance = EXACT_MEMORYLESS
    elif isinstance(scheme, PoissonWeighted):
        wt = tree.total_weight
        if wt <= 0:
            raise InputError("poisson verification needs a positive total weight")
        ref = tuple(w / wt for w in tree.weights)
        provenance = "conditional_weight"
    else:
        table = exact_table(tree, scheme)
        ref = table.q
        provenance = table.provenance

    res = monte_carlo(tree, scheme, trials, seed, workers=workers)
    q_hat, denom = res.table.q, trials
    if isinstance(scheme, PoissonWeighted):
        denom = res.successes
        q_hat = res.conditional_table().q if denom else (0.0,) * tree.n
        p_fail = math.exp(-scheme.scale * tree.total_weight)
        extra = {
            "failure_rate": res.failure_rate,
            "failure_expected": p_fail,
            "failure_z": _z(res.failure_rate, p_fail, trials),
        }
    rows = [
        {"node": u, "q_exact": ref[u], "q_hat": q_hat[u], "z": _z(q_hat[u], ref[u], denom)}
        for u in range(tree.n)
    ]
    zs = [abs(r["z"]) for r in rows]
    if "failure_z" in extra:
        zs.append(abs(extra["failure_z"]))
    max_z = max(zs)
    return {
        "scheme": scheme_spec,
        "n": tree.n,
        "trials": trials,
        "seed": seed,
        "reference": provenance,
        "z_limit": limit,
        "rows": rows,
        **extra,
        "max_abs_z": max_z,
        "pass": max_z <= limit,
    }


def cmd_verify(args) -> int:
    _check_trials(args)
    tree = load_tree(args)
    scheme = load_scheme(args.scheme)
    try:
        report = verify_report(tree, scheme, args.scheme, args.trials, args.seed, args.workers)
    except SchemeError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        rows = [(r["node"], r["q_exact"], r["q_hat"], r["z"]) for r in report["rows"]]
        emit(rows_to_csv(["node", "q_exact", "q_hat", "z"], rows), args.out)
    else:
        emit(dump_json(report), args.out)
    print("PASS" if report["pass"] else "FAIL", f"max|z|={report['max_abs_z']:.3f}", file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_identities(args) -> int:
    try:
        if args.check == "reciprocal":
            if args.x is None:
                raise UsageError("reciprocal needs --x")
            rep = check_identity("reciprocal", args.x)
        elif args.check == "star":
            if args.n is None:
                raise UsageError("star needs --n")
            rep = check_identity("star", args.n)
        else:
            if not args.alphas:
                raise UsageError("caterpillar needs --alphas a1,a2,...")
            try:
                alphas = [float(a) for a in args.alphas.split(",")]
            except ValueError:
                raise UsageError(f"bad --alphas {args.alphas!r}") from None
            rep = check_identity("caterpillar", alphas)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    doc = rep.to_dict()
    doc["tolerance"] = args.tol
    doc["pass"] = rep.abs_error <= args.tol
    if args.format == "csv":
        emit(rows_to_csv(list(doc), [list(doc.values())]), args.out)
    else:
        emit(dump_json(doc), args.out)
    return EXIT_OK if doc["pass"] else EXIT_FAIL


# --- parser ------------------------------------------------------------------


def _common(p, *, scheme=True, trials=False):
    src = p.add_argument_group("tree source")
    src.add_argument("--tree", metavar="FILE", help="tree file (JSON or edge list)")
    src.add_argument("--gen", metavar="SPEC",
                     help="generator spec: path:K, star:N, double_star:A,B, caterpillar:A1,..., random:N[,SEED]")
    if scheme:
        p.add_argument("--scheme", default="uniform", metavar="NAME[:PARAM]",
                       help=f"one of {', '.join(SCHEME_NAMES)} or custom:MODULE:FUNC (default: uniform)")
    if trials:
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help=f"default {DEFAULT_TRIALS}")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; results do not depend on this")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default {DEFAULT_SEED}")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", metavar="PATH", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafelect",
        description="Leaf-elimination leader election on trees: exact probabilities and simulation.",
        epilog="Exit codes: 0 ok, 1 verification failed, 2 usage error, 3 input error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a tree as JSON")
    p.add_argument("spec", nargs="*", help="shape and parameters, e.g. 'star 6' or 'caterpillar 2,3,1'")
    p.add_argument("--gen", metavar="SPEC", help="same as the positional form, e.g. star:6")
    p.add_argument("--seed", type=int, default=None, help="seed for random trees (default 0)")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("exact", help="closed-form election probabilities")
    _common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte Carlo election probabilities")
    _common(p, trials=True)
    p.add_argument("--trace", metavar="PATH", help="write the first trial's events as JSON lines")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "verify",
        help="compare simulation with the exact reference",
        description=(
            "Runs exact and Monte Carlo side by side and reports a z-score per node. "
            f"Passes iff max |z| <= {Z_LIMIT:g}; this keeps the false-failure rate of a "
            "whole test suite near 1%. The constant-rate scheme (n <= 9) is checked "
            f"against the enumeration oracle at {ORACLE_SE:g} standard errors."
        ),
    )
    _common(p, trials=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identities", help="check the arctan identities numerically")
    p.add_argument("--check", choices=("reciprocal", "star", "caterpillar"), required=True)
    p.add_argument("--x", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--alphas", metavar="A1,A2,...")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_identities)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"leafelect {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, TreeError) as exc:
        print(f"leafelect {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LeafElectError as exc:
        print(f"leafelect {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"leafelect {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
