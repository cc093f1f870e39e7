"""``percolab`` command line.

Exit codes: 0 success, 1 a verification found a counterexample, 2 bad
invocation or a violated precondition.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

from . import __version__
from .engine import closure, parse_rule, sample_initial
from .errors import PercolabError, UnsupportedFamily
from .graphs import PermutationGraph, ProductGraph, default_K, make_graph
from .local import local_round_prob
from .structure import verify_permutahedron_isometry, verify_property
from .threshold import find_pc, parse_grid, star_layer_report, sweep, write_sweep_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _add_common(p, graph=True, rule=True, seed=True):
    if graph:
        p.add_argument("--graph", required=True, help="e.g. hypercube:n=10, permutahedron:n=4, stars:n=5,q=2")
    if rule:
        p.add_argument("--rule", default="majority", help="majority | rneib:r=R | boot:k=K,gscale=G")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="percolab", description="Bootstrap percolation on high-dimensional graphs.")
    ap.add_argument("--version", action="version", version=f"percolab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="<simulate|sweep|pc|localprob|verify|isometry|starlayers>")

    p = sub.add_parser("simulate", help="closure trace from one p-random initial set")
    _add_common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("sweep", help="coupled Phi-hat(p) over a grid")
    _add_common(p)
    p.add_argument("--pgrid", required=True, help="start:stop:count or comma list")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("pc", help="bisection bracket for p_c")
    _add_common(p)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--format", choices=("json",), default="json")

    p = sub.add_parser("localprob", help="Pr[x in A_t] from ball-restricted runs")
    _add_common(p)
    p.add_argument("--vertex", default="root", help="vertex text, or 'root'")
    p.add_argument("--layer", type=int, default=None, help="star products: vertex with this many centre coordinates")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--format", choices=("json",), default="json")

    p = sub.add_parser("verify", help="check a structural property")
    _add_common(p, rule=False, seed=False)
    p.add_argument("--prop", required=True, help="P1 P2 P3i P3ii P3iii P3iv P3v P4 P5 P6")
    p.add_argument("--K", type=int, default=None, help="family constant (default: family value)")
    p.add_argument("--lmax", type=int, default=2)
    p.add_argument("--roots", default=None, help="exhaustive | sample:COUNT:seed=S")
    p.add_argument("--format", choices=("json",), default="json")

    p = sub.add_parser("isometry", help="permutahedron distance vs inversion sets")
    _add_common(p, graph=False, rule=False, seed=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=("json",), default="json")

    p = sub.add_parser("starlayers", help="layer table of the star product")
    _add_common(p, graph=False, rule=False, seed=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--run-deterministic", action="store_true")
    p.add_argument("--format", choices=("json",), default="json")
    return ap


def _resolve_vertex(g, args):
    if args.layer is not None:
        if not isinstance(g, ProductGraph) or not g.is_star_product:
            raise UnsupportedFamily("--layer needs a star product graph")
        if not 0 <= args.layer <= g.dim:
            raise PercolabError(f"--layer must lie in 0..{g.dim}")
        return g.vertex([0] * args.layer + [1] * (g.dim - args.layer))
    if args.vertex == "root":
        return g.root()
    return g.parse_vertex(args.vertex)


def _config(args, **resolved):
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    cfg.update(resolved)
    return cfg


def _json_doc(config, result):
    return json.dumps({"config": config, "result": result}, sort_keys=True, indent=2) + "\n"


def _run(args):
    """Return (text, exit code)."""
    cmd = args.command
    if cmd == "isometry":
        rep = verify_permutahedron_isometry(args.n)
        return _json_doc(_config(args), rep.to_json(PermutationGraph(args.n + 1, max_vertices=10**9))), EXIT_OK if rep.passed else EXIT_FAIL
    if cmd == "starlayers":
        rep = star_layer_report(args.n, args.q, args.run_deterministic)
        ok = not args.run_deterministic or (rep.deterministic_percolation and rep.degree_split_verified)
        return _json_doc(_config(args), rep.to_json()), EXIT_OK if ok else EXIT_FAIL

    g = make_graph(args.graph)
    if cmd == "verify":
        K = default_K(g) if args.K is None else args.K
        rep = verify_property(g, args.prop, K, args.lmax, args.roots)
        cfg = _config(args, graph=g.name, K=K, roots=rep.scope)
        return _json_doc(cfg, rep.to_json(g)), EXIT_OK if rep.passed else EXIT_FAIL

    rule = parse_rule(args.rule)
    base = dict(graph=g.name, rule=str(rule))
    if cmd == "simulate":
        A0 = sample_initial(g, args.p, args.seed, args.trial)
        tr = closure(g, A0, rule, args.max_rounds)
        cfg = _config(args, **base)
        if args.format == "csv":
            buf = io.StringIO()
            buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
            buf.write("round,infected,newly_infected\n")
            prev = None
            for r, size in enumerate(tr.sizes):
                buf.write(f"{r},{size},{'' if prev is None else size - prev}\n")
                prev = size
            return buf.getvalue(), EXIT_OK
        res = dict(tr.to_json(), initial_size=A0.size, final_size=tr.final.size, order=g.order())
        return _json_doc(cfg, res), EXIT_OK
    if cmd == "sweep":
        grid = parse_grid(args.pgrid)
        rows = sweep(g, rule, grid, args.trials, args.seed, workers=args.workers)
        cfg = _config(args, **base, pgrid=grid)
        if args.format == "json":
            return _json_doc(cfg, [e.to_json() for e in rows]), EXIT_OK
        buf = io.StringIO()
        write_sweep_csv(buf, g, rule, rows, args.seed, {"config": json.dumps(cfg, sort_keys=True)})
        return buf.getvalue(), EXIT_OK
    if cmd == "pc":
        est = find_pc(g, rule, args.trials, args.tol, args.seed, workers=args.workers)
        return _json_doc(_config(args, **base), est.to_json()), EXIT_OK
    if cmd == "localprob":
        x = _resolve_vertex(g, args)
        est = local_round_prob(g, x, args.t, args.p, rule, args.trials, args.seed, workers=args.workers)
        cfg = _config(args, **base, vertex=g.format_vertex(x))
        return _json_doc(cfg, est.to_json(g)), EXIT_OK
    raise AssertionError(cmd)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        text, code = _run(args)
    except PercolabError as exc:
        print(f"percolab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"percolab {args.command}: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
