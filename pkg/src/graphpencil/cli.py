"""Command-line interface: ``graphpencil <command> [options]``.

Exit codes: 0 success, 2 usage or invalid input, 3 numerical failure
(diagnostics are dumped to stderr as JSON), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import counting, experiment, pencil
from .errors import BudgetError, NumericalError, ParseError, ValidationError
from .glyphs import BistarGlyph, Rooting, block_degrees, eval_density, parse_glyph
from .graph import SampleConfig, load_edge_list, load_params, sample_graph, save_edge_list, save_labels

log = logging.getLogger("graphpencil")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _csv(fields, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json(doc):
    return json.dumps(pencil._jsonable(doc), indent=2) + "\n"


def _params_from_args(args):
    if getattr(args, "params", None):
        return load_params(args.params)
    if getattr(args, "regime", None):
        return experiment.regime(args.regime)
    raise UsageError("give --params FILE or --regime NAME")


def _glyph(text, rooting=Rooting.UNROOTED):
    # a bad glyph on the command line is a usage error, not a file error
    try:
        return parse_glyph(text, rooting)
    except ParseError as exc:
        raise UsageError(str(exc)) from None


# subcommands


def cmd_forward(args):
    params = _params_from_args(args)
    rooting = Rooting(args.rooting)
    out = []
    for text in args.glyph:
        g = _glyph(text, rooting)
        out.append((g, np.asarray(eval_density(params, g))))
    if args.format == "structured":
        doc = {"params": params.to_dict(),
               "densities": [{"glyph": str(g), "rooting": g.rooting.value, "density": v}
                             for g, v in out]}
        _emit(_json(doc), args.output)
        return
    rows = []
    for g, v in out:
        if v.ndim == 0:
            rows.append((str(g), g.rooting.value, "", "", float(v)))
        else:
            for idx in np.ndindex(v.shape):
                i, j = (idx + ("",))[:2]
                rows.append((str(g), g.rooting.value, i, j, float(v[idx])))
    _emit(_csv(("glyph", "rooting", "i", "j", "density"), rows), args.output)


def cmd_sample(args):
    params = _params_from_args(args)
    graph = sample_graph(params, SampleConfig(args.n, args.seed))
    if args.output in (None, "-"):
        raise UsageError("sample needs --output for the edge-list file")
    save_edge_list(graph, args.output)
    if args.labels:
        save_labels(graph.blocks, args.labels)
    summary = {"n": graph.n, "edges": graph.edge_count, "edge_density": graph.edge_density(),
               "seed": args.seed, "output": args.output}
    if args.format == "structured":
        sys.stdout.write(_json(summary))
    else:
        sys.stdout.write(_csv(tuple(summary), [tuple(summary.values())]))


def _count_glyphs(args):
    glyphs = [_glyph(t) for t in args.glyph or []]
    if args.max_lcr:
        ml, mc, mr = args.max_lcr
        for l in range(ml + 1):
            for c in range(mc + 1):
                for r in range(min(mr, l) + 1):
                    for e in (False, True):
                        glyphs.append(BistarGlyph(l, c, r, e))
    if not glyphs:
        raise UsageError("give at least one --glyph or --max-lcr")
    seen, out = set(), []
    for g in glyphs:
        g = g.canonical()
        if g.key not in seen:
            seen.add(g.key)
            out.append(g)
    return out


def cmd_count(args):
    graph = load_edge_list(args.graph)
    glyphs = _count_glyphs(args)
    table = counting.table_for(graph, glyphs)
    totals = table.counts([g.key for g in glyphs])
    rows = []
    for g in glyphs:
        jack = float("nan") if args.no_jackknife else counting.jackknife_variance(graph, g)
        rows.append((str(g), int(totals[g.key]), table.density(g.key), jack))
    if args.format == "structured":
        doc = {"graph": {"n": graph.n, "edges": graph.edge_count},
               "glyphs": [dict(zip(("glyph", "count", "density", "jackknife_variance"), r))
                          for r in rows]}
        _emit(_json(doc), args.output)
    else:
        _emit(_csv(("glyph", "count", "density", "jackknife_variance"), rows), args.output)


def cmd_infer(args):
    graph = load_edge_list(args.graph)
    sol = pencil.infer_sbm(pencil.GraphDensities(graph), args.k, two_hop=args.two_hop,
                           clamp=args.clamp, basis=args.basis)
    if args.format == "csv":
        rows = [(k, float(sol.pi[k]), float(sol.d[k])) + tuple(float(x) for x in sol.b[k])
                for k in range(sol.k)]
        fields = ("block", "pi", "d") + tuple(f"B_{j}" for j in range(sol.k))
        _emit(_csv(fields, rows), args.output)
    else:
        _emit(_json(sol.to_dict()), args.output)


def cmd_roundtrip(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for t in range(args.trials):
        params = experiment.random_degree_separated_sbm(rng, args.k)
        truth = experiment.align_to_truth(params)
        sol = pencil.infer_sbm(pencil.ExactDensities(params), args.k, two_hop=args.two_hop,
                               basis=args.basis)
        err = max(np.abs(sol.pi - truth.pi).max(),
                  np.abs(sol.d - np.sort(block_degrees(params))[::-1]).max(),
                  np.abs(sol.b - truth.b).max())
        rows.append((t, float(err)))
    worst = max(e for _, e in rows)
    if args.format == "structured":
        _emit(_json({"k": args.k, "trials": args.trials, "seed": args.seed,
                     "max_error": worst, "errors": [e for _, e in rows]}), args.output)
    else:
        _emit(_csv(("trial", "max_abs_error"), rows), args.output)
    log.info("k=%d trials=%d max error %.3g", args.k, args.trials, worst)


def _experiment_spec(args):
    if args.spec:
        spec = experiment.load_experiment_spec(args.spec)
        if args.seed_given:
            spec = dataclasses.replace(spec, seed=args.seed)
        return spec
    kw = {"sbm": _params_from_args(args), "seed": args.seed, "sparse_mode": args.sparse}
    if args.sizes:
        kw["sizes"] = args.sizes
        kw["replicates"] = args.replicates or [max(1, 16384 // s) for s in args.sizes]
    elif args.replicates:
        kw["replicates"] = args.replicates
    if args.methods:
        kw["methods"] = args.methods
    kw["basis"] = args.basis
    return experiment.ExperimentSpec(**kw)


def _report_dir(output):
    if output in (None, "-"):
        return None
    path = Path(output)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_experiment(args):
    spec = _experiment_spec(args)
    res = experiment.run_experiment(
        spec, progress=lambda n, r: log.debug("n=%d replicate %d", n, r))
    out = _report_dir(args.output)
    if args.format == "structured":
        text = _json({"spec": spec.to_dict(), "summary": res.summary, "raw": res.raw})
    else:
        text = res.summary_csv()
    if out is None:
        sys.stdout.write(text)
        return
    (out / ("result.json" if args.format == "structured" else "summary.csv")).write_text(text)
    (out / "raw.csv").write_text(res.raw_csv())
    (out / "spec.json").write_text(_json(spec.to_dict()))
    if not args.no_plot:
        from .plotting import plot_experiment
        plot_experiment(res, out / "figure.png", title=args.regime)
    for m in spec.methods:
        log.info("%s: log-log slope %.2f", m, res.slope(m))


def cmd_variance_check(args):
    params = _params_from_args(args)
    glyphs = [_glyph(t) for t in (args.glyph or ["E", "L1 E"])]
    res = experiment.variance_check(params, args.n, glyphs, graphs=args.graphs, seed=args.seed,
                                    progress=lambda i: log.debug("graph %d", i))
    out = _report_dir(args.output)
    text = (_json({"params": params.to_dict(), "rows": res.rows})
            if args.format == "structured" else res.summary_csv())
    if out is None:
        sys.stdout.write(text)
        return
    (out / ("result.json" if args.format == "structured" else "summary.csv")).write_text(text)
    (out / "raw.csv").write_text(res.raw_csv())
    if not args.no_plot:
        from .plotting import plot_variance_check
        plot_variance_check(res, out / "figure.png")


# parser


def _common(p, default_format="csv"):
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--output", "-o", help="output file (directory for experiment and "
                   "variance-check); stdout when omitted")
    p.add_argument("--format", choices=("csv", "structured"), default=default_format,
                   help=f"output format (default {default_format})")


def _model_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--params", help="SBM parameter file (JSON)")
    g.add_argument("--regime", choices=sorted(experiment.REGIMES),
                   help="built-in K=2 SBM")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphpencil",
        description="Stochastic block model inference from subgraph densities.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (repeat for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="exact glyph densities of an SBM")
    _model_args(p)
    p.add_argument("--glyph", action="append", required=True,
                   help='glyph such as "L1 E" (repeatable)')
    p.add_argument("--rooting", choices=[r.value for r in Rooting], default="unrooted")
    _common(p)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("sample", help="sample a graph from an SBM")
    _model_args(p)
    p.add_argument("--n", type=int, required=True, help="number of nodes")
    p.add_argument("--labels", help="also write node blocks to this file")
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("count", help="injective bistar counts, densities and jackknife variances")
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--glyph", action="append", help="glyph to count (repeatable)")
    p.add_argument("--max-lcr", type=int, nargs=3, metavar=("L", "C", "R"),
                   help="count every glyph up to these left/mid/right sizes")
    p.add_argument("--no-jackknife", action="store_true", help="skip variance estimates")
    _common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("infer", help="infer SBM parameters from a graph")
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--k", type=int, required=True, help="number of blocks")
    p.add_argument("--two-hop", action="store_true", help="add the two-hop columns")
    p.add_argument("--clamp", action="store_true",
                   help="project pi onto the simplex and clip B to [0, 1]")
    p.add_argument("--basis", choices=pencil.BASES, default="auto")
    _common(p, default_format="structured")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("roundtrip", help="exact densities -> inference on random SBMs")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--two-hop", action="store_true")
    p.add_argument("--basis", choices=pencil.BASES, default="auto")
    _common(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("experiment", help="error-versus-size experiment with figure")
    _model_args(p)
    p.add_argument("--spec", help="experiment spec file (JSON); overrides model options")
    p.add_argument("--sizes", type=int, nargs="+", help="graph sizes (ascending)")
    p.add_argument("--replicates", type=int, nargs="+", help="replicates per size (or one count)")
    p.add_argument("--methods", nargs="+", choices=experiment.METHODS)
    p.add_argument("--sparse", action="store_true", help="scale B by n_ref / n")
    p.add_argument("--basis", choices=pencil.BASES, default="auto")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    _common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("variance-check", help="jackknife variance against sampled spread")
    _model_args(p)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--graphs", type=int, default=200)
    p.add_argument("--glyph", action="append", help='glyph (default "E" and "L1 E")')
    p.add_argument("--no-plot", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_variance_check)
    return parser


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except NumericalError as exc:
        print(f"graphpencil: numerical failure: {exc}", file=sys.stderr)
        print(_json({"stage": exc.stage, "diagnostics": exc.details}), file=sys.stderr)
        return EXIT_NUMERICAL
    except ParseError as exc:
        print(f"graphpencil: parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, BudgetError) as exc:
        print(f"graphpencil: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"graphpencil: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
