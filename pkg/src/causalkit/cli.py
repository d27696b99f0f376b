"""Command-line entry point: one subcommand per operation plus ``catalog`` and ``run``."""
from __future__ import annotations

import argparse
import json
import sys

from . import catalog
from .errors import ScenarioError
from .scenario import EXIT_ERROR, OUT_ENV, Scenario, load_scenario, run_scenario

# operation -> (option, help, default) ; options are stored as strings like in scenario files
_OPTIONS = {
    "reach": [("p", "seed point, comma separated", None), ("direction", "future or past", "future"),
              ("mode", "over, under or exact", "over"), ("horizon", "h-length horizon", None)],
    "diamond": [("p", "past tip", None), ("q", "future tip", None)],
    "tau": [("p", "start point", None), ("q", "end point", None), ("segments", "initial segments", "64"),
            ("restarts", "multistart count", "8")],
    "diagnose": [("trials", "causal-simplicity samples", "200"), ("pair_samples", "diamond pairs", "6"),
                 ("cauchy", "also test the level set of t (yes/no)", "no"), ("level", "level of t", "0")],
    "limit": [("p", "start point", None), ("q", "end point", None), ("kmax", "largest zigzag index", "64"),
              ("amplitude", "'inverse' (1/k) or 'null'", "inverse"), ("tol", "cluster tolerance", "1e-3")],
    "widen": [("shells", "number of shells", "4"), ("deltas", "comma separated ladder", None),
              ("samples", "metric samples per axis in the output grid", "17")],
    "develop": [("lo", "lower corner of S", None), ("hi", "upper corner of S", None),
                ("side", "future, past or both", "future")],
}


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{k}: expected a number, got {v!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causalkit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for op, opts in _OPTIONS.items():
        sp = sub.add_parser(op, help=f"run the {op} operation on a catalog spacetime")
        sp.add_argument("spacetime", help="catalog id (see 'causalkit catalog')")
        sp.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE",
                        help="catalog entry parameter")
        sp.add_argument("--resolution", type=int, help="lattice nodes per axis")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./causalkit_out)")
        for name, help_, default in opts:
            sp.add_argument(f"--{name}", help=help_ + (f" (default {default})" if default else ""))
    cat = sub.add_parser("catalog", help="list catalog entries")
    cat.add_argument("--json", action="store_true", help="full entries as JSON lines")
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", help="override the output directory")
    return ap


def _scenario_from_args(args) -> Scenario:
    opts = {name: getattr(args, name) for name, _, _ in _OPTIONS[args.command]
            if getattr(args, name) is not None}
    return Scenario(args.spacetime, args.command, opts, dict(args.param), args.resolution, args.seed,
                    args.out)


def _catalog(args) -> int:
    for name in catalog.names():
        st = catalog.get(name)
        if args.json:
            print(json.dumps(st.describe(), sort_keys=True))
        else:
            params = ", ".join(f"{k}={v}" for k, v in st.parameters.items())
            print(f"{name:<22s} {st.description}" + (f" [{params}]" if params else ""))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        return _catalog(args)
    try:
        if args.command == "run":
            sc = load_scenario(args.scenario)
            if args.out:
                sc.output = args.out
        else:
            sc = _scenario_from_args(args)
            catalog.get(sc.spacetime, sc.parameters)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    res = run_scenario(sc)
    print(json.dumps(res.summary, sort_keys=True))
    return res.status


if __name__ == "__main__":
    sys.exit(main())
