"""Scenario files: parse a sectioned key-value config, dispatch one operation, write artifacts.

Example::

    [scenario]
    spacetime = minkowski2d
    operation = tau
    seed = 0

    [operation]
    p = 0, 0
    q = 2, 1
    segments = 64

Optional sections: ``[parameters]`` (catalog entry parameters), ``[grid]``
(``resolution``) and ``[output]`` (``dir``).  Without an output dir the
``CAUSALKIT_OUT`` environment variable is used, then ``./causalkit_out``.
"""
from __future__ import annotations

import configparser
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import catalog
from .chart import Box
from .curves import CausalCurve, fmt, write_curve
from .errors import (EmptySet, InconclusiveBounded, NoAccumulation, NonConvergence, NotCausallyRelated,
                     ScenarioError)
from .grid import Grid
from .io import atomic_write_text, write_jsonl, write_metric_grid

OUT_ENV = "CAUSALKIT_OUT"
EXIT_PASS, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
OPERATIONS = ("reach", "diamond", "tau", "diagnose", "limit", "widen", "develop")


class ConfigError(ScenarioError):
    def __init__(self, msg: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f"line {line}" + (f", column {column}" if column else "") if line else ""
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.column = line, column


@dataclass
class Scenario:
    spacetime: str
    operation: str
    options: Dict[str, str] = field(default_factory=dict)
    parameters: Dict[str, float] = field(default_factory=dict)
    resolution: Optional[int] = None
    seed: int = 0
    output: Optional[str] = None
    positions: Dict[Tuple[str, str], Tuple[int, int]] = field(default_factory=dict)

    def out_dir(self) -> Path:
        return Path(self.output or os.environ.get(OUT_ENV) or "causalkit_out")

    def where(self, section: str, key: str) -> Tuple[Optional[int], Optional[int]]:
        return self.positions.get((section, key), (None, None))

    def _bad(self, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{key}: {msg}", *self.where("operation", key))

    def get(self, key: str, default=None) -> Optional[str]:
        return self.options.get(key, default)

    def number(self, key: str, default=None, kind=float):
        raw = self.options.get(key)
        if raw is None:
            if default is None:
                raise self._bad(key, "missing")
            return default
        try:
            return kind(raw)
        except ValueError:
            raise self._bad(key, f"expected a number, got {raw!r}") from None

    def vector(self, key: str, default=None) -> np.ndarray:
        raw = self.options.get(key)
        if raw is None:
            if default is None:
                raise self._bad(key, "missing")
            return np.asarray(default, dtype=float)
        try:
            return np.array([float(t) for t in re.split(r"[,\s]+", raw.strip()) if t], dtype=float)
        except ValueError:
            raise self._bad(key, f"expected numbers separated by commas, got {raw!r}") from None


def _positions(text: str) -> Dict[Tuple[str, str], Tuple[int, int]]:
    """1-based (line, column of the value) for every key."""
    pos, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and s and s[0] not in "#;":
            m = re.match(r"\s*([^=:]+?)\s*[=:]\s*", line)
            if m:
                pos[(section, m.group(1).lower())] = (i, m.end() + 1)
    return pos


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", exc.lineno, 1) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("text before the first [section]", exc.lineno, 1) from None
    pos = _positions(text)
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    sc = cp["scenario"]
    for key in ("spacetime", "operation"):
        if key not in sc:
            raise ConfigError(f"[scenario] needs {key!r}")
    op = sc["operation"].strip()
    if op not in OPERATIONS:
        raise ConfigError(f"unknown operation {op!r}; choose from {', '.join(OPERATIONS)}",
                          *pos.get(("scenario", "operation"), (None, None)))
    name = sc["spacetime"].strip()
    if name not in catalog.CATALOG:
        raise ConfigError(f"unknown spacetime {name!r}",
                          *pos.get(("scenario", "spacetime"), (None, None)))
    params = {}
    if cp.has_section("parameters"):
        for k, v in cp["parameters"].items():
            try:
                params[k] = float(v)
            except ValueError:
                raise ConfigError(f"{k}: expected a number, got {v!r}",
                                  *pos.get(("parameters", k), (None, None))) from None

    def integer(section, key, default):
        if not cp.has_option(section, key):
            return default
        v = cp[section][key]
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {v!r}",
                              *pos.get((section, key), (None, None))) from None

    seed = integer("scenario", "seed", 0)
    resolution = integer("grid", "resolution", None)
    output = cp["output"].get("dir") if cp.has_section("output") else None
    options = dict(cp["operation"]) if cp.has_section("operation") else {}
    return Scenario(name, op, options, params, resolution, seed, output, pos)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    sc = parse_scenario(text)
    catalog.get(sc.spacetime, sc.parameters)  # validates parameter ranges
    return sc


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    status: int
    summary: dict
    artifacts: list = field(default_factory=list)


class _Out:
    def __init__(self, root: Path):
        self.root = root
        self.files = []

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.files.append(str(p))
        return p

    def text(self, name: str, text: str) -> None:
        atomic_write_text(self.path(name), text)

    def curve(self, name: str, c: CausalCurve) -> None:
        write_curve(self.path(name), c)

    def points_csv(self, name: str, pts) -> None:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        head = ",".join(f"x{k}" for k in range(pts.shape[1]))
        self.text(name, head + "\n" + "".join(",".join(fmt(v) for v in row) + "\n" for row in pts))


def _grid(sc: Scenario, st) -> Grid:
    return Grid.over(st.domain, sc.resolution or st.resolution)


def _op_tau(sc, st, out):
    from .maximal import time_separation

    p, q = sc.vector("p"), sc.vector("q")
    try:
        res = time_separation(p, q, st.metric, sc.number("segments", 64, int), sc.number("restarts", 8, int),
                              sc.seed, st.domain)
    except NotCausallyRelated as exc:
        return EXIT_FAIL, {"tau": None, "reason": str(exc)}
    out.curve("tau_curve.txt", res.curve)
    return EXIT_PASS, {"tau": float(res.tau), "segments": res.segments,
                       "history": [[n, float(t)] for n, t in res.history]}


def _op_reach(sc, st, out):
    from .reach import propagate

    grid = _grid(sc, st)
    R = propagate(st.metric, grid, sc.vector("p"), sc.get("direction", "future"), sc.get("mode", "over"),
                  sc.number("horizon", np.inf), metric_id=st.name)
    R.write(out.path("reach.txt"))
    R.write_boundary_csv(out.path("reach_boundary.csv"))
    return EXIT_PASS, {"cells": int(R.count), "touches_boundary": bool(R.touches_boundary())}


def _op_diamond(sc, st, out):
    from .reach import causal_diamond

    grid = _grid(sc, st)
    try:
        rep = causal_diamond(sc.vector("p"), sc.vector("q"), st.metric, grid)
    except InconclusiveBounded as exc:
        return EXIT_INCONCLUSIVE, {"verdict": "inconclusive", "reason": str(exc)}
    rep.diamond.write(out.path("diamond.txt"))
    summary = {"verdict": rep.verdict, "cells": int(rep.diamond.count), "empty": bool(rep.empty)}
    if rep.compact:
        return EXIT_PASS, summary
    out.points_csv("closure_defect.csv", rep.closure_defect)
    summary["defect_points"] = int(len(rep.closure_defect))
    return EXIT_FAIL, summary


def _write_witness(out, rung, w):
    if isinstance(w, CausalCurve):
        out.curve(f"witness_{rung}.txt", w)
    elif hasattr(w, "to_dict"):
        out.text(f"witness_{rung}.json", json.dumps(w.to_dict(), sort_keys=True) + "\n")
    elif isinstance(w, dict):
        out.text(f"witness_{rung}.json", json.dumps(w, sort_keys=True, default=_plain) + "\n")


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


def _op_diagnose(sc, st, out):
    from .ladder import INCONCLUSIVE, CauchySurfaceSpec, diagnose

    grid = _grid(sc, st)
    cauchy = None
    if sc.get("cauchy", "no").lower() in ("yes", "true", "1"):
        if st.time_function is None:
            raise sc._bad("cauchy", f"{st.name} has no time function for a level-set candidate")
        cauchy = CauchySurfaceSpec(st.time_function, sc.number("level", 0.0), "t")
    rep = diagnose(st.metric, grid, sc.number("pair_samples", 6, int), sc.number("trials", 200, int),
                   sc.seed, cauchy)
    write_jsonl(out.path("ladder.jsonl"), json.loads(json.dumps(rep.records(), default=_plain)))
    for rung, v in rep.rungs.items():
        if v.failed:
            _write_witness(out, rung, v.witness)
    kinds = [v.kind for v in rep.rungs.values()]
    summary = {k: v.kind for k, v in rep.rungs.items()}
    if any(k == "fail" for k in kinds):
        return EXIT_FAIL, summary
    if any(k == INCONCLUSIVE for k in kinds):
        return EXIT_INCONCLUSIVE, summary
    return EXIT_PASS, summary


def _op_limit(sc, st, out):
    from .limits import extract_limit_curve, zigzag

    p, q = sc.vector("p"), sc.vector("q")
    kmax = sc.number("kmax", 64, int)
    amp = sc.get("amplitude", "inverse")
    fam = [zigzag(p, q, k, None if amp == "null" else 1.0 / k) for k in range(1, kmax + 1)]
    try:
        res = extract_limit_curve(fam, tol=sc.number("tol", 1e-3), g=st.metric, domain=st.domain)
    except NoAccumulation as exc:
        return EXIT_INCONCLUSIVE, {"reason": str(exc)}
    out.curve("limit_curve.txt", res.limit)
    res.write_jsonl(out.path("limit.jsonl"))
    summary = {"subsequence": res.subsequence, "levels": res.levels,
               "causal": [[float(e), k] for e, k in res.causality]}
    return (EXIT_PASS if res.limit_causal else EXIT_FAIL), summary


def _op_widen(sc, st, out):
    from .ladder import build_stable_widening

    shells = sc.number("shells", 4, int)
    deltas = sc.vector("deltas", [0.2 / 2 ** n for n in range(shells)])
    sw = build_stable_widening(st.metric, shells, deltas, st.domain)
    n = sc.number("samples", 17, int)
    axes = [np.linspace(st.domain.lo[k], st.domain.hi[k], n) for k in range(st.metric.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    write_metric_grid(out.path("widened_metric.csv"), axes, sw.metric(mesh))
    summary = {"verified": sw.verified, "ambient_margin": float(sw.ambient_order.margin),
               "shell_margins": [float(o.margin) for o in sw.shell_orders]}
    return (EXIT_PASS if sw.verified else EXIT_FAIL), summary


def _op_develop(sc, st, out):
    from .reach import cauchy_development

    grid = _grid(sc, st)
    S = Box(sc.vector("lo"), sc.vector("hi"))
    try:
        D = cauchy_development(S, st.metric, grid, sc.get("side", "future"))
    except EmptySet as exc:
        return EXIT_INCONCLUSIVE, {"reason": str(exc)}
    D.write(out.path("development.txt"))
    D.write_boundary_csv(out.path("development_boundary.csv"))
    return EXIT_PASS, {"cells": int(D.count)}


_DISPATCH = {"tau": _op_tau, "reach": _op_reach, "diamond": _op_diamond, "diagnose": _op_diagnose,
             "limit": _op_limit, "widen": _op_widen, "develop": _op_develop}


def run_scenario(sc: Scenario) -> RunResult:
    """Run one scenario; never raises for domain failures, returning exit status 1 instead."""
    out = _Out(sc.out_dir())
    try:
        st = catalog.get(sc.spacetime, sc.parameters)
        status, summary = _DISPATCH[sc.operation](sc, st, out)
    except NonConvergence as exc:
        status, summary = EXIT_INCONCLUSIVE, {"reason": str(exc)}
    except (ScenarioError, ValueError) as exc:
        status, summary = EXIT_ERROR, {"error": str(exc)}
    summary = {"spacetime": sc.spacetime, "operation": sc.operation, "status": status, **summary}
    out.text("summary.json", json.dumps(summary, sort_keys=True, default=_plain) + "\n")
    return RunResult(status, summary, out.files)
