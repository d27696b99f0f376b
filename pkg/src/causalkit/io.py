"""Atomic file output and the metric-grid file format."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .chart import ChartDomain, MetricField, Modulus, grid_field


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, records) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    atomic_write_text(path, text)


def read_jsonl(path):
    with open(path, encoding="ascii") as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]


def _upper(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def write_metric_grid(path, axes, values) -> None:
    """CSV metric grid: a header line, then one row of ``n(n+1)/2`` upper entries per node.

    Nodes are listed row-major (last axis fastest).  ``.npz`` paths are written
    in binary with the same fields.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    vals = np.asarray(values, dtype=float)
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    if vals.shape != shape + (n, n):
        raise ValueError("values do not match the grid shape")
    for a in axes:
        if len(a) < 2 or np.any(np.diff(a) <= 0):
            raise ValueError("grid axes must be increasing with at least two nodes")
        if not np.allclose(np.diff(a), a[1] - a[0]):
            raise ValueError("grid axes must be uniform")
    iu = _upper(n)
    flat = np.stack([vals[..., i, j].ravel() for i, j in iu], axis=-1)
    if str(path).endswith(".npz"):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, bounds=np.array([[a[0], a[-1]] for a in axes]), shape=np.array(shape),
                 entries=flat)
        return
    head = "metric_grid dims={} shape={} bounds={}".format(
        n, ",".join(map(str, shape)),
        ",".join(f"{a[0]!r}:{a[-1]!r}" for a in axes))
    lines = [head] + [",".join(format(x, ".17g") for x in row) for row in flat]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_metric_grid(path, name=None, modulus: Modulus = Modulus(),
                     domain: ChartDomain | None = None) -> MetricField:
    """Load a grid file as a multilinearly interpolated :class:`MetricField`."""
    if str(path).endswith(".npz"):
        data = np.load(path)
        bounds, shape, flat = data["bounds"], tuple(int(s) for s in data["shape"]), data["entries"]
    else:
        with open(path, encoding="ascii") as fh:
            head = fh.readline().split()
            if not head or head[0] != "metric_grid":
                raise ValueError(f"{path}: missing metric_grid header")
            meta = dict(tok.split("=", 1) for tok in head[1:])
            shape = tuple(int(s) for s in meta["shape"].split(","))
            bounds = np.array([[float(x) for x in b.split(":")] for b in meta["bounds"].split(",")])
            flat = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = len(shape)
    if flat.shape != (int(np.prod(shape)), n * (n + 1) // 2):
        raise ValueError(f"{path}: expected {np.prod(shape)} rows of {n * (n + 1) // 2} entries")
    vals = np.empty(shape + (n, n))
    for k, (i, j) in enumerate(_upper(n)):
        vals[..., i, j] = flat[:, k].reshape(shape)
        vals[..., j, i] = vals[..., i, j]
    axes = [np.linspace(lo, hi, m) for (lo, hi), m in zip(bounds, shape)]
    return grid_field(axes, vals, name=name or Path(path).stem, modulus=modulus, domain=domain)
