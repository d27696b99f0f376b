import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalkit import catalog
from causalkit.chart import ChartDomain, minkowski
from causalkit.grid import Grid
from causalkit.ladder import (CauchySurfaceSpec, PartitionOfUnity, build_stable_widening, check_causality,
                              check_cauchy_surface, check_global_hyperbolicity,
                              check_strong_causality_at, crossings, smoothstep)


def lattice(name, n=None):
    s = catalog.get(name)
    return s, Grid.over(s.domain, n or s.resolution)


def test_crossings():
    assert crossings(np.array([-1.0, 0.0, 0.0, 2.0])) == 1
    assert crossings(np.array([-1.0, 1.0, -1.0])) == 2
    assert crossings(np.array([0.0, 0.0])) == 0


def test_causality_on_cylinders():
    s, grid = lattice("causal_cylinder", 48)
    assert check_causality(s.metric, grid).passed
    s, grid = lattice("ctc_cylinder", 32)
    v = check_causality(s.metric, grid)
    ends = s.domain.wrap(np.array([v.witness.start, v.witness.end]))
    assert v.failed and np.allclose(ends[0], ends[1])


def test_strong_causality():
    s, grid = lattice("minkowski2d", 65)
    assert check_strong_causality_at([0, 0], s.metric, [1.0, 0.5, 0.25], grid).passed
    s, grid = lattice("ctc_cylinder", 32)
    v = check_strong_causality_at([0.5, 0.0], s.metric, [0.3, 0.15], grid)
    assert v.failed and v.witness is not None
    with pytest.raises(ValueError):
        check_strong_causality_at([0, 0], s.metric, [0.1, 0.2], grid)


def test_wavy_cauchy_surfaces_on_cylinder():
    s, grid = lattice("causal_cylinder", 48)
    w = 2 * np.pi / s.domain.period[1]
    flat = CauchySurfaceSpec(lambda p: p[:, 0] - (0.5 / w) * np.sin(w * p[:, 1]))
    steep = CauchySurfaceSpec(lambda p: p[:, 0] - (2.0 / w) * np.sin(w * p[:, 1]))
    assert check_cauchy_surface(flat, s.metric, grid, curve_samples=40).passed
    assert check_cauchy_surface(steep, s.metric, grid, curve_samples=40).failed
    with pytest.raises(ValueError):
        check_cauchy_surface(flat, s.metric, grid, curve_samples=0)


def test_global_hyperbolicity_fails_with_ctc():
    s, grid = lattice("ctc_cylinder", 32)
    rep = check_global_hyperbolicity(s.metric, grid, limit_check=False)
    assert rep["causal"].failed and not rep["globally-hyperbolic"].passed
    rows = rep.records()
    json.dumps(rows)
    assert rows[0]["rung"] == "causal" and "parameters" in rows[-1]


def test_partition_of_unity_sums_to_one():
    pou = PartitionOfUnity(np.zeros(2), np.ones(2), np.array([True, True]), 4)
    pts = np.random.default_rng(0).uniform(-1, 1, (500, 2))
    w = pou.weights(pts)
    assert np.allclose(w.sum(0), 1.0) and np.all(w >= -1e-15)
    # chi_n vanishes off O_n
    for n in range(1, 5):
        off = ~pou.in_open_shell(n, pts)
        assert np.all(w[n - 1][off] <= 1e-12)


def test_smoothstep():
    assert smoothstep(-1.0) == 0.0 and smoothstep(2.0) == 1.0 and smoothstep(0.5) == 0.5


def test_stable_widening_validation():
    eta, dom = minkowski(2), ChartDomain.box([-1, -1], [1, 1])
    with pytest.raises(ValueError):
        build_stable_widening(eta, 1, [0.1], dom)
    with pytest.raises(ValueError):
        build_stable_widening(eta, 3, [0.1, 0.2, 0.05], dom)
    with pytest.raises(ValueError):
        build_stable_widening(eta, 3, [0.1, 0.05], dom)
    periodic = ChartDomain.box([0, 0], [1, 1], periodic=(True, True))
    with pytest.raises(ValueError):
        build_stable_widening(eta, 2, [0.1, 0.05], periodic)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.01, 0.5), min_size=2, max_size=4, unique=True))
def test_stable_widening_orders_hold(raw):
    deltas = sorted(raw, reverse=True)
    if min(a - b for a, b in zip(deltas, deltas[1:])) < 1e-3:
        return
    sw = build_stable_widening(minkowski(2), len(deltas), deltas, ChartDomain.box([-1, -1], [1, 1]),
                               per_axis=5, directions=64)
    assert sw.verified
