import json

import numpy as np
import pytest

from causalkit.catalog import bubble_metric
from causalkit.chart import ChartDomain, constant_field, minkowski, widen
from causalkit.curves import CausalCurve, is_causal, lorentz_length
from causalkit.errors import NotCausallyRelated
from causalkit.limits import zigzag
from causalkit.maximal import (dag_time_separation, has_time_function, limit_maximizer_check,
                               maximality_certificate, time_separation)

ETA = minkowski(2)
BOX = ChartDomain.box([-1, -2], [3, 2])


def test_flat_examples():
    tau, curve = time_separation([0, 0], [2, 1], ETA, segments=8, restarts=2, domain=BOX)
    assert tau == pytest.approx(np.sqrt(3), abs=1e-9)
    assert np.abs(curve.vertices[:, 1] - curve.vertices[:, 0] / 2).max() <= 1e-6
    tau, curve = time_separation([0, 0], [1, 1], ETA, domain=BOX)
    assert tau == 0.0 and is_causal(curve, ETA).causal


def test_spacelike_endpoints_refused():
    with pytest.raises(NotCausallyRelated):
        time_separation([0, 0], [0.2, 1.0], ETA, domain=BOX)


def test_widened_constant_metric():
    g = widen(ETA, 0.2)
    tau, _ = time_separation([0, 0], [1, 0], g, segments=8, restarts=2, domain=BOX)
    assert tau == pytest.approx(np.sqrt(1.2), abs=1e-9)


def test_tilted_constant_metric_without_time_function():
    G = np.array([[0.2, 1.0], [1.0, 0.0]])
    g = constant_field(G)
    assert not has_time_function(g, np.zeros((1, 2)))
    assert has_time_function(ETA, np.zeros((1, 2)))
    tau, curve = time_separation([0, 0], [1, -1], g, segments=8, restarts=2,
                                 domain=ChartDomain.box([-2, -2], [2, 2]))
    assert is_causal(curve, g).causal
    assert tau == pytest.approx(lorentz_length(CausalCurve.polyline(np.array([[0, 0], [1, -1]])), g),
                                rel=1e-6)


def test_bubble_matches_dag():
    g = bubble_metric()
    dom = ChartDomain.box([-1, -2], [1, 2])
    res = time_separation([-0.8, 0.0], [0.8, 0.1], g, segments=16, restarts=2, domain=dom,
                          rel_tol=1e-3, max_segments=64)
    dag, path = dag_time_separation([-0.8, 0.0], [0.8, 0.1], g, domain=dom, cells=64)
    assert res.tau == pytest.approx(dag, rel=0.02)
    assert res.tau >= lorentz_length(CausalCurve.polyline(np.array([[-0.8, 0], [0.8, 0.1]])), g) - 1e-9
    assert len(res.history) >= 1 and np.allclose(path.start, [-0.8, 0.0])


def test_certificate_signs():
    tau, curve = time_separation([0, 0], [2, 0], ETA, segments=8, restarts=1, domain=BOX)
    good = maximality_certificate(curve, ETA, 0.05, perturbations=100, domain=BOX)
    assert good.certified() and good.margin >= -1e-12
    json.dumps(good.to_dict())
    bad = maximality_certificate(zigzag([0, 0], [2, 0], 4, 0.2), ETA, 0.05, perturbations=100, domain=BOX)
    assert not bad.certified() and bad.margin < 0
    assert bad.best_rival_length > bad.length


def test_limit_maximizer_chain_on_flat_space():
    alpha = CausalCurve.polyline(np.array([[0, 0], [1, 0.5], [2, 0.5]]))
    rep = limit_maximizer_check(ETA, [0.2, 0.1, 0.05], [0, 0], [2, 0.5], alpha, segments=8, restarts=1,
                                domain=BOX)
    assert rep.chain_holds and abs(rep.limit_gap) <= 1e-6


def test_solver_is_deterministic():
    g = bubble_metric()
    dom = ChartDomain.box([-1, -2], [1, 2])
    a = time_separation([-0.5, 0.0], [0.5, 0.2], g, segments=8, restarts=2, seed=3, domain=dom, rel_tol=1e-3)
    b = time_separation([-0.5, 0.0], [0.5, 0.2], g, segments=8, restarts=2, seed=3, domain=dom, rel_tol=1e-3)
    assert a.tau == b.tau and np.array_equal(a.curve.vertices, b.curve.vertices)
