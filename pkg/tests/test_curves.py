import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalkit.chart import Box, ChartDomain, minkowski, widen
from causalkit.curves import (CausalCurve, CurveEnsemble, Region, canonicalize, concatenate, dumps_curve,
                              h_arclength_reparam, hausdorff_distance, image_in_region, is_causal,
                              loads_curve, lorentz_length, read_curve, sup_distance, truncate,
                              write_curve)
from causalkit.errors import ParamMismatch, ZeroLengthCurve

ETA = minkowski(2)


def line(*pts):
    return CausalCurve.polyline(np.array(pts, dtype=float))


def test_is_causal_examples():
    assert is_causal(line([0, 0], [1, 0]), ETA).kind == "causal-future"
    v = is_causal(line([0, 0], [0, 1]), ETA)
    assert v.kind == "violation" and v.violating_fraction == pytest.approx(1.0)
    assert is_causal(line([0, 0], [0.5, 0.5], [1, 0]), ETA).kind == "causal-future"
    assert is_causal(line([1, 0], [0, 0]), ETA).kind == "causal-past"


def test_reparam_examples():
    c = h_arclength_reparam(line([0, 0], [3, 4]))
    assert c.params[-1] == pytest.approx(5.0)
    assert np.allclose(c.h_speeds(), 1.0)
    z = h_arclength_reparam(line([0, 0], [0.5, 0.5], [1, 0]))
    assert z.params[-1] == pytest.approx(np.sqrt(2))
    again = h_arclength_reparam(c)
    assert np.abs(again.params - c.params).max() <= 1e-12


def test_canonicalize_examples():
    c = canonicalize(line([0, 0], [3, 4]))
    assert c.params[-1] == 1.0 and np.allclose(c.h_speeds(), 5.0)
    assert canonicalize(c) is c
    two = concatenate(line([0, 0], [1, 0]), line([1, 0], [2, 0]))
    assert np.allclose(canonicalize(two).h_speeds(), 2.0)
    assert canonicalize(two).lipschitz == pytest.approx(2.0)


def test_zero_length_curve():
    with pytest.raises(ZeroLengthCurve):
        canonicalize(line([0, 0], [0, 0]))


def test_lorentz_length_examples():
    assert lorentz_length(line([0, 0], [2, 1]), ETA) == pytest.approx(np.sqrt(3), abs=1e-14)
    assert lorentz_length(line([0, 0], [0.5, 0.5], [1, 0]), ETA) == 0.0
    assert lorentz_length(line([0, 0], [1, 0]), widen(ETA, 0.2)) == pytest.approx(1.0954451150103321)


def test_sup_distance_examples():
    a = canonicalize(line([0, 0], [1, 0]))
    b = canonicalize(line([0, 0.3], [1, 0.3]))
    assert sup_distance(a, b) == pytest.approx(0.3)
    assert sup_distance(a, a) == 0.0
    assert sup_distance(a, canonicalize(line([0, 0], [1, 1]))) == pytest.approx(1.0)
    with pytest.raises(ParamMismatch):
        sup_distance(line([0, 0], [1, 0]), a)


def test_hausdorff_examples():
    a = canonicalize(line([0, 0], [1, 0]))
    assert hausdorff_distance(a, canonicalize(line([0, 0.3], [1, 0.3]))) == pytest.approx(0.3)
    warped = CausalCurve(a.vertices, np.array([0.0, 7.0]), "generic")
    assert hausdorff_distance(a, warped) == 0.0


def test_image_in_region():
    d = line([0, 0], [1, 1])
    assert image_in_region(d, Region.of(Box([-2, -2], [2, 2])))
    assert not image_in_region(d, Region.of(Box([0, 0], [0.5, 0.5])))
    # two overlapping boxes cover the diagonal jointly
    assert image_in_region(d, Region.of(Box([0, 0], [0.6, 0.6]), Box([0.5, 0.5], [1, 1])))
    assert not image_in_region(d, Region.of(Box([-2, -2], [2, 2]), holes=[Box([0.4, 0.4], [0.45, 0.45])]))


def test_truncate_and_ensemble():
    c = truncate(line([0, 0], [3, 4]), 2.5)
    assert np.allclose(c.end, [1.5, 2.0])
    ens = CurveEnsemble([0, 0], [1, 0], [line([0, 0], [1, 0])])
    with pytest.raises(ValueError):
        ens.add(line([0, 0], [2, 0]))


def test_curve_file_roundtrip(tmp_path):
    c = canonicalize(line([0, 0], [0.1, 1 / 3], [2 / 3, np.pi / 7]))
    text = dumps_curve(c)
    back = loads_curve(text)
    assert np.array_equal(back.vertices, c.vertices) and np.array_equal(back.params, c.params)
    assert dumps_curve(back) == text
    p = tmp_path / "c.txt"
    write_curve(p, c)
    assert p.read_text() == text and np.array_equal(read_curve(p).vertices, c.vertices)


def test_causal_on_periodic_chart():
    dom = ChartDomain.box([0, -1], [1, 1], periodic=(True, False))
    loop = line([0.2, 0], [1.2, 0])
    assert is_causal(loop, ETA, domain=dom).causal


causal_steps = st.lists(st.tuples(st.floats(0.05, 1.0), st.floats(-0.95, 0.95)), min_size=1, max_size=8)


def build(steps, start=(0.0, 0.0)):
    s = np.array([[dt, dt * v] for dt, v in steps])
    return CausalCurve.polyline(np.vstack([start, np.asarray(start) + np.cumsum(s, 0)]))


@settings(max_examples=60, deadline=None)
@given(causal_steps)
def test_canonical_speed_constant(steps):
    c = canonicalize(build(steps))
    sp = c.h_speeds()
    assert np.abs(sp / sp.mean() - 1).max() <= 1e-9
    assert c.lipschitz == pytest.approx(c.h_length, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(causal_steps, causal_steps)
def test_hausdorff_below_sup(a, b):
    ca, cb = canonicalize(build(a)), canonicalize(build(b, (0.1, -0.2)))
    assert hausdorff_distance(ca, cb) <= sup_distance(ca, cb) + 1e-12


@settings(max_examples=60, deadline=None)
@given(causal_steps)
def test_polylines_of_causal_steps_are_causal(steps):
    c = build(steps)
    assert is_causal(c, ETA).causal
    assert lorentz_length(c, ETA) <= lorentz_length(line(c.start, c.end), ETA) + 1e-12
