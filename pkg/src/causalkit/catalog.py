"""Named spacetimes used by the CLI, the scenarios and the tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .chart import Box, ChartDomain, MetricField, Modulus, constant_field, minkowski, widen
from .errors import ScenarioError


@dataclass(frozen=True)
class Fact:
    """A known property of an entry usable as a test oracle.

    ``source`` is ``closed-form`` for exact formulas, ``static`` for facts that
    hold by construction and ``grid-oracle`` for values established by a refined
    lattice computation.
    """
    key: str
    statement: str
    source: str

    def to_dict(self) -> dict:
        return {"key": self.key, "statement": self.statement, "source": self.source}


@dataclass
class Spacetime:
    name: str
    metric: MetricField
    domain: ChartDomain
    resolution: int
    description: str
    expect: Dict[str, str] = field(default_factory=dict)  # rung -> expected verdict
    time_function: Optional[Callable] = None
    facts: List[Fact] = field(default_factory=list)
    parameters: Dict[str, float] = field(default_factory=dict)

    def describe(self) -> dict:
        return {"id": self.name, "description": self.description, "dim": self.metric.dim,
                "domain": self.domain.outer.to_list(), "periodic": list(self.domain.periodic),
                "resolution": self.resolution, "parameters": dict(self.parameters),
                "expect": dict(self.expect), "facts": [f.to_dict() for f in self.facts]}


def _t(points):
    return np.asarray(points)[..., 0]


def bubble_metric(amplitude: float = 0.5, width: float = 1.0, alpha: float = 0.5) -> MetricField:
    """``-(1 + a (1 - min(|x|/w, 1)^alpha)) dt^2 + dx^2 (+ ...)``: cones open up near ``x = 0``.

    Only Hoelder continuous at ``x = 0`` with exponent ``alpha``.
    """

    def form(p, a=amplitude, w=width, al=alpha):
        p = np.asarray(p, dtype=float)
        r = np.minimum(np.abs(p[..., 1]) / w, 1.0)
        lapse = 1.0 + a * (1.0 - r ** al)
        n = p.shape[-1]
        G = np.broadcast_to(np.eye(n), p.shape[:-1] + (n, n)).copy()
        G[..., 0, 0] = -lapse
        return G

    def T(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        out[..., 0] = 1.0
        return out

    # |lapse(x) - lapse(y)| <= a |x - y|^alpha / w^alpha
    return MetricField(form, 2, T, Modulus(amplitude / width ** alpha, alpha), "bubble")


def conformal_scaled(scale: float = 0.5) -> MetricField:
    """``(1 + scale * tanh(t) * tanh(x)^2) * eta``: same cones as flat space, varying lengths."""

    def form(p, s=scale):
        p = np.asarray(p, dtype=float)
        f = 1.0 + s * np.tanh(p[..., 0]) * np.tanh(p[..., 1]) ** 2
        G = np.zeros(p.shape[:-1] + (2, 2))
        G[..., 0, 0] = -f
        G[..., 1, 1] = f
        return G

    def T(p):
        out = np.zeros_like(np.asarray(p, dtype=float))
        out[..., 0] = 1.0
        return out

    return MetricField(form, 2, T, Modulus(2.0 * scale, 1.0), "conformal")


def tilted_metric(tilt: float = 0.8, band: float = 0.5) -> MetricField:
    """Cones rotated toward ``+x`` by up to ``tilt * pi / 2`` inside ``|t| < band`` (a torus band).

    Tilting past 45 degrees makes the ``x`` circle causal there.
    """

    def angle(p, tilt=tilt, band=band):
        t = np.asarray(p, dtype=float)[..., 0]
        s = np.clip(1.0 - np.abs(t) / band, 0.0, 1.0)
        return tilt * 0.5 * np.pi * s

    def form(p):
        th = angle(p)
        c, s = np.cos(th), np.sin(th)
        # g(v, w) = eta(Rv, Rw) with R taking (cos th, sin th) to (1, 0)
        R = np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)
        eta = np.diag([-1.0, 1.0])
        return np.einsum("...ki,kl,...lj->...ij", R, eta, R)

    def T(p):
        th = angle(p)
        return np.stack([np.cos(th), np.sin(th)], -1)

    # entries move by at most 2 per radian of tilt
    return MetricField(form, 2, T, Modulus(tilt * np.pi / band, 1.0), "tilted")


def _minkowski2d():
    return Spacetime("minkowski2d", minkowski(2), ChartDomain.box([-2, -2], [2, 2]), 129,
                     "flat 2D space on a square chart",
                     {"causal": "pass-at-scale", "globally-hyperbolic": "pass-at-scale",
                      "causally-simple": "pass-at-scale"}, _t,
                     facts=[Fact("J+", "J+(p) = {t - t_p >= |x - x_p|}", "closed-form"),
                      Fact("tau", "tau(p, q) = sqrt(dt^2 - dx^2) for q in J+(p)", "closed-form"),
                      Fact("ladder", "every rung passes", "closed-form")])


def _minkowski3d():
    return Spacetime("minkowski3d", minkowski(3), ChartDomain.box([-1, -1, -1], [1, 1, 1]), 17,
                     "flat 3D space on a cube", {"causal": "pass-at-scale"}, _t,
                     facts=[Fact("J+", "J+(p) = {t - t_p >= |x - x_p|}", "closed-form"),
                      Fact("tau", "tau(p, q) = sqrt(dt^2 - |dx|^2)", "closed-form")])


def _ctc_cylinder():
    return Spacetime("ctc_cylinder", minkowski(2), ChartDomain.box([0, -1], [1, 1], periodic=(True, False)),
                     64, "flat metric with periodic time of period 1",
                     {"causal": "fail", "globally-hyperbolic": "fail"}, None,
                     facts=[Fact("causal", "the t circle is a closed timelike curve", "closed-form")],
                     parameters={"period": 1.0})


def _causal_cylinder():
    return Spacetime("causal_cylinder", minkowski(2), ChartDomain.box([-1, 0], [1, 2], periodic=(False, True)),
                     65, "flat metric with a periodic space axis", {"causal": "pass-at-scale"}, _t,
                     facts=[Fact("causal", "t is a time function, so no closed causal curve exists", "closed-form")],
                     parameters={"period": 2.0})


def _punctured():
    hole = Box([0.98, -0.02], [1.02, 0.02])
    return Spacetime("punctured_minkowski", minkowski(2),
                     ChartDomain.box([-2, -2], [2, 2], obstacles=[hole]), 129,
                     "flat 2D space with a tiny square removed near (1, 0)",
                     {"causal": "pass-at-scale", "cauchy-surface": "fail"}, _t,
                     facts=[Fact("cauchy", "{t = 0} is not Cauchy: the past-inextendible ray ending at the hole misses it",
                           "closed-form")],
                     parameters={"hole": 0.04})


def _slit():
    slit = Box([1.0, -0.5], [1.0, 0.5])
    return Spacetime("slit_minkowski", minkowski(2), ChartDomain.box([-1, -2], [3, 2], obstacles=[slit]),
                     129, "flat 2D space with the segment t = 1, |x| <= 1/2 removed",
                     {"causal": "pass-at-scale", "causally-simple": "fail", "globally-hyperbolic": "fail"},
                     _t,
                     facts=[Fact("simple", "J+ of points below the slit is not closed along its shadow", "closed-form"),
                 Fact("diamond", "J((0, 0), (2, 0)) is not compact", "grid-oracle")],
                     parameters={"half_width": 0.5})


def _bubble():
    return Spacetime("bubble_metric", bubble_metric(), ChartDomain.box([-1, -2], [1, 2]), 97,
                     "Hoelder cone field opening near x = 0 on a slab",
                     {"causal": "pass-at-scale", "globally-hyperbolic": "pass-at-scale"}, _t,
                     facts=[Fact("causal", "t is a time function", "closed-form"),
                   Fact("ladder", "globally hyperbolic on the slab", "grid-oracle")],
                     parameters={"amplitude": 0.5, "width": 1.0, "alpha": 0.5})


def _conformal():
    return Spacetime("conformal_scaled", conformal_scaled(), ChartDomain.box([-2, -2], [2, 2]), 97,
                     "conformally rescaled flat metric", {"causal": "pass-at-scale"}, _t,
                     facts=[Fact("cones", "cone-order equal to the flat metric in both directions", "static")],
                     parameters={"scale": 0.5})


def _widened():
    return Spacetime("widened", widen(minkowski(2), 0.2), ChartDomain.box([-2, -2], [2, 2]), 97,
                     "flat metric widened by 0.2 h", {"causal": "pass-at-scale"}, _t,
                     facts=[Fact("delta", "Delta(eta, this) = 0.2", "closed-form")],
                     parameters={"eps": 0.2})


def _tilted():
    return Spacetime("tilted_torus", tilted_metric(),
                     ChartDomain.box([-1, 0], [1, 1], periodic=(True, True)), 96,
                     "torus with cones tilted past 45 degrees on a band", {"causal": "fail"}, None,
                     facts=[Fact("causal", "the x circle at t = 0 is timelike", "closed-form")],
                     parameters={"tilt": 0.8, "band": 0.5})


CATALOG: Dict[str, Callable[[], Spacetime]] = {
    "minkowski2d": _minkowski2d,
    "minkowski3d": _minkowski3d,
    "ctc_cylinder": _ctc_cylinder,
    "causal_cylinder": _causal_cylinder,
    "punctured_minkowski": _punctured,
    "slit_minkowski": _slit,
    "bubble_metric": _bubble,
    "conformal_scaled": _conformal,
    "widened": _widened,
    "tilted_torus": _tilted,
}


_BUILDERS = {
    "bubble_metric": (lambda amplitude=0.5, width=1.0, alpha=0.5: bubble_metric(amplitude, width, alpha),
                      {"amplitude": (0.0, 10.0), "width": (1e-6, 1e6), "alpha": (0.0, 1.0)}),
    "conformal_scaled": (lambda scale=0.5: conformal_scaled(scale), {"scale": (-0.99, 0.99)}),
    "widened": (lambda eps=0.2: widen(minkowski(2), eps), {"eps": (0.0, 1e6)}),
    "tilted_torus": (lambda tilt=0.8, band=0.5: tilted_metric(tilt, band),
                     {"tilt": (0.0, 1.0), "band": (1e-6, 0.5)}),
}


def get(name: str, params: Optional[Dict[str, float]] = None) -> Spacetime:
    """Catalog entry by id; ``params`` rebuild the metric of parametrized entries."""
    try:
        st = CATALOG[name]()
    except KeyError:
        raise ScenarioError(f"unknown spacetime {name!r}; choose from {', '.join(CATALOG)}") from None
    if not params:
        return st
    if name not in _BUILDERS:
        raise ScenarioError(f"spacetime {name!r} takes no parameters")
    build, ranges = _BUILDERS[name]
    for key, value in params.items():
        if key not in ranges:
            raise ScenarioError(f"unknown parameter {key!r} for {name!r}; expected {', '.join(ranges)}")
        lo, hi = ranges[key]
        if not (lo < float(value) < hi) and not (key == "eps" and float(value) == 0.0):
            raise ScenarioError(f"parameter {key}={value} outside ({lo}, {hi}) for {name!r}")
    merged = {**st.parameters, **{k: float(v) for k, v in params.items()}}
    st.metric = build(**merged)
    st.parameters = merged
    return st


def names():
    return list(CATALOG)


__all__ = ["Spacetime", "Fact", "CATALOG", "get", "names", "bubble_metric", "conformal_scaled",
           "tilted_metric", "constant_field"]
