"""Charts, continuous Lorentzian metric fields and the cone order.

A metric field is a vectorized map ``x -> G(x)``: it takes an array of
points with trailing dimension ``n`` and returns forms with trailing shape
``(n, n)``.  The background Riemannian metric ``h`` follows the same
convention; ``None`` stands for the identity form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    ConeOrderViolation,
    DomainError,
    EmptySet,
    NonFiniteMetric,
    SignatureCollapse,
)

FormFn = Callable[[np.ndarray], np.ndarray]

#: absolute tolerance on g(v, v) for unit-h vectors
CONE_TOL = 1e-9
#: smallest direction count accepted by :func:`cone_precedes`
MIN_DIRECTIONS = 64


# ---------------------------------------------------------------------------
# boxes and charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Box:
    """Closed axis-aligned box.  Degenerate extents (segments, points) are allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("box corners have different dimensions")
        if np.any(hi < lo):
            raise ValueError(f"empty box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, center, radius) -> "Box":
        c = np.asarray(center, dtype=float)
        return cls(c - radius, c + radius)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=-1)

    def contains_box(self, other: "Box", tol: float = 1e-12) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def shrink(self, delta: float) -> Optional["Box"]:
        """Erode by ``delta`` along every axis of positive extent; ``None`` if nothing is left."""
        lo, hi = self.lo.copy(), self.hi.copy()
        width = hi - lo
        thick = width > 0
        lo[thick] += delta
        hi[thick] -= delta
        if np.any(hi < lo):
            return None
        return Box(lo, hi)

    def grow(self, delta: float) -> "Box":
        return Box(self.lo - delta, self.hi + delta)

    def shifted(self, offset) -> "Box":
        off = np.asarray(offset, dtype=float)
        return Box(self.lo + off, self.hi + off)

    def segment_interval(self, a, b):
        """Parameter interval ``[t0, t1]`` of ``a + t (b - a)``, ``t in [0, 1]``, inside the box.

        Vectorized over leading axes.  The segment misses the box where ``t0 > t1``.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        t0 = np.zeros(a.shape[:-1])
        t1 = np.ones(a.shape[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(a.shape[-1]):
                dk = d[..., k]
                ak = a[..., k]
                flat = np.abs(dk) < 1e-300
                inside_flat = (ak >= self.lo[k]) & (ak <= self.hi[k])
                s1 = (self.lo[k] - ak) / dk
                s2 = (self.hi[k] - ak) / dk
                smin = np.where(flat, np.where(inside_flat, -np.inf, np.inf), np.minimum(s1, s2))
                smax = np.where(flat, np.where(inside_flat, np.inf, -np.inf), np.maximum(s1, s2))
                t0 = np.maximum(t0, smin)
                t1 = np.minimum(t1, smax)
        return t0, t1

    def segment_hits(self, a, b) -> np.ndarray:
        t0, t1 = self.segment_interval(a, b)
        return t0 <= t1

    def grid_points(self, per_axis: int) -> np.ndarray:
        axes = [
            np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo])
            for lo, hi in zip(self.lo, self.hi)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_list(self):
        return [self.lo.tolist(), self.hi.tolist()]

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


def identity_h(points: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return np.broadcast_to(np.eye(n), p.shape[:-1] + (n, n))


@dataclass(frozen=True, eq=False)
class ChartDomain:
    """Coordinate box with optional periodic axes and closed obstacles removed."""

    bounds: np.ndarray
    periodic: tuple = ()
    obstacles: tuple = ()
    background_h: Optional[FormFn] = None

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        n = b.shape[0]
        if n < 2:
            raise ValueError("charts need dimension >= 2")
        if np.any(b[:, 1] <= b[:, 0]) or not np.all(np.isfinite(b)):
            raise ValueError("chart bounds must be finite nonempty intervals")
        per = tuple(bool(x) for x in self.periodic) or (False,) * n
        if len(per) != n:
            raise ValueError("periodic flags do not match the dimension")
        obs = tuple(o if isinstance(o, Box) else Box(*o) for o in self.obstacles)
        outer = Box(b[:, 0], b[:, 1])
        for o in obs:
            if o.dim != n or not outer.contains_box(o):
                raise ValueError(f"obstacle {o} is not contained in the chart")
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "periodic", per)
        object.__setattr__(self, "obstacles", obs)

    @classmethod
    def box(cls, lo, hi, periodic=(), obstacles=(), background_h=None) -> "ChartDomain":
        return cls(np.stack([np.asarray(lo, float), np.asarray(hi, float)], axis=1),
                   periodic, obstacles, background_h)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def lo(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def period(self) -> np.ndarray:
        return np.where(self.periodic, self.hi - self.lo, np.inf)

    @property
    def outer(self) -> Box:
        return Box(self.lo, self.hi)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def h(self, points) -> np.ndarray:
        if self.background_h is None:
            return identity_h(points, self.dim)
        return self.background_h(np.asarray(points, dtype=float))

    def wrap(self, points) -> np.ndarray:
        p = np.array(points, dtype=float, copy=True)
        for k, per in enumerate(self.periodic):
            if per:
                L = self.hi[k] - self.lo[k]
                p[..., k] = self.lo[k] + np.mod(p[..., k] - self.lo[k], L)
        return p

    def in_bounds(self, points, tol: float = 1e-12) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        ok = np.ones(p.shape[:-1], dtype=bool)
        for k, per in enumerate(self.periodic):
            if not per:
                ok &= (p[..., k] >= self.lo[k] - tol) & (p[..., k] <= self.hi[k] + tol)
        return ok

    def in_obstacle(self, points) -> np.ndarray:
        p = self.wrap(points)
        hit = np.zeros(p.shape[:-1], dtype=bool)
        for o in self.obstacles:
            hit |= o.contains(p)
        return hit

    def contains(self, points) -> np.ndarray:
        return self.in_bounds(points) & ~self.in_obstacle(points)

    def _obstacle_copies(self, obstacles, lo_pts, hi_pts):
        """Yield obstacle boxes translated by every period shift that can meet ``[lo_pts, hi_pts]``."""
        per_axes = [k for k, per in enumerate(self.periodic) if per]
        for o in obstacles:
            if not per_axes:
                yield o
                continue
            ranges = []
            for k in per_axes:
                L = self.hi[k] - self.lo[k]
                k0 = math.floor((lo_pts[k] - o.hi[k]) / L)
                k1 = math.ceil((hi_pts[k] - o.lo[k]) / L)
                ranges.append(range(k0, k1 + 1))
            for shifts in itertools.product(*ranges):
                off = np.zeros(self.dim)
                for k, s in zip(per_axes, shifts):
                    off[k] = s * (self.hi[k] - self.lo[k])
                yield o.shifted(off)

    def segment_blocked(self, a, b, obstacles=None) -> np.ndarray:
        """True where the closed segment ``a -> b`` (unwrapped coordinates) meets an obstacle."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        obs = self.obstacles if obstacles is None else obstacles
        hit = np.zeros(a.shape[:-1], dtype=bool)
        if not obs or a.size == 0:
            return hit
        both = np.concatenate([a.reshape(-1, self.dim), b.reshape(-1, self.dim)])
        for o in self._obstacle_copies(obs, both.min(axis=0), both.max(axis=0)):
            hit |= o.segment_hits(a, b)
        return hit

    def shrunk_obstacles(self, delta: float) -> tuple:
        out = []
        for o in self.obstacles:
            s = o.shrink(delta)
            if s is not None:
                out.append(s)
        return tuple(out)

    def with_obstacles(self, obstacles) -> "ChartDomain":
        return ChartDomain(self.bounds, self.periodic, tuple(obstacles), self.background_h)

    def sample_points(self, per_axis: int = 9, box: Optional[Box] = None) -> np.ndarray:
        pts = (box or self.outer).grid_points(per_axis)
        return pts[self.contains(pts)]

    def check_background(self, per_axis: int = 5) -> None:
        pts = self.outer.grid_points(per_axis)
        ev = np.linalg.eigvalsh(self.h(pts))
        if np.any(ev <= 0):
            i = int(np.argmin(ev.min(axis=-1)))
            raise ValueError(f"background metric is not positive definite at {pts[i]}")


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Modulus:
    """Modulus of continuity ``r -> constant * r**exponent`` in the Δ sense."""

    constant: float = 0.0
    exponent: float = 1.0

    def __call__(self, r):
        return self.constant * np.power(np.maximum(r, 0.0), self.exponent)

    def __add__(self, other: "Modulus") -> "Modulus":
        if other.constant == 0:
            return self
        if self.constant == 0:
            return other
        # r**a <= r**b for r <= 1 and a >= b; valid on charts of unit scale
        return Modulus(self.constant + other.constant, min(self.exponent, other.exponent))

    def scaled(self, c: float) -> "Modulus":
        return Modulus(abs(c) * self.constant, self.exponent)

    @property
    def kind(self) -> str:
        return "lipschitz" if self.exponent == 1.0 else "holder"


@dataclass(frozen=True, eq=False)
class MetricField:
    """A continuous Lorentzian metric ``g`` with a time orientation.

    ``form`` maps points ``(..., n)`` to forms ``(..., n, n)``.  When
    ``time_orientation`` is omitted, the eigenvector of the negative
    eigenvalue with positive ``time_axis`` component is used.
    """

    form: FormFn
    dim: int
    time_orientation: Optional[Callable[[np.ndarray], np.ndarray]] = None
    modulus: Modulus = field(default_factory=Modulus)
    name: str = "g"
    h: Optional[FormFn] = None
    constant: bool = False
    time_axis: int = 0

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        G = np.asarray(self.form(p), dtype=float)
        G = np.broadcast_to(G, p.shape[:-1] + (self.dim, self.dim))
        return G

    def background(self, points) -> np.ndarray:
        if self.h is None:
            return identity_h(points, self.dim)
        return self.h(np.asarray(points, dtype=float))

    def T(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if self.time_orientation is not None:
            return np.broadcast_to(np.asarray(self.time_orientation(p), float), p.shape)
        w, V = np.linalg.eigh(self(p))
        v = V[..., :, 0]
        s = np.sign(v[..., self.time_axis])
        s = np.where(s == 0, 1.0, s)
        return v * s[..., None]

    def quad(self, points, v, w=None) -> np.ndarray:
        """``g_x(v, w)`` vectorized over matching leading axes."""
        G = self(points)
        w = v if w is None else w
        return np.einsum("...i,...ij,...j->...", v, G, w)

    def hquad(self, points, v) -> np.ndarray:
        if self.h is None:
            return np.einsum("...i,...i->...", v, v)
        return np.einsum("...i,...ij,...j->...", v, self.background(points), v)


def constant_field(matrix, name="g", h=None, time_orientation=None) -> MetricField:
    M = np.array(matrix, dtype=float)
    M = 0.5 * (M + M.T)
    n = M.shape[0]

    def form(p, M=M):
        return np.broadcast_to(M, np.shape(p)[:-1] + (n, n))

    T = None
    if time_orientation is not None:
        t = np.asarray(time_orientation, dtype=float)
        T = lambda p, t=t: np.broadcast_to(t, np.shape(p))  # noqa: E731

    return MetricField(form, n, T, Modulus(), name, h, constant=h is None)


def minkowski(n: int = 2) -> MetricField:
    e = np.zeros(n)
    e[0] = 1.0
    return constant_field(np.diag([-1.0] + [1.0] * (n - 1)), name=f"minkowski{n}d",
                          time_orientation=e)


def default_points(g: MetricField, domain: Optional[ChartDomain] = None, per_axis: int = 9,
                   box: Optional[Box] = None) -> np.ndarray:
    if domain is not None:
        pts = domain.sample_points(per_axis, box)
    elif box is not None:
        pts = box.grid_points(per_axis)
    elif g.constant:
        pts = np.zeros((1, g.dim))
    else:
        pts = Box(-np.ones(g.dim), np.ones(g.dim)).grid_points(per_axis)
    if len(pts) == 0:
        raise EmptySet("no sample points inside the region")
    return pts


def check_lorentzian(g: MetricField, points, rel_tol: float = 1e-12) -> None:
    """Raise :class:`SignatureCollapse` unless every sampled form has signature (-,+,...,+)."""
    pts = np.asarray(points, dtype=float).reshape(-1, g.dim)
    G = g(pts)
    if not np.all(np.isfinite(G)):
        raise NonFiniteMetric(f"{g.name} has non-finite entries")
    ev = np.linalg.eigvalsh(G)
    scale = np.maximum(np.abs(ev).max(axis=-1), 1e-300)
    zero = rel_tol * scale
    neg = (ev < -zero[:, None]).sum(axis=-1)
    pos = (ev > zero[:, None]).sum(axis=-1)
    bad = (neg != 1) | (pos != g.dim - 1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SignatureCollapse(
            f"{g.name} is not Lorentzian at {pts[i].tolist()} (eigenvalues {ev[i].tolist()})",
            witness=pts[i].copy(),
        )


# ---------------------------------------------------------------------------
# directions and cone samples
# ---------------------------------------------------------------------------

def unit_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic Euclidean unit directions covering the projective sphere.

    Antipodal pairs are redundant for quadratic forms, so only a half sphere is
    covered.  In 2D the directions are equally spaced angles in ``[0, pi)``.
    """
    if count < 1:
        raise EmptySet("need at least one direction")
    if n == 2:
        a = np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    dirs = [np.eye(n)]
    per_plane = max(4, count // (4 * (n - 1)))
    a = np.pi * np.arange(per_plane) / per_plane
    for k in range(1, n):
        d = np.zeros((per_plane, n))
        d[:, 0] = np.cos(a)
        d[:, k] = np.sin(a)
        dirs.append(d)
    used = sum(len(d) for d in dirs)
    rest = max(count - used, 0)
    if rest:
        rng = np.random.default_rng(seed)
        r = rng.standard_normal((rest, n))
        dirs.append(r / np.linalg.norm(r, axis=1, keepdims=True))
    return np.concatenate(dirs)[: max(count, n)]


def h_normalize(g: MetricField, x, dirs) -> np.ndarray:
    """Rescale Euclidean directions at the points ``x`` to unit h-norm. Returns ``(m, k, n)``."""
    x = np.asarray(x, dtype=float).reshape(-1, g.dim)
    H = g.background(x)
    hn = np.einsum("ki,mij,kj->mk", dirs, H, dirs)
    return dirs[None, :, :] / np.sqrt(hn)[..., None]


@dataclass
class ConeSampleSet:
    """Discretized lightcone of ``g`` at one base point."""

    point: np.ndarray
    directions: np.ndarray
    values: np.ndarray
    kind: np.ndarray  # 'timelike' | 'null' | 'spacelike'
    future: np.ndarray

    @property
    def causal(self) -> np.ndarray:
        return self.kind != "spacelike"


def cone_samples(g: MetricField, x, directions: int = 64, tol: float = CONE_TOL) -> ConeSampleSet:
    x = np.asarray(x, dtype=float)
    V = h_normalize(g, x, unit_directions(g.dim, directions))[0]
    xs = np.broadcast_to(x, V.shape)
    q = g.quad(xs, V)
    kind = np.where(q < -tol, "timelike", np.where(q <= tol, "null", "spacelike"))
    fut = g.quad(xs, V, g.T(xs)) < 0
    return ConeSampleSet(x, V, q, kind, fut)


# ---------------------------------------------------------------------------
# Δ and the cone order
# ---------------------------------------------------------------------------

@dataclass
class DeltaEstimate:
    """Sampled sup of ``|g1(X,Y) - g2(X,Y)|`` over unit-h pairs, with an upper inflation."""

    value: float
    upper: float
    witness: tuple = ()

    def __float__(self):
        return float(self.value)


def _region_points(g, region, domain, per_axis):
    if region is not None and domain is not None:
        if not domain.outer.contains_box(region):
            raise DomainError(f"region {region} is outside the chart")
    return default_points(g, domain, per_axis, region)


def metric_delta(g1: MetricField, g2: MetricField, region: Optional[Box] = None,
                 domain: Optional[ChartDomain] = None, per_axis: int = 9,
                 directions: int = 64) -> DeltaEstimate:
    pts = _region_points(g1, region, domain, per_axis)
    D = g1(pts) - g2(pts)
    if not np.all(np.isfinite(D)):
        raise NonFiniteMetric("non-finite metric entries in the sampled region")
    V = h_normalize(g1, pts, unit_directions(g1.dim, directions))
    best, wit = -1.0, ()
    for m in range(len(pts)):
        P = np.abs(V[m] @ D[m] @ V[m].T)
        i, j = np.unravel_index(int(np.argmax(P)), P.shape)
        if P[i, j] > best:
            best = float(P[i, j])
            wit = (pts[m].copy(), V[m, i].copy(), V[m, j].copy())
    # angular covering radius of the direction set
    if g1.dim == 2:
        theta = np.pi / (2 * directions)
    else:
        U = unit_directions(g1.dim, directions)
        C = np.abs(U @ U.T)
        np.fill_diagonal(C, 0.0)
        theta = float(np.arccos(np.clip(C.max(axis=1).min(), -1, 1)))
    spacing = _sample_spacing(pts)
    mod = g1.modulus(spacing) + g2.modulus(spacing)
    upper = best / max(np.cos(theta) ** 2, 1e-12) + float(mod)
    return DeltaEstimate(best, upper, wit)


def _sample_spacing(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    spans = pts.max(axis=0) - pts.min(axis=0)
    counts = np.array([len(np.unique(np.round(pts[:, k], 12))) for k in range(pts.shape[1])])
    steps = np.where(counts > 1, spans / np.maximum(counts - 1, 1), 0.0)
    return 0.5 * float(np.linalg.norm(steps))


def _shift_field(g: MetricField, eps: float, sign: float, name: str) -> MetricField:
    def form(p, g=g):
        return g(p) + sign * eps * g.background(p)

    return MetricField(form, g.dim, g.time_orientation, g.modulus, name, g.h, g.constant, g.time_axis)


def widen(g: MetricField, eps: float) -> MetricField:
    """``g - eps h``: strictly wider cones, still Lorentzian."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return _shift_field(g, eps, -1.0, f"widen({g.name},{eps:g})")


def narrow(g: MetricField, eps: float, domain: Optional[ChartDomain] = None,
           points=None, per_axis: int = 9) -> MetricField:
    """``g + eps h``: strictly narrower cones; signature is verified on the sample grid."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    out = _shift_field(g, eps, 1.0, f"narrow({g.name},{eps:g})")
    pts = default_points(g, domain, per_axis) if points is None else points
    check_lorentzian(out, pts)
    if g.time_orientation is not None:
        ok = out.quad(pts, g.T(pts)) < 0
        if not np.all(ok):
            out = MetricField(out.form, out.dim, None, out.modulus, out.name, out.h, out.constant,
                              out.time_axis)
    return out


@dataclass
class ConeOrder:
    relation: str  # 'strict' | 'weak' | 'fails'
    margin: float
    witness: Optional[tuple] = None

    @property
    def strict(self) -> bool:
        return self.relation == "strict"

    @property
    def weak(self) -> bool:
        return self.relation in ("strict", "weak")


def cone_precedes(g1: MetricField, g2: MetricField, K: Optional[Box] = None,
                  directions: int = MIN_DIRECTIONS, domain: Optional[ChartDomain] = None,
                  per_axis: int = 5, tol: float = CONE_TOL, points=None) -> ConeOrder:
    """Sampled cone comparison of ``g1`` against ``g2``.

    ``strict``: every sampled g1-causal unit direction is g2-timelike with
    margin above ``tol``; ``weak``: g1-causal implies g2-causal within
    ``tol``; otherwise ``fails`` with witness ``(x, v)``.
    """
    if directions < MIN_DIRECTIONS:
        raise ValueError(f"need at least {MIN_DIRECTIONS} directions")
    pts = default_points(g1, domain, per_axis, K) if points is None else np.asarray(points, float)
    if len(pts) == 0:
        raise EmptySet("empty sample set")
    V = h_normalize(g1, pts, unit_directions(g1.dim, directions))
    xs = np.broadcast_to(pts[:, None, :], V.shape)
    q1 = g1.quad(xs, V)
    q2 = g2.quad(xs, V)
    causal1 = q1 <= tol
    if not np.any(causal1):
        raise EmptySet("no g1-causal directions sampled")
    bad = causal1 & (q2 > tol)
    margin = float(np.min(np.where(causal1, -q2, np.inf)))
    if np.any(bad):
        m, k = np.unravel_index(int(np.argmax(np.where(bad, q2, -np.inf))), bad.shape)
        return ConeOrder("fails", margin, (pts[m].copy(), V[m, k].copy()))
    if np.all(np.where(causal1, q2 < -tol, True)):
        return ConeOrder("strict", margin)
    m, k = np.unravel_index(int(np.argmax(np.where(causal1, q2, -np.inf))), causal1.shape)
    return ConeOrder("weak", margin, (pts[m].copy(), V[m, k].copy()))


def convex_combine(g1: MetricField, g2: MetricField, chi: Callable[[np.ndarray], np.ndarray],
                   domain: Optional[ChartDomain] = None, per_axis: int = 9,
                   directions: int = MIN_DIRECTIONS) -> MetricField:
    """``chi g1 + (1 - chi) g2`` for cone-ordered ``g1 ⪯ g2``.

    Refuses unordered inputs before combining; the result is checked for
    Lorentzian signature and for ``g1 ⪯ result ⪯ g2`` at the sample points.
    """
    pts = default_points(g1, domain, per_axis)
    order = cone_precedes(g1, g2, directions=directions, points=pts)
    if not order.weak:
        raise ConeOrderViolation(f"{g1.name} and {g2.name} are not cone-ordered", order.witness)

    def form(p, g1=g1, g2=g2, chi=chi):
        c = np.clip(np.asarray(chi(p), dtype=float), 0.0, 1.0)[..., None, None]
        return c * g1(p) + (1.0 - c) * g2(p)

    T = g1.time_orientation
    out = MetricField(form, g1.dim, T, g1.modulus + g2.modulus, f"combine({g1.name},{g2.name})",
                      g1.h, False, g1.time_axis)
    check_lorentzian(out, pts)
    lower = cone_precedes(g1, out, directions=directions, points=pts)
    upper = cone_precedes(out, g2, directions=directions, points=pts)
    if not (lower.weak and upper.weak):
        raise ConeOrderViolation("combination left the cone interval",
                                 lower.witness if not lower.weak else upper.witness)
    return out


# ---------------------------------------------------------------------------
# grid fields and mollification
# ---------------------------------------------------------------------------

def grid_field(axes: Sequence[np.ndarray], values: np.ndarray, name: str = "grid",
               modulus: Modulus = Modulus(), domain: Optional[ChartDomain] = None,
               time_orientation=None) -> MetricField:
    """Multilinear interpolation of forms given at the nodes of a rectilinear grid."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    n = len(axes)
    vals = np.asarray(values, dtype=float)
    interp = RegularGridInterpolator(axes, vals, method="linear", bounds_error=False, fill_value=None)
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])

    def form(p, interp=interp):
        p = np.asarray(p, dtype=float)
        if domain is not None:
            p = domain.wrap(p)
        q = np.clip(p.reshape(-1, n), lo, hi)
        return interp(q).reshape(p.shape[:-1] + (n, n))

    h = domain.background_h if domain is not None else None
    return MetricField(form, n, time_orientation, modulus, name, h)


def mollify(g: MetricField, radius: float, domain: ChartDomain, cells_per_axis: int = 33,
            check: bool = True) -> MetricField:
    """Grid-kernel average of ``g`` with a normalized compactly supported kernel.

    The kernel is ``max(0, 1 - |y|^2 / radius^2)`` on the node lattice.  With
    ``check`` the result is compared against ``g`` at the nodes (must stay within
    the declared modulus at ``radius``) and re-verified Lorentzian.
    """
    axes = [np.linspace(lo, hi, cells_per_axis) for lo, hi in domain.bounds]
    step = np.array([a[1] - a[0] for a in axes])
    if radius < step.max() - 1e-15:
        raise ValueError("mollification radius must cover at least one grid cell")
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    shape = tuple(len(a) for a in axes)
    n = g.dim
    G = g(nodes).reshape(shape + (n, n))
    reach = [int(math.floor(radius / s + 1e-12)) for s in step]
    offs = np.meshgrid(*[np.arange(-r, r + 1) * s for r, s in zip(reach, step)], indexing="ij")
    dist2 = sum(o ** 2 for o in offs)
    kernel = np.maximum(0.0, 1.0 - dist2 / radius ** 2)
    kernel /= kernel.sum()
    out = np.empty_like(G)
    for i in range(n):
        for j in range(i, n):
            comp = G[..., i, j]
            for ax, (per, r) in enumerate(zip(domain.periodic, reach)):
                # linspace includes both ends, so a periodic axis repeats its first node
                pad = [(0, 0)] * n
                pad[ax] = (r, r)
                if per and r:
                    core = np.take(comp, range(comp.shape[ax] - 1), axis=ax)
                    m = core.shape[ax]
                    comp = np.concatenate([np.take(core, range(m - r, m), axis=ax), comp,
                                           np.take(core, range(1, r + 1), axis=ax)], axis=ax)
                else:
                    comp = np.pad(comp, pad, mode="edge")
            conv = ndimage.convolve(comp, kernel, mode="constant")
            crop = tuple(slice(r, r + s) for r, s in zip(reach, shape))
            out[..., i, j] = conv[crop]
            out[..., j, i] = out[..., i, j]
    result = grid_field(axes, out, name=f"mollify({g.name},{radius:g})", modulus=g.modulus,
                        domain=domain, time_orientation=g.time_orientation)
    if check:
        diff = np.linalg.norm((G - out).reshape(-1, n, n), ord=2, axis=(1, 2))
        bound = float(g.modulus(radius)) + 1e-12
        if diff.max() > bound:
            k = int(np.argmax(diff))
            raise ValueError(
                f"mollified field deviates by {diff.max():.3g} > modulus({radius:g}) = {bound:.3g} "
                f"at {nodes[k].tolist()}"
            )
        check_lorentzian(result, nodes)
    return result
