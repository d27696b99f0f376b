"""Polyline causal curves, their parametrizations, lengths and curve-space metrics."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .chart import ChartDomain, FormFn, MetricField
from .errors import DomainError, ParamMismatch, ZeroLengthCurve

PARAMS = ("generic", "arclength", "proportional")
ORIENTATIONS = ("future", "past")

_GL_CACHE = {}


def gauss_legendre(order: int):
    """Nodes and weights on ``[0, 1]``."""
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[order]


@dataclass(frozen=True, eq=False)
class CausalCurve:
    """A polyline ``s -> x(s)`` with vertices at the strictly increasing ``params``."""

    vertices: np.ndarray
    params: np.ndarray
    param: str = "generic"
    orientation: str = "future"
    h: Optional[FormFn] = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        s = np.array(self.params, dtype=float).ravel()
        if v.ndim != 2 or len(v) < 2:
            raise ValueError("a curve needs at least two vertices")
        if s.shape != (len(v),):
            raise ValueError("one parameter value per vertex is required")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(s))):
            raise ValueError("non-finite curve data")
        if np.any(np.diff(s) <= 0):
            raise ValueError("parameters must increase strictly")
        if self.param not in PARAMS:
            raise ValueError(f"unknown parametrization {self.param!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "params", s)

    @classmethod
    def polyline(cls, points, orientation: str = "future", h=None) -> "CausalCurve":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.arange(len(pts), dtype=float), "generic", orientation, h)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def domain_interval(self):
        return float(self.params[0]), float(self.params[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return self.params

    @property
    def displacements(self) -> np.ndarray:
        return np.diff(self.vertices, axis=0)

    def segment_h_lengths(self, order: int = 8) -> np.ndarray:
        d = self.displacements
        if self.h is None:
            return np.linalg.norm(d, axis=1)
        x, w = gauss_legendre(order)
        pts = self.vertices[:-1, None, :] + x[None, :, None] * d[:, None, :]
        H = self.h(pts)
        speed = np.sqrt(np.einsum("ski,skij,skj->sk", np.broadcast_to(d[:, None, :], pts.shape), H,
                                  np.broadcast_to(d[:, None, :], pts.shape)))
        return speed @ w

    @property
    def h_length(self) -> float:
        return float(self.segment_h_lengths().sum())

    @property
    def lipschitz(self) -> float:
        """Best h-Lipschitz constant of the parametrized polyline."""
        return float(np.max(self.segment_h_lengths() / np.diff(self.params)))

    def h_speeds(self) -> np.ndarray:
        return self.segment_h_lengths() / np.diff(self.params)

    def at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape + (self.dim,))
        for k in range(self.dim):
            out[..., k] = np.interp(s, self.params, self.vertices[:, k])
        return out

    def with_params(self, params, param: str) -> "CausalCurve":
        return CausalCurve(self.vertices, params, param, self.orientation, self.h)

    def reversed(self) -> "CausalCurve":
        a, b = self.domain_interval
        orient = "past" if self.orientation == "future" else "future"
        return CausalCurve(self.vertices[::-1], (a + b - self.params)[::-1], self.param, orient, self.h)

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return (f"CausalCurve({len(self)} vertices, param={self.param}, "
                f"{self.start.tolist()} -> {self.end.tolist()})")


def _drop_repeats(curve: CausalCurve) -> np.ndarray:
    v = curve.vertices
    keep = np.ones(len(v), dtype=bool)
    keep[1:] = np.any(np.diff(v, axis=0) != 0, axis=1)
    return v[keep]


def h_arclength_reparam(curve: CausalCurve) -> CausalCurve:
    """Same image, parametrized by h-arclength on ``[0, L^h]``."""
    v = _drop_repeats(curve)
    if len(v) < 2:
        raise ZeroLengthCurve("curve has zero h-length")
    tmp = CausalCurve(v, np.arange(len(v), dtype=float), "generic", curve.orientation, curve.h)
    seg = tmp.segment_h_lengths()
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        raise ZeroLengthCurve("curve has zero h-length")
    return CausalCurve(v, s, "arclength", curve.orientation, curve.h)


def canonicalize(curve: CausalCurve) -> CausalCurve:
    """The unique representative on ``[0, 1]`` proportional to h-arclength."""
    if curve.param == "proportional":
        return curve
    arc = h_arclength_reparam(curve)
    s = arc.params / arc.params[-1]
    s[-1] = 1.0
    return CausalCurve(arc.vertices, s, "proportional", curve.orientation, curve.h)


def concatenate(first: CausalCurve, second: CausalCurve, tol: float = 1e-12) -> CausalCurve:
    if np.linalg.norm(first.end - second.start) > tol:
        raise ValueError("curves do not join")
    v = np.concatenate([first.vertices, second.vertices[1:]])
    return CausalCurve.polyline(v, first.orientation, first.h)


def subdivide(curve: CausalCurve, pieces: int) -> CausalCurve:
    """Split every segment into ``pieces`` equal parts (same image and parametrization)."""
    if pieces <= 1:
        return curve
    t = np.arange(pieces) / pieces
    s0, s1 = curve.params[:-1], curve.params[1:]
    s = (s0[:, None] + t[None, :] * (s1 - s0)[:, None]).ravel()
    s = np.concatenate([s, curve.params[-1:]])
    return CausalCurve(curve.at(s), s, curve.param, curve.orientation, curve.h)


def truncate(curve: CausalCurve, length: float) -> CausalCurve:
    """Initial piece of h-length ``length`` (arclength parametrized)."""
    arc = h_arclength_reparam(curve)
    if length >= arc.params[-1]:
        return arc
    keep = arc.params < length
    s = np.concatenate([arc.params[keep], [length]])
    return CausalCurve(arc.at(s), s, "arclength", curve.orientation, curve.h)


# ---------------------------------------------------------------------------
# causality and length
# ---------------------------------------------------------------------------

@dataclass
class CausalityVerdict:
    kind: str  # 'causal-future' | 'causal-past' | 'violation'
    worst_value: float
    violating_fraction: float
    witness: Optional[tuple] = None

    @property
    def causal(self) -> bool:
        return self.kind != "violation"

    def __str__(self):
        return self.kind


def _eval_points(points, domain: Optional[ChartDomain]):
    return points if domain is None else domain.wrap(points)


def is_causal(curve: CausalCurve, g: MetricField, tol: float = 1e-9, checks_per_segment: int = 1,
              tol_measure: float = 0.0, domain: Optional[ChartDomain] = None) -> CausalityVerdict:
    """Segment-sampled causality test of a polyline.

    At ``checks_per_segment`` interior points per segment the unit-h tangent
    ``v`` must satisfy ``g(v, v) <= tol * max(1, g(v, T)^2)``; the curve is
    future (past) directed where ``g(v, T) < 0`` (``> 0``).
    """
    if checks_per_segment < 1:
        raise ValueError("checks_per_segment must be >= 1")
    if domain is not None:
        out = ~domain.in_bounds(curve.vertices)
        if np.any(out):
            i = int(np.argmax(out))
            raise DomainError(f"curve leaves the chart at vertex {i}", curve.vertices[i])
        blocked = domain.segment_blocked(curve.vertices[:-1], curve.vertices[1:])
        if np.any(blocked):
            i = int(np.argmax(blocked))
            raise DomainError(f"segment {i} meets an obstacle", curve.vertices[i])
    d = curve.displacements
    nz = np.any(d != 0, axis=1)
    d = d[nz]
    base = curve.vertices[:-1][nz]
    t = (np.arange(checks_per_segment) + 0.5) / checks_per_segment
    pts = base[:, None, :] + t[None, :, None] * d[:, None, :]
    V = np.broadcast_to(d[:, None, :], pts.shape)
    ep = _eval_points(pts, domain)
    V = V / np.sqrt(g.hquad(ep, V))[..., None]
    q = g.quad(ep, V)
    w = g.quad(ep, V, g.T(ep))
    thr = tol * np.maximum(1.0, w * w)
    causal = q <= thr
    fut = causal & (w < 0)
    past = causal & (w > 0)
    total = q.size
    excess = q - thr
    k = np.unravel_index(int(np.argmax(excess)), q.shape)
    worst = float(q[k])
    if fut.sum() >= (1.0 - tol_measure) * total:
        return CausalityVerdict("causal-future", worst, 1.0 - fut.mean())
    if past.sum() >= (1.0 - tol_measure) * total:
        return CausalityVerdict("causal-past", worst, 1.0 - past.mean())
    bad = ~fut if fut.sum() >= past.sum() else ~past
    k = np.unravel_index(int(np.argmax(np.where(bad, excess, -np.inf))), q.shape)
    return CausalityVerdict("violation", float(q[k]), float(bad.mean()),
                            (pts[k].copy(), V[k].copy()))


def _panel(g, a0, d0, x, w, domain, integrand):
    pts = a0[:, None, :] + x[None, :, None] * d0[:, None, :]
    V = np.broadcast_to(d0[:, None, :], pts.shape)
    ep = _eval_points(pts, domain)
    f = -g.quad(ep, V) if integrand == "lorentz" else g.hquad(ep, V)
    # roundoff floor: null directions integrate to exactly zero
    floor = _ROUNDOFF * np.einsum("si,si->s", d0, d0)[:, None]
    f = np.where(f > floor, f, 0.0)
    return np.sqrt(f) @ w


_ROUNDOFF = 1e-13


def _segment_integral(g: MetricField, a: np.ndarray, d: np.ndarray, order: int,
                      domain: Optional[ChartDomain], integrand: str, depth: int,
                      rel_tol: float = 1e-12) -> np.ndarray:
    """Adaptive Gauss-Legendre: a panel is bisected while its halves disagree with it.

    Accepts the two-half value once ``|halves - whole| <= rel_tol * |d|`` or
    at ``depth`` levels.
    """
    x, w = gauss_legendre(order)
    total = np.zeros(len(a))
    size = np.linalg.norm(d, axis=1)
    coarse = _panel(g, a, d, x, w, domain, integrand)
    todo = [(np.arange(len(a)), a, d, coarse, 0)]
    while todo:
        idx, a0, d0, whole, level = todo.pop()
        if len(idx) == 0:
            continue
        hd = 0.5 * d0
        left = _panel(g, a0, hd, x, w, domain, integrand)
        right = _panel(g, a0 + hd, hd, x, w, domain, integrand)
        fine = left + right
        err = np.abs(fine - whole)
        split = (err > rel_tol * size[idx]) & (level + 1 < depth)
        done = ~split
        np.add.at(total, idx[done], fine[done])
        if np.any(split):
            todo.append((idx[split], a0[split], hd[split], left[split], level + 1))
            todo.append((idx[split], a0[split] + hd[split], hd[split], right[split], level + 1))
    return total


def segment_lorentz_lengths(curve: CausalCurve, g: MetricField, order: int = 8,
                            domain: Optional[ChartDomain] = None, depth: int = 30) -> np.ndarray:
    a = curve.vertices[:-1]
    d = curve.displacements
    if g.constant:
        G = g(np.zeros(curve.dim))
        return np.sqrt(np.maximum(0.0, -np.einsum("si,ij,sj->s", d, G, d)))
    return _segment_integral(g, a, d, order, domain, "lorentz", depth)


def lorentz_length(curve: CausalCurve, g: MetricField, order: int = 8,
                   domain: Optional[ChartDomain] = None, depth: int = 30) -> float:
    """Adaptive composite Gauss-Legendre quadrature of ``sqrt(max(0, -g(x', x')))``.

    Panels are bisected up to ``depth`` times while the halves change the
    value, which resolves cone-edge kinks and Hoelder cusps.  Exact for
    straight segments of constant metrics.
    """
    return float(segment_lorentz_lengths(curve, g, order, domain, depth).sum())


# ---------------------------------------------------------------------------
# curve-space metrics
# ---------------------------------------------------------------------------

def _h_factor(curve: CausalCurve) -> Optional[np.ndarray]:
    """Cholesky factor of h, frozen at the first vertex (exact for constant h)."""
    if curve.h is None:
        return None
    return np.linalg.cholesky(np.asarray(curve.h(curve.start), dtype=float)).T


def _dh(diff: np.ndarray, R: Optional[np.ndarray]) -> np.ndarray:
    if R is not None:
        diff = diff @ R.T
    return np.linalg.norm(diff, axis=-1)


def sup_distance(a: CausalCurve, b: CausalCurve) -> float:
    """``sup_s d^h(a(s), b(s))`` for curves parametrized on ``[0, 1]``.

    Evaluated on the union of both breakpoint sets plus midpoints; exact for
    polylines because the pointwise difference is piecewise linear there.
    """
    if a.param != "proportional" or b.param != "proportional":
        raise ParamMismatch("sup distance needs curves parametrized proportionally on [0, 1]")
    s = np.union1d(a.params, b.params)
    s = np.union1d(s, 0.5 * (s[1:] + s[:-1]))
    return float(_dh(a.at(s) - b.at(s), _h_factor(a)).max())


def _point_segment_distance(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distances from each point in ``P`` (m, n) to the closest of the segments ``A -> B`` (k, n)."""
    D = B - A
    dd = np.einsum("kn,kn->k", D, D)
    out = np.full(len(P), np.inf)
    chunk = max(1, 2_000_000 // max(len(A), 1))
    for i in range(0, len(P), chunk):
        p = P[i:i + chunk]
        rel = p[:, None, :] - A[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(dd > 0, np.einsum("mkn,kn->mk", rel, D) / dd, 0.0)
        t = np.clip(t, 0.0, 1.0)
        close = rel - t[..., None] * D[None, :, :]
        out[i:i + chunk] = np.sqrt(np.einsum("mkn,mkn->mk", close, close)).min(axis=1)
    return out


def _image_samples(c: CausalCurve, per_segment: int) -> np.ndarray:
    t = np.arange(per_segment) / per_segment
    d = c.displacements
    pts = (c.vertices[:-1, None, :] + t[None, :, None] * d[:, None, :]).reshape(-1, c.dim)
    return np.concatenate([pts, c.vertices[-1:]])


def directed_hausdorff(a: CausalCurve, b: CausalCurve, samples_per_segment: int = 16) -> float:
    R = _h_factor(a)
    P = _image_samples(a, samples_per_segment)
    A, B = b.vertices[:-1], b.vertices[1:]
    if R is not None:
        P, A, B = P @ R.T, A @ R.T, B @ R.T
    return float(_point_segment_distance(P, A, B).max())


def hausdorff_distance(a: CausalCurve, b: CausalCurve, samples_per_segment: int = 16) -> float:
    """Hausdorff distance of the images (parametrization plays no role).

    Points sampled on each segment of one image are measured exactly against
    the segments of the other, so the value never exceeds the true distance.
    """
    va, vb = _drop_repeats(a), _drop_repeats(b)
    if va.shape == vb.shape and np.array_equal(va, vb):
        return 0.0
    return max(directed_hausdorff(a, b, samples_per_segment),
               directed_hausdorff(b, a, samples_per_segment))


@dataclass(frozen=True, eq=False)
class Region:
    """Union of closed boxes minus closed holes."""

    boxes: tuple
    holes: tuple = ()

    @classmethod
    def of(cls, *boxes, holes=()) -> "Region":
        return cls(tuple(boxes), tuple(holes))

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        inside = np.zeros(p.shape[:-1], dtype=bool)
        for b in self.boxes:
            inside |= b.contains(p)
        for o in self.holes:
            inside &= ~o.contains(p)
        return inside


def image_in_region(curve: CausalCurve, U: Region) -> bool:
    """True iff the whole image lies in ``U`` (exact segment/box clipping)."""
    a, b = curve.vertices[:-1], curve.vertices[1:]
    for o in U.holes:
        if np.any(o.segment_hits(a, b)):
            return False
    intervals = [box.segment_interval(a, b) for box in U.boxes]
    for k in range(len(a)):
        pieces = sorted((float(t0[k]), float(t1[k])) for t0, t1 in intervals if t0[k] <= t1[k])
        reach = 0.0
        for t0, t1 in pieces:
            if t0 > reach + 1e-15:
                break
            reach = max(reach, t1)
        if reach < 1.0 - 1e-15:
            return False
    return True


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class CurveEnsemble:
    """Causal curves from ``p`` to ``q`` kept in their canonical parametrization."""

    p: np.ndarray
    q: np.ndarray
    members: List[CausalCurve] = field(default_factory=list)
    tol: float = 1e-9

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.members = [canonicalize(c) for c in self.members]
        for c in self.members:
            self._check_endpoints(c)

    def _check_endpoints(self, c: CausalCurve):
        if np.linalg.norm(c.start - self.p) > self.tol or np.linalg.norm(c.end - self.q) > self.tol:
            raise ValueError("ensemble member does not run from p to q")

    def add(self, curve: CausalCurve) -> None:
        c = canonicalize(curve)
        self._check_endpoints(c)
        self.members.append(c)

    def canonical_flags(self, rtol: float = 1e-9) -> List[bool]:
        out = []
        for c in self.members:
            sp = c.h_speeds()
            out.append(bool(np.all(np.abs(sp - c.h_length) <= rtol * max(c.h_length, 1.0))))
        return out

    def verify(self, g: MetricField, domain: Optional[ChartDomain] = None) -> List[bool]:
        return [is_causal(c, g, self.tol, domain=domain).causal for c in self.members]

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_curve(curve: CausalCurve) -> str:
    out = io.StringIO()
    out.write(f"curve n={len(curve)} param={curve.param} orient={curve.orientation}\n")
    for s, v in zip(curve.params, curve.vertices):
        out.write(" ".join([fmt(s)] + [fmt(x) for x in v]) + "\n")
    return out.getvalue()


def loads_curve(text: str) -> CausalCurve:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("curve"):
        raise ValueError("missing curve header")
    head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    n = int(head["n"])
    rows = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + n]])
    if rows.shape[0] != n:
        raise ValueError(f"expected {n} vertex lines, found {rows.shape[0]}")
    return CausalCurve(rows[:, 1:], rows[:, 0], head.get("param", "generic"),
                       head.get("orient", "future"))


def write_curve(path, curve: CausalCurve) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, dumps_curve(curve))


def read_curve(path) -> CausalCurve:
    with open(path, "r", encoding="ascii") as fh:
        return loads_curve(fh.read())
