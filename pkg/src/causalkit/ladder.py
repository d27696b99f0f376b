"""Causal-ladder diagnostics at grid scale and the stable widening construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .chart import (Box, ChartDomain, MetricField, Modulus, cone_precedes, convex_combine,
                    default_points, widen)
from .curves import CausalCurve, is_causal
from .errors import EmptySet, InconclusiveBounded
from .grid import CausalGraph, Grid, random_walk
from .limits import extract_limit_curve
from .reach import (causal_diamond, future_reach, imprisonment_bound, open_past_future,
                    propagate)

__all__ = [
    "Verdict", "LadderReport", "CauchySurfaceSpec", "PartitionOfUnity", "StableWidening",
    "check_causality", "check_causal_simplicity", "check_global_hyperbolicity",
    "check_cauchy_surface", "build_stable_widening", "check_strong_causality_at",
    "convex_combine", "diagnose", "simplicity_oracle",
]

PASS, FAIL, INCONCLUSIVE = "pass-at-scale", "fail", "inconclusive"


@dataclass
class Verdict:
    kind: str
    witness: object = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.kind == PASS

    @property
    def failed(self) -> bool:
        return self.kind == FAIL

    def record(self, rung: str) -> dict:
        rec = {"rung": rung, "verdict": self.kind}
        rec.update({k: v for k, v in self.detail.items() if _jsonable(v)})
        if isinstance(self.witness, CausalCurve):
            rec["witness_vertices"] = self.witness.vertices.tolist()
        return rec


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, list, dict, type(None)))


@dataclass
class LadderReport:
    rungs: Dict[str, Verdict] = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def __getitem__(self, rung: str) -> Verdict:
        return self.rungs[rung]

    @property
    def all_pass(self) -> bool:
        return all(v.passed for v in self.rungs.values())

    def records(self) -> list:
        return [v.record(k) for k, v in self.rungs.items()] + [{"parameters": self.parameters}]

    def summary(self) -> str:
        return "\n".join(f"{k:<28s} {v.kind}" for k, v in self.rungs.items())


def _cycle_verdict(g: MetricField, grid: Grid, graph: CausalGraph) -> Verdict:
    cyc = graph.find_cycle()
    if cyc is None:
        return Verdict(PASS, detail={"nodes": grid.size, "edges": int(len(graph.src))})
    curve = graph.path_curve(cyc)
    ok = is_causal(curve, g, domain=grid.domain).causal
    return Verdict(FAIL, curve, {"cycle_nodes": len(cyc) - 1, "witness_causal": bool(ok)})


def check_causality(g: MetricField, grid: Grid, radius: int = 3) -> Verdict:
    """Pass iff the under-mode cone-step graph is acyclic; a failure carries the closed polyline."""
    graph = CausalGraph.build(g, grid, mode="under", radius=radius)
    return _cycle_verdict(g, grid, graph)


def _middle_box(grid: Grid, fraction: float = 1 / 3) -> Box:
    lo, hi = grid.box.lo.copy(), grid.box.hi.copy()
    for k in range(grid.dim):
        if not grid.periodic_axis(k):
            c, r = 0.5 * (lo[k] + hi[k]), 0.5 * (hi[k] - lo[k]) * fraction
            lo[k], hi[k] = c - r, c + r
    return Box(lo, hi)


def _sample_in(box: Box, count: int, rng, dom: ChartDomain) -> np.ndarray:
    out = []
    while len(out) < count:
        x = box.lo + rng.random((4 * count, box.dim)) * (box.hi - box.lo)
        out.extend(x[dom.contains(x)])
    return np.array(out[:count])


# ---------------------------------------------------------------------------
# causal simplicity
# ---------------------------------------------------------------------------

@dataclass
class SimplicityTriple:
    """A trial ``q_k -> q`` with every ``q_k`` after ``p``; ``violates`` when ``q`` is not."""

    tail: np.ndarray  # (k, n), ordered toward q
    p: np.ndarray
    q: np.ndarray
    violates: bool = False

    def to_dict(self) -> dict:
        return {"tail": self.tail.tolist(), "p": self.p.tolist(), "q": self.q.tolist(),
                "violates": self.violates}


def check_causal_simplicity(g: MetricField, grid: Grid, trials: int = 200, seed: int = 0,
                            pool: int = 8, graze: float = 1.5, tail: int = 3) -> Verdict:
    """Sample ``p`` and limits ``q`` of under-mode reachable points; test ``q`` against the over-mode set.

    Candidate limits are the nodes reached once the obstacles are trimmed by
    ``graze`` cells, or the boundary nodes of the under-mode future of ``p``
    when trimming adds nothing.  The tail is the nearest under-mode members (within two
    cells).  A trial violates closedness when ``q`` is outside the over-mode
    future.  Every trial is kept in ``detail['samples']``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    dom = grid.domain
    nodes = grid.nodes
    ps = _sample_in(_middle_box(grid, 0.8), pool, rng, dom)
    per_p = []
    for p in ps:
        U = future_reach(p, g, grid, "under")
        O = future_reach(p, g, grid, "over")
        cand = U.boundary() & grid.valid
        if dom.obstacles:
            Ug = future_reach(p, g, grid, "under", obstacles=dom.shrunk_obstacles(graze * grid.cell))
            extra = Ug.cells & grid.valid & ~O.cells
            # limits grazing an obstacle are the informative ones
            if extra.any():
                cand = extra
        per_p.append((p, U, O, np.flatnonzero(cand)))
    samples: List[SimplicityTriple] = []
    for t in range(trials):
        p, U, O, cand = per_p[t % len(per_p)]
        if len(cand) == 0:
            continue
        qi = int(rng.choice(cand))
        q = nodes[qi]
        um = np.flatnonzero(U.cells)
        d = np.max(np.abs(nodes[um] - q) / grid.step, axis=1)
        near = um[np.argsort(d, kind="stable")[:tail]]
        if np.max(np.abs(nodes[near] - q) / grid.step) > 2 + 1e-9:
            continue
        order = np.argsort(-np.linalg.norm(nodes[near] - q, axis=1), kind="stable")
        violates = not (O.cells[qi] or O.contains_point(q))
        samples.append(SimplicityTriple(nodes[near][order], p.copy(), q.copy(), violates))
    bad = [s for s in samples if s.violates]
    detail = {"trials": trials, "pool": len(ps), "sampled": len(samples), "violations": len(bad),
              "samples": samples}
    if bad:
        return Verdict(FAIL, bad, detail)
    return Verdict(PASS, None, detail)


def simplicity_oracle(triples: Sequence[SimplicityTriple], g: MetricField, grid: Grid) -> List[bool]:
    """Whether each trial violates closedness on the lattice refined once.

    The tail must be under-mode reachable from ``p`` and ``q`` must lie outside
    the over-mode future of ``p``, both recomputed on the refined lattice.
    """
    fine = grid.refined(2)
    cache = {}
    out = []
    for tr in triples:
        key = tuple(np.round(tr.p, 12))
        if key not in cache:
            cache[key] = (future_reach(tr.p, g, fine, "under"), future_reach(tr.p, g, fine, "over"))
        U, O = cache[key]
        tail_ok = all(U.cells[fine.nearest(x)] or U.contains_point(x) for x in tr.tail)
        reached = O.cells[fine.nearest(tr.q)] or O.contains_point(tr.q)
        out.append(bool(tail_ok and not reached))
    return out


# ---------------------------------------------------------------------------
# global hyperbolicity
# ---------------------------------------------------------------------------

def _exhaustion(grid: Grid, count: int) -> List[Box]:
    return [_middle_box(grid, (k + 1) / count) for k in range(count)]


def check_global_hyperbolicity(g: MetricField, grid: Grid, pair_samples: int = 6, seed: int = 0,
                               exhaustion: int = 3, limit_check: bool = True,
                               family_size: int = 16) -> LadderReport:
    """Causality, bounded h-length on an exhaustion, and compact sampled diamonds.

    Each sampled diamond that is nonempty also gets a limit-extraction pass on
    random two-segment causal curves through it.
    """
    if pair_samples < 1:
        raise ValueError("pair_samples must be positive")
    rng = np.random.default_rng(seed)
    report = LadderReport(parameters={"grid": grid.describe(), "pair_samples": pair_samples,
                                      "exhaustion": exhaustion, "seed": seed})
    report.rungs["causal"] = check_causality(g, grid)
    bounds = []
    nti = Verdict(PASS)
    for K in _exhaustion(grid, exhaustion):
        r = imprisonment_bound(K, g, grid)
        if not r.bounded:
            nti = Verdict(FAIL, r.witness, {"box": K.to_list()})
            break
        bounds.append(r.bound)
    nti.detail.setdefault("bounds", bounds)
    report.rungs["non-totally-imprisoning"] = nti
    if nti.failed or report.rungs["causal"].failed:
        w = report.rungs["causal"].witness if report.rungs["causal"].failed else nti.witness
        report.rungs["globally-hyperbolic"] = Verdict(FAIL, w, {"reason": "imprisoning cycle"})
        return report
    mid = _middle_box(grid, 1 / 3)
    conclusive, extracted = 0, 0
    for p in _sample_in(mid, pair_samples, rng, grid.domain):
        q = p.copy()
        q[0] += rng.uniform(0.25, 1.0) * (mid.hi[0] - mid.lo[0])
        for k in range(1, grid.dim):
            q[k] += rng.uniform(-0.25, 0.25) * (mid.hi[0] - mid.lo[0])
        q = grid.domain.wrap(q)
        if not grid.domain.contains(q[None])[0]:
            continue
        try:
            rep = causal_diamond(p, q, g, grid)
        except InconclusiveBounded:
            continue
        conclusive += 1
        if not rep.compact:
            report.rungs["globally-hyperbolic"] = Verdict(
                FAIL, rep.witness, {"reason": "closure defect", "defect_cells": len(rep.closure_defect)})
            return report
        if limit_check and rep.under.count:
            if _limit_cross_check(p, q, g, rep, rng, family_size):
                extracted += 1
    kind = PASS if conclusive else INCONCLUSIVE
    report.rungs["globally-hyperbolic"] = Verdict(kind, None, {"diamonds": conclusive,
                                                              "limit_extractions": extracted})
    return report


def _limit_cross_check(p, q, g, rep, rng, size) -> bool:
    """Random two-segment causal curves through the diamond admit a limit curve."""
    pts = rep.under.points()
    if len(pts) == 0:
        return False
    fam = []
    dom = rep.diamond.grid.domain
    for r in pts[rng.integers(len(pts), size=4 * size)]:
        if np.allclose(r, p) or np.allclose(r, q):
            continue
        c = CausalCurve.polyline(np.array([p, r, q]))
        if is_causal(c, g, domain=dom).causal:
            fam.append(c)
        if len(fam) >= size:
            break
    if len(fam) < 2:
        return False
    try:
        res = extract_limit_curve(fam, lip_bound=np.inf, tol=0.1 * dom.diameter, g=g, domain=dom)
    except Exception:
        return False
    return res.limit_causal


# ---------------------------------------------------------------------------
# Cauchy surfaces
# ---------------------------------------------------------------------------

@dataclass
class CauchySurfaceSpec:
    time_function: Callable[[np.ndarray], np.ndarray]
    level: float = 0.0
    name: str = "S"

    def value(self, points) -> np.ndarray:
        return np.asarray(self.time_function(np.atleast_2d(points)), dtype=float) - self.level


class _LevelBand:
    """Lattice nodes within half a cell (in ``f``) of the level set."""

    def __init__(self, spec: CauchySurfaceSpec, band: float):
        self.spec, self.band = spec, band

    def contains(self, points) -> np.ndarray:
        return np.abs(self.spec.value(points)) <= self.band


def crossings(values: np.ndarray) -> int:
    """Sign changes of a sequence, zeros skipped."""
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(np.diff(s)))


def inextendible_curve(fut: CausalGraph, past: CausalGraph, start: int, rng) -> tuple:
    """Random lattice polyline through ``start`` extended both ways until it stops."""
    f_pts, f_why = random_walk(fut, start, rng)
    b_pts, b_why = random_walk(past, start, rng)
    pts = np.concatenate([b_pts[::-1], f_pts[1:]])
    return pts, (b_why, f_why)


def check_cauchy_surface(spec: CauchySurfaceSpec, g: MetricField, grid: Grid, curve_samples: int = 200,
                         seed: int = 0, eps_ladder: Sequence[float] = (0.05,), acausal_samples: int = 3,
                         tripartition_samples: int = 200) -> Verdict:
    """Crossing counts of random inextendible causal polylines, acausality and the tripartition."""
    if curve_samples < 1:
        raise ValueError("curve_samples must be positive")
    rng = np.random.default_rng(seed)
    dom = grid.domain
    nodes = grid.nodes
    vals = spec.value(nodes)
    ok_nodes = grid.valid
    if not (np.any(vals[ok_nodes] <= 0) and np.any(vals[ok_nodes] >= 0)):
        raise EmptySet("the level set misses the chart")
    fut = CausalGraph.build(g, grid, mode="under", radius=2)
    past = CausalGraph.build(g, grid, mode="under", radius=2, direction="past")
    starts = list(rng.choice(np.flatnonzero(ok_nodes), size=curve_samples))
    # curves that stop at an obstacle are where crossing fails first
    for ob in dom.obstacles:
        near = np.flatnonzero(ob.grow(2.5 * grid.cell).contains(nodes) & ok_nodes)
        starts.extend(near.tolist())
    counts = []
    for s in starts:
        pts, why = inextendible_curve(fut, past, int(s), rng)
        c = crossings(spec.value(dom.wrap(pts)))
        counts.append(c)
        if c != 1:
            curve = CausalCurve.polyline(pts)
            return Verdict(FAIL, curve, {"reason": "crossings", "crossings": c, "ends": list(why),
                                         "witness_causal": bool(is_causal(curve, g, domain=dom).causal)})
    # acausality: a causal path from S must not come back to or below S
    band = 0.5 * float(np.max(np.abs(np.diff(vals.reshape(grid.shape), axis=0)))) + 1e-12
    level_nodes = np.flatnonzero((np.abs(vals) <= band) & ok_nodes)
    for s in rng.choice(level_nodes, size=min(acausal_samples, len(level_nodes)), replace=False):
        p = nodes[s]
        R = propagate(g, grid, p, "future", "under", strict=True)
        back = R.cells & (vals < vals[s] - 1e-12) & (np.abs(vals - vals[s]) > 1e-12)
        if np.any(back):
            y = nodes[int(np.flatnonzero(back)[0])]
            return Verdict(FAIL, (p, y), {"reason": "not acausal"})
    # tripartition away from S and the lattice edge
    A = _LevelBand(spec, band)
    Ip = open_past_future(A, g, eps_ladder, grid, "future")
    Im = open_past_future(A, g, eps_ladder, grid, "past")
    far = ok_nodes & (np.abs(vals) > 3 * band) & ~_near_edge(grid, 3)
    pick = rng.choice(np.flatnonzero(far), size=min(tripartition_samples, int(far.sum())), replace=False)
    both = Ip.cells[pick] & Im.cells[pick]
    neither = ~Ip.cells[pick] & ~Im.cells[pick]
    if np.any(both | neither):
        bad = nodes[pick[np.flatnonzero(both | neither)[0]]]
        return Verdict(FAIL, bad, {"reason": "tripartition"})
    return Verdict(PASS, None, {"curves": len(starts), "tripartition_points": len(pick)})


def _near_edge(grid: Grid, cells: int) -> np.ndarray:
    m = grid.multi(np.arange(grid.size))
    out = np.zeros(grid.size, dtype=bool)
    for k in range(grid.dim):
        if not grid.periodic_axis(k):
            out |= (m[:, k] < cells) | (m[:, k] >= grid.shape[k] - cells)
    return out


# ---------------------------------------------------------------------------
# strong causality
# ---------------------------------------------------------------------------

def check_strong_causality_at(p, g: MetricField, neighborhood_ladder: Sequence[float], grid: Grid,
                              radius: int = 3) -> Verdict:
    """Look for a causal lattice path that starts and ends in ``V`` but leaves ``U``.

    ``U`` is the box of the largest radius; each smaller radius gives a ``V``.
    Passes as soon as some ``V`` admits no such path.
    """
    radii = list(neighborhood_ladder)
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("neighborhood_ladder must be decreasing")
    p = np.asarray(p, dtype=float)
    graph = CausalGraph.build(g, grid, mode="under", radius=radius)
    U = _periodic_box_mask(grid, p, radii[0])
    witness = None
    for r in radii[1:] if len(radii) > 1 else radii:
        V = np.flatnonzero(_periodic_box_mask(grid, p, r) & grid.valid)
        if len(V) == 0:
            continue
        out_nodes = graph.reachable(V) & ~U
        back = graph.reachable(np.flatnonzero(out_nodes)) if out_nodes.any() else out_nodes
        hit = np.flatnonzero(back[V]) if back.any() else []
        if len(hit) == 0:
            return Verdict(PASS, None, {"radius": r})
        witness = _strong_witness(graph, V, out_nodes, int(V[hit[0]]))
    return Verdict(FAIL, witness, {"radius": radii[-1]})


def _periodic_box_mask(grid: Grid, p, r) -> np.ndarray:
    d = grid.nodes - p
    P = grid.domain.period
    for k in range(grid.dim):
        if grid.domain.periodic[k]:
            d[:, k] -= P[k] * np.round(d[:, k] / P[k])
    return np.all(np.abs(d) <= r + 1e-12, axis=1)


def _bfs_path(graph: CausalGraph, sources, target: int) -> Optional[list]:
    n = graph.grid.size
    src = np.concatenate([graph.src, np.full(len(sources), n)])
    tgt = np.concatenate([graph.tgt, np.asarray(sources)])
    A = sparse.csr_matrix((np.ones(len(src)), (src, tgt)), shape=(n + 1, n + 1))
    _, pred = csgraph.breadth_first_order(A, n, directed=True, return_predecessors=True)
    if pred[target] < 0 and target not in sources:
        return None
    path = [target]
    while pred[path[-1]] != n and pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _strong_witness(graph, V, out_nodes, end) -> Optional[CausalCurve]:
    outs = np.flatnonzero(out_nodes)
    # V -> some outside node -> back to end in V
    second = None
    for o in outs[:64]:
        second = _bfs_path(graph, [int(o)], end)
        if second is not None:
            break
    if second is None:
        return None
    first = _bfs_path(graph, list(map(int, V)), second[0])
    return graph.path_curve(first + second[1:])


# ---------------------------------------------------------------------------
# stable widening
# ---------------------------------------------------------------------------

def smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


@dataclass
class PartitionOfUnity:
    """C1 partition subordinate to concentric box shells.

    ``M_n = {u <= n/m}`` with ``u`` the normalised sup-distance from the centre
    over non-periodic axes.  ``chi_n`` is supported in ``O_n = M_n° minus M_{n-2}``.
    """

    center: np.ndarray
    halfwidth: np.ndarray
    axes: np.ndarray  # bool mask of axes used by u
    shells: int

    def u(self, points) -> np.ndarray:
        d = np.abs(np.atleast_2d(points) - self.center) / self.halfwidth
        return np.max(np.where(self.axes, d, 0.0), axis=-1)

    def radius(self, n: int) -> float:
        return max(0, min(n, self.shells)) / self.shells

    def _T(self, k: int, u):
        # T_1 = 1; T_k rises from 0 to 1 across [R_{k-2}, R_{k-1}]; T_{m+1} = 0
        if k <= 1:
            return np.ones_like(u)
        if k > self.shells:
            return np.zeros_like(u)
        a, b = self.radius(k - 2), self.radius(k - 1)
        return smoothstep((u - a) / (b - a))

    def weights(self, points) -> np.ndarray:
        """Array of shape ``(shells, m)`` with ``chi_1 .. chi_m`` at the points."""
        u = self.u(points)
        return np.stack([self._T(k, u) - self._T(k + 1, u) for k in range(1, self.shells + 1)])

    def in_shell(self, n: int, points) -> np.ndarray:
        """Membership in ``N_n = M_n minus M_{n-2}°`` (``M_n`` itself for ``n <= 2``)."""
        u = self.u(points)
        inside = u <= self.radius(n) + 1e-12 if n < self.shells else np.ones(len(u), dtype=bool)
        if n <= 2:
            return inside
        return inside & (u >= self.radius(n - 2) - 1e-12)

    def in_open_shell(self, n: int, points) -> np.ndarray:
        u = self.u(points)
        inside = u < self.radius(n) if n < self.shells else np.ones(len(u), dtype=bool)
        if n <= 2:
            return inside
        return inside & (u > self.radius(n - 2))

    def lipschitz(self) -> float:
        # smoothstep slope 1.5 over a shell of width 1/m in u, u is 1/min(halfwidth)-Lipschitz
        return 1.5 * self.shells / float(np.min(self.halfwidth[self.axes])) if np.any(self.axes) else 0.0


@dataclass
class StableWidening:
    metric: MetricField
    partition: PartitionOfUnity
    deltas: List[float]
    shells: int
    ambient_order: object = None
    shell_orders: List[object] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return bool(self.ambient_order is not None and self.ambient_order.strict
                    and all(o.strict for o in self.shell_orders))


def build_stable_widening(g: MetricField, shells: int, delta_ladder: Sequence[float],
                          domain: ChartDomain, center=None, per_axis: int = 9,
                          directions: int = 64) -> StableWidening:
    """``g'' = sum_n chi_n widen(g, delta_{n+2})`` over concentric box shells.

    The ladder is extended past its end by halving.  Verifies ``g < g''`` on
    sampled points and ``g'' < widen(g, delta_n)`` on each shell ``N_n``.
    """
    deltas = [float(d) for d in delta_ladder]
    if shells < 2:
        raise ValueError("need at least two shells")
    if len(deltas) != shells:
        raise ValueError("delta_ladder must have one entry per shell")
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta_ladder must be strictly decreasing and positive")
    axes = ~np.asarray(domain.periodic, dtype=bool)
    if not np.any(axes):
        raise ValueError("shells need a non-periodic axis")
    c = domain.outer.center if center is None else np.asarray(center, float)
    half = np.maximum(domain.hi - c, c - domain.lo)
    if np.any(half[axes] <= 0):
        raise ValueError("chart too small for a shell exhaustion")
    pou = PartitionOfUnity(c, np.where(half > 0, half, 1.0), axes, shells)
    ext = deltas + [deltas[-1] / 2, deltas[-1] / 4]

    def form(p, g=g, pou=pou, ext=ext):
        pts = np.asarray(p, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        w = pou.weights(flat)  # (m, N)
        dbar = np.einsum("kn,k->n", w, np.array(ext[2:2 + shells]))
        out = g(flat) - dbar[:, None, None] * g.background(flat)
        return out.reshape(pts.shape[:-1] + out.shape[-2:])

    mod = g.modulus + Modulus(pou.lipschitz() * ext[2], 1.0)
    g2 = MetricField(form, g.dim, g.time_orientation, mod, f"stable({g.name})", g.h,
                     time_axis=g.time_axis)
    pts = default_points(g, domain, per_axis)
    ambient = cone_precedes(g, g2, points=pts, directions=directions)
    orders = []
    dense = default_points(g, domain, 2 * per_axis + 1)
    for n in range(1, shells + 1):
        sel = dense[pou.in_shell(n, dense)]
        if len(sel) == 0:
            continue
        orders.append(cone_precedes(g2, widen(g, deltas[n - 1]), points=sel, directions=directions))
    return StableWidening(g2, pou, ext, shells, ambient, orders)


# ---------------------------------------------------------------------------
# full ladder
# ---------------------------------------------------------------------------

def diagnose(g: MetricField, grid: Grid, pair_samples: int = 6, trials: int = 200, seed: int = 0,
             cauchy: Optional[CauchySurfaceSpec] = None) -> LadderReport:
    """Every rung on one lattice; a Cauchy-surface rung when a candidate is supplied."""
    report = check_global_hyperbolicity(g, grid, pair_samples, seed)
    if report["causal"].failed:
        report.rungs["causally-simple"] = Verdict(FAIL, report["causal"].witness,
                                                  {"reason": "not causal"})
    else:
        report.rungs["causally-simple"] = check_causal_simplicity(g, grid, trials, seed)
    if cauchy is not None:
        report.rungs["cauchy-surface"] = check_cauchy_surface(cauchy, g, grid, seed=seed)
    report.parameters["trials"] = trials
    return report
