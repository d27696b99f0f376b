"""Node lattices over a chart, cone-step stencils and the cone-step graph."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .chart import Box, ChartDomain, MetricField
from .curves import CausalCurve


@dataclass(frozen=True, eq=False)
class Grid:
    """Regular node lattice.  Node ``i`` sits at ``origin + i * step``.

    On periodic axes the nodes ``0..N-1`` cover one period; elsewhere the
    lattice spans the requested box including both ends.
    """

    domain: ChartDomain
    shape: tuple
    origin: np.ndarray
    step: np.ndarray

    @classmethod
    def over(cls, domain: ChartDomain, resolution) -> "Grid":
        n = domain.dim
        res = (resolution,) * n if np.isscalar(resolution) else tuple(resolution)
        if len(res) != n or min(res) < 2:
            raise ValueError("need at least two nodes per axis")
        step = np.empty(n)
        for k in range(n):
            L = domain.hi[k] - domain.lo[k]
            step[k] = L / res[k] if domain.periodic[k] else L / (res[k] - 1)
        return cls(domain, tuple(int(r) for r in res), domain.lo.copy(), step)

    @classmethod
    def spaced(cls, domain: ChartDomain, box: Optional[Box], spacing) -> "Grid":
        """Lattice with the given spacing whose corner nodes are ``box.lo`` and (up to rounding) ``box.hi``."""
        box = box or domain.outer
        sp = np.broadcast_to(np.asarray(spacing, dtype=float), (domain.dim,)).copy()
        shape = []
        for k in range(domain.dim):
            if domain.periodic[k] and np.isclose(box.hi[k] - box.lo[k], domain.hi[k] - domain.lo[k]):
                m = max(2, int(round((domain.hi[k] - domain.lo[k]) / sp[k])))
                sp[k] = (domain.hi[k] - domain.lo[k]) / m
            else:
                m = max(1, int(round((box.hi[k] - box.lo[k]) / sp[k]))) + 1
                if m > 1:
                    sp[k] = (box.hi[k] - box.lo[k]) / (m - 1)
            shape.append(m)
        return cls(domain, tuple(shape), box.lo.copy(), sp)

    def refined(self, factor: int = 2) -> "Grid":
        shape = []
        for k, m in enumerate(self.shape):
            shape.append(m * factor if self.periodic_axis(k) else (m - 1) * factor + 1)
        return Grid(self.domain, tuple(shape), self.origin.copy(), self.step / factor)

    def periodic_axis(self, k: int) -> bool:
        return bool(self.domain.periodic[k]) and np.isclose(
            self.shape[k] * self.step[k], self.domain.hi[k] - self.domain.lo[k])

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell(self) -> float:
        return float(self.step.max())

    @cached_property
    def nodes(self) -> np.ndarray:
        idx = np.indices(self.shape).reshape(self.dim, -1).T
        return self.origin + idx * self.step

    @cached_property
    def valid(self) -> np.ndarray:
        """Nodes inside the chart and outside every obstacle."""
        return self.domain.contains(self.nodes)

    @cached_property
    def box(self) -> Box:
        hi = self.origin + (np.array(self.shape) - 1) * self.step
        return Box(self.origin, hi)

    def multi(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def flat(self, multi) -> np.ndarray:
        m = np.asarray(multi)
        return np.ravel_multi_index(tuple(m[..., k] for k in range(self.dim)), self.shape)

    def nearest(self, point) -> int:
        p = np.asarray(point, dtype=float)
        p = self.domain.wrap(p)
        i = np.rint((p - self.origin) / self.step).astype(int)
        for k in range(self.dim):
            if self.periodic_axis(k):
                i[k] %= self.shape[k]
            else:
                i[k] = min(max(i[k], 0), self.shape[k] - 1)
        return int(self.flat(i))

    def neighbor(self, flat, offset):
        """Target indices of ``flat + offset`` (-1 outside a non-periodic edge)."""
        m = self.multi(flat) + np.asarray(offset)
        ok = np.ones(m.shape[0], dtype=bool)
        for k in range(self.dim):
            if self.periodic_axis(k):
                m[:, k] %= self.shape[k]
            else:
                ok &= (m[:, k] >= 0) & (m[:, k] < self.shape[k])
        out = np.full(m.shape[0], -1, dtype=np.int64)
        if np.any(ok):
            out[ok] = self.flat(m[ok])
        return out

    def boundary_nodes(self) -> np.ndarray:
        """Nodes on a non-periodic edge of the lattice."""
        m = self.multi(np.arange(self.size))
        edge = np.zeros(self.size, dtype=bool)
        for k in range(self.dim):
            if not self.periodic_axis(k):
                edge |= (m[:, k] == 0) | (m[:, k] == self.shape[k] - 1)
        return edge

    def nodes_in(self, region) -> np.ndarray:
        return np.flatnonzero(region.contains(self.nodes) & self.valid)

    def describe(self) -> dict:
        return {"shape": list(self.shape), "origin": self.origin.tolist(), "step": self.step.tolist()}


def stencil(dim: int, radius: int = 3) -> np.ndarray:
    """Primitive integer offsets with Chebyshev norm at most ``radius``, sorted by length."""
    rng = range(-radius, radius + 1)
    out = []
    for o in np.array(np.meshgrid(*([list(rng)] * dim), indexing="ij")).reshape(dim, -1).T:
        if np.any(o) and math.gcd(*[abs(int(x)) for x in o]) == 1:
            out.append(o)
    out = np.array(out, dtype=int)
    order = np.lexsort((np.arange(len(out)), np.linalg.norm(out, axis=1)))
    return out[order]


def default_kappa(g: MetricField, grid: Grid, slack: float = 0.1) -> float:
    """Cone margin ``2 omega(cell) + slack * cell`` covering metric variation across a step."""
    c = grid.cell
    return float(2.0 * g.modulus(c) + slack * c)


def segment_test(g: MetricField, domain: ChartDomain, a, b, mode: str, kappa: float,
                 tol: float = 1e-12, max_samples: int = 9, spacing: Optional[float] = None,
                 direction: str = "future") -> np.ndarray:
    """Whether ``a -> b`` (unwrapped coordinates) is a causal step of the requested kind.

    ``over`` accepts directions causal for ``g - kappa h``; ``under`` needs
    causality for ``g + kappa h``; ``exact`` uses ``g`` itself.  The metric is
    sampled at up to ``max_samples`` points along the segment (one point for
    constant fields).  ``direction='past'`` tests ``a -> b`` as past directed.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    if direction == "past":
        d = -d
    if len(a) == 0:
        return np.zeros(0, dtype=bool)
    if g.constant:
        ts = np.array([0.5])
    else:
        length = np.linalg.norm(d, axis=-1).max()
        sp = spacing or length
        k = int(min(max(3, math.ceil(length / max(sp, 1e-300)) + 1), max_samples))
        ts = np.linspace(0.0, 1.0, k)
    sign = {"over": -1.0, "under": 1.0, "exact": 0.0}[mode]
    ok = np.ones(len(a), dtype=bool)
    for t in ts:
        x = domain.wrap(a + t * (b - a))
        q = g.quad(x, d)
        hq = g.hquad(x, d)
        w = g.quad(x, d, g.T(x))
        qm = q + sign * kappa * hq
        if mode == "under":
            ok &= qm <= 0.0
        else:
            ok &= qm <= tol * hq
        ok &= w < 0
    return ok


@dataclass
class CausalGraph:
    """Cone-step graph on a lattice: ``i -> j`` when the step is future causal in ``mode``.

    ``terminal[o]`` marks nodes whose causal step ``o`` leaves the lattice or
    runs into an obstacle (the walk ends there).
    """

    grid: Grid
    offsets: np.ndarray
    src: np.ndarray
    tgt: np.ndarray
    off: np.ndarray
    weight: np.ndarray
    terminal: np.ndarray  # (n_offsets, size) bool
    mode: str
    direction: str = "future"

    @classmethod
    def build(cls, g: MetricField, grid: Grid, mode: str = "under", kappa: Optional[float] = None,
              radius: int = 3, mask: Optional[np.ndarray] = None, obstacles=None,
              offsets: Optional[np.ndarray] = None, direction: str = "future") -> "CausalGraph":
        kappa = default_kappa(g, grid) if kappa is None else kappa
        offs = stencil(grid.dim, radius) if offsets is None else np.asarray(offsets)
        allowed = grid.valid if mask is None else (grid.valid & mask)
        base = np.flatnonzero(allowed)
        pos = grid.nodes[base]
        srcs, tgts, ids, ws = [], [], [], []
        term = np.zeros((len(offs), grid.size), dtype=bool)
        dom = grid.domain
        for k, o in enumerate(offs):
            d = o * grid.step
            b = pos + d
            causal = segment_test(g, dom, pos, b, mode, kappa, spacing=grid.cell, direction=direction)
            tgt = grid.neighbor(base, o)
            inside = tgt >= 0
            inside[inside] &= allowed[tgt[inside]]
            blocked = dom.segment_blocked(pos, b, obstacles)
            good = causal & inside & ~blocked
            term[k, base[causal & ~good]] = True
            srcs.append(base[good])
            tgts.append(tgt[good])
            ids.append(np.full(good.sum(), k))
            ws.append(np.full(good.sum(), np.linalg.norm(d)))
        return cls(grid, offs, np.concatenate(srcs), np.concatenate(tgts), np.concatenate(ids),
                   np.concatenate(ws), term, mode, direction)

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        n = self.grid.size
        return sparse.csr_matrix((np.ones(len(self.src)), (self.src, self.tgt)), shape=(n, n))

    def reachable(self, seeds, reverse: bool = False, edge_mask=None) -> np.ndarray:
        """Boolean mask of nodes reachable from ``seeds`` along (reversed) edges."""
        n = self.grid.size
        src, tgt = self.src, self.tgt
        if edge_mask is not None:
            src, tgt = src[edge_mask], tgt[edge_mask]
        if reverse:
            src, tgt = tgt, src
        seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
        # a virtual root joined to every seed
        A = sparse.csr_matrix((np.ones(len(src) + len(seeds)),
                               (np.concatenate([src, np.full(len(seeds), n)]),
                                np.concatenate([tgt, seeds]))), shape=(n + 1, n + 1))
        order = csgraph.breadth_first_order(A, n, directed=True, return_predecessors=False)
        out = np.zeros(n, dtype=bool)
        out[order[order < n]] = True
        return out

    def find_cycle(self, edge_mask=None) -> Optional[list]:
        """A closed node path ``[v0, v1, ..., v0]`` or ``None`` if the graph is acyclic."""
        n = self.grid.size
        src, tgt = self.src, self.tgt
        if edge_mask is not None:
            src, tgt = src[edge_mask], tgt[edge_mask]
        if len(src) == 0:
            return None
        A = sparse.csr_matrix((np.ones(len(src)), (src, tgt)), shape=(n, n))
        ncomp, labels = csgraph.connected_components(A, directed=True, connection="strong")
        sizes = np.bincount(labels, minlength=ncomp)
        inner = (labels[src] == labels[tgt]) & ((sizes[labels[src]] > 1) | (src == tgt))
        if not np.any(inner):
            return None
        # shortest cycle through the first qualifying edge, found within its component
        e = int(np.argmax(inner))
        u, v = int(src[e]), int(tgt[e])
        if u == v:
            return [u, u]
        comp = labels[u]
        keep = (labels[src] == comp) & (labels[tgt] == comp)
        B = sparse.csr_matrix((np.ones(keep.sum()), (src[keep], tgt[keep])), shape=(n, n))
        _, pred = csgraph.breadth_first_order(B, v, directed=True, return_predecessors=True)
        path = [u]
        while path[-1] != v:
            path.append(int(pred[path[-1]]))
        path.reverse()  # v ... u
        return [u] + path

    def cyclic_nodes(self, edge_mask=None) -> np.ndarray:
        """Mask of nodes lying on some directed cycle."""
        n = self.grid.size
        src, tgt = self.src, self.tgt
        if edge_mask is not None:
            src, tgt = src[edge_mask], tgt[edge_mask]
        A = sparse.csr_matrix((np.ones(len(src)), (src, tgt)), shape=(n, n))
        ncomp, labels = csgraph.connected_components(A, directed=True, connection="strong")
        sizes = np.bincount(labels, minlength=ncomp)
        out = sizes[labels] > 1
        out[src[src == tgt]] = True
        return out

    def topological_levels(self, edge_mask=None) -> Optional[np.ndarray]:
        """Kahn levels of every node, or ``None`` when a cycle exists."""
        n = self.grid.size
        src, tgt = self.src, self.tgt
        if edge_mask is not None:
            src, tgt = src[edge_mask], tgt[edge_mask]
        order = np.argsort(src, kind="stable")
        src, tgt = src[order], tgt[order]
        starts = np.searchsorted(src, np.arange(n + 1))
        indeg = np.bincount(tgt, minlength=n)
        level = np.full(n, -1)
        frontier = np.flatnonzero(indeg == 0)
        lv = 0
        seen = 0
        while len(frontier):
            level[frontier] = lv
            seen += len(frontier)
            lens = starts[frontier + 1] - starts[frontier]
            idx = np.repeat(starts[frontier], lens) + _ragged_arange(lens)
            succ = tgt[idx]
            np.subtract.at(indeg, succ, 1)
            cand = np.unique(succ)
            frontier = cand[indeg[cand] == 0]
            lv += 1
        if seen < n:
            return None
        return level

    def longest_path(self, weights=None, edge_mask=None, sources=None):
        """Longest weighted path in the DAG (optionally starting from ``sources``).

        Returns ``(best_value, node_path, dist)``; ``None`` if a cycle exists.
        """
        n = self.grid.size
        src, tgt = self.src, self.tgt
        w = self.weight if weights is None else np.asarray(weights, dtype=float)
        if edge_mask is not None:
            src, tgt, w = src[edge_mask], tgt[edge_mask], w[edge_mask]
        level = self.topological_levels(edge_mask)
        if level is None:
            return None
        if sources is None:
            dist = np.zeros(n)
        else:
            dist = np.full(n, -np.inf)
            dist[np.asarray(sources)] = 0.0
        pred = np.full(n, -1)
        order = np.argsort(level[src], kind="stable")
        src, tgt, w = src[order], tgt[order], w[order]
        bounds = np.searchsorted(level[src[:]], np.arange(level.max() + 2)) if len(src) else [0]
        for lv in range(len(bounds) - 1):
            sl = slice(bounds[lv], bounds[lv + 1])
            s, t, ww = src[sl], tgt[sl], w[sl]
            cand = dist[s] + ww
            good = np.isfinite(cand)
            s, t, cand = s[good], t[good], cand[good]
            if len(t) == 0:
                continue
            best = np.full(n, -np.inf)
            np.maximum.at(best, t, cand)
            improve = best > dist
            dist = np.where(improve, best, dist)
            win = cand >= best[t]
            pred[t[win]] = s[win]
        end = int(np.argmax(np.where(np.isfinite(dist), dist, -np.inf)))
        path = [end]
        while pred[path[-1]] >= 0:
            path.append(int(pred[path[-1]]))
        path.reverse()
        return float(dist[end]), path, dist

    def edge_index(self) -> dict:
        return {(int(s), int(t)): k for k, (s, t) in enumerate(zip(self.src, self.tgt))}

    def path_curve(self, nodes: Sequence[int], start_point=None) -> CausalCurve:
        """Polyline through a node path, unwrapped across periodic axes."""
        idx = self.edge_index()
        p = self.grid.nodes[nodes[0]].copy() if start_point is None else np.asarray(start_point, float)
        pts = [p]
        for a, b in zip(nodes[:-1], nodes[1:]):
            k = idx[(int(a), int(b))]
            pts.append(pts[-1] + self.offsets[self.off[k]] * self.grid.step)
        return CausalCurve.polyline(np.array(pts))


def _ragged_arange(lens: np.ndarray) -> np.ndarray:
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.repeat(np.cumsum(lens) - lens, lens)
    return np.arange(total) - starts


def random_walk(graph: CausalGraph, start: int, rng: np.random.Generator,
                max_steps: Optional[int] = None, start_point=None) -> tuple:
    """Random causal polyline from ``start`` until it leaves the lattice, hits an obstacle or stalls.

    Returns ``(points, reason)`` with reason in ``{'boundary', 'obstacle', 'stall', 'horizon'}``.
    The walk follows the graph's own direction (build a past graph for past walks).
    """
    grid = graph.grid
    dom = grid.domain
    a, b = graph.src, graph.tgt
    order = np.argsort(a, kind="stable")
    a_s, b_s, off_s = a[order], b[order], graph.off[order]
    starts = np.searchsorted(a_s, np.arange(grid.size + 1))
    max_steps = max_steps or 10 * sum(grid.shape)
    node = int(start)
    p = grid.nodes[node].copy() if start_point is None else np.asarray(start_point, float)
    pts = [p]
    for _ in range(max_steps):
        lo, hi = starts[node], starts[node + 1]
        terms = np.flatnonzero(graph.terminal[:, node])
        choices = hi - lo + len(terms)
        if choices == 0:
            return np.array(pts), "stall"
        c = int(rng.integers(choices))
        if c < hi - lo:
            k = lo + c
            node = int(b_s[k])
            pts.append(pts[-1] + graph.offsets[off_s[k]] * grid.step)
            continue
        o = graph.offsets[terms[c - (hi - lo)]] * grid.step
        end = pts[-1] + o
        t_stop, reason = first_stop(dom, pts[-1], end)
        pts.append(pts[-1] + t_stop * o)
        return np.array(pts), reason
    return np.array(pts), "horizon"


def first_stop(dom: ChartDomain, a, b):
    """Parameter where ``a -> b`` first meets an obstacle or leaves the chart."""
    t_obs = np.inf
    for o in dom._obstacle_copies(dom.obstacles, np.minimum(a, b), np.maximum(a, b)):
        t0, t1 = o.segment_interval(a, b)
        if t0 <= t1:
            t_obs = min(t_obs, float(t0))
    outer = Box(np.where(dom.periodic, -np.inf, dom.lo), np.where(dom.periodic, np.inf, dom.hi))
    t0, t1 = outer.segment_interval(a, b)
    t_exit = float(t1) if t0 <= t1 else 0.0
    if t_obs <= t_exit:
        # stop just short of the closed obstacle
        return max(t_obs - 1e-9, 0.0), "obstacle"
    return min(t_exit, 1.0), "boundary"
