"""Limit-curve extraction for families of causal curves and the length semi-continuity harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .chart import ChartDomain, MetricField, widen
from .curves import CausalCurve, canonicalize, is_causal, lorentz_length, truncate
from .errors import LipschitzUnbounded, NoAccumulation, NotConvergent
from .io import write_jsonl

EPS_LADDER = (0.1, 0.01, 0.001)


def param_sup(a: CausalCurve, b: CausalCurve) -> float:
    """``sup_s |a(s) - b(s)|`` over a shared parameter interval (exact for polylines)."""
    if not (np.isclose(a.params[0], b.params[0]) and np.isclose(a.params[-1], b.params[-1])):
        raise ValueError("curves are parametrized on different intervals")
    s = np.union1d(a.params, b.params)
    return float(np.linalg.norm(a.at(s) - b.at(s), axis=-1).max())


def bw_cluster(points: np.ndarray, index: np.ndarray, tiny: float = 1e-13) -> np.ndarray:
    """Bolzano-Weierstrass bisection: keep halving toward the most populated half.

    Splits the bounding box of the current cluster through the middle of its
    longest side.  Ties go to the half holding the lowest index.  Stops when
    the better half would keep fewer than two members or the cluster is a point.
    """
    keep = np.arange(len(points))
    while True:
        P = points[keep]
        lo, hi = P.min(axis=0), P.max(axis=0)
        k = int(np.argmax(hi - lo))
        if hi[k] - lo[k] <= tiny * max(1.0, np.abs(P).max()):
            return index[keep]
        left = P[:, k] <= 0.5 * (lo[k] + hi[k])
        nl, nr = int(left.sum()), int((~left).sum())
        if nl == nr:
            take = left if left[np.argmin(index[keep])] else ~left
        else:
            take = left if nl > nr else ~left
        if take.sum() < 2:
            return index[keep]
        keep = keep[take]


@dataclass
class LimitResult:
    subsequence: List[int]
    limit: CausalCurve
    sup_gaps: List[float]
    causality: List[tuple] = field(default_factory=list)  # (eps, verdict kind)
    levels: int = 0

    @property
    def limit_causal(self) -> bool:
        return bool(self.causality) and all(k == "causal-future" or k == "causal-past"
                                            for _, k in self.causality)

    def records(self) -> list:
        out = [{"index": int(i), "gap": float(gp)} for i, gp in zip(self.subsequence, self.sup_gaps)]
        out.append({"summary": True, "levels": self.levels,
                    "causality": [{"eps": e, "verdict": k} for e, k in self.causality]})
        return out

    def write_jsonl(self, path) -> None:
        write_jsonl(path, self.records())


def _prepare(family, mode, lip_bound, horizon):
    curves = [canonicalize(c) for c in family]
    if mode == "inextendible":
        L = min(c.h_length for c in curves)
        if horizon is not None:
            L = min(L, horizon)
        curves = [canonicalize(truncate(c, L)) for c in curves]
    elif mode != "fixed-interval":
        raise ValueError("mode must be 'fixed-interval' or 'inextendible'")
    lips = np.array([c.lipschitz for c in curves])
    bad = np.flatnonzero(lips > lip_bound * (1 + 1e-9))
    if len(bad):
        i = int(bad[0])
        raise LipschitzUnbounded(f"member {i} has Lipschitz constant {lips[i]:.6g} > {lip_bound:.6g}",
                                 i, float(lips[i]))
    return curves


def extract_limit_curve(family: Sequence[CausalCurve], mode: str = "fixed-interval",
                        lip_bound: float = np.inf, tol: float = 1e-3, g: Optional[MetricField] = None,
                        depth: int = 12, start_radius: float = 0.05, horizon: Optional[float] = None,
                        eps_ladder: Sequence[float] = EPS_LADDER,
                        domain: Optional[ChartDomain] = None) -> LimitResult:
    """Diagonal subsequence extraction on a nested dyadic parameter grid.

    Level ``r`` adds the points ``j / 2^r``.  At each new point the current
    subsequence is narrowed to its Bolzano-Weierstrass cluster; the level is
    accepted while every cluster keeps two members within ``tol``.  The limit
    is the polyline through the cluster means at the accepted points.
    """
    if len(family) < 2:
        raise NoAccumulation("need at least two curves")
    curves = _prepare(family, mode, lip_bound, horizon)
    idx = np.arange(len(curves))
    starts = np.array([c.start for c in curves])
    cl = bw_cluster(starts, idx)
    if len(cl) < 2 or np.ptp(starts[cl], axis=0).max() > start_radius:
        raise NoAccumulation("start points do not accumulate within the start radius")
    sub = idx
    accepted = np.array([0.0, 1.0])
    level = -1
    lip = max(c.lipschitz for c in curves)
    for r in range(depth + 1):
        new = np.array([0.0, 1.0]) if r == 0 else (np.arange(1, 2 ** r, 2) / 2 ** r)
        cand = sub
        ok = True
        for s in new:
            X = np.array([curves[i].at(s)[0] for i in cand])
            c = bw_cluster(X, cand)
            pts = np.array([curves[i].at(s)[0] for i in c])
            if len(c) < 2 or np.ptp(pts, axis=0).max() > tol:
                ok = False
                break
            cand = c
        if not ok:
            break
        sub = cand
        level = r
        if r > 0:
            accepted = np.union1d(accepted, new)
        # between accepted points the members stay within lip * spacing of the chords
        if 2 * lip / 2 ** r <= tol:
            break
    if level < 0:
        raise NoAccumulation("no parameter level admits a convergent cluster")
    verts = np.array([np.mean([curves[i].at(s)[0] for i in sub], axis=0) for s in accepted])
    limit = CausalCurve(verts, accepted, "generic", curves[0].orientation, curves[0].h)
    gaps = np.array([param_sup(curves[i], limit) for i in sub])
    # report the tail along which the gaps do not increase
    t = len(gaps) - 1
    while t > 0 and gaps[t - 1] >= gaps[t]:
        t -= 1
    sub, gaps = sub[t:], gaps[t:]
    verdicts = []
    if g is not None:
        for e in eps_ladder:
            v = is_causal(limit, widen(g, e), domain=domain)
            verdicts.append((float(e), v.kind))
    return LimitResult([int(i) for i in sub], limit, gaps.tolist(), verdicts, level)


@dataclass
class UscResult:
    holds: bool
    margin: float
    limsup: float
    limit_length: float
    quadrature: float
    chain: List[tuple]  # (delta, L_widened + Lip sqrt(delta))
    witness: Optional[int] = None

    @property
    def chain_dominates(self) -> bool:
        return all(v >= self.limit_length - 1e-9 for _, v in self.chain)


def _quad_term(c: CausalCurve, g: MetricField, domain) -> float:
    return abs(lorentz_length(c, g, 16, domain) - lorentz_length(c, g, 8, domain))


def verify_usc(g: MetricField, family: Sequence[CausalCurve], limit: CausalCurve, tol: float = 1e-6,
               deltas: Sequence[float] = EPS_LADDER, conv_tol: float = 0.1,
               domain: Optional[ChartDomain] = None, tail: float = 0.5) -> UscResult:
    """``limsup L(family) <= L(limit) + tol + quadrature error``, limsup taken as the tail maximum.

    Also reports ``L_{widen(g, d)}(limit) + Lip(limit) sqrt(d)`` for each ``d``;
    these must dominate ``L(limit)``.
    """
    if len(family) == 0:
        raise NotConvergent("empty family")
    lim = canonicalize(limit)
    members = [canonicalize(c) for c in family]
    gaps = np.array([param_sup(c, lim) for c in members])
    if gaps[-1] > conv_tol or gaps[-1] > gaps[0] + 1e-12:
        raise NotConvergent(f"family does not approach the limit (last gap {gaps[-1]:.3g})")
    start = min(int(len(members) * (1 - tail)), len(members) - 1)
    lengths = np.array([lorentz_length(c, g, domain=domain) for c in members[start:]])
    L = lorentz_length(lim, g, domain=domain)
    quad = _quad_term(lim, g, domain)
    if not g.constant:
        quad += max(_quad_term(c, g, domain) for c in members[start:])
    limsup = float(lengths.max())
    margin = L + tol + quad - limsup
    lip = lim.lipschitz
    chain = [(float(d), lorentz_length(lim, widen(g, d), domain=domain) + lip * np.sqrt(d))
             for d in deltas]
    witness = None if margin >= 0 else start + int(np.argmax(lengths))
    return UscResult(margin >= 0, float(margin), limsup, float(L), float(quad), chain, witness)


def zigzag(p, q, k: int, amplitude: Optional[float] = None, axis: int = 1) -> CausalCurve:
    """Zigzag from ``p`` to ``q`` that returns to the chord at every ``s = j/k``.

    Without ``amplitude`` each piece is two null legs of the flat cone in the
    ``(0, axis)`` plane, alternating which leg comes first, so every member has
    zero flat Lorentz length.  With ``amplitude`` the midpoint of each piece is
    pushed sideways by that amount, alternating sides.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    d = (q - p) / k
    pts = [p]
    for j in range(k):
        base = p + j * d
        corner = base.copy()
        if amplitude is None:
            a = 0.5 * (d[0] + d[axis])
            b = 0.5 * (d[0] - d[axis])
            if j % 2 == 0:
                corner[0] += a
                corner[axis] += a
            else:
                corner[0] += b
                corner[axis] -= b
            # remaining transverse components ride along the first leg
            other = [m for m in range(len(p)) if m not in (0, axis)]
            corner[other] += d[other] * (a if j % 2 == 0 else b) / max(d[0], 1e-300)
        else:
            corner = base + 0.5 * d
            corner[axis] += amplitude if j % 2 == 0 else -amplitude
        pts.extend([corner, base + d])
    return CausalCurve.polyline(np.array(pts))
