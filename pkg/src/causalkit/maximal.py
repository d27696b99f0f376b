"""Time separation by direct maximisation over causal polylines, plus maximality checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .chart import ChartDomain, MetricField, default_points, widen
from .curves import (CausalCurve, _segment_integral, canonicalize, is_causal, lorentz_length,
                     subdivide)
from .errors import NonConvergence, NotCausallyRelated
from .grid import CausalGraph, Grid
from .limits import extract_limit_curve, param_sup
from .reach import future_reach

_SMOOTH = 1e-12


def has_time_function(g: MetricField, points, axis: int = 0) -> bool:
    """Whether ``x^axis`` increases along every future causal vector at the sample points."""
    G = g(points)
    Ginv = np.linalg.inv(G)
    T = g.T(points)
    return bool(np.all(Ginv[..., axis, axis] < 0) and np.all(T[..., axis] > 0))


class _Problem:
    """Interior vertices of a polyline from ``p`` to ``q`` as optimisation variables.

    With ``timegraph`` the time coordinates are fixed on a uniform grid and
    only the spatial coordinates move.
    """

    def __init__(self, p, q, g: MetricField, N: int, timegraph: bool, domain=None):
        self.p, self.q, self.g, self.N, self.tg = p, q, g, N, timegraph
        self.n = len(p)
        self.domain = domain
        self.t = np.linspace(p[0], q[0], N + 1)
        self.G0 = g(np.zeros(self.n)) if g.constant else None

    def vertices(self, z):
        V = np.empty((self.N + 1, self.n))
        V[0], V[-1] = self.p, self.q
        if self.tg:
            V[:, 0] = self.t
            V[1:-1, 1:] = z.reshape(self.N - 1, self.n - 1)
        else:
            V[1:-1] = z.reshape(self.N - 1, self.n)
        return V

    def variables(self, V):
        return (V[1:-1, 1:] if self.tg else V[1:-1]).ravel().copy()

    def _metric(self, m):
        if self.G0 is not None:
            return np.broadcast_to(self.G0, m.shape + (self.n,)), None
        x = m if self.domain is None else self.domain.wrap(m)
        G = self.g(x)
        dG = np.empty((self.n,) + G.shape)
        for k in range(self.n):
            h = 1e-6 * (1.0 + np.abs(m[:, k]))
            e = np.zeros_like(m)
            e[:, k] = h
            a, b = x + e, x - e
            if self.domain is not None:
                a, b = self.domain.wrap(a), self.domain.wrap(b)
            dG[k] = (self.g(a) - self.g(b)) / (2 * h)[:, None, None]
        return G, dG

    def _parts(self, z):
        V = self.vertices(z)
        d = np.diff(V, axis=0)
        m = 0.5 * (V[:-1] + V[1:])
        G, dG = self._metric(m)
        Gd = np.einsum("sij,sj->si", G, d)
        c = -np.einsum("si,si->s", d, Gd)
        return V, d, m, G, dG, Gd, c

    def _to_vars(self, gd, gm):
        """Chain rule from per-segment (d, m) gradients to the variables."""
        gV = np.zeros((self.N + 1, self.n))
        gV[1:] += gd
        gV[:-1] -= gd
        if gm is not None:
            gV[1:] += 0.5 * gm
            gV[:-1] += 0.5 * gm
        gV = gV[1:-1]
        return (gV[:, 1:] if self.tg else gV).ravel()

    def length(self, z):
        c = self._parts(z)[-1]
        return float(np.sum(np.sqrt(np.maximum(c, 0.0) + _SMOOTH) - np.sqrt(_SMOOTH)))

    def neg_length(self, z):
        V, d, m, G, dG, Gd, c = self._parts(z)
        s = np.sqrt(np.maximum(c, 0.0) + _SMOOTH)
        val = float(np.sum(s - np.sqrt(_SMOOTH)))
        on = (c > 0)[:, None]
        gd = np.where(on, -Gd / s[:, None], 0.0)
        gm = None
        if dG is not None:
            dq = -np.einsum("si,ksij,sj->sk", d, dG, d)
            gm = np.where(on, 0.5 * dq / s[:, None], 0.0)
        return -val, -self._to_vars(gd, gm)

    def cons(self, z):
        return self._parts(z)[-1]

    def cons_jac(self, z):
        V, d, m, G, dG, Gd, c = self._parts(z)
        N = self.N
        J = np.zeros((N, len(z)))
        gd = -2.0 * Gd
        gm = -np.einsum("si,ksij,sj->sk", d, dG, d) if dG is not None else None
        for i in range(N):
            gdi = np.zeros_like(gd)
            gdi[i] = gd[i]
            gmi = None
            if gm is not None:
                gmi = np.zeros_like(gm)
                gmi[i] = gm[i]
            J[i] = self._to_vars(gdi, gmi)
        return J

    def future(self, z):
        V, d, m, G, dG, Gd, c = self._parts(z)
        x = m if self.domain is None else self.domain.wrap(m)
        return -np.einsum("si,si->s", Gd, self.g.T(x))

    def causal(self, V, tol=1e-12) -> bool:
        d = np.diff(V, axis=0)
        m = 0.5 * (V[:-1] + V[1:])
        x = m if self.domain is None else self.domain.wrap(m)
        G = self.G0 if self.G0 is not None else self.g(x)
        q = np.einsum("si,...ij,sj->s", d, G, d) if self.G0 is not None else np.einsum("si,sij,sj->s", d, G, d)
        hq = np.einsum("si,si->s", d, d)
        w = np.einsum("si,sij,sj->s", d, np.broadcast_to(G, (len(d), self.n, self.n)), self.g.T(x))
        return bool(np.all(q <= tol * np.maximum(hq, 1e-300)) and np.all(w < 0))


@dataclass
class SolveResult:
    tau: float
    curve: CausalCurve
    segments: int
    history: List[tuple] = field(default_factory=list)  # (segments, tau)
    iterates: List[CausalCurve] = field(default_factory=list)

    def __iter__(self):
        return iter((self.tau, self.curve))


def _jitter(prob: _Problem, V0, rng, scale) -> np.ndarray:
    """Low-frequency random displacement of the interior vertices, endpoints pinned."""
    s = np.linspace(0, 1, prob.N + 1)
    P = np.zeros_like(V0)
    cols = range(1, prob.n) if prob.tg else range(prob.n)
    for k in cols:
        for mode in range(1, 4):
            P[:, k] += rng.normal() * np.sin(mode * np.pi * s) / mode
    P[:, :] += 0.0
    P *= scale
    P[0] = P[-1] = 0.0
    return P


def _largest_causal_step(prob: _Problem, V0, P, iters: int = 40):
    """Largest ``lam`` in ``[0, 1]`` keeping ``V0 + lam P`` causal (bisection)."""
    if prob.causal(V0 + P):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if prob.causal(V0 + mid * P):
            lo = mid
        else:
            hi = mid
    return lo


def _optimize(prob: _Problem, z0, maxiter: int):
    cons = [{"type": "ineq", "fun": prob.cons, "jac": prob.cons_jac}]
    if not prob.tg:
        cons.append({"type": "ineq", "fun": prob.future})
    res = minimize(prob.neg_length, z0, jac=True, method="SLSQP", constraints=cons,
                   options={"maxiter": maxiter, "ftol": 1e-12})
    return res.x


def _feasible_best(prob: _Problem, candidates, g, domain):
    best, best_len = None, -np.inf
    for V in candidates:
        c = CausalCurve.polyline(V)
        if not is_causal(c, g, domain=domain).causal:
            continue
        L = lorentz_length(c, g, domain=domain)
        if L > best_len + 1e-15:
            best, best_len = V, L
    return best, best_len


def _default_domain(p, q) -> ChartDomain:
    span = np.maximum(np.abs(q - p).max(), 1e-3)
    return ChartDomain.box(np.minimum(p, q) - span, np.maximum(p, q) + span)


def _check_related(p, q, g, domain, resolution):
    chord = CausalCurve.polyline(np.array([p, q]))
    if is_causal(chord, g, domain=domain).causal:
        return True
    dom = domain or _default_domain(p, q)
    grid = Grid.over(dom, resolution)
    R = future_reach(p, g, grid, "over")
    if not (R.cells[grid.nearest(q)] or R.contains_point(q)):
        raise NotCausallyRelated(f"{q.tolist()} is outside the over-mode future of {p.tolist()}")
    return False


def time_separation(p, q, g: MetricField, segments: int = 64, restarts: int = 8, seed: int = 0,
                    domain: Optional[ChartDomain] = None, rel_tol: float = 1e-4,
                    max_segments: Optional[int] = None, maxiter: int = 200,
                    check_resolution: int = 65, keep_iterates: bool = False) -> SolveResult:
    """Maximise the Lorentz length over causal polylines from ``p`` to ``q``.

    Multistart SLSQP on the interior vertices (with causal segment constraints)
    from the chord and seeded low-frequency jitters, then doubling the segment
    count until the relative gain drops below ``rel_tol``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if segments < 2:
        raise ValueError("need at least two segments")
    chord_ok = _check_related(p, q, g, domain, check_resolution)
    if chord_ok and g.constant:
        d = q - p
        if -d @ g(np.zeros(len(p))) @ d <= 1e-12 * (d @ d):
            # null chord of a constant metric: every causal curve is this null segment
            line = canonicalize(CausalCurve.polyline(np.array([p, q])))
            return SolveResult(0.0, line, 1, [(1, 0.0)])
    pts = default_points(g, domain, 5) if domain is not None else np.linspace(p, q, 9)
    tg = bool(q[0] > p[0] and has_time_function(g, pts, g.time_axis))
    max_segments = max_segments or 4 * segments
    rng = np.random.default_rng(seed)
    N = segments
    prob = _Problem(p, q, g, N, tg, domain)
    if chord_ok:
        V0 = prob.vertices(prob.variables(_chord(p, q, N)))
    else:
        V0 = _resample(dag_time_separation(p, q, g, domain=domain)[1], prob)
    scale = 0.25 * np.linalg.norm(q - p)
    starts = [V0]
    for _ in range(restarts - 1):
        P = _jitter(prob, V0, rng, scale)
        lam = _largest_causal_step(prob, V0, P)
        starts.append(V0 + lam * P)
    iterates = []
    outs = []
    for V in starts:
        z = _optimize(prob, prob.variables(V), maxiter)
        outs.append(prob.vertices(z))
    best, best_len = _feasible_best(prob, outs + starts, g, domain)
    if best is None:
        best, best_len = V0, lorentz_length(CausalCurve.polyline(V0), g, domain=domain)
    history = [(N, best_len)]
    iterates.append(CausalCurve.polyline(best))
    gain = np.inf
    while N * 2 <= max_segments:
        N *= 2
        prob = _Problem(p, q, g, N, tg, domain)
        fine = subdivide(CausalCurve.polyline(best), 2).vertices
        Vs = prob.vertices(prob.variables(fine))
        z = _optimize(prob, prob.variables(Vs), maxiter)
        cand, cand_len = _feasible_best(prob, [prob.vertices(z), Vs], g, domain)
        if cand is None:
            break
        gain = (cand_len - best_len) / max(abs(best_len), 1e-300) if best_len > 0 else cand_len
        history.append((N, cand_len))
        iterates.append(CausalCurve.polyline(cand))
        if cand_len >= best_len:
            best, best_len = cand, cand_len
        if abs(gain) < rel_tol:
            break
    if abs(gain) >= 10 * rel_tol and np.isfinite(gain) and N * 2 > max_segments:
        raise NonConvergence(f"refinement still gaining {gain:.3g} at {N} segments",
                             SolveResult(best_len, canonicalize(CausalCurve.polyline(best)), N, history))
    curve = canonicalize(CausalCurve.polyline(best))
    return SolveResult(float(best_len), curve, len(best) - 1, history,
                       iterates if keep_iterates else [])


def _chord(p, q, N):
    return np.linspace(p, q, N + 1)


def _resample(curve: CausalCurve, prob: _Problem) -> np.ndarray:
    """Vertices at the problem's fixed times (or equal parameter steps) along ``curve``."""
    V = curve.vertices
    if prob.tg:
        out = np.empty((prob.N + 1, prob.n))
        out[:, 0] = prob.t
        for k in range(1, prob.n):
            out[:, k] = np.interp(prob.t, V[:, 0], V[:, k])
        return out
    c = canonicalize(curve)
    return c.at(np.linspace(0, 1, prob.N + 1))


# ---------------------------------------------------------------------------
# lattice longest-path oracle
# ---------------------------------------------------------------------------

def aligned_grid(p, q, domain: ChartDomain, cells: int, margin: float = 0.5) -> Grid:
    """Lattice on a box around ``p`` and ``q`` in which both are nodes."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    span = np.abs(q - p)
    h0 = max(span.max(), 1e-9) / cells
    steps = np.empty(len(p))
    lo, hi = np.empty(len(p)), np.empty(len(p))
    for k in range(len(p)):
        n = int(round(span[k] / h0)) if span[k] > 0 else 0
        h = span[k] / n if n > 0 else h0
        extra = int(np.ceil(margin * max(span.max(), 1e-9) / h))
        a, b = min(p[k], q[k]), max(p[k], q[k])
        if not domain.periodic[k]:
            extra_lo = min(extra, int(np.floor((a - domain.lo[k]) / h + 1e-9)))
            extra_hi = min(extra, int(np.floor((domain.hi[k] - b) / h + 1e-9)))
        else:
            extra_lo = extra_hi = extra
        lo[k], hi[k], steps[k] = a - extra_lo * h, b + extra_hi * h, h
    shape = tuple(int(round((hi[k] - lo[k]) / steps[k])) + 1 for k in range(len(p)))
    return Grid(domain.with_obstacles(domain.obstacles), shape, lo.copy(), steps)


def dag_time_separation(p, q, g: MetricField, domain: Optional[ChartDomain] = None, cells: int = 64,
                        radius: int = 3, margin: float = 0.5):
    """Longest path on the exact-cone lattice graph with Lorentz-length edge weights.

    Returns ``(value, curve)``; the curve runs through lattice nodes from ``p`` to ``q``.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    dom = domain or _default_domain(p, q)
    grid = aligned_grid(p, q, dom, cells, margin)
    graph = CausalGraph.build(g, grid, mode="exact", kappa=0.0, radius=radius)
    a = grid.nodes[graph.src]
    d = graph.offsets[graph.off] * grid.step
    if g.constant:
        G = g(np.zeros(len(p)))
        w = np.sqrt(np.maximum(0.0, -np.einsum("si,ij,sj->s", d, G, d)))
    else:
        w = _segment_integral(g, a, d, 4, dom, "lorentz", 4)
    ip, iq = grid.nearest(p), grid.nearest(q)
    res = graph.longest_path(weights=w, sources=[ip])
    if res is None:
        raise NotCausallyRelated("the lattice graph has a cycle; no longest path")
    _, _, dist = res
    if not np.isfinite(dist[iq]):
        raise NotCausallyRelated("q is not reached from p on the lattice")
    path = _trace(graph, w, dist, ip, iq)
    return float(dist[iq]), graph.path_curve(path, start_point=p)


def _trace(graph: CausalGraph, w, dist, src, dst) -> list:
    """Walk back from ``dst`` along edges that realise ``dist``."""
    order = np.argsort(graph.tgt, kind="stable")
    tg = graph.tgt[order]
    starts = np.searchsorted(tg, np.arange(graph.grid.size + 1))
    path = [dst]
    node = dst
    while node != src:
        idx = order[starts[node]:starts[node + 1]]
        s = graph.src[idx]
        cand = dist[s] + w[idx]
        k = int(np.argmax(np.where(np.isfinite(dist[s]), -np.abs(cand - dist[node]), -np.inf)))
        node = int(s[k])
        path.append(node)
    return path[::-1]


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class MaximalityCertificate:
    curve: CausalCurve
    radius: float
    perturbations: int
    best_rival_length: float
    margin: float
    length: float
    flagged: bool = False  # no admissible rival was found
    best_rival: Optional[CausalCurve] = None

    def certified(self, tol: float = 1e-9) -> bool:
        return not self.flagged and self.margin >= -tol

    def to_dict(self) -> dict:
        return {"radius": self.radius, "perturbations": self.perturbations, "length": self.length,
                "best_rival_length": self.best_rival_length, "margin": self.margin,
                "flagged": self.flagged}


def maximality_certificate(curve: CausalCurve, g: MetricField, radius: float, perturbations: int = 500,
                           seed: int = 0, rivals: Sequence[CausalCurve] = (),
                           domain: Optional[ChartDomain] = None, subdivisions: int = 4) -> MaximalityCertificate:
    """Compare ``curve`` with causal rivals inside its sup-metric ball of ``radius``.

    Rivals are seeded vertex and low-frequency jitters scaled back by bisection
    until causal and inside the ball, blends toward the chord, and any supplied
    curves that qualify.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    base = canonicalize(curve)
    if not is_causal(base, g, domain=domain).causal:
        raise ValueError("the curve is not causal")
    L0 = lorentz_length(base, g, domain=domain)
    k = max(1, int(np.ceil(subdivisions * 32 / max(len(base) - 1, 1))))
    fine = subdivide(base, min(k, subdivisions)) if len(base) < 64 else base
    V0, s = fine.vertices, fine.params
    rng = np.random.default_rng(seed)
    n = base.dim

    def ok(V):
        c = CausalCurve(V, s, "generic")
        if not is_causal(c, g, domain=domain).causal:
            return False
        return param_sup(c, fine) <= radius + 1e-12

    pool = []
    chord = np.outer(1 - s, V0[0]) + np.outer(s, V0[-1])
    for mu in (1.0, 0.5, 0.25, 0.1):
        V = V0 + mu * (chord - V0)
        V = _shrink_into_ball(V0, V - V0, ok)
        if V is not None:
            pool.append(V)
    for _ in range(perturbations):
        P = np.zeros_like(V0)
        if rng.random() < 0.5:
            P[1:-1] = rng.normal(size=(len(V0) - 2, n))
        else:
            for m in range(1, 4):
                P += np.outer(np.sin(m * np.pi * s), rng.normal(size=n)) / m
        P[0] = P[-1] = 0.0
        nrm = np.abs(P).max()
        if nrm == 0:
            continue
        V = _shrink_into_ball(V0, P * (radius / nrm), ok)
        if V is not None:
            pool.append(V)
    count = len(pool)
    best_len, best_V = -np.inf, None
    for V in pool:
        L = lorentz_length(CausalCurve(V, s, "generic"), g, domain=domain)
        if L > best_len:
            best_len, best_V = L, V
    best_rival = None if best_V is None else CausalCurve(best_V, s, "generic")
    for c in rivals:
        cc = canonicalize(c)
        if is_causal(cc, g, domain=domain).causal and _ball_distance(cc, base) <= radius:
            L = lorentz_length(cc, g, domain=domain)
            count += 1
            if L > best_len:
                best_len, best_rival = L, cc
    if count == 0:
        return MaximalityCertificate(base, radius, 0, float("nan"), float("nan"), L0, True)
    return MaximalityCertificate(base, radius, count, float(best_len), float(L0 - best_len), L0,
                                 False, best_rival)


def _ball_distance(a: CausalCurve, b: CausalCurve) -> float:
    return param_sup(a, b)


def _shrink_into_ball(V0, P, ok, iters: int = 40):
    """``V0 + lam P`` for the largest bisected ``lam`` accepted by ``ok`` (``None`` if only 0)."""
    if ok(V0 + P):
        return V0 + P
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(V0 + mid * P):
            lo = mid
        else:
            hi = mid
    if lo <= 1e-9:
        return None
    return V0 + lo * P


# ---------------------------------------------------------------------------
# widened maximisers and their limit
# ---------------------------------------------------------------------------

@dataclass
class LimitMaximizerReport:
    alpha_length: float
    lipschitz: float
    rows: List[dict]
    limit: Optional[CausalCurve]
    limit_length: float
    direct_tau: float

    @property
    def chain_holds(self) -> bool:
        return all(r["first"] and r["second"] for r in self.rows)

    @property
    def limit_gap(self) -> float:
        return abs(self.limit_length - self.direct_tau) / max(self.direct_tau, 1e-300)


def limit_maximizer_check(g: MetricField, delta_ladder: Sequence[float], p, q, alpha: CausalCurve,
                          segments: int = 32, restarts: int = 4, seed: int = 0,
                          domain: Optional[ChartDomain] = None, tol: float = 1e-9) -> LimitMaximizerReport:
    """``L(alpha) <= L_d(alpha) + sqrt(d) Lip(alpha) <= L_d(gamma_d) + sqrt(d) Lip(alpha)`` per ``d``.

    ``L_d`` is the length under ``widen(g, d)`` and ``gamma_d`` its maximiser.
    The maximisers are then passed to limit extraction and compared with the
    direct maximiser of ``g``.
    """
    ds = [float(d) for d in delta_ladder]
    if any(b >= a for a, b in zip(ds, ds[1:])):
        raise ValueError("delta_ladder must be decreasing")
    a = canonicalize(alpha)
    if not is_causal(a, g, domain=domain).causal:
        raise ValueError("alpha is not causal")
    La = lorentz_length(a, g, domain=domain)
    lip = a.lipschitz
    rows, gammas = [], []
    for d in ds:
        gd = widen(g, d)
        Lw = lorentz_length(a, gd, domain=domain)
        sol = time_separation(p, q, gd, segments, restarts, seed, domain, max_segments=segments)
        Lg = lorentz_length(sol.curve, gd, domain=domain)
        gammas.append(sol.curve)
        rows.append({"delta": d, "L_widened_alpha": Lw, "bound": Lw + np.sqrt(d) * lip,
                     "L_widened_maximizer": Lg, "first": bool(La <= Lw + np.sqrt(d) * lip + tol),
                     "second": bool(Lw <= Lg + tol * max(1.0, Lg) + 1e-6 * Lg)})
    direct = time_separation(p, q, g, segments, restarts, seed, domain, max_segments=segments)
    limit, Llim = None, float("nan")
    if len(gammas) >= 2:
        try:
            res = extract_limit_curve(gammas, tol=max(0.05, 2 * max(param_sup(c, direct.curve)
                                                                      for c in gammas)), g=g,
                                      domain=domain)
            limit = res.limit
            Llim = lorentz_length(limit, g, domain=domain)
        except Exception:
            limit = None
    return LimitMaximizerReport(La, lip, rows, limit, Llim, direct.tau)
