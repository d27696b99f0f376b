"""Acceptance checks.  Each test prints one ``criterion N: PASS|FAIL ...`` line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines, or execute the
file directly.
"""
import time

import numpy as np
import pytest
from scipy import ndimage

from causalkit import catalog
from causalkit.catalog import bubble_metric, conformal_scaled
from causalkit.chart import (ChartDomain, Box, MetricField, Modulus, cone_precedes, constant_field,
                             convex_combine, metric_delta, minkowski, narrow, widen)
from causalkit.curves import (CausalCurve, canonicalize, hausdorff_distance, is_causal, lorentz_length,
                              sup_distance)
from causalkit.errors import ConeOrderViolation, SignatureCollapse
from causalkit.grid import Grid
from causalkit.ladder import (CauchySurfaceSpec, build_stable_widening, check_causal_simplicity,
                              check_causality, check_cauchy_surface, check_global_hyperbolicity, crossings,
                              diagnose, simplicity_oracle)
from causalkit.limits import extract_limit_curve, verify_usc, zigzag
from causalkit.maximal import time_separation
from causalkit.reach import cauchy_development, future_reach, imprisonment_bound, verify_cycle


def report(n, ok, detail=""):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    return ok


def _flat_aligned(dim_nodes, step):
    """Square chart with ``dim_nodes`` nodes per axis, spacing ``step`` and the origin on a node."""
    lo = -((dim_nodes - 1) // 2) * step
    hi = lo + (dim_nodes - 1) * step
    return ChartDomain.box([lo, lo], [hi, hi])


# 1 -------------------------------------------------------------------------

def test_minkowski_time_separation():
    g = minkowski(2)
    t0 = time.perf_counter()
    res = time_separation([0, 0], [2, 1], g, segments=64, restarts=8, seed=0)
    elapsed = time.perf_counter() - t0
    chord = canonicalize(CausalCurve.polyline([[0, 0], [2, 1]]))
    rel = abs(res.tau - np.sqrt(3)) / np.sqrt(3)
    rho = sup_distance(res.curve, chord)
    ok = rel <= 0.01 and rho <= 0.02 and elapsed < 5.0
    assert report(1, ok, f"tau={res.tau:.9f} rel_err={rel:.2e} rho={rho:.2e} time={elapsed:.2f}s")


# 2 -------------------------------------------------------------------------

def test_reach_sandwich():
    dom = _flat_aligned(256, 1 / 64)
    grid = Grid.over(dom, 256)
    g = minkowski(2)
    t0 = time.perf_counter()
    U = future_reach([0, 0], g, grid, "under")
    O = future_reach([0, 0], g, grid, "over")
    elapsed = time.perf_counter() - t0
    t, x = grid.nodes[:, 0], grid.nodes[:, 1]
    cone = t >= np.abs(x) - 1e-12
    under_in = not np.any(U.cells & ~cone)
    over_out = not np.any(cone & ~O.cells)
    diff = U.cells ^ O.cells
    dist = np.abs(t[diff] - np.abs(x[diff])) / np.sqrt(2) / grid.cell
    worst = float(dist.max()) if diff.any() else 0.0
    ok = under_in and over_out and worst <= 2.0 and elapsed < 10.0
    assert report(2, ok, f"under_in_cone={under_in} cone_in_over={over_out} "
                         f"max_diff_distance={worst:.3f} cells time={elapsed:.2f}s")


# 3 -------------------------------------------------------------------------

def _random_lorentz(rng):
    """Constant form ``R^T diag(-a, b) R`` with a small rotation ``R``; ``t`` stays a time axis."""
    th = rng.uniform(-0.3, 0.3)
    R = np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]])
    G = R.T @ np.diag([-rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)]) @ R
    return constant_field(G, "random", time_orientation=np.linalg.solve(R, [1.0, 0.0]))


def _timelike_pair(rng, g, dim=2, slope=0.5):
    p = rng.uniform(-0.5, 0.5, dim)
    for _ in range(1000):
        v = np.concatenate([[rng.uniform(0.5, 1.5)], rng.uniform(-slope, slope, dim - 1)])
        v[1:] *= v[0]
        if g.quad(p, v) < -0.05 * (v @ v) and (g.quad(p, v, g.T(p)) < 0):
            return p, p + v
    raise RuntimeError("no timelike pair found")


def _zigzag_family(rng, g, null):
    p, q = _timelike_pair(rng, g)
    ks = np.sort(rng.choice(np.arange(2, 65), size=8, replace=False))
    ks[-1] = max(ks[-1], 48)
    ks = np.unique(ks)
    if null:
        fam = [zigzag(p, q, int(k)) for k in ks]
    else:
        c = rng.uniform(0.0, 0.5) * (q[0] - p[0] - abs(q[1] - p[1])) / 2
        fam = [zigzag(p, q, int(k), c / k) for k in ks]
        # halve the amplitude until the cones of g admit every member
        while not all(is_causal(z, g).causal for z in fam):
            c *= 0.5
            fam = [zigzag(p, q, int(k), c / k) for k in ks]
    return fam, CausalCurve.polyline(np.array([p, q]))


def _usc_families(count, rng):
    """``count`` convergent causal families: zigzags, solver iterates and widened maximisers."""
    flat = minkowski(2)
    curved = [conformal_scaled(0.5), bubble_metric(), widen(flat, 0.3)]
    n_solver = count // 5
    n_widen = count // 10
    n_zig = count - n_solver - n_widen
    for i in range(n_zig):
        kind = i % 3
        if kind == 0:
            g = flat
            fam, lim = _zigzag_family(rng, g, null=True)
        elif kind == 1:
            g = curved[i % len(curved)]
            fam, lim = _zigzag_family(rng, g, null=False)
        else:
            g = _random_lorentz(rng)
            fam, lim = _zigzag_family(rng, g, null=False)
        yield "zigzag", g, fam, lim
    for i in range(n_solver):
        g = [flat, conformal_scaled(0.5), bubble_metric(), _random_lorentz(rng)][i % 4]
        p, q = _timelike_pair(rng, g)
        res = time_separation(p, q, g, segments=4, restarts=1, seed=i, rel_tol=1e-3, max_segments=64,
                              keep_iterates=True)
        yield "solver", g, res.iterates, res.curve
    deltas = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005]
    for i in range(n_widen):
        g = flat if i % 2 == 0 else _random_lorentz(rng)
        p, q = _timelike_pair(rng, g)
        fam = [time_separation(p, q, widen(g, d), segments=4, restarts=1, max_segments=4).curve
               for d in deltas]
        yield "widened", g, fam, time_separation(p, q, g, segments=4, restarts=1, max_segments=4).curve


def test_usc_suite():
    rng = np.random.default_rng(2024)
    total, held, noncausal = 0, 0, 0
    worst = np.inf
    by_kind = {}
    for kind, g, fam, lim in _usc_families(1000, rng):
        total += 1
        if not all(is_causal(c, g).causal for c in fam):
            noncausal += 1
            continue
        r = verify_usc(g, fam, lim, tol=1e-6)
        held += bool(r.holds)
        worst = min(worst, r.margin)
        by_kind[kind] = by_kind.get(kind, 0) + 1
    ok = total == 1000 and noncausal == 0 and held == total
    assert report(3, ok, f"families={total} held={held} noncausal={noncausal} kinds={by_kind} "
                         f"min_margin={worst:.3e}")


# 4 -------------------------------------------------------------------------

def test_zigzag_limit():
    g = minkowski(2)
    p, q = np.array([0.0, 0.0]), np.array([2.0, 0.0])
    fam = [zigzag(p, q, k, 1.0 / k) for k in range(1, 65)]
    members_causal = all(is_causal(c, g).causal for c in fam)
    res = extract_limit_curve(fam, tol=1e-3, g=g, eps_ladder=(0.1, 0.01, 0.001))
    diag = canonicalize(CausalCurve.polyline(np.array([p, q])))
    rho = sup_distance(canonicalize(res.limit), diag)
    causal = [k for _, k in res.causality]
    ok = members_causal and rho <= 1e-3 and causal == ["causal-future"] * 3
    assert report(4, ok, f"rho={rho:.2e} subsequence={res.subsequence} widened_verdicts={causal}")


# 5 -------------------------------------------------------------------------

def test_delta_and_cone_algebra():
    eta = minkowski(2)
    errs, strict = [], []
    for eps in (0.01, 0.1, 0.5):
        w = widen(eta, eps)
        errs.append(abs(metric_delta(eta, w, directions=1000).value - eps))
        strict.append(cone_precedes(eta, w, directions=1000).strict)
    try:
        narrow(eta, 1.0)
        collapsed = False
    except SignatureCollapse:
        collapsed = True
    ok = max(errs) <= 1e-9 and all(strict) and collapsed
    assert report(5, ok, f"max_delta_err={max(errs):.2e} strict={strict} narrow_collapse={collapsed}")


# 6 -------------------------------------------------------------------------

def _grid(name):
    st = catalog.get(name)
    return st, Grid.over(st.domain, st.resolution)


def test_ladder_verdicts():
    st, grid = _grid("minkowski2d")
    mink = diagnose(st.metric, grid, trials=200)
    mink_ok = mink.all_pass

    st, grid = _grid("ctc_cylinder")
    v = check_causality(st.metric, grid)
    ctc_ok = v.failed and verify_cycle(v.witness, st.metric, st.domain)

    st, grid = _grid("punctured_minkowski")
    spec = CauchySurfaceSpec(st.time_function, 0.0)
    v = check_cauchy_surface(spec, st.metric, grid, curve_samples=200)
    w = v.witness
    punct_ok = (v.failed and isinstance(w, CausalCurve) and is_causal(w, st.metric, domain=st.domain).causal
                and crossings(spec.value(w.vertices)) != 1)

    st, grid = _grid("slit_minkowski")
    v = check_causal_simplicity(st.metric, grid, trials=200)
    samples = v.detail["samples"]
    oracle = simplicity_oracle(samples, st.metric, grid)
    agree = np.mean([a == s.violates for a, s in zip(oracle, samples)])
    slit_ok = v.failed and len(samples) == 200 and agree == 1.0
    ok = mink_ok and ctc_ok and punct_ok and slit_ok
    assert report(6, ok, f"minkowski_all_pass={mink_ok} ctc_cycle={ctc_ok} punctured_witness={punct_ok} "
                         f"slit_fail={v.failed} triples={len(samples)} agreement={agree:.3f}")


# 7 -------------------------------------------------------------------------

def _random_field(rng):
    """Smoothly varying Lorentzian field: a position-dependent boost and lapse of eta."""
    a, b, c = rng.uniform(-0.5, 0.5, 3)

    def form(p, a=a, b=b, c=c):
        p = np.asarray(p, dtype=float)
        th = a * np.sin(p[..., 0] + b) + c * p[..., 1]
        lapse = 1.0 + 0.3 * np.cos(p[..., 1] * (1 + a))
        ch, sh = np.cosh(th), np.sinh(th)
        L = np.stack([np.stack([ch, sh], -1), np.stack([sh, ch], -1)], -2)
        D = np.zeros(p.shape[:-1] + (2, 2))
        D[..., 0, 0] = -lapse
        D[..., 1, 1] = 1.0
        return np.einsum("...ki,...kl,...lj->...ij", L, D, L)

    def T(p):
        G = form(p)
        v = np.linalg.solve(G, np.broadcast_to([-1.0, 0.0], np.shape(p)))
        return v if np.all(v[..., 0] > 0) else -v

    return MetricField(form, 2, T, Modulus(3.0, 1.0), "random")


def test_convex_combination():
    eta = minkowski(2)
    anti = constant_field(-np.diag([-1.0, 1.0]), "anti")
    dom = ChartDomain.box([-1, -1], [1, 1])
    try:
        convex_combine(eta, anti, lambda p: np.full(np.shape(p)[:-1], 0.5), domain=dom)
        refused = False
    except ConeOrderViolation:
        refused = True
    rng = np.random.default_rng(7)
    nodes = Grid.over(dom, 33).nodes
    good = 0
    for i in range(100):
        g1 = _random_field(rng)
        eps = rng.uniform(0.05, 0.5)
        g2 = widen(g1, eps) if i % 2 == 0 else widen(_random_field_shift(g1, rng), eps)
        k, ph = rng.uniform(0.5, 3.0, 2)
        chi = (lambda p, k=k, ph=ph: 0.5 + 0.5 * np.sin(k * np.asarray(p)[..., 0] + ph))
        h = convex_combine(g1, g2, chi, domain=dom)
        ev = np.linalg.eigvalsh(h(nodes))
        good += bool(np.all((ev[:, 0] < 0) & (ev[:, 1] > 0)))
    ok = refused and good == 100
    assert report(7, ok, f"degenerate_refused={refused} lorentzian_combinations={good}/100")


def _random_field_shift(g, rng):
    """``g`` minus a random positive semi-definite field: cones only get wider."""
    u = rng.normal(size=2)

    def form(p, g=g, u=u):
        return g(p) - 0.2 * np.einsum("i,j->ij", u, u) / (u @ u)

    return MetricField(form, 2, g.time_orientation, g.modulus, "shifted", g.h, False, g.time_axis)


# 8 -------------------------------------------------------------------------

def test_stable_widening():
    rows, ok = [], True
    for name in ("minkowski2d", "bubble_metric"):
        st = catalog.get(name)
        sw = build_stable_widening(st.metric, 4, [0.2, 0.1, 0.05, 0.025], st.domain)
        grid = Grid.over(st.domain, 49)
        gh = check_global_hyperbolicity(sw.metric, grid, limit_check=False)
        gh_ok = gh["globally-hyperbolic"].passed and gh["causal"].passed
        ok = ok and sw.verified and gh_ok
        rows.append(f"{name}: ambient={sw.ambient_order.relation} "
                    f"shells={[o.relation for o in sw.shell_orders]} gh={gh['globally-hyperbolic'].kind}")
    assert report(8, ok, "; ".join(rows))


# 9 -------------------------------------------------------------------------

def test_cauchy_development():
    dom = _flat_aligned(256, 1 / 64)
    grid = Grid.over(dom, 256)
    S = Box([0, -1], [0, 1])
    D = cauchy_development(S, minkowski(2), grid, "future")
    t, x = grid.nodes[:, 0], grid.nodes[:, 1]
    exact = (t >= -1e-12) & (np.abs(x) + t <= 1 + 1e-12)
    A = exact.reshape(grid.shape)
    band = (ndimage.binary_dilation(A, np.ones((3, 3))) & ndimage.binary_dilation(~A, np.ones((3, 3))))
    miss = (D.cells ^ exact).reshape(grid.shape)
    ok = not np.any(miss & ~band)
    assert report(9, ok, f"mismatched_nodes={int(miss.sum())} outside_one_cell={int((miss & ~band).sum())}")


# 10 ------------------------------------------------------------------------

def test_imprisonment_bound():
    st, grid = _grid("minkowski2d")
    r = imprisonment_bound(Box([0, -1], [1, 1]), st.metric, grid)
    n = st.resolution
    lo, hi = np.sqrt(2) * (1 - 2 / n), np.sqrt(2) * (1 + 2 / n)
    flat_ok = r.bounded and lo <= r.bound <= hi
    st, grid = _grid("ctc_cylinder")
    c = imprisonment_bound(Box([0, -1], [1, 1]), st.metric, grid)
    ctc_ok = c.kind == "evidence-unbounded" and is_causal(c.witness, st.metric, domain=st.domain).causal \
        and verify_cycle(c.witness, st.metric, st.domain)
    assert report(10, flat_ok and ctc_ok, f"C={r.bound:.8f} in [{lo:.6f}, {hi:.6f}] ctc={c.kind} "
                                          f"cycle_causal={ctc_ok}")


# 11 ------------------------------------------------------------------------

def _random_curve(rng, k):
    """Random future causal polyline with ``k`` segments."""
    steps = np.column_stack([rng.uniform(0.1, 1.0, k), rng.uniform(-0.9, 0.9, k)])
    steps[:, 1] *= steps[:, 0]
    return CausalCurve.polyline(np.vstack([[0.0, 0.0], np.cumsum(steps, 0)]) + rng.normal(size=2))


def test_curve_algebra():
    rng = np.random.default_rng(11)
    idem, speed, dominated, reparam = 0.0, 0.0, True, 0.0
    for _ in range(1000):
        a = canonicalize(_random_curve(rng, int(rng.integers(2, 12))))
        b = canonicalize(_random_curve(rng, int(rng.integers(2, 12))))
        retimed = CausalCurve(a.vertices, 3.0 * a.params + 1.0, "generic")
        idem = max(idem, float(np.abs(canonicalize(retimed).params - a.params).max()),
                   float(np.abs(canonicalize(a).vertices - a.vertices).max()))
        seg = a.segment_h_lengths() / np.diff(a.params)
        speed = max(speed, float(np.abs(seg / seg.mean() - 1).max()))
        dominated &= hausdorff_distance(a, b) <= sup_distance(a, b) + 1e-12
        warped = CausalCurve(a.vertices, np.cumsum(np.concatenate([[0], rng.uniform(0.1, 1, len(a) - 1)])),
                             "generic")
        reparam = max(reparam, hausdorff_distance(a, warped))
    ok = idem <= 1e-12 and speed <= 1e-9 and dominated and reparam == 0.0
    assert report(11, ok, f"idempotence={idem:.1e} speed_dev={speed:.1e} d<=rho={dominated} "
                          f"d(reparam)={reparam:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
