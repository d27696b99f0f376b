import numpy as np
import pytest

from causalkit import catalog
from causalkit.catalog import bubble_metric
from causalkit.chart import Box, ChartDomain, minkowski, widen
from causalkit.errors import DomainError, EmptySet, InconclusiveBounded
from causalkit.grid import CausalGraph, Grid, stencil
from causalkit.reach import (cauchy_development, causal_diamond, exit_parameter, future_reach,
                             imprisonment_bound, loads_reach, open_past_future, past_reach,
                             random_curves_from, read_reach, rle_decode, rle_encode)

ETA = minkowski(2)


def aligned(n=129, half=2.0):
    """Square chart whose lattice has the origin as a node."""
    return Grid.over(ChartDomain.box([-half, -half], [half, half]), n)


def test_grid_basics():
    g = aligned(5, 1.0)
    assert g.shape == (5, 5) and np.allclose(g.step, 0.5)
    f = g.refined(2)
    assert f.shape == (9, 9) and np.allclose(f.step, 0.25)
    i = g.nearest([0.1, -0.1])
    assert np.allclose(g.nodes[i], [0, 0])
    per = Grid.over(ChartDomain.box([0, -1], [1, 1], periodic=(True, False)), 4)
    last = per.flat((3, 0))
    assert per.nodes[per.neighbor(np.array([last]), np.array([1, 0]))[0]][0] == pytest.approx(0.0)
    assert per.neighbor(np.array([per.flat((0, 0))]), np.array([0, -1]))[0] == -1


def test_stencil_primitive():
    s = stencil(2, 3)
    assert len(s) == len({tuple(x) for x in s})
    assert all(np.gcd.reduce(np.abs(x)) == 1 for x in s)


def test_minkowski_sandwich_and_monotone():
    grid = aligned(129)
    t, x = grid.nodes[:, 0], grid.nodes[:, 1]
    cone = t >= np.abs(x) - 1e-12
    U = future_reach([0, 0], ETA, grid, "under")
    O = future_reach([0, 0], ETA, grid, "over")
    assert U.subset_of(O)
    assert not np.any(U.cells & ~cone) and not np.any(cone & ~O.cells)
    W = future_reach([0, 0], widen(ETA, 0.1), grid, "over")
    assert O.subset_of(W) and W.count > O.count
    P = past_reach([0, 0], ETA, grid, "under")
    past = -t >= np.abs(x) - 1e-12
    assert not np.any(P.cells & ~past)
    assert np.all(P.cells[-t >= np.abs(x) + grid.cell])


def test_bubble_reach_between_flat_and_central_cone():
    st = catalog.get("bubble_metric")
    grid = Grid.over(st.domain, 97)
    U = future_reach([-0.5, 0.0], st.metric, grid, "under")
    O = future_reach([-0.5, 0.0], st.metric, grid, "over")
    t, x = grid.nodes[:, 0] + 0.5, grid.nodes[:, 1]
    # the frozen cone at the seed has slope sqrt(1.5), the widest anywhere
    central = np.sqrt(1.5) * t >= np.abs(x) - 1e-12
    assert not np.any(U.cells & ~central)
    assert np.any(O.cells & (t < np.abs(x) - grid.cell))


def test_refinement_shrinks_gap():
    g = bubble_metric()
    dom = ChartDomain.box([-1, -2], [1, 2])
    vols = []
    for n in (33, 65, 129):
        grid = Grid.over(dom, n)
        U = future_reach([-0.5, 0.0], g, grid, "under")
        O = future_reach([-0.5, 0.0], g, grid, "over")
        assert U.subset_of(O)
        vols.append((O.count - U.count) * np.prod(grid.step))
    assert vols[0] > vols[1] > vols[2]


def test_reach_errors():
    st = catalog.get("punctured_minkowski")
    grid = Grid.over(st.domain, 129)
    with pytest.raises(DomainError):
        future_reach([1.0, 0.0], st.metric, grid)
    with pytest.raises(ValueError):
        future_reach([0.0, 0.0], ETA, aligned(33), horizon=0.0)


def test_horizon_caps_reach():
    grid = aligned(65)
    R = future_reach([0, 0], ETA, grid, "over", horizon=1.0)
    assert np.all(np.linalg.norm(R.points(), axis=1) <= 1.0 + 2 * grid.cell)


def test_diamonds():
    grid = aligned(129)
    rep = causal_diamond([0, -1], [2, -1], ETA, Grid.over(ChartDomain.box([-1, -3], [3, 1]), 129))
    assert rep.compact and not rep.empty
    pts = rep.diamond.points()
    assert np.all(np.abs(pts[:, 1] + 1) <= np.minimum(pts[:, 0], 2 - pts[:, 0]) + 2 * grid.cell)
    empty = causal_diamond([0, 0], [1, 1.9], ETA, grid)
    assert empty.compact and empty.empty
    with pytest.raises(InconclusiveBounded):
        causal_diamond([-1.5, 0], [1.9, 0], ETA, Grid.over(ChartDomain.box([-2, -1], [2, 1]), 65))


def test_slit_diamond_noncompact():
    st = catalog.get("slit_minkowski")
    rep = causal_diamond([0, 0], [2, 0], st.metric, Grid.over(st.domain, 129))
    assert rep.verdict == "noncompact" and len(rep.closure_defect) > 0
    # defects hug the slit on both sides
    d = rep.closure_defect
    assert np.all(np.abs(d[:, 0] - 1.0) <= 0.2) and np.all(np.abs(d[:, 1]) <= np.minimum(d[:, 0], 2 - d[:, 0]) + 1e-9)


def test_open_future_of_slice():
    grid = aligned(65, 1.0)
    A = Box([0, -1], [0, 1])
    I1 = open_past_future(A, ETA, [0.1], grid)
    I2 = open_past_future(A, ETA, [0.1, 0.01], grid)
    assert I1.open and np.all(I1.cells <= I2.cells)
    t = grid.nodes[:, 0]
    assert not np.any(I2.cells & (t <= 0))
    interior = (t > 1.5 * grid.cell) & (t < 1 - 1.5 * grid.cell) & (np.abs(grid.nodes[:, 1]) < 1 - 1.5 * grid.cell)
    assert np.all(I2.cells[interior])
    with pytest.raises(ValueError):
        open_past_future(A, ETA, [0.01, 0.1], grid)


def test_imprisonment():
    st = catalog.get("minkowski2d")
    r = imprisonment_bound(Box([0, -1], [1, 1]), st.metric, Grid.over(st.domain, 65))
    assert r.bounded and r.bound == pytest.approx(np.sqrt(2), rel=2 / 65)
    b = catalog.get("bubble_metric")
    K = Box([-0.5, -0.5], [0.5, 0.5])
    coarse = imprisonment_bound(K, b.metric, Grid.over(b.domain, 65))
    fine = imprisonment_bound(K, b.metric, Grid.over(b.domain, 257))
    assert coarse.bounded and fine.bounded
    assert coarse.bound == pytest.approx(fine.bound, rel=0.1)


def test_development_examples():
    grid = Grid.over(ChartDomain.box([-1, -1], [1, 1]), 65)
    D = cauchy_development(Box([0, -1], [0, 1]), ETA, grid)
    t, x = grid.nodes[:, 0], grid.nodes[:, 1]
    assert np.array_equal(D.cells, (t >= -1e-12) & (np.abs(x) + t <= 1 + 1e-12))
    st = catalog.get("punctured_minkowski")
    grid = Grid.over(st.domain, 129)
    D = cauchy_development(Box([0, -2], [0, 2]), st.metric, grid)
    above = grid.nearest([1.25, 0.0])
    aside = grid.nearest([1.25, 0.5])
    assert not D.cells[above] and D.cells[aside]
    with pytest.raises(EmptySet):
        cauchy_development(Box([5, 5], [6, 6]), ETA, Grid.over(ChartDomain.box([-1, -1], [1, 1]), 17))


def test_curves_leave_compacta():
    grid = aligned(65)
    K = Box([-0.5, -0.5], [0.5, 0.5])
    rng = np.random.default_rng(3)
    for pts, why in random_curves_from(K, ETA, grid, 40, rng):
        assert exit_parameter(pts, K) is not None
        assert why == "boundary"


def test_reach_file_roundtrip(tmp_path):
    grid = aligned(33, 1.0)
    R = future_reach([0, 0], ETA, grid, "over")
    text = R.dumps()
    assert text.startswith("reach dims=2")
    back = loads_reach(text, grid.domain)
    assert np.array_equal(back.cells, R.cells) and back.mode == "over" and back.dumps() == text
    R.write(tmp_path / "r.txt")
    assert np.array_equal(read_reach(tmp_path / "r.txt", grid.domain).cells, R.cells)
    rows = R.boundary_csv().strip().splitlines()
    assert rows[0].startswith("x0,x1") and len(rows) - 1 == int(R.boundary().sum())


def test_rle_roundtrip():
    rng = np.random.default_rng(0)
    flags = rng.random(1000) < 0.3
    assert np.array_equal(rle_decode(rle_encode(flags), 1000), flags)


def test_graph_cycle_on_ctc():
    st = catalog.get("ctc_cylinder")
    graph = CausalGraph.build(st.metric, Grid.over(st.domain, 32), mode="under")
    cyc = graph.find_cycle()
    assert cyc is not None and cyc[0] == cyc[-1]
    assert graph.longest_path() is None
