import math

import numpy as np
import pytest
from oracles import brute_force_path

from windroute.energy import EnergyParams
from windroute.graph import (
    CostModel,
    ReturnOracle,
    TimeGraph,
    UncertaintyModel,
    Unreachable,
    Vertex,
    VertexKind,
    costs_to,
    edge_cost,
    follow,
    generate_er,
    reaches,
    shortest_path,
    snapshot,
    uncertainty,
)
from windroute.wind import CALM, KinematicLimits, WindVector


def line_graph(xs, both=True):
    verts = [Vertex(i, (float(x), 0.0, 100.0), VertexKind.DEPOT if i == 0 else VertexKind.WAYPOINT)
             for i, x in enumerate(xs)]
    arcs = [(i, i + 1) for i in range(len(xs) - 1)]
    if both:
        arcs += [(i + 1, i) for i in range(len(xs) - 1)]
    return TimeGraph(verts, arcs)


def test_er_is_strongly_connected_and_deterministic():
    g = generate_er(30, 0.05, seed=4)
    for v in range(g.n):
        assert reaches(g, v).all()
    h = generate_er(30, 0.05, seed=4)
    assert h.to_json() == g.to_json()
    assert TimeGraph.from_json(g.to_json()).to_json() == g.to_json()


def test_graph_rejects_bad_input():
    v = [Vertex(0, (0, 0, 0), VertexKind.DEPOT), Vertex(1, (1, 0, 0))]
    with pytest.raises(ValueError):
        TimeGraph(v, [(0, 0)])
    with pytest.raises(ValueError):
        TimeGraph(v, [(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        TimeGraph([Vertex(0, (0, 0, 0)), Vertex(1, (1, 0, 0))], [(0, 1)])


def test_dijkstra_matches_brute_force_small():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        g = generate_er(n, 0.4, seed=int(rng.integers(1 << 30)))
        w = rng.integers(1, 5, len(g.edges)).astype(float)
        s, t = 0, n - 1
        path, cost = shortest_path(g, w, s, t)
        bc, bp = brute_force_path(n, [(e.src, e.dst) for e in g.edges], w, s, t)
        assert cost == bc
        assert tuple(path) == bp


def test_unreachable_and_costs_to():
    g = line_graph([0, 100, 200], both=False)
    with pytest.raises(Unreachable):
        shortest_path(g, np.ones(len(g.edges)), 2, 0)
    dist, nxt = costs_to(g, np.ones(len(g.edges)), 2)
    assert list(dist) == [2.0, 1.0, 0.0]
    assert follow(g, nxt, 0, 2) == [0, 1]


def test_costs_to_tie_prefers_smaller_next_vertex():
    verts = [Vertex(0, (0, 0, 0), VertexKind.DEPOT), Vertex(1, (1, 1, 0)), Vertex(2, (1, -1, 0)),
             Vertex(3, (2, 0, 0))]
    g = TimeGraph(verts, [(0, 2), (0, 1), (1, 3), (2, 3)])
    dist, nxt = costs_to(g, np.ones(4), 3)
    assert int(g.dst[nxt[0]]) == 1


def test_synthetic_distance_calm_is_length_and_floor():
    g = line_graph([0, 1000])
    lim, p = KinematicLimits(), EnergyParams()
    assert edge_cost(g.edges[0], CALM, 1.5, lim, p) == pytest.approx(1000.0)
    tail = WindVector(9.0, 0.0)
    assert edge_cost(g.edges[0], tail, 50.0, lim, p) == pytest.approx(50.0)
    snap = snapshot(g, WindVector(6.0, math.pi), 1.0, lim, p)
    assert snap.L_SE[0] > 1000.0 > snap.L_SE[1]


def test_uncertainty_vectorized_matches_scalar():
    g = generate_er(12, 0.3, seed=2)
    lim, p = KinematicLimits(), EnergyParams()
    model = UncertaintyModel(8)
    cm = CostModel(g, lim, p, model)
    est = WindVector(6.0, 0.0)
    arr = cm.uncertainty(est)
    for e in g.edges:
        assert arr[e.id] == pytest.approx(uncertainty(e, est, model, lim, p), abs=1e-12)
    assert (arr >= 0).all()


def test_return_oracle_headwind_prices():
    g = line_graph([0, 1500, 3000])
    lim, p = KinematicLimits(), EnergyParams()
    orc = ReturnOracle(g, lim, p, 9.0)
    per_m = 25.0 / 6.0 / 3600.0  # V_G = 15 - 9
    assert orc.cost[2] == pytest.approx(3000 * per_m)
    assert orc.cost[0] == 0.0
    assert len(orc.route(2)) == 2
