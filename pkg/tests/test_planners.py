import numpy as np
import pytest

from windroute.executor import Mission, Outcome, WindField, run_mission
from windroute.graph import TimeGraph, Vertex, VertexKind
from windroute.planners import (
    Ablations,
    Candidate,
    DecisionKind,
    MissionState,
    PlannerConfig,
    return_ok,
    step_ber,
    step_ger,
    step_rer,
    threshold_pick,
)
from windroute.wind import CALM, WindSource, constant_wind


def graph(points, arcs):
    verts = [Vertex(i, (float(x), float(y), 100.0), VertexKind.DEPOT if i == 0 else VertexKind.WAYPOINT)
             for i, (x, y) in enumerate(points)]
    return TimeGraph(verts, arcs)


def calm_field(w=CALM):
    return WindField([WindSource(constant_wind(w, 4), 0)])


def diamond():
    # depot 0, short branch via 1, long branch via 2, target 3
    pts = [(0, 0), (1500, 300), (1500, -2000), (3000, 0)]
    arcs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)]
    return graph(pts, arcs)


def test_return_ok_worked_example():
    g = graph([(0, 0), (300, 0)], [(0, 1), (1, 0)])
    m = Mission(g, 1, calm_field(), 10.0)
    ctx = m.context(PlannerConfig(worst_wind=0.0, kappa_ret=1.5))
    assert ctx.oracle.cost[1] == pytest.approx(0.1389, abs=5e-5)
    assert not return_ok(0.20, 1, ctx)
    assert return_ok(0.21, 1, ctx)
    off = m.context(PlannerConfig(worst_wind=0.0, ablations=Ablations(budget_gate=False)))
    assert return_ok(0.0, 1, off)


def test_threshold_pick_prefers_low_uncertainty_then_id():
    c = [Candidate(4, 1.0, 0.5, 10.0), Candidate(2, 1.0, 0.2, 10.9), Candidate(1, 1.0, 0.2, 10.5),
         Candidate(0, 1.0, 0.0, 11.5)]
    assert threshold_pick(c, 0.1).edge == 1
    assert threshold_pick(c, 0.0).edge == 4


def test_threshold_pick_requires_progress():
    # edge 7 is near-optimal and calmer, but its head is no closer to the goal
    c = [Candidate(3, 1.0, 0.5, 10.0), Candidate(7, 0.2, 0.0, 10.4)]
    assert threshold_pick(c, 0.1).edge == 3
    c = [Candidate(3, 1.0, 0.5, 10.0), Candidate(7, 1.0, 0.0, 10.4)]
    assert threshold_pick(c, 0.1).edge == 7


@pytest.mark.parametrize("planner", ["SER", "RER", "BER"])
def test_calm_diamond_takes_short_branch(planner):
    m = Mission(diamond(), 3, calm_field(), 100.0)
    rec = run_mission(m, PlannerConfig(planner=planner))
    assert rec.outcome is Outcome.SUC
    assert rec.path == (0, 1, 3, 1, 0)


def test_ger_argmin_tie_goes_to_lower_id():
    g = graph([(0, 0), (1000, 0), (-1000, 0)], [(0, 2), (0, 1), (1, 0), (2, 0)])
    st = MissionState(B=10.0, v=0)
    dec = step_ger(st, g, np.array([1.0, 1.0, 1.0, 1.0]))
    assert dec.edge == 0
    dec = step_ger(st, g, np.array([2.0, 1.0, 1.0, 1.0]))
    assert dec.edge == 1
    assert step_ger(st, g, np.full(4, np.inf)).kind is DecisionKind.STUCK


def test_ber_aborts_when_gate_blocks_everything():
    m = Mission(diamond(), 3, calm_field(), 0.5)
    ctx = m.context(PlannerConfig())
    dec = step_ber(MissionState(B=0.5, v=0), ctx, CALM)
    assert dec.kind is DecisionKind.ABORT
    assert run_mission(m, PlannerConfig()).outcome is Outcome.ABRT


def test_ser_precheck_aborts_at_depot():
    m = Mission(diamond(), 3, calm_field(), 1.0)
    rec = run_mission(m, PlannerConfig(planner="SER"))
    assert rec.outcome is Outcome.ABRT and rec.path == (0,)
    rec = run_mission(m, PlannerConfig(planner="SER", ser_precheck=False))
    assert rec.outcome is Outcome.FAIL


def test_rer_replans_when_costs_change():
    g = diamond()
    st = MissionState(B=10.0, v=0)
    c = np.ones(len(g.edges))
    assert g.dst[step_rer(st, g, c, 3).edge] == 1
    c[g.edge_between(1, 3)] = 5.0
    assert g.dst[step_rer(st, g, c, 3).edge] == 2
    c[:] = np.inf
    assert step_rer(st, g, c, 3).kind is DecisionKind.STUCK


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(kappa_ret=1.0)
    with pytest.raises(ValueError):
        PlannerConfig(planner="XYZ")
    assert Ablations(budget_gate=False).label == "no_budget_gate"
    assert Ablations().label == "full"
