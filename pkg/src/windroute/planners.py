"""SER, RER, GER and BER routing policies over a shared mission context."""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyParams
from .graph import (
    CostModel,
    ReturnOracle,
    TimeGraph,
    Unreachable,
    shortest_path,
    snapshot,
)
from .wind import CALM, KinematicLimits, WindVector

PLANNERS = ("SER", "RER", "GER", "BER")


@dataclass(frozen=True)
class Ablations:
    budget_gate: bool = True
    wind_costs: bool = True
    risk_term: bool = True
    traj_opt: bool = True

    @property
    def label(self) -> str:
        off = [k for k in ("budget_gate", "wind_costs", "risk_term", "traj_opt") if not getattr(self, k)]
        return "full" if not off else "no_" + "+".join(off)


@dataclass(frozen=True)
class PlannerConfig:
    planner: str = "BER"
    lam: float = 1.5
    kappa_ret: float = 1.5
    tau: float = 0.1
    T_max: int = 200
    flag: int = 0
    alpha: float = 0.5
    worst_wind: float | None = None  # None: top of the magnitude ladder
    unc_mode: str = "worst"
    unc_cap: float = 5.0
    ser_precheck: bool = True
    ablations: Ablations = field(default_factory=Ablations)

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.kappa_ret > 1:
            raise ValueError("kappa_ret must exceed 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.T_max < 1:
            raise ValueError("T_max must be >= 1")
        if self.flag not in (0, 1):
            raise ValueError("flag must be 0 or 1")


class DecisionKind(enum.Enum):
    TRAVERSE = "traverse"
    ABORT = "abort"
    STUCK = "stuck"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    edge: int | None = None

    @classmethod
    def traverse(cls, edge: int) -> Decision:
        return cls(DecisionKind.TRAVERSE, int(edge))


ABORT = Decision(DecisionKind.ABORT)
STUCK = Decision(DecisionKind.STUCK)


@dataclass(frozen=True)
class MissionState:
    B: float
    v: int
    delivered: bool = False
    path: tuple[int, ...] = ()
    t_step: int = 0
    t_sim: float = 0.0
    kappa_violated_after_delivery: bool = False


class MissionContext:
    """Everything a policy may look at besides the evolving state and wind estimate."""

    def __init__(self, g: TimeGraph, target: int, cfg: PlannerConfig, limits: KinematicLimits,
                 params: EnergyParams, costs: CostModel, oracle: ReturnOracle):
        self.g, self.target, self.cfg = g, target, cfg
        self.limits, self.params = limits, params
        self.costs, self.oracle = costs, oracle
        self.depot = oracle.depot

    def goal(self, state: MissionState) -> int:
        return self.depot if state.delivered else self.target

    def screened(self, c: np.ndarray) -> np.ndarray:
        """Flag 0 drops obstacle-blocked edges before any costing."""
        if self.cfg.flag == 0 and self.g.blocked.any():
            return np.where(self.g.blocked, np.inf, c)
        return c

    def online_costs(self, est: WindVector) -> np.ndarray:
        return self.screened(self.costs.surrogate(est, self.cfg.lam))


def return_ok(B: float, v: int, ctx: MissionContext) -> bool:
    """Budget covers ``kappa_ret`` times the conservative return from ``v``."""
    if not ctx.cfg.ablations.budget_gate:
        return True
    crc = ctx.oracle.cost[v]
    return bool(math.isfinite(crc) and B >= ctx.cfg.kappa_ret * crc)


# --- SER ---------------------------------------------------------------------


def plan_ser(g: TimeGraph, c0, depot: int, target: int) -> list[int]:
    """Round trip depot -> target -> depot under frozen costs; raises Unreachable."""
    out, _ = shortest_path(g, c0, depot, target)
    back, _ = shortest_path(g, c0, target, depot)
    return out + back[1:]


class SER:
    name = "SER"

    def __init__(self, ctx: MissionContext):
        self.ctx = ctx
        self.route: list[int] | None = None
        self.cursor = 0

    def _plan(self, state: MissionState, est: WindVector) -> Decision | None:
        ctx = self.ctx
        snap = snapshot(ctx.g, est, ctx.cfg.lam, ctx.limits, ctx.params, state.t_sim)
        lse = ctx.screened(snap.L_SE)
        try:
            self.route = plan_ser(ctx.g, lse, state.v, ctx.target)
        except Unreachable:
            return ABORT
        if ctx.cfg.ser_precheck:
            out_leg = self.route[: self.route.index(ctx.target) + 1]
            predicted = float(sum(snap.energy[e] for e in ctx.g.path_edges(out_leg)))
            if not return_ok(state.B - predicted, ctx.target, ctx):
                return ABORT
        return None

    def step(self, state: MissionState, est: WindVector) -> Decision:
        if self.route is None:
            early = self._plan(state, est)
            if early is not None:
                return early
        if self.cursor + 1 >= len(self.route):
            return STUCK
        a, b = self.route[self.cursor], self.route[self.cursor + 1]
        self.cursor += 1
        return Decision.traverse(self.ctx.g.edge_between(a, b))


# --- RER / GER ---------------------------------------------------------------


def step_rer(state: MissionState, g: TimeGraph, c_t, goal: int) -> Decision:
    try:
        path, _ = shortest_path(g, c_t, state.v, goal)
    except Unreachable:
        return STUCK
    if len(path) < 2:
        return STUCK
    return Decision.traverse(g.edge_between(path[0], path[1]))


def step_ger(state: MissionState, g: TimeGraph, c_t) -> Decision:
    best = None
    for eid in g.out_edges[state.v]:
        c = float(c_t[eid])
        if math.isfinite(c) and (best is None or c < best[0]):
            best = (c, eid)
    return STUCK if best is None else Decision.traverse(best[1])


class RER:
    name = "RER"

    def __init__(self, ctx: MissionContext):
        self.ctx = ctx

    def step(self, state: MissionState, est: WindVector) -> Decision:
        ctx = self.ctx
        return step_rer(state, ctx.g, ctx.online_costs(est), ctx.goal(state))


class GER:
    name = "GER"

    def __init__(self, ctx: MissionContext):
        self.ctx = ctx

    def step(self, state: MissionState, est: WindVector) -> Decision:
        return step_ger(state, self.ctx.g, self.ctx.online_costs(est))


# --- BER ---------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    edge: int
    cost: float
    unc: float
    score: float


def budgeted_cost_to_go(ctx: MissionContext, c: np.ndarray, start: int, B: float, goal: int) -> float:
    """Cheapest cost from ``start`` to ``goal`` through vertices that keep passing the gate.

    Budget spent and path cost are the same quantity, so plain Dijkstra with
    pruning is exact: the cheapest arrival at a vertex also leaves the most
    budget there.
    """
    g = ctx.g
    dist = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == goal:
            return d
        done.add(u)
        for eid in g.out_edges[u]:
            w = c[eid]
            if not w < math.inf:
                continue
            x = int(g.dst[eid])
            nd = d + float(w)
            if x in done or nd >= dist.get(x, math.inf):
                continue
            if not return_ok(B - nd, x, ctx):
                continue
            dist[x] = nd
            heapq.heappush(heap, (nd, x))
    return math.inf


def ber_candidates(state: MissionState, ctx: MissionContext, est: WindVector) -> list[Candidate]:
    """Screened, gate-feasible outgoing edges with their surrogate cost and score.

    The score adds the cheapest onward cost to the current goal along routes
    whose every vertex also passes the gate, so edges that only lead into
    gate-blocked territory are not offered.
    """
    cfg, g = ctx.cfg, ctx.g
    ab = cfg.ablations
    if ab.wind_costs:
        energy = ctx.costs.energy(est)
        unc = ctx.costs.uncertainty(est)
    else:
        energy = ctx.costs.calm
        unc = np.zeros_like(energy)
    lam = cfg.lam if ab.risk_term else 0.0
    c_tilde = energy + lam * unc if lam else energy
    c_plan = ctx.screened(c_tilde) if cfg.flag == 0 else c_tilde
    goal = ctx.goal(state)
    out = []
    for eid in g.out_edges[state.v]:
        c = float(c_plan[eid])
        if not math.isfinite(c):
            continue
        head = int(g.dst[eid])
        left = state.B - c
        if not return_ok(left, head, ctx):
            continue
        score = c + budgeted_cost_to_go(ctx, c_plan, head, left, goal)
        if math.isfinite(score):
            out.append(Candidate(eid, c, float(unc[eid]), score))
    return out


def threshold_pick(cands: list[Candidate], tau: float) -> Candidate:
    """Among scores within ``(1 + tau)`` of the best, take the least uncertain; ties by edge id.

    Only edges whose onward cost undercuts the best score qualify, so every
    pick moves closer to the goal and two near-optimal edges cannot trade
    places forever. The best edge always qualifies.
    """
    best = min(c.score for c in cands)
    near = [c for c in cands if c.score <= (1.0 + tau) * best and c.score - c.cost < best]
    return min(near, key=lambda c: (c.unc, c.edge))


def step_ber(state: MissionState, ctx: MissionContext, est: WindVector) -> Decision:
    cands = ber_candidates(state, ctx, est)
    if cands:
        return Decision.traverse(threshold_pick(cands, ctx.cfg.tau).edge)
    if not state.delivered:
        return ABORT
    try:
        route = ctx.oracle.route(state.v)
    except Unreachable:
        return STUCK
    return Decision.traverse(route[0]) if route else STUCK


class BER:
    name = "BER"

    def __init__(self, ctx: MissionContext):
        self.ctx = ctx

    def step(self, state: MissionState, est: WindVector) -> Decision:
        return step_ber(state, self.ctx, est)


POLICIES = {"SER": SER, "RER": RER, "GER": GER, "BER": BER}


def make_policy(ctx: MissionContext):
    return POLICIES[ctx.cfg.planner](ctx)


__all__ = [
    "ABORT", "Ablations", "BER", "Candidate", "budgeted_cost_to_go", "Decision", "DecisionKind", "GER", "MissionContext",
    "MissionState", "PLANNERS", "PlannerConfig", "RER", "SER", "STUCK", "ber_candidates",
    "make_policy", "plan_ser", "return_ok", "step_ber", "step_ger", "step_rer", "threshold_pick",
    "CALM",
]
