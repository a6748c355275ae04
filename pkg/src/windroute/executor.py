"""Closed-loop mission execution: observe, estimate, decide, fly one edge, repeat."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .dubins import Obstacle, max_step_turn, polyline_max_turn, refine_route
from .fleet import (
    Assignment,
    Customer,
    DroneSpec,
    conflict_count,
    dynamic_assign,
    kmeans_cluster,
    partition_customers,
    timed_positions,
    truck_tsp,
)
from .energy import EdgeTraversal, EnergyParams, edge_energy
from .graph import CostModel, ReturnOracle, TimeGraph, UncertaintyModel, Unreachable
from .planners import (
    DecisionKind,
    MissionContext,
    MissionState,
    PlannerConfig,
    make_policy,
)
from .wind import (
    DEFAULT_LADDER,
    KinematicLimits,
    MarkovWind,
    WindEstimate,
    WindVector,
    quantize,
    update_estimate,
)

CONTROL_PERIOD_S = 2.0


class Outcome(enum.Enum):
    SUC = "SUC"
    DEL = "DEL"
    ABRT = "ABRT"
    FAIL = "FAIL"


class WindLookup(Protocol):
    def at(self, t: float) -> WindVector: ...


@dataclass(frozen=True)
class WindField:
    """Realized wind by time, optionally regional: vertex -> region -> source."""

    sources: Sequence[WindLookup]
    region_of: dict[int, int] | None = None

    def at(self, t: float, v: int = 0) -> WindVector:
        r = 0 if self.region_of is None else self.region_of.get(v, 0)
        return self.sources[r].at(t)


@dataclass
class Mission:
    """One delivery sortie: graph, target, realized wind and vehicle."""

    g: TimeGraph
    target: int
    wind: WindField
    B0: float
    params: EnergyParams = field(default_factory=EnergyParams)
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    K: int = 4
    ladder: tuple[float, ...] = DEFAULT_LADDER
    markov: MarkovWind | None = None
    obstacles: tuple[Obstacle, ...] = ()
    t0: float = 0.0
    seed: int = 0
    depot: int | None = None
    _shared: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.depot is None:
            self.depot = self.g.depot
        if self.target == self.depot:
            raise ValueError("target must differ from the depot")
        if not 0 <= self.target < self.g.n:
            raise ValueError("target out of range")
        if self.B0 <= 0:
            raise ValueError("initial battery must be positive")

    def worst_wind(self, cfg: PlannerConfig) -> float:
        return max(self.ladder) if cfg.worst_wind is None else cfg.worst_wind

    def context(self, cfg: PlannerConfig) -> MissionContext:
        """Cost caches are shared by every planner flown on this mission."""
        ukey = ("costs", self.K, tuple(self.ladder), cfg.unc_mode, cfg.unc_cap)
        costs = self._shared.get(ukey)
        if costs is None:
            unc = UncertaintyModel(self.K, tuple(self.ladder), self.markov, cfg.unc_cap, cfg.unc_mode)
            costs = self._shared[ukey] = CostModel(self.g, self.limits, self.params, unc)
        ww = self.worst_wind(cfg)
        okey = ("oracle", ww)
        oracle = self._shared.get(okey)
        if oracle is None:
            oracle = self._shared[okey] = ReturnOracle(self.g, self.limits, self.params, ww, self.depot)
        return MissionContext(self.g, self.target, cfg, self.limits, self.params, costs, oracle)


@dataclass(frozen=True)
class MissionRecord:
    seed: int
    planner: str
    B0: float
    K: int
    lam: float
    outcome: Outcome
    energy_wh: float
    margin_wh: float
    time_s: float
    steps: int
    max_turn_deg: float
    path: tuple[int, ...]
    debits: tuple[float, ...]
    arrivals: tuple[float, ...] = ()
    reason: str = ""

    CSV_HEADER = "seed,planner,B0,K,lambda,outcome,energy_wh,margin_wh,time_s,steps,max_turn_deg"

    def csv_row(self) -> str:
        vals = [str(self.seed), self.planner, repr(float(self.B0)), str(self.K), repr(float(self.lam)),
                self.outcome.value, repr(self.energy_wh), repr(self.margin_wh), repr(self.time_s),
                str(self.steps), repr(self.max_turn_deg)]
        return ",".join(vals)


def traverse_edge(state: MissionState, g: TimeGraph, eid: int, w: WindVector,
                  limits: KinematicLimits, params: EnergyParams) -> tuple[MissionState, EdgeTraversal]:
    """Fly edge ``eid`` under wind ``w`` held for the whole edge.

    An unflyable edge leaves the state where it was (no energy is spent before
    the boundary because the wind does not change along the edge).
    """
    e = g.edges[eid]
    if e.src != state.v:
        raise ValueError(f"edge {eid} does not leave vertex {state.v}")
    tr = edge_energy(e.length, e.direction, w, limits, params)
    if not tr.feasible:
        return state, tr
    nxt = replace(state, B=state.B - tr.energy, v=e.dst, path=state.path + (e.dst,),
                  t_sim=state.t_sim + tr.time)
    return nxt, tr


def flown_max_turn(mission: Mission, path: Sequence[int], traj_opt: bool,
                   spacing: float | None = None) -> float:
    """Peak heading change between control samples of the flown route (degrees)."""
    pts = [mission.g.pos[v][:2] for v in path]
    if len(pts) < 2:
        return 0.0
    if not traj_opt:
        return polyline_max_turn(pts)
    spacing = spacing or mission.limits.V_A * CONTROL_PERIOD_S
    route = refine_route(pts, mission.limits.turn_radius, mission.obstacles, step=spacing)
    return max_step_turn(route.resample(spacing))


def run_mission(mission: Mission, cfg: PlannerConfig) -> MissionRecord:
    ctx = mission.context(cfg)
    policy = make_policy(ctx)
    g, limits, params = mission.g, mission.limits, mission.params
    state = MissionState(B=mission.B0, v=mission.depot, path=(mission.depot,), t_sim=mission.t0)
    est: WindEstimate | None = None
    debits: list[float] = []
    arrivals: list[float] = [state.t_sim]
    outcome, reason = None, ""

    def fly(s: MissionState, eid: int):
        w = mission.wind.at(s.t_sim, s.v)
        nxt, tr = traverse_edge(s, g, eid, w, limits, params)
        if tr.feasible:
            debits.append(tr.energy)
            arrivals.append(nxt.t_sim)
        return nxt, tr

    def margin_check(s: MissionState) -> MissionState:
        if s.delivered and s.v != mission.depot and not s.kappa_violated_after_delivery:
            crc = ctx.oracle.cost[s.v]
            if not (math.isfinite(crc) and s.B >= cfg.kappa_ret * crc):
                return replace(s, kappa_violated_after_delivery=True)
        return s

    while outcome is None:
        if state.delivered and state.v == mission.depot:
            outcome = Outcome.DEL if state.kappa_violated_after_delivery else Outcome.SUC
            break
        if state.t_step >= cfg.T_max:
            outcome, reason = (Outcome.DEL, "horizon") if state.delivered else (Outcome.FAIL, "horizon")
            break
        obs = quantize(mission.wind.at(state.t_sim, state.v), mission.K, mission.ladder)
        if est is None:
            est = WindEstimate(obs, state.t_sim, cfg.alpha)
        else:
            est = update_estimate(est, obs, state.t_sim)
        dec = policy.step(state, est.vector)
        state = replace(state, t_step=state.t_step + 1)
        if dec.kind is DecisionKind.STUCK:
            outcome, reason = Outcome.FAIL, "stuck"
            break
        if dec.kind is DecisionKind.ABORT:
            outcome, reason = Outcome.ABRT, "abort"
            try:
                route = ctx.oracle.route(state.v)
            except Unreachable:
                outcome, reason = Outcome.FAIL, "abort-unreachable"
                break
            for eid in route:
                state, tr = fly(state, eid)
                if not tr.feasible:
                    outcome, reason = Outcome.FAIL, "abort-infeasible"
                    break
                if state.B < 0:
                    outcome, reason = Outcome.FAIL, "abort-depleted"
                    break
            break
        state, tr = fly(state, dec.edge)
        if not tr.feasible:
            outcome, reason = Outcome.FAIL, "infeasible-edge"
            break
        if state.B < 0:
            outcome, reason = Outcome.FAIL, "depleted"
            break
        if state.v == mission.target and not state.delivered:
            state = replace(state, delivered=True)
        state = margin_check(state)

    energy = mission.B0 - state.B
    return MissionRecord(
        seed=mission.seed,
        planner=cfg.planner,
        B0=mission.B0,
        K=mission.K,
        lam=cfg.lam,
        outcome=outcome,
        energy_wh=energy,
        margin_wh=max(float(state.B), 0.0),
        time_s=float(state.t_sim - mission.t0),
        steps=len(state.path) - 1,
        max_turn_deg=flown_max_turn(mission, state.path, cfg.ablations.traj_opt),
        path=state.path,
        debits=tuple(debits),
        arrivals=tuple(arrivals),
        reason=reason,
    )


# --- fleet mode ------------------------------------------------------------


@dataclass
class FleetScenario:
    g: TimeGraph
    customers: tuple[Customer, ...]
    drones: dict[int, DroneSpec]
    wind: WindField
    cfg: PlannerConfig
    params: EnergyParams = field(default_factory=EnergyParams)
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    K: int = 4
    ladder: tuple[float, ...] = DEFAULT_LADDER
    markov: MarkovWind | None = None
    obstacles: tuple[Obstacle, ...] = ()
    truck_speed: float = 10.0
    launch_stagger: float = 10.0
    clusters: int | None = None
    d_safe: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if not self.drones:
            raise ValueError("fleet needs at least one drone")
        ids = [c.id for c in self.customers]
        if len(set(ids)) != len(ids):
            raise ValueError("customer ids must be unique")
        for c in self.customers:
            if not 0 <= c.id < self.g.n or c.id == self.g.depot:
                raise ValueError(f"customer {c.id} must sit on a non-depot vertex")


@dataclass(frozen=True)
class FleetRecord:
    missions: tuple[tuple[int, int, MissionRecord], ...]  # (drone, customer, record)
    assignments: tuple[Assignment, ...]
    conflicts: int
    log: tuple[tuple[float, str, str, str], ...]
    truck_route: tuple[int, ...]
    truck_served: tuple[int, ...]
    undelivered: tuple[int, ...]

    LOG_HEADER = "t,event,vehicle,detail"


def _launch_vertices(fs: FleetScenario, drone_set: list[Customer]) -> dict[int, list[int]]:
    """Cluster drone customers and pick the non-customer vertex nearest each centroid."""
    k = min(fs.clusters, len(drone_set))
    pts = np.asarray([c.position[:2] for c in drone_set])
    labels = kmeans_cluster(pts, k, seed=fs.seed)
    taken = {c.id for c in fs.customers}
    free = [v for v in range(fs.g.n) if v not in taken]
    pos = np.asarray([fs.g.pos[v][:2] for v in free])
    groups: dict[int, list[int]] = {}
    for j in range(k):
        members = [c.id for c, lab in zip(drone_set, labels) if lab == j]
        if not members:
            continue
        centroid = pts[labels == j].mean(axis=0)
        v = free[int(np.argmin(np.linalg.norm(pos - centroid, axis=1)))]
        groups.setdefault(v, []).extend(members)
    return groups


def run_fleet(fs: FleetScenario) -> FleetRecord:
    """Truck tour with drone sorties launched from its stops; the truck waits for its drones."""
    g = fs.g
    depot = g.depot
    spec0 = fs.drones[min(fs.drones)]
    truck_set, drone_set = partition_customers(fs.customers, spec0, g, fs.params, fs.limits, depot)
    by_id = {c.id: c for c in fs.customers}
    groups = _launch_vertices(fs, drone_set) if fs.clusters and drone_set else {}
    stops = sorted({c.id for c in truck_set} | set(groups))
    nodes = [g.pos[depot]] + [g.pos[v] for v in stops]
    plan = truck_tsp(nodes, seed=fs.seed, speed=fs.truck_speed)
    route = [depot if i == 0 else stops[i - 1] for i in plan.route]

    unserved = {c.id for c in drone_set}
    alive = dict(sorted(fs.drones.items()))
    missions, assignments, log = [], [], []
    t = 0.0
    for leg, sv in enumerate(route):
        if leg > 0:
            a, b = np.asarray(g.pos[route[leg - 1]][:2]), np.asarray(g.pos[sv][:2])
            log.append((t, "truck_depart", "truck", str(route[leg - 1])))
            t += float(np.linalg.norm(b - a)) / fs.truck_speed
        log.append((t, "truck_arrive", "truck", str(sv)))
        if groups:
            pool_ids = [cid for cid in groups.get(sv, []) if cid in unserved]
        else:
            pool_ids = sorted(unserved)
        idle = dict(alive)
        busy: list[tuple[float, int]] = []
        now = t
        while True:
            pool = [by_id[cid] for cid in pool_ids if cid in unserved]
            batch = dynamic_assign(now, sv, idle, pool, g, fs.params, fs.limits)
            for k, asg in enumerate(batch):
                launch = now + k * fs.launch_stagger
                c = by_id[asg.customer]
                m = Mission(g, c.id, fs.wind, idle[asg.drone].battery, fs.params.with_payload(c.payload),
                            fs.limits, fs.K, fs.ladder, fs.markov, fs.obstacles, t0=launch, seed=fs.seed,
                            depot=sv)
                rec = run_mission(m, fs.cfg)
                assignments.append(Assignment(launch, asg.drone, c.id))
                missions.append((asg.drone, c.id, rec))
                unserved.discard(c.id)
                del idle[asg.drone]
                log.append((launch, "launch", f"drone{asg.drone}", str(c.id)))
                back = launch + rec.time_s
                if rec.outcome is Outcome.FAIL:
                    del alive[asg.drone]
                    log.append((back, "lost", f"drone{asg.drone}", rec.reason or "fail"))
                else:
                    busy.append((back, asg.drone))
            if not busy:
                break
            busy.sort()
            now, d = busy.pop(0)
            idle[d] = alive[d]
            log.append((now, "return", f"drone{d}", str(sv)))
        t = max(t, now)
    served_by_truck = tuple(c.id for c in truck_set)

    t_end = max([t] + [r.arrivals[-1] for _, _, r in missions if r.arrivals])
    timebase = np.arange(0.0, t_end + 1.0, 1.0)
    trajs: dict[int, list[np.ndarray]] = {}
    for d, _, r in missions:
        trajs.setdefault(d, []).append(timed_positions(g, r.path, r.arrivals, timebase))
    merged = {}
    for d, ts in trajs.items():
        out = ts[0].copy()
        for x in ts[1:]:
            airborne = ~np.isnan(x[:, 0])
            out[airborne] = x[airborne]
        merged[d] = out
    conflicts = conflict_count(merged, fs.d_safe)
    log.sort(key=lambda row: (row[0], row[1], row[2]))
    return FleetRecord(tuple(missions), tuple(assignments), conflicts, tuple(log), tuple(route),
                       served_by_truck, tuple(sorted(unserved)))


def write_fleet_log(path, rec: FleetRecord) -> None:
    lines = [FleetRecord.LOG_HEADER] + [f"{t!r},{ev},{veh},{det}" for t, ev, veh, det in rec.log]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_assignments(path, rec: FleetRecord) -> None:
    lines = ["t,drone,customer"] + [f"{a.t!r},{a.drone},{a.customer}" for a in rec.assignments]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def outcome_counts(records: Sequence[MissionRecord]) -> dict[str, int]:
    out = {o.value: 0 for o in Outcome}
    for r in records:
        out[r.outcome.value] += 1
    return out


__all__ = [
    "CONTROL_PERIOD_S", "FleetRecord", "FleetScenario", "Mission", "MissionRecord", "Outcome", "WindField", "flown_max_turn",
    "outcome_counts", "run_fleet", "run_mission", "traverse_edge", "write_assignments",
    "write_fleet_log",
]
