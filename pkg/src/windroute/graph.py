"""Directed waypoint graph with wind-dependent edge costs."""
from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .energy import EnergyParams, edge_energy, edge_energy_batch
from .wind import (
    CALM,
    DEFAULT_LADDER,
    KinematicLimits,
    MarkovWind,
    WindVector,
    class_representative,
    classify_wind,
)

L_SE_FLOOR = 0.05


class VertexKind(enum.Enum):
    DEPOT = "depot"
    WAYPOINT = "waypoint"
    CUSTOMER = "customer"


@dataclass(frozen=True)
class Vertex:
    id: int
    position: tuple[float, float, float]
    kind: VertexKind = VertexKind.WAYPOINT


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    length: float
    direction: tuple[float, float, float]


class Unreachable(Exception):
    pass


class TimeGraph:
    """Vertices, directed edges and adjacency; edge geometry is always derived from positions.

    Vertex ids must be ``0..n-1`` and edge ids ``0..m-1`` (list positions).
    """

    def __init__(self, vertices: Sequence[Vertex], arcs: Sequence[tuple[int, int]],
                 blocked: Sequence[bool] | None = None):
        self.vertices = tuple(vertices)
        n = len(self.vertices)
        if [v.id for v in self.vertices] != list(range(n)):
            raise ValueError("vertex ids must be 0..n-1 in order")
        depots = [v.id for v in self.vertices if v.kind is VertexKind.DEPOT]
        if len(depots) != 1:
            raise ValueError(f"graph needs exactly one depot, found {len(depots)}")
        self.depot = depots[0]
        self.pos = np.array([v.position for v in self.vertices], dtype=float)

        edges = []
        seen = set()
        for eid, (a, b) in enumerate(arcs):
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"bad arc {a}->{b}")
            if (a, b) in seen:
                raise ValueError(f"duplicate arc {a}->{b}")
            seen.add((a, b))
            d = self.pos[b] - self.pos[a]
            length = float(np.sqrt(d @ d))
            if not length > 0:
                raise ValueError(f"arc {a}->{b} has zero length")
            edges.append(Edge(eid, a, b, length, tuple(float(x) for x in d / length)))
        self.edges = tuple(edges)
        m = len(edges)
        self.src = np.array([e.src for e in edges], dtype=np.int64)
        self.dst = np.array([e.dst for e in edges], dtype=np.int64)
        self.lengths = np.array([e.length for e in edges], dtype=float)
        self.dirs = np.array([e.direction for e in edges], dtype=float).reshape(m, 3)
        self.blocked = np.zeros(m, dtype=bool) if blocked is None else np.asarray(blocked, dtype=bool)
        self.out_edges: list[list[int]] = [[] for _ in range(n)]
        self.in_edges: list[list[int]] = [[] for _ in range(n)]
        for e in edges:
            self.out_edges[e.src].append(e.id)
            self.in_edges[e.dst].append(e.id)
        self._edge_of = {(e.src, e.dst): e.id for e in edges}

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_between(self, a: int, b: int) -> int:
        return self._edge_of[(a, b)]

    def path_edges(self, path: Sequence[int]) -> list[int]:
        return [self._edge_of[(a, b)] for a, b in zip(path, path[1:])]

    def with_blocked(self, blocked: Sequence[bool]) -> TimeGraph:
        return TimeGraph(self.vertices, [(e.src, e.dst) for e in self.edges], blocked)

    def with_kinds(self, kinds: dict[int, VertexKind]) -> TimeGraph:
        verts = [Vertex(v.id, v.position, kinds.get(v.id, v.kind)) for v in self.vertices]
        return TimeGraph(verts, [(e.src, e.dst) for e in self.edges], self.blocked)

    # -- serialization --

    def to_json(self) -> str:
        doc = {
            "vertices": [[v.id, *v.position, v.kind.value] for v in self.vertices],
            "edges": [[e.id, e.src, e.dst] for e in self.edges],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> TimeGraph:
        doc = json.loads(text)
        verts = [Vertex(int(i), (float(x), float(y), float(z)), VertexKind(k))
                 for i, x, y, z, k in doc["vertices"]]
        edges = sorted(doc["edges"], key=lambda r: int(r[0]))
        if [int(r[0]) for r in edges] != list(range(len(edges))):
            raise ValueError("edge ids must be 0..m-1")
        return cls(verts, [(int(a), int(b)) for _, a, b in edges])


def generate_er(n: int, p: float, area=(15000.0, 15000.0, (50.0, 150.0)), seed=0) -> TimeGraph:
    """Erdos-Renyi digraph over uniform random positions, augmented to strong connectivity.

    Vertex 0 is the depot. A random spanning tree is added in both directions so
    every vertex can reach every other one.
    """
    if n < 2:
        raise ValueError("need at least two vertices")
    if not 0 < p <= 1:
        raise ValueError("edge probability must be in (0, 1]")
    x_max, y_max, (z_lo, z_hi) = area
    rng = np.random.default_rng(seed)
    xy = rng.uniform((0.0, 0.0), (x_max, y_max), size=(n, 2))
    z = rng.uniform(z_lo, z_hi, size=n) if z_hi > z_lo else np.full(n, float(z_lo))
    coin = rng.random((n, n)) < p
    arcs = {(i, j) for i in range(n) for j in range(n) if i != j and coin[i, j]}
    order = rng.permutation(n)
    for k in range(1, n):
        parent = int(order[rng.integers(k)])
        child = int(order[k])
        arcs.add((child, parent))
        arcs.add((parent, child))
    verts = [Vertex(i, (float(xy[i, 0]), float(xy[i, 1]), float(z[i])),
                    VertexKind.DEPOT if i == 0 else VertexKind.WAYPOINT) for i in range(n)]
    return TimeGraph(verts, sorted(arcs))


def reaches(g: TimeGraph, target: int, usable: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask of vertices with a path to ``target`` over usable edges."""
    mask = np.zeros(g.n, dtype=bool)
    mask[target] = True
    stack = [target]
    while stack:
        u = stack.pop()
        for eid in g.in_edges[u]:
            if usable is not None and not usable[eid]:
                continue
            s = int(g.src[eid])
            if not mask[s]:
                mask[s] = True
                stack.append(s)
    return mask


# --- edge costs -------------------------------------------------------------


def edge_cost(e: Edge, w: WindVector, lam: float, limits: KinematicLimits, params: EnergyParams) -> float:
    """Wind-sensitive synthetic distance of one edge (m); ``inf`` when unflyable."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    calm = edge_energy(e.length, e.direction, CALM, limits, params)
    windy = edge_energy(e.length, e.direction, w, limits, params)
    if not (calm.feasible and windy.feasible):
        return math.inf
    l_wind = e.length * (windy.energy - calm.energy) / calm.energy
    return max(e.length + lam * l_wind, L_SE_FLOOR * e.length)


def synthetic_distance_batch(g: TimeGraph, e_wind: np.ndarray, e_calm: np.ndarray, lam: float) -> np.ndarray:
    L = g.lengths
    with np.errstate(invalid="ignore"):
        l_wind = L * (e_wind - e_calm) / e_calm
        lse = np.maximum(L + lam * l_wind, L_SE_FLOOR * L)
    return np.where(np.isfinite(e_wind) & np.isfinite(e_calm), lse, np.inf)


@dataclass(frozen=True)
class CostSnapshot:
    t: float
    L_SE: np.ndarray
    energy: np.ndarray
    feasible: np.ndarray


def snapshot(g: TimeGraph, wind: WindVector, lam: float, limits: KinematicLimits,
             params: EnergyParams, t: float = 0.0) -> CostSnapshot:
    """Frozen per-edge costs under one wind value."""
    _, e_w, _, code = edge_energy_batch(g.lengths, g.dirs, wind, limits, params)
    _, e_0, _, _ = edge_energy_batch(g.lengths, g.dirs, CALM, limits, params)
    return CostSnapshot(t, synthetic_distance_batch(g, e_w, e_0, lam), e_w, code == 0)


@dataclass(frozen=True)
class UncertaintyModel:
    """Which wind classes count as one step away from the current estimate.

    With a Markov ``process`` the reachable classes are the positive entries of
    the estimate's transition row (the current class excluded). Without one, the
    log-replay neighbourhood is used: both angular neighbours at the same
    magnitude plus one rung up the ladder.
    """

    K: int = 4
    ladder: tuple[float, ...] = DEFAULT_LADDER
    process: MarkovWind | None = None
    cap: float = 5.0
    mode: str = "worst"

    def __post_init__(self):
        if self.mode not in ("worst", "expected"):
            raise ValueError("uncertainty mode must be 'worst' or 'expected'")
        if self.process is not None and self.process.K != self.K:
            raise ValueError("Markov process K must match the uncertainty model K")

    def neighbours(self, est: WindVector) -> list[tuple[WindVector, float]]:
        c = classify_wind(est, self.K, self.ladder)
        if self.process is not None:
            row = self.process.transition[c.index]
            return [(self.process.representative(j), pj)
                    for j, pj in enumerate(row) if pj > 0 and j != c.index]
        out = []
        for di in (-1, 1):
            nb = type(c)((c.index + di) % c.K, c.K, c.magnitude_level, c.ladder)
            out.append(class_representative(nb))
        if c.magnitude_level + 1 < len(c.ladder):
            out.append(class_representative(type(c)(c.index, c.K, c.magnitude_level + 1, c.ladder)))
        return [(w, 1.0 / 3.0) for w in out]


def uncertainty(e: Edge, est: WindVector, model: UncertaintyModel, limits: KinematicLimits,
                params: EnergyParams) -> float:
    """Upside energy deviation (Wh) if the wind moves one class away from ``est``."""
    base = edge_energy(e.length, e.direction, est, limits, params)
    if not base.feasible:
        return model.cap
    devs = []
    for w, prob in model.neighbours(est):
        alt = edge_energy(e.length, e.direction, w, limits, params)
        d = model.cap if not alt.feasible else max(alt.energy - base.energy, 0.0)
        devs.append((d, prob))
    if not devs:
        return 0.0
    if model.mode == "worst":
        return max(d for d, _ in devs)
    return sum(d * p for d, p in devs)


def surrogate_cost(e: Edge, est: WindVector, lam: float, model: UncertaintyModel,
                   limits: KinematicLimits, params: EnergyParams) -> float:
    base = edge_energy(e.length, e.direction, est, limits, params)
    if not base.feasible:
        return math.inf
    return base.energy + lam * uncertainty(e, est, model, limits, params)


class CostModel:
    """Per-graph cache of vectorized energy / uncertainty arrays keyed by wind value."""

    def __init__(self, g: TimeGraph, limits: KinematicLimits, params: EnergyParams,
                 unc: UncertaintyModel, cache_size: int = 256):
        self.g, self.limits, self.params, self.unc = g, limits, params, unc
        self._energy: dict = {}
        self._unc: dict = {}
        self._cache_size = cache_size
        self.calm = self.energy(CALM)

    def energy(self, w: WindVector) -> np.ndarray:
        key = (w.speed, w.direction, w.vertical)
        hit = self._energy.get(key)
        if hit is None:
            if len(self._energy) >= self._cache_size:
                self._energy.clear()
            hit = edge_energy_batch(self.g.lengths, self.g.dirs, w, self.limits, self.params)[1]
            hit.setflags(write=False)
            self._energy[key] = hit
        return hit

    def uncertainty(self, est: WindVector) -> np.ndarray:
        key = (est.speed, est.direction, est.vertical)
        hit = self._unc.get(key)
        if hit is None:
            if len(self._unc) >= self._cache_size:
                self._unc.clear()
            base = self.energy(est)
            nbs = self.unc.neighbours(est)
            hit = np.zeros(self.g.lengths.shape)
            for w, prob in nbs:
                alt = self.energy(w)
                with np.errstate(invalid="ignore"):
                    d = np.where(np.isfinite(alt), np.maximum(alt - base, 0.0), self.unc.cap)
                d = np.where(np.isfinite(base), d, self.unc.cap)
                hit = np.maximum(hit, d) if self.unc.mode == "worst" else hit + prob * d
            hit.setflags(write=False)
            self._unc[key] = hit
        return hit

    def surrogate(self, est: WindVector, lam: float) -> np.ndarray:
        base = self.energy(est)
        if lam == 0.0:
            return base
        return base + lam * self.uncertainty(est)


# --- shortest paths ---------------------------------------------------------


CostLike = np.ndarray | Sequence[float] | Callable[[int], float]


def _cost_fn(costs) -> Callable[[int], float]:
    if callable(costs):
        return costs
    if isinstance(costs, CostSnapshot):
        arr = costs.L_SE
    else:
        arr = costs
    return lambda eid: float(arr[eid])


def shortest_path(g: TimeGraph, costs, src: int, dst: int) -> tuple[list[int], float]:
    """Dijkstra; equal totals resolve to the lexicographically smallest vertex sequence.

    ``costs`` is a per-edge array, a :class:`CostSnapshot` (uses ``L_SE``) or a
    callable ``edge_id -> cost``. Non-finite costs mark unusable edges. Raises
    :class:`Unreachable`.
    """
    cost = _cost_fn(costs)
    if src == dst:
        return [src], 0.0
    best: dict[int, tuple[float, tuple[int, ...]]] = {src: (0.0, (src,))}
    heap = [(0.0, (src,))]
    done = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done or best[u] != (d, path):
            continue
        done.add(u)
        if u == dst:
            return list(path), d
        for eid in g.out_edges[u]:
            w = cost(eid)
            if not math.isfinite(w):
                continue
            if w < 0:
                raise ValueError("negative edge cost")
            v = int(g.dst[eid])
            if v in done:
                continue
            cand = (d + w, path + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    raise Unreachable(f"{dst} unreachable from {src}")


def costs_to(g: TimeGraph, costs: np.ndarray, target: int) -> tuple[np.ndarray, np.ndarray]:
    """Cost-to-go to ``target`` from every vertex and the first edge of that route.

    Ties prefer the smaller next-vertex id. Unreachable vertices get ``inf`` and
    next edge ``-1``.
    """
    dist = np.full(g.n, math.inf)
    nxt = np.full(g.n, -1, dtype=np.int64)
    dist[target] = 0.0
    heap = [(0.0, target)]
    done = np.zeros(g.n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for eid in g.in_edges[u]:
            w = costs[eid]
            if not w < math.inf:
                continue
            s = int(g.src[eid])
            if done[s]:
                continue
            nd = d + w
            if nd < dist[s] or (nd == dist[s] and u < int(g.dst[nxt[s]])):
                dist[s] = nd
                nxt[s] = eid
                heapq.heappush(heap, (nd, s))
    return dist, nxt


def follow(g: TimeGraph, nxt: np.ndarray, v: int, target: int) -> list[int]:
    """Edge ids from ``v`` to ``target`` along next-edge pointers."""
    out = []
    while v != target:
        eid = int(nxt[v])
        if eid < 0:
            raise Unreachable(f"{target} unreachable from {v}")
        out.append(eid)
        v = int(g.dst[eid])
    return out


def path_cost(g: TimeGraph, costs, path: Sequence[int]) -> float:
    cost = _cost_fn(costs)
    total = 0.0
    for eid in g.path_edges(path):
        total += cost(eid)
    return total


# --- conservative return --------------------------------------------------


def worst_case_prices(g: TimeGraph, limits: KinematicLimits, params: EnergyParams,
                      worst_wind: float) -> np.ndarray:
    """Per-edge energy under a ``worst_wind`` headwind against the edge's ground track.

    An edge is priced ``inf`` if any horizontal wind up to ``worst_wind`` could
    make it unflyable (the tailwind extreme maximizes the climb angle).
    """
    if worst_wind >= limits.V_A:
        raise ValueError("worst-case wind must stay below airspeed")
    prices = np.empty(len(g.edges))
    for e in g.edges:
        ux, uy, _ = e.direction
        track = math.atan2(uy, ux) if (ux, uy) != (0.0, 0.0) else 0.0
        head = WindVector(worst_wind, track + math.pi)
        tail = WindVector(worst_wind, track)
        h = edge_energy(e.length, e.direction, head, limits, params)
        ok_tail = edge_energy(e.length, e.direction, tail, limits, params).feasible
        prices[e.id] = h.energy if (h.feasible and ok_tail) else math.inf
    return prices


class ReturnOracle:
    """Memoized conservative return-to-depot energies and routes for one graph."""

    def __init__(self, g: TimeGraph, limits: KinematicLimits, params: EnergyParams,
                 worst_wind: float, depot: int | None = None):
        self.g = g
        self.depot = g.depot if depot is None else depot
        self.prices = worst_case_prices(g, limits, params, worst_wind)
        self.cost, self.next_edge = costs_to(g, self.prices, self.depot)

    def route(self, v: int) -> list[int]:
        return follow(self.g, self.next_edge, v, self.depot)


def conservative_return_cost(g: TimeGraph, v: int, depot: int, limits: KinematicLimits,
                             params: EnergyParams, worst_wind: float) -> float:
    """Worst-case-headwind return energy (Wh) from ``v``; raises :class:`Unreachable`."""
    c = ReturnOracle(g, limits, params, worst_wind, depot).cost[v]
    if not math.isfinite(c):
        raise Unreachable(f"no conservative return from {v}")
    return float(c)
