"""Truck/drone allocation: partition, truck tour, dynamic dispatch, clustering, conflicts."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .energy import EnergyParams, edge_energy_batch
from .graph import TimeGraph, Unreachable, shortest_path
from .wind import CALM, KinematicLimits


class Service(enum.Enum):
    TRUCK_ONLY = "truck"
    DRONE_CAPABLE = "drone"


@dataclass(frozen=True)
class Customer:
    id: int  # graph vertex the customer sits on
    position: tuple[float, float, float]
    payload: float = 0.0
    service: Service = Service.DRONE_CAPABLE

    def __post_init__(self):
        if self.payload < 0:
            raise ValueError("payload must be >= 0")


@dataclass(frozen=True)
class DroneSpec:
    capacity: float = 8.0
    speed: float = 15.0
    battery: float = 100.0

    def __post_init__(self):
        if min(self.capacity, self.speed, self.battery) <= 0:
            raise ValueError("drone capacity, speed and battery must be positive")


@dataclass(frozen=True)
class TruckPlan:
    route: tuple[int, ...]  # indices into the node list; 0 is the depot, first and last
    speed: float = 10.0
    length: float = 0.0


@dataclass(frozen=True)
class Assignment:
    t: float
    drone: int
    customer: int


# --- partition -----------------------------------------------------------


def round_trip_energy(g: TimeGraph, base: int, vertex: int, params: EnergyParams,
                      limits: KinematicLimits, calm: np.ndarray | None = None) -> float:
    """Calm-wind energy of the cheapest base -> vertex -> base round trip (Wh)."""
    if base == vertex:
        return 0.0
    if calm is None:
        calm = edge_energy_batch(g.lengths, g.dirs, CALM, limits, params)[1]
    try:
        _, out = shortest_path(g, calm, base, vertex)
        _, back = shortest_path(g, calm, vertex, base)
    except Unreachable:
        return math.inf
    return out + back


def drone_feasible(c: Customer, spec: DroneSpec, g: TimeGraph, base: int, params: EnergyParams,
                   limits: KinematicLimits) -> bool:
    if c.service is Service.TRUCK_ONLY or c.payload > spec.capacity:
        return False
    p = params.with_payload(c.payload)
    return round_trip_energy(g, base, c.id, p, limits) <= spec.battery


def partition_customers(customers: Sequence[Customer], spec: DroneSpec, g: TimeGraph,
                        params: EnergyParams, limits: KinematicLimits | None = None,
                        depot: int | None = None) -> tuple[list[Customer], list[Customer]]:
    """Split into (truck-served, drone-served); exhaustive and exclusive."""
    limits = limits or KinematicLimits(V_A=spec.speed)
    base = g.depot if depot is None else depot
    truck, drone = [], []
    for c in customers:
        (drone if drone_feasible(c, spec, g, base, params, limits) else truck).append(c)
    return truck, drone


# --- truck tour ----------------------------------------------------------


def tour_length(points: np.ndarray, tour: Sequence[int]) -> float:
    idx = list(tour)
    return float(sum(np.linalg.norm(points[a] - points[b]) for a, b in zip(idx, idx[1:])))


def _two_opt(points: np.ndarray, tour: list[int]) -> list[int]:
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    improved = True
    while improved:
        improved = False
        for i in range(1, len(tour) - 2):
            for j in range(i + 1, len(tour) - 1):
                a, b, c, e = tour[i - 1], tour[i], tour[j], tour[j + 1]
                if d[a, c] + d[b, e] < d[a, b] + d[c, e] - 1e-12:
                    tour[i:j + 1] = tour[i:j + 1][::-1]
                    improved = True
    return tour


def truck_tsp(nodes, seed=None, speed: float = 10.0) -> TruckPlan:
    """Nearest-neighbour tour from node 0 (the depot), then 2-opt to a local optimum.

    The construction is deterministic (ties go to the lower index); ``seed`` is
    accepted for interface symmetry and does not change the result.
    """
    pts = np.asarray(nodes, dtype=float)
    if pts.ndim != 2 or len(pts) < 1:
        raise ValueError("need at least one node")
    pts = pts[:, :2]
    n = len(pts)
    tour, left = [0], set(range(1, n))
    while left:
        last = pts[tour[-1]]
        nxt = min(left, key=lambda k: (float(np.linalg.norm(pts[k] - last)), k))
        tour.append(nxt)
        left.remove(nxt)
    tour.append(0)
    tour = _two_opt(pts, tour)
    return TruckPlan(tuple(tour), speed, tour_length(pts, tour))


def nearest_neighbour_length(nodes) -> float:
    pts = np.asarray(nodes, dtype=float)[:, :2]
    tour, left = [0], set(range(1, len(pts)))
    while left:
        last = pts[tour[-1]]
        nxt = min(left, key=lambda k: (float(np.linalg.norm(pts[k] - last)), k))
        tour.append(nxt)
        left.remove(nxt)
    return tour_length(pts, tour + [0])


# --- dispatch ------------------------------------------------------------


def dynamic_assign(t: float, truck_vertex: int, idle_drones: Mapping[int, DroneSpec],
                   unserved: Sequence[Customer], g: TimeGraph, params: EnergyParams,
                   limits: KinematicLimits | None = None) -> list[Assignment]:
    """Nearest feasible customer to the truck goes to the fastest idle drone, repeatedly."""
    idle = dict(idle_drones)
    truck_xy = np.asarray(g.pos[truck_vertex][:2])
    order = sorted(unserved, key=lambda c: (float(np.linalg.norm(np.asarray(c.position[:2]) - truck_xy)), c.id))
    out = []
    for c in order:
        if not idle:
            break
        drone = min(idle, key=lambda d: (-idle[d].speed, d))
        spec = idle[drone]
        lim = limits or KinematicLimits(V_A=spec.speed)
        if c.id == truck_vertex or not drone_feasible(c, spec, g, truck_vertex, params, lim):
            continue
        out.append(Assignment(t, drone, c.id))
        del idle[drone]
    return out


# --- clustering ----------------------------------------------------------


def _sse(x: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(((x - centers[labels]) ** 2).sum())


def kmeans_cluster(points, k: int, seed=0, max_iter: int = 100, tol: float = 1e-6,
                   return_history: bool = False):
    """Lloyd's algorithm from farthest-point seeding; labels are deterministic given ``seed``."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= number of points")
    rng = np.random.default_rng(seed)
    centers = [x[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1), axis=1)
        centers.append(x[int(np.argmax(d2))])
    centers = np.asarray(centers)
    history = []
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
        labels = np.argmin(d2, axis=1)
        history.append(_sse(x, labels, centers))
        new = centers.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = float(np.max(np.linalg.norm(new - centers, axis=1)))
        centers = new
        if shift < tol:
            break
    labels = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    history.append(_sse(x, labels, centers))
    if return_history:
        return labels, centers, history
    return labels


# --- conflicts -----------------------------------------------------------


def conflict_count(trajectories: Mapping[int, np.ndarray], d_safe: float) -> int:
    """Unordered drone pairs that come closer than ``d_safe`` at some shared timestamp.

    Each trajectory is an ``(T, 2)`` array on a common timebase; rows of NaN
    mean the drone is not airborne at that sample.
    """
    ids = sorted(trajectories)
    count = 0
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            pa, pb = np.asarray(trajectories[a]), np.asarray(trajectories[b])
            m = min(len(pa), len(pb))
            d = np.linalg.norm(pa[:m] - pb[:m], axis=1)
            if np.any(d[~np.isnan(d)] < d_safe):
                count += 1
    return count


def timed_positions(g: TimeGraph, path: Sequence[int], arrivals: Sequence[float],
                    timebase: np.ndarray) -> np.ndarray:
    """Straight-line interpolated (x, y) along a flown path; NaN outside the flight."""
    out = np.full((len(timebase), 2), np.nan)
    if len(path) < 2:
        return out
    t = np.asarray(arrivals, dtype=float)
    xy = np.asarray([g.pos[v][:2] for v in path])
    inside = (timebase >= t[0]) & (timebase <= t[-1])
    tb = timebase[inside]
    out[inside, 0] = np.interp(tb, t, xy[:, 0])
    out[inside, 1] = np.interp(tb, t, xy[:, 1])
    return out


__all__ = [
    "Assignment", "Customer", "DroneSpec", "Service", "TruckPlan", "conflict_count", "drone_feasible",
    "dynamic_assign", "kmeans_cluster", "nearest_neighbour_length", "partition_customers",
    "round_trip_energy", "timed_positions", "tour_length", "truck_tsp",
]
