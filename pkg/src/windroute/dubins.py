"""Planar Dubins paths, obstacle screening and waypoint-route refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_EPS = 1e-10


def mod2pi(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # a full extra loop is never part of a shortest word
    if a > TWO_PI - _EPS:
        a = 0.0
    return a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", mod2pi(self.heading))


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class DubinsPath:
    q0: Pose
    word: str
    segment_params: tuple[float, float, float]  # normalized by R (radians for arcs)
    R: float

    @property
    def segment_lengths(self) -> tuple[float, float, float]:
        return tuple(self.R * p for p in self.segment_params)

    @property
    def total_length(self) -> float:
        return self.R * sum(self.segment_params)

    @property
    def max_turn(self) -> float:
        """Largest single arc, in degrees."""
        arcs = [p for c, p in zip(self.word, self.segment_params) if c != "S"]
        return math.degrees(max(arcs)) if arcs else 0.0

    def sample(self, s: np.ndarray) -> np.ndarray:
        """Poses ``(x, y, heading)`` at arc lengths ``s`` (clipped to the path)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.total_length)
        out = np.empty((len(s), 3))
        x, y, th = 0.0, 0.0, self.q0.heading
        start = 0.0
        bounds = np.cumsum(self.segment_lengths)
        for k, (c, L) in enumerate(zip(self.word, self.segment_lengths)):
            mask = (s >= start) & ((s < bounds[k]) if k < 2 else np.ones_like(s, dtype=bool))
            u = (s[mask] - start) / self.R
            px, py, pth = _advance(c, x, y, th, u)
            out[mask, 0], out[mask, 1], out[mask, 2] = px, py, pth
            x, y, th = _advance(c, x, y, th, L / self.R)
            start = bounds[k]
        out[:, 0] = self.q0.x + self.R * out[:, 0]
        out[:, 1] = self.q0.y + self.R * out[:, 1]
        out[:, 2] = np.mod(out[:, 2], TWO_PI)
        return out

    def end_pose(self) -> Pose:
        x, y, h = self.sample(np.array([self.total_length]))[0]
        return Pose(float(x), float(y), float(h))


def _advance(c: str, x, y, th, u):
    """Move along one unit-radius segment type by normalized extent ``u``."""
    if c == "L":
        return x + np.sin(th + u) - math.sin(th), y - np.cos(th + u) + math.cos(th), th + u
    if c == "R":
        return x - np.sin(th - u) + math.sin(th), y + np.cos(th - u) - math.cos(th), th - u
    return x + np.cos(th) * u, y + np.sin(th) * u, th + 0.0 * u


def _word_params(word: str, a: float, b: float, d: float):
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    cab = math.cos(a - b)
    if word == "LSL":
        p2 = 2 + d * d - 2 * cab + 2 * d * (sa - sb)
        if p2 < 0:
            return None
        tmp = math.atan2(cb - ca, d + sa - sb)
        return mod2pi(-a + tmp), math.sqrt(p2), mod2pi(b - tmp)
    if word == "RSR":
        p2 = 2 + d * d - 2 * cab + 2 * d * (sb - sa)
        if p2 < 0:
            return None
        tmp = math.atan2(ca - cb, d - sa + sb)
        return mod2pi(a - tmp), math.sqrt(p2), mod2pi(-b + tmp)
    if word == "LSR":
        p2 = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
        if p2 < 0:
            return None
        p = math.sqrt(p2)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return mod2pi(-a + tmp), p, mod2pi(-b + tmp)
    if word == "RSL":
        p2 = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
        if p2 < 0:
            return None
        p = math.sqrt(p2)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return mod2pi(a - tmp), p, mod2pi(b - tmp)
    if word == "RLR":
        tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
        if abs(tmp) > 1:
            return None
        p = mod2pi(TWO_PI - math.acos(tmp))
        t = mod2pi(a - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        return t, p, mod2pi(a - b - t + p)
    if word == "LRL":
        tmp = (6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0
        if abs(tmp) > 1:
            return None
        p = mod2pi(TWO_PI - math.acos(tmp))
        t = mod2pi(-a - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
        return t, p, mod2pi(b - a - t + p)
    raise ValueError(word)


def dubins_candidates(q0: Pose, q1: Pose, R: float) -> list[DubinsPath]:
    if not R > 0:
        raise ValueError("turning radius must be positive")
    dx, dy = q1.x - q0.x, q1.y - q0.y
    d = math.hypot(dx, dy) / R
    theta = mod2pi(math.atan2(dy, dx)) if d > 0 else 0.0
    a, b = mod2pi(q0.heading - theta), mod2pi(q1.heading - theta)
    out = []
    for w in WORDS:
        prm = _word_params(w, a, b, d)
        if prm is not None:
            out.append(DubinsPath(q0, w, tuple(float(x) for x in prm), R))
    return out


def dubins_shortest(q0: Pose, q1: Pose, R: float) -> DubinsPath:
    """Shortest of the six words; ties keep the earlier word in ``WORDS`` order."""
    best = None
    for cand in dubins_candidates(q0, q1, R):
        if best is None or cand.total_length < best.total_length - 1e-12 * R:
            best = cand
    return best


def _sample_grid(length: float, step: float) -> np.ndarray:
    n = max(int(math.ceil(length / step)), 1)
    return np.linspace(0.0, length, n + 1)


def points_clear(xy: np.ndarray, obstacles: Sequence[Obstacle], clearance: float) -> bool:
    for ob in obstacles:
        d = np.hypot(xy[:, 0] - ob.center[0], xy[:, 1] - ob.center[1])
        if np.any(d <= ob.radius + clearance):
            return False
    return True


def collision_free(path: DubinsPath, obstacles: Sequence[Obstacle], step: float = 1.0,
                   clearance: float = 2.0) -> bool:
    """True iff every sample (spacing <= ``step``) is strictly outside every inflated disc."""
    if not step > 0:
        raise ValueError("sampling step must be positive")
    if not obstacles:
        return True
    pts = path.sample(_sample_grid(path.total_length, step))
    return points_clear(pts[:, :2], obstacles, clearance)


def segment_clear(a, b, obstacles: Sequence[Obstacle], clearance: float = 2.0) -> bool:
    """Exact test of a straight chord against inflated discs."""
    ax, ay = float(a[0]), float(a[1])
    dx, dy = float(b[0]) - ax, float(b[1]) - ay
    L2 = dx * dx + dy * dy
    for ob in obstacles:
        cx, cy = ob.center
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((cx - ax) * dx + (cy - ay) * dy) / L2))
        if math.hypot(ax + t * dx - cx, ay + t * dy - cy) <= ob.radius + clearance:
            return False
    return True


def assign_headings(points: np.ndarray) -> list[float]:
    """Bisector headings at interior waypoints; ends follow their segment."""
    n = len(points)
    dirs = []
    for i in range(n - 1):
        d = points[i + 1] - points[i]
        dirs.append(d / np.hypot(*d))
    heads = [math.atan2(dirs[0][1], dirs[0][0])]
    for i in range(1, n - 1):
        s = dirs[i - 1] + dirs[i]
        if np.hypot(*s) < 1e-9:  # reversal: no bisector, turn left of the incoming track
            s = np.array([-dirs[i - 1][1], dirs[i - 1][0]])
        heads.append(math.atan2(s[1], s[0]))
    heads.append(math.atan2(dirs[-1][1], dirs[-1][0]))
    return heads


@dataclass
class RefinedRoute:
    waypoints: np.ndarray
    pieces: list  # DubinsPath, or ("chord", start, end) for blocked segments
    blocked: list[int]
    trajectory: np.ndarray  # rows (s, x, y, heading)
    total_length: float
    max_turn: float
    _offsets: np.ndarray = field(repr=False, default=None)

    def resample(self, spacing: float) -> np.ndarray:
        """Poses ``(s, x, y, heading)`` at uniform arc-length ``spacing`` over the whole route."""
        s_all = _sample_grid(self.total_length, spacing)
        out = np.empty((len(s_all), 4))
        out[:, 0] = s_all
        for k, piece in enumerate(self.pieces):
            lo, hi = self._offsets[k], self._offsets[k + 1]
            last = k == len(self.pieces) - 1
            mask = (s_all >= lo) & ((s_all <= hi) if last else (s_all < hi))
            out[mask, 1:] = _piece_sample(piece, s_all[mask] - lo)
        return out


def _piece_length(piece) -> float:
    if isinstance(piece, DubinsPath):
        return piece.total_length
    _, a, b = piece
    return float(np.hypot(b[0] - a[0], b[1] - a[1]))


def _piece_sample(piece, s: np.ndarray) -> np.ndarray:
    if isinstance(piece, DubinsPath):
        return piece.sample(s)
    _, a, b = piece
    L = _piece_length(piece)
    h = math.atan2(b[1] - a[1], b[0] - a[0])
    f = np.clip(s / L, 0.0, 1.0)
    return np.column_stack([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]),
                            np.full(len(s), mod2pi(h))])


def _turn_runs(pieces) -> float:
    """Largest continuous same-direction turn (rad) across consecutive pieces."""
    best, run, run_dir = 0.0, 0.0, None
    for piece in pieces:
        if not isinstance(piece, DubinsPath):
            run, run_dir = 0.0, None
            continue
        for c, p in zip(piece.word, piece.segment_params):
            if p * piece.R < 1e-9:
                continue
            if c == "S":
                run, run_dir = 0.0, None
            elif c == run_dir:
                run += p
            else:
                run, run_dir = p, c
            best = max(best, run)
    return best


def refine_route(waypoints, R: float, obstacles: Sequence[Obstacle] = (), step: float = 1.0,
                 clearance: float = 2.0) -> RefinedRoute:
    """Connect consecutive waypoints with shortest Dubins paths.

    Colliding pieces are listed in ``blocked`` and replaced by their straight
    chord. ``max_turn`` (degrees) is the largest continuous turn in one
    direction, so arcs meeting at a waypoint add up.
    """
    pts = np.asarray([(float(p[0]), float(p[1])) for p in waypoints])
    if len(pts) < 2:
        raise ValueError("need at least two waypoints")
    keep = [0] + [i for i in range(1, len(pts)) if np.hypot(*(pts[i] - pts[i - 1])) > 1e-9]
    pts = pts[keep]
    if len(pts) < 2:
        traj = np.array([[0.0, pts[0, 0], pts[0, 1], 0.0]])
        return RefinedRoute(pts, [], [], traj, 0.0, 0.0, np.zeros(1))
    heads = assign_headings(pts)
    pieces, blocked = [], []
    for i in range(len(pts) - 1):
        q0 = Pose(pts[i, 0], pts[i, 1], heads[i])
        q1 = Pose(pts[i + 1, 0], pts[i + 1, 1], heads[i + 1])
        path = dubins_shortest(q0, q1, R)
        if obstacles and not collision_free(path, obstacles, step, clearance):
            blocked.append(i)
            pieces.append(("chord", tuple(pts[i]), tuple(pts[i + 1])))
        else:
            pieces.append(path)
    lengths = np.array([_piece_length(p) for p in pieces])
    offsets = np.concatenate([[0.0], np.cumsum(lengths)])
    route = RefinedRoute(pts, pieces, blocked, np.empty((0, 4)), float(offsets[-1]),
                         math.degrees(_turn_runs(pieces)), offsets)
    route.trajectory = route.resample(step)
    return route


def max_step_turn(poses: np.ndarray) -> float:
    """Largest heading change (degrees) between consecutive pose samples."""
    h = np.asarray(poses)[:, -1]
    if len(h) < 2:
        return 0.0
    d = np.abs((np.diff(h) + math.pi) % TWO_PI - math.pi)
    return float(np.degrees(d.max()))


def polyline_max_turn(points) -> float:
    """Largest corner angle (degrees) of the raw waypoint polyline."""
    pts = np.asarray([(float(p[0]), float(p[1])) for p in points])
    seg = np.diff(pts, axis=0)
    seg = seg[np.hypot(seg[:, 0], seg[:, 1]) > 1e-9]
    if len(seg) < 2:
        return 0.0
    h = np.arctan2(seg[:, 1], seg[:, 0])
    d = np.abs((np.diff(h) + math.pi) % TWO_PI - math.pi)
    return float(np.degrees(d.max()))


def write_trajectory(path, poses: np.ndarray) -> None:
    lines = ["s_m,x,y,heading_rad"]
    lines += [",".join(repr(float(v)) for v in row) for row in poses]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
