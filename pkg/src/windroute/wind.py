"""Wind vectors, the wind triangle, K-class discretization and wind processes."""
from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

DEFAULT_LADDER = (0.0, 3.0, 6.0, 9.0)


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:  # fmod of a tiny negative can round up to exactly 2*pi
        theta = 0.0
    return theta


@dataclass(frozen=True)
class WindVector:
    """Horizontal wind in polar form plus a vertical channel.

    ``direction`` is the heading the air mass moves toward, so the Cartesian
    form is ``(speed*cos(direction), speed*sin(direction), vertical)``.
    """

    speed: float
    direction: float = 0.0
    vertical: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"wind speed must be finite and >= 0, got {self.speed}")
        if not math.isfinite(self.direction) or not math.isfinite(self.vertical):
            raise ValueError("wind direction and vertical component must be finite")
        object.__setattr__(self, "direction", normalize_angle(self.direction))

    @classmethod
    def from_cartesian(cls, x: float, y: float, z: float = 0.0) -> WindVector:
        speed = math.hypot(x, y)
        direction = math.atan2(y, x) if speed > 0.0 else 0.0
        return cls(speed, direction, z)

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (
            self.speed * math.cos(self.direction),
            self.speed * math.sin(self.direction),
            self.vertical,
        )


CALM = WindVector(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class KinematicLimits:
    V_A: float = 15.0
    gamma_min: float = -math.radians(30.0)
    gamma_max: float = math.radians(30.0)
    kappa_max: float = 1.0 / 150.0

    def __post_init__(self):
        if self.V_A <= 0.0:
            raise ValueError("airspeed must be positive")
        if not (self.gamma_min <= 0.0 <= self.gamma_max):
            raise ValueError("flight-path angle limits must bracket zero")
        if self.kappa_max <= 0.0:
            raise ValueError("curvature bound must be positive")

    @property
    def turn_radius(self) -> float:
        return 1.0 / self.kappa_max


class Feasibility(enum.Enum):
    FEASIBLE = "feasible"
    CROSSWIND_EXCEEDS = "crosswind_exceeds"
    NONPOSITIVE_GROUND_SPEED = "nonpositive_ground_speed"
    FLIGHT_PATH_ANGLE_EXCEEDED = "flight_path_angle_exceeded"

    def __bool__(self) -> bool:
        return self is Feasibility.FEASIBLE


# integer codes used by the vectorized solver
_FEAS_CODES = (
    Feasibility.FEASIBLE,
    Feasibility.CROSSWIND_EXCEEDS,
    Feasibility.NONPOSITIVE_GROUND_SPEED,
    Feasibility.FLIGHT_PATH_ANGLE_EXCEEDED,
)


@dataclass(frozen=True)
class TriangleSolution:
    V_A_par: float
    W_par: float
    W_perp: float
    V_G: float
    gamma_A: float
    feasibility: Feasibility

    @property
    def feasible(self) -> bool:
        return self.feasibility is Feasibility.FEASIBLE


def solve_wind_triangle(path_dir, limits: KinematicLimits, wind: WindVector) -> TriangleSolution:
    """Airspeed split, ground speed and air-relative climb angle along ``path_dir``."""
    ux, uy, uz = (float(c) for c in path_dir)
    norm = math.sqrt(ux * ux + uy * uy + uz * uz)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"path direction must be a unit vector (|u| = {norm})")
    wx, wy, wz = wind.xyz
    V_A = limits.V_A

    w_par = wx * ux + wy * uy + wz * uz
    px, py, pz = wx - w_par * ux, wy - w_par * uy, wz - w_par * uz
    w_perp = math.sqrt(px * px + py * py + pz * pz)
    if w_perp > V_A:
        return TriangleSolution(math.nan, w_par, w_perp, math.nan, math.nan,
                                Feasibility.CROSSWIND_EXCEEDS)

    va_par = math.sqrt(V_A * V_A - w_perp * w_perp)
    v_g = va_par + w_par
    # air velocity = va_par*u - w_perp_vec, magnitude V_A by construction
    vz_air = va_par * uz - pz
    gamma = math.asin(max(-1.0, min(1.0, vz_air / V_A)))
    if v_g <= 0.0:
        feas = Feasibility.NONPOSITIVE_GROUND_SPEED
    elif gamma < limits.gamma_min or gamma > limits.gamma_max:
        feas = Feasibility.FLIGHT_PATH_ANGLE_EXCEEDED
    else:
        feas = Feasibility.FEASIBLE
    return TriangleSolution(va_par, w_par, w_perp, v_g, gamma, feas)


def solve_wind_triangle_batch(dirs: np.ndarray, limits: KinematicLimits, wind_xyz) -> dict:
    """Vectorized :func:`solve_wind_triangle` over an ``(n, 3)`` array of unit directions.

    Returns a dict of arrays ``V_A_par, W_par, W_perp, V_G, gamma_A, code`` where
    ``code`` indexes ``(FEASIBLE, CROSSWIND, NONPOSITIVE, GAMMA)``.
    """
    dirs = np.asarray(dirs, dtype=float)
    w = np.asarray(wind_xyz, dtype=float)
    V_A = limits.V_A
    ux, uy, uz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    w_par = w[0] * ux + w[1] * uy + w[2] * uz
    px, py, pz = w[0] - w_par * ux, w[1] - w_par * uy, w[2] - w_par * uz
    w_perp = np.sqrt(px * px + py * py + pz * pz)
    cross = w_perp > V_A
    with np.errstate(invalid="ignore"):
        va_par = np.sqrt(V_A * V_A - w_perp * w_perp)
    va_par = np.where(cross, np.nan, va_par)
    v_g = va_par + w_par
    vz_air = va_par * uz - pz
    gamma = np.arcsin(np.clip(vz_air / V_A, -1.0, 1.0))
    code = np.zeros(len(dirs), dtype=np.int8)
    gamma_bad = (gamma < limits.gamma_min) | (gamma > limits.gamma_max)
    code[gamma_bad] = 3
    code[v_g <= 0.0] = 2
    code[cross] = 1
    return {"V_A_par": va_par, "W_par": w_par, "W_perp": w_perp,
            "V_G": v_g, "gamma_A": gamma, "code": code}


def feasibility_from_code(code: int) -> Feasibility:
    return _FEAS_CODES[int(code)]


# --- discretization -------------------------------------------------------


@dataclass(frozen=True)
class WindClass:
    index: int
    K: int
    magnitude_level: int
    ladder: tuple[float, ...] = DEFAULT_LADDER

    def __post_init__(self):
        if self.K not in (4, 8):
            raise ValueError("K must be 4 or 8")
        if not 0 <= self.index < self.K:
            raise ValueError("class index out of range")
        if not 0 <= self.magnitude_level < len(self.ladder):
            raise ValueError("magnitude level out of range")


def _check_ladder(ladder: Sequence[float]) -> tuple[float, ...]:
    ladder = tuple(float(x) for x in ladder)
    if not ladder:
        raise ValueError("magnitude ladder must be non-empty")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("magnitude ladder must be strictly increasing")
    return ladder


def sector_index(direction: float, K: int) -> int:
    width = TWO_PI / K
    return int(math.floor((normalize_angle(direction) + width / 2.0) / width)) % K


def classify_wind(w: WindVector, K: int, ladder: Sequence[float] = DEFAULT_LADDER) -> WindClass:
    """Map a wind vector to its angular sector and nearest ladder magnitude."""
    if K not in (4, 8):
        raise ValueError("K must be 4 or 8")
    ladder = _check_ladder(ladder)
    level = 0
    best = abs(w.speed - ladder[0])
    for i, m in enumerate(ladder[1:], start=1):
        d = abs(w.speed - m)
        if d < best:  # strict: ties stay on the lower rung
            best, level = d, i
    return WindClass(sector_index(w.direction, K), K, level, ladder)


def class_representative(c: WindClass) -> WindVector:
    return WindVector(c.ladder[c.magnitude_level], TWO_PI * c.index / c.K, 0.0)


def quantize(w: WindVector, K: int, ladder: Sequence[float] = DEFAULT_LADDER) -> WindVector:
    """Snap an observation to the representative of its wind class."""
    return class_representative(classify_wind(w, K, ladder))


# --- estimation -----------------------------------------------------------


@dataclass(frozen=True)
class WindEstimate:
    vector: WindVector
    last_update: float
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def update_estimate(prev: WindEstimate, observed: WindVector, t: float) -> WindEstimate:
    """Exponential smoothing in Cartesian components."""
    if t < prev.last_update:
        raise ValueError("estimate updates must move forward in time")
    a = prev.alpha
    if a == 1.0:
        return WindEstimate(observed, t, a)
    if a == 0.0:
        return WindEstimate(prev.vector, t, a)
    px, py, pz = prev.vector.xyz
    ox, oy, oz = observed.xyz
    vec = WindVector.from_cartesian(a * ox + (1 - a) * px, a * oy + (1 - a) * py, a * oz + (1 - a) * pz)
    return WindEstimate(vec, t, a)


# --- processes ------------------------------------------------------------


class WindConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LogReplay:
    """Zero-order-hold replay of time-stamped wind rows."""

    rows: tuple[tuple[float, WindVector], ...]
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple((float(t), w) for t, w in self.rows)
        if not rows:
            raise WindConfigError("wind log is empty")
        times = tuple(t for t, _ in rows)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise WindConfigError("wind log times must be strictly increasing")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_times", times)

    def at(self, t: float) -> WindVector:
        i = bisect.bisect_right(self._times, t) - 1
        return self.rows[max(i, 0)][1]

    @property
    def max_speed(self) -> float:
        return max(w.speed for _, w in self.rows)


@dataclass(frozen=True)
class MarkovWind:
    """Direction-class Markov chain advanced once per dwell window."""

    transition: tuple[tuple[float, ...], ...]
    magnitudes: tuple[float, ...]
    dwell: float
    initial_class: int = 0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] not in (4, 8):
            raise WindConfigError("transition must be a 4x4 or 8x8 matrix")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise WindConfigError("transition rows must be non-negative and sum to 1")
        if len(self.magnitudes) != P.shape[0]:
            raise WindConfigError("need one magnitude per class")
        if any(m < 0 for m in self.magnitudes):
            raise WindConfigError("class magnitudes must be >= 0")
        if not self.dwell > 0:
            raise WindConfigError("dwell must be positive")
        if not 0 <= self.initial_class < P.shape[0]:
            raise WindConfigError("initial class out of range")
        object.__setattr__(self, "transition", tuple(tuple(float(x) for x in r) for r in P))
        object.__setattr__(self, "magnitudes", tuple(float(m) for m in self.magnitudes))

    @property
    def K(self) -> int:
        return len(self.transition)

    @property
    def max_speed(self) -> float:
        return max(self.magnitudes)

    def representative(self, c: int) -> WindVector:
        return WindVector(self.magnitudes[c], TWO_PI * c / self.K, 0.0)

    def class_sequence(self, n_windows: int, seed) -> np.ndarray:
        """Classes for windows ``0..n_windows-1`` from a fresh stream seeded by ``seed``."""
        return _MarkovPath(self, seed).classes_upto(n_windows - 1)[:n_windows].copy()


WindProcess = LogReplay | MarkovWind


class _MarkovPath:
    """Lazily extended realization of a Markov wind process (deterministic per seed)."""

    def __init__(self, proc: MarkovWind, seed):
        self.proc = proc
        self.rng = np.random.default_rng(seed)
        self.cum = np.cumsum(np.asarray(proc.transition), axis=1)
        self.cum[:, -1] = 1.0
        self.classes = np.empty(64, dtype=np.int64)
        self.classes[0] = proc.initial_class
        self.n = 1

    def classes_upto(self, k: int) -> np.ndarray:
        if k >= self.n:
            need = k + 1
            if need > len(self.classes):
                grown = np.empty(max(need, 2 * len(self.classes)), dtype=np.int64)
                grown[: self.n] = self.classes[: self.n]
                self.classes = grown
            u = self.rng.random(need - self.n)
            c = self.classes[self.n - 1]
            for j, x in enumerate(u):
                c = int(np.searchsorted(self.cum[c], x, side="right"))
                self.classes[self.n + j] = c
            self.n = need
        return self.classes[: self.n]

    def at(self, t: float) -> WindVector:
        k = int(t // self.proc.dwell)
        return self.proc.representative(int(self.classes_upto(k)[k]))


class WindSource:
    """A wind process bound to a random stream; ``at(t)`` is then a pure lookup."""

    def __init__(self, process: WindProcess, seed=None):
        self.process = process
        self._impl = process if isinstance(process, LogReplay) else _MarkovPath(process, seed)

    def at(self, t: float) -> WindVector:
        if t < 0:
            raise ValueError("wind queries need t >= 0")
        return self._impl.at(t)

    @property
    def max_speed(self) -> float:
        return self.process.max_speed


def wind_at(process: WindProcess, t: float, seed=None) -> WindVector:
    """One-off query; for repeated queries bind once with :class:`WindSource`."""
    return WindSource(process, seed).at(t)


def constant_wind(w: WindVector, K: int = 4) -> MarkovWind:
    """A Markov process that never leaves the class holding ``w`` (identity transition)."""
    c = sector_index(w.direction, K)
    mags = [0.0] * K
    mags[c] = w.speed
    eye = tuple(tuple(1.0 if i == j else 0.0 for j in range(K)) for i in range(K))
    return MarkovWind(eye, tuple(mags), dwell=3600.0, initial_class=c)


# --- wind-log files -------------------------------------------------------

LOG_HEADER = ["t_sec", "wind_speed_mps", "wind_dir_rad"]


def read_wind_log(path) -> LogReplay:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise WindConfigError(f"{path}: empty wind log") from None
        if header not in (LOG_HEADER, LOG_HEADER + ["wind_vert_mps"]):
            raise WindConfigError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise WindConfigError(f"{path}:{lineno}: expected {len(header)} fields")
            vals = [float(x) for x in rec]
            if any(math.isnan(v) for v in vals):
                raise WindConfigError(f"{path}:{lineno}: NaN in wind log")
            if vals[1] < 0:
                raise WindConfigError(f"{path}:{lineno}: negative wind speed")
            vert = vals[3] if len(vals) == 4 else 0.0
            rows.append((vals[0], WindVector(vals[1], vals[2], vert)))
    return LogReplay(tuple(rows))


def write_wind_log(path, log: LogReplay) -> None:
    with_vert = any(w.vertical != 0.0 for _, w in log.rows)
    lines = [",".join(LOG_HEADER + (["wind_vert_mps"] if with_vert else []))]
    for t, w in log.rows:
        vals = [repr(float(t)), repr(w.speed), repr(w.direction)]
        if with_vert:
            vals.append(repr(w.vertical))
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def synthetic_log(
    seed,
    duration: float = 20000.0,
    dt: float = 60.0,
    max_speed: float = 9.0,
    mean_speed: tuple[float, float] = (2.0, 7.0),
    sigma: float = 3.0,
    tau: float = 1200.0,
) -> LogReplay:
    """Quasi-real wind log: Ornstein-Uhlenbeck gusting around a prevailing wind.

    The horizontal vector is clipped to ``max_speed`` so the log respects a
    magnitude ladder whose top rung is ``max_speed``.
    """
    rng = np.random.default_rng(seed)
    m_speed = rng.uniform(*mean_speed)
    m_dir = rng.uniform(0.0, TWO_PI)
    mean = np.array([m_speed * math.cos(m_dir), m_speed * math.sin(m_dir)])
    decay = math.exp(-dt / tau)
    kick = sigma * math.sqrt(1.0 - decay * decay)
    n = int(duration // dt) + 1
    x = mean + sigma * rng.standard_normal(2)
    rows = []
    for k in range(n):
        s = float(np.hypot(*x))
        if s > max_speed:
            x = x * (max_speed / s)
        speed = min(float(np.hypot(*x)), max_speed)
        rows.append((k * dt, WindVector(speed, math.atan2(x[1], x[0]))))
        x = mean + (x - mean) * decay + kick * rng.standard_normal(2)
    return LogReplay(tuple(rows))
