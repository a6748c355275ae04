"""Longitudinal-equilibrium thrust, power and per-edge energy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .wind import (
    Feasibility,
    KinematicLimits,
    WindVector,
    solve_wind_triangle,
    solve_wind_triangle_batch,
)

J_PER_WH = 3600.0


@dataclass(frozen=True)
class ConstantDrag:
    D: float = 6.0

    def force(self, V_A: float) -> float:
        return self.D


@dataclass(frozen=True)
class ParabolicDrag:
    rho: float = 1.225
    C_d: float = 1.0
    area: float = 0.05

    def force(self, V_A: float) -> float:
        return 0.5 * self.rho * self.C_d * self.area * V_A * V_A


@dataclass(frozen=True)
class EnergyParams:
    mass_base: float = 5.0
    payload: float = 0.0
    g: float = 9.81
    drag: ConstantDrag | ParabolicDrag = field(default_factory=ConstantDrag)
    P_c: float = 10.0
    c_T: float = 6.0
    battery_capacity: float = 100.0

    def __post_init__(self):
        if self.mass_base <= 0 or self.g <= 0 or self.P_c <= 0 or self.battery_capacity <= 0:
            raise ValueError("mass, g, avionics power and battery capacity must be positive")
        if self.payload < 0:
            raise ValueError("payload must be >= 0")
        if self.c_T <= 0:
            raise ValueError("c_T must be positive")

    @property
    def mass(self) -> float:
        return self.mass_base + self.payload

    def with_payload(self, payload: float) -> EnergyParams:
        return EnergyParams(self.mass_base, payload, self.g, self.drag, self.P_c, self.c_T,
                            self.battery_capacity)


@dataclass(frozen=True)
class EdgeTraversal:
    time: float | None
    energy: float | None
    ground_speed: float | None
    feasibility: Feasibility

    @property
    def feasible(self) -> bool:
        return self.feasibility is Feasibility.FEASIBLE


def required_thrust(p: EnergyParams, gamma_A: float, V_A: float) -> float:
    """Thrust balancing drag and the weight component; never negative."""
    return max(p.drag.force(V_A) + p.mass * p.g * math.sin(gamma_A), 0.0)


def power(p: EnergyParams, T: float, V_A: float) -> float:
    if T < 0:
        raise ValueError("thrust must be >= 0")
    return p.P_c + T * V_A / p.c_T


def edge_energy(length: float, path_dir, wind: WindVector, limits: KinematicLimits,
                p: EnergyParams) -> EdgeTraversal:
    """Traversal time (s) and energy (Wh) of a straight segment under ``wind``."""
    if not length > 0:
        raise ValueError("edge length must be positive")
    sol = solve_wind_triangle(path_dir, limits, wind)
    if not sol.feasible:
        return EdgeTraversal(None, None, None, sol.feasibility)
    t = length / sol.V_G
    P = power(p, required_thrust(p, sol.gamma_A, limits.V_A), limits.V_A)
    return EdgeTraversal(t, P * t / J_PER_WH, sol.V_G, Feasibility.FEASIBLE)


def edge_energy_batch(lengths: np.ndarray, dirs: np.ndarray, wind: WindVector,
                      limits: KinematicLimits, p: EnergyParams):
    """Vectorized :func:`edge_energy`; infeasible entries get ``inf`` time and energy.

    Returns ``(time, energy, ground_speed, feasibility_code)`` arrays.
    """
    sol = solve_wind_triangle_batch(dirs, limits, wind.xyz)
    code = sol["code"]
    ok = code == 0
    V_A = limits.V_A
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(ok, lengths / sol["V_G"], np.inf)
        T = np.maximum(p.drag.force(V_A) + p.mass * p.g * np.sin(sol["gamma_A"]), 0.0)
        P = p.P_c + T * V_A / p.c_T
        e = np.where(ok, P * t / J_PER_WH, np.inf)
    return t, e, np.where(ok, sol["V_G"], np.nan), code


def energy_per_distance_curve(
    p: EnergyParams,
    wind_cases: Sequence[tuple[str, WindVector]],
    V_A_range: Sequence[float],
    gamma: float = 0.0,
    limits: KinematicLimits | None = None,
) -> list[tuple[float, str, float | None]]:
    """Wh per km of ground track versus airspeed, one row per (airspeed, wind case).

    Flight is along +x with ground flight-path angle ``gamma``; wind vectors are
    interpreted in that frame (direction pi is a headwind). Infeasible grid
    points carry ``None``.
    """
    if not isinstance(p.drag, ParabolicDrag):
        raise ValueError("speed sweeps need parabolic drag; constant drag has no interior optimum")
    base = limits or KinematicLimits()
    u = (math.cos(gamma), 0.0, math.sin(gamma))
    rows = []
    for v in V_A_range:
        lim = KinematicLimits(float(v), base.gamma_min, base.gamma_max, base.kappa_max)
        for name, w in wind_cases:
            sol = solve_wind_triangle(u, lim, w)
            if not sol.feasible:
                rows.append((float(v), name, None))
                continue
            P = power(p, required_thrust(p, sol.gamma_A, lim.V_A), lim.V_A)
            rows.append((float(v), name, P / sol.V_G * (1000.0 / J_PER_WH)))
    return rows


def write_curve(path, rows) -> None:
    lines = ["v_a_mps,case,wh_per_km"]
    for v, case, whkm in rows:
        lines.append(f"{v!r},{case},{'' if whkm is None else repr(whkm)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
