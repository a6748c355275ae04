"""Scenario and experiment configuration: YAML sections mapped onto dataclasses, strictly."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .energy import ConstantDrag, EnergyParams, ParabolicDrag
from .planners import PLANNERS, Ablations, PlannerConfig
from .wind import DEFAULT_LADDER, KinematicLimits


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSpec:
    kind: str = "er"  # er | file
    n: int = 60
    p: float = 0.08
    side_m: float = 27000.0
    z_band: tuple[float, float] = (50.0, 150.0)
    path: str | None = None

    def validate(self):
        if self.kind not in ("er", "file"):
            raise ConfigError("graph.kind must be 'er' or 'file'")
        if self.kind == "file" and not self.path:
            raise ConfigError("graph.path is required when graph.kind is 'file'")
        if self.kind == "er":
            if self.n < 2 or not 0 < self.p <= 1 or self.side_m <= 0:
                raise ConfigError("graph needs n >= 2, 0 < p <= 1 and side_m > 0")
            if len(self.z_band) != 2 or self.z_band[0] > self.z_band[1]:
                raise ConfigError("graph.z_band must be [low, high]")


@dataclass(frozen=True)
class WindSpec:
    kind: str = "synthetic"  # synthetic | log | constant | markov
    ladder: tuple[float, ...] = DEFAULT_LADDER
    path: str | None = None
    duration_s: float = 20000.0
    dt_s: float = 60.0
    mean_speed: tuple[float, float] = (2.0, 7.0)
    sigma: float = 3.0
    tau_s: float = 1200.0
    speed: float = 0.0
    direction_rad: float = 0.0
    stay: float = 0.9
    magnitude: float = 6.0
    dwell_s: float = 600.0
    regions: int = 1

    def validate(self):
        if self.kind not in ("synthetic", "log", "constant", "markov"):
            raise ConfigError("wind.kind must be synthetic, log, constant or markov")
        if self.kind == "log" and not self.path:
            raise ConfigError("wind.path is required when wind.kind is 'log'")
        lad = list(self.ladder)
        if not lad or lad[0] != 0 or any(b <= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("wind.ladder must start at 0 and increase strictly")
        if self.regions < 1:
            raise ConfigError("wind.regions must be >= 1")
        if self.kind == "markov" and not 0 <= self.stay <= 1:
            raise ConfigError("wind.stay must be a probability")
        if self.kind == "markov" and self.magnitude not in lad:
            raise ConfigError("wind.magnitude must be a ladder rung")


@dataclass(frozen=True)
class DragSpec:
    kind: str = "constant"
    D: float = 6.0
    rho: float = 1.225
    C_d: float = 1.0
    area: float = 0.05

    def build(self):
        if self.kind == "constant":
            return ConstantDrag(self.D)
        if self.kind == "parabolic":
            return ParabolicDrag(self.rho, self.C_d, self.area)
        raise ConfigError("energy.drag.kind must be 'constant' or 'parabolic'")


@dataclass(frozen=True)
class EnergySpec:
    mass_base: float = 5.0
    payload: float = 0.0
    g: float = 9.81
    P_c: float = 10.0
    c_T: float = 6.0
    battery_capacity: float = 100.0
    drag: DragSpec = field(default_factory=DragSpec)

    def build(self) -> EnergyParams:
        try:
            return EnergyParams(self.mass_base, self.payload, self.g, self.drag.build(), self.P_c,
                                self.c_T, self.battery_capacity)
        except ValueError as exc:
            raise ConfigError(f"energy: {exc}") from None


@dataclass(frozen=True)
class LimitsSpec:
    V_A: float = 15.0
    gamma_min_deg: float = -30.0
    gamma_max_deg: float = 30.0
    turn_radius_m: float = 150.0

    def build(self) -> KinematicLimits:
        try:
            return KinematicLimits(self.V_A, math.radians(self.gamma_min_deg),
                                   math.radians(self.gamma_max_deg), 1.0 / self.turn_radius_m)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"limits: {exc}") from None


@dataclass(frozen=True)
class PlannerSpec:
    lam: float = 1.5
    kappa_ret: float = 1.5
    tau: float = 0.1
    T_max: int = 200
    flag: int = 0
    alpha: float = 0.5
    worst_wind: float | None = None
    unc_mode: str = "worst"
    unc_cap: float = 5.0
    ser_precheck: bool = True

    def build(self, planner: str = "BER", ablations: Ablations = Ablations(), lam: float | None = None
              ) -> PlannerConfig:
        try:
            return PlannerConfig(planner, self.lam if lam is None else lam, self.kappa_ret, self.tau,
                                 self.T_max, self.flag, self.alpha, self.worst_wind, self.unc_mode,
                                 self.unc_cap, self.ser_precheck, ablations)
        except ValueError as exc:
            raise ConfigError(f"planner: {exc}") from None


@dataclass(frozen=True)
class FleetSpec:
    customers: int = 8
    drones: int = 2
    truck_share: float = 0.25
    payload_max: float = 10.0
    capacity: float = 8.0
    truck_speed: float = 10.0
    launch_stagger_s: float = 10.0
    clusters: int = 3
    d_safe_m: float = 50.0
    customers_path: str | None = None


ABLATIONS = {
    "full": Ablations(),
    "no_gate": Ablations(budget_gate=False),
    "no_wind": Ablations(wind_costs=False),
    "no_risk": Ablations(risk_term=False),
    "no_opt": Ablations(traj_opt=False),
}
FLEET_VARIANTS = ("kmeans", "no_clustering")


@dataclass(frozen=True)
class ExperimentSpec:
    planners: tuple[str, ...] = PLANNERS
    trials: int = 200
    rounds: int = 10
    B: tuple[float, ...] = (50.0, 100.0)
    K: tuple[int, ...] = (4, 8)
    lam: tuple[float, ...] = (1.5,)
    ablations: tuple[str, ...] = tuple(ABLATIONS) + FLEET_VARIANTS
    ablation_B: float = 50.0
    ablation_K: int = 4

    def validate(self):
        if self.trials < 1 or self.rounds < 1 or self.rounds > self.trials:
            raise ConfigError("experiment needs trials >= rounds >= 1")
        if not self.planners or not self.B or not self.K or not self.lam:
            raise ConfigError("experiment grids must be non-empty")
        bad = [p for p in self.planners if p not in PLANNERS]
        if bad:
            raise ConfigError(f"unknown planners {bad}")
        if any(k not in (4, 8) for k in self.K) or self.ablation_K not in (4, 8):
            raise ConfigError("K must be 4 or 8")
        if any(b <= 0 for b in self.B) or self.ablation_B <= 0:
            raise ConfigError("budgets must be positive")
        unknown = [a for a in self.ablations if a not in ABLATIONS and a not in FLEET_VARIANTS]
        if unknown:
            raise ConfigError(f"unknown ablations {unknown}")
        if list(self.lam) != sorted(self.lam):
            raise ConfigError("lambda grid must be sorted")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    target: int | None = None
    obstacles: tuple[tuple[float, float, float], ...] = ()
    graph: GraphSpec = field(default_factory=GraphSpec)
    wind: WindSpec = field(default_factory=WindSpec)
    energy: EnergySpec = field(default_factory=EnergySpec)
    limits: LimitsSpec = field(default_factory=LimitsSpec)
    planner: PlannerSpec = field(default_factory=PlannerSpec)
    fleet: FleetSpec = field(default_factory=FleetSpec)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)

    def validate(self) -> ScenarioConfig:
        self.graph.validate()
        self.wind.validate()
        self.energy.build()
        self.limits.build()
        self.planner.build()
        self.experiment.validate()
        if max(self.wind.ladder) >= self.limits.V_A:
            raise ConfigError("top ladder rung must stay below airspeed")
        for ob in self.obstacles:
            if len(ob) != 3 or ob[2] <= 0:
                raise ConfigError("obstacles are [x, y, radius] with radius > 0")
        return self

    def replace(self, **kw) -> ScenarioConfig:
        return dataclasses.replace(self, **kw)


# YAML spelling -> field name, where they differ
_RENAMES = {"lambda": "lam"}
_SECTIONS = {
    "graph": GraphSpec, "wind": WindSpec, "energy": EnergySpec, "drag": DragSpec, "limits": LimitsSpec,
    "planner": PlannerSpec, "fleet": FleetSpec, "experiment": ExperimentSpec,
}


def _coerce(value, default):
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise TypeError("expected a list")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError("expected true/false")
        return value
    if isinstance(default, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
    return value


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kw = {}
    for raw_key, value in data.items():
        key = _RENAMES.get(raw_key, raw_key)
        if key not in names:
            raise ConfigError(f"{where}: unknown key {raw_key!r}")
        sub = _SECTIONS.get(key)
        if sub is not None and dataclasses.is_dataclass(getattr(defaults, key)):
            kw[key] = _build(sub, value, f"{where}.{raw_key}" if where else raw_key)
            continue
        default = getattr(defaults, key)
        try:
            kw[key] = value if default is None else _coerce(value, default)
        except TypeError as exc:
            raise ConfigError(f"{where}.{raw_key}: {exc}") from None
    return cls(**kw)


def load_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    return _build(ScenarioConfig, data or {}, "").validate()


def read_config(path) -> ScenarioConfig:
    return load_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical YAML for ``cfg``; ``load_config(dump_config(c)) == c``."""

    def plain(obj):
        if dataclasses.is_dataclass(obj):
            inv = {v: k for k, v in _RENAMES.items()}
            return {inv.get(f.name, f.name): plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [plain(v) for v in obj]
        return obj

    return yaml.safe_dump(plain(cfg), sort_keys=False)


__all__ = [
    "ABLATIONS", "ConfigError", "DragSpec", "EnergySpec", "ExperimentSpec", "FLEET_VARIANTS", "FleetSpec",
    "GraphSpec", "LimitsSpec", "PlannerSpec", "ScenarioConfig", "WindSpec", "dump_config", "load_config",
    "read_config",
]
