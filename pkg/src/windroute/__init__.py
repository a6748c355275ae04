"""Wind-aware, budget-gated routing for truck-assisted delivery drones."""

from .energy import ConstantDrag, EnergyParams, ParabolicDrag, edge_energy
from .executor import Mission, MissionRecord, Outcome, WindField, run_fleet, run_mission
from .graph import TimeGraph, generate_er, shortest_path
from .planners import Ablations, PlannerConfig
from .wind import KinematicLimits, WindVector, solve_wind_triangle

__version__ = "0.1.0"

__all__ = [
    "Ablations", "ConstantDrag", "EnergyParams", "KinematicLimits", "Mission", "MissionRecord", "Outcome",
    "ParabolicDrag", "PlannerConfig", "TimeGraph", "WindField", "WindVector", "edge_energy", "generate_er",
    "run_fleet", "run_mission", "shortest_path", "solve_wind_triangle",
]
