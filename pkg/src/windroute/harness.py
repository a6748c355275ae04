"""Monte-Carlo experiments: trial construction, grids, aggregation, sweeps and ablations."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import ABLATIONS, FLEET_VARIANTS, ScenarioConfig
from .dubins import Obstacle, segment_clear
from .energy import EnergyParams, ParabolicDrag, energy_per_distance_curve
from .executor import (
    FleetScenario,
    Mission,
    MissionRecord,
    Outcome,
    WindField,
    run_fleet,
    run_mission,
)
from .fleet import Customer, DroneSpec, Service
from .graph import TimeGraph, generate_er
from .wind import (
    KinematicLimits,
    MarkovWind,
    WindSource,
    WindVector,
    constant_wind,
    read_wind_log,
    synthetic_log,
)

OUTCOMES = ("SUC", "DEL", "FAIL", "ABRT")
METRICS = ("energy_wh", "margin_wh", "time_s", "max_turn_deg")
AGG_HEADER = ["planner", "B", "K", "lambda", "variant", "n"] + [
    c for name in [o.lower() for o in OUTCOMES] + list(METRICS) for c in (name, name + "_std")
]


class ExperimentError(RuntimeError):
    pass


# --- trials ---------------------------------------------------------------


@dataclass
class Trial:
    """Everything random about one trial index; shared by every planner and cell."""

    seed: int
    g: TimeGraph
    target: int
    t0: float
    wind_seed: np.random.SeedSequence
    obstacles: tuple[Obstacle, ...]
    cfg: ScenarioConfig
    region_of: dict[int, int] | None = None
    _winds: dict = field(default_factory=dict)
    _shared: dict = field(default_factory=dict)

    def wind(self, K: int) -> tuple[WindField, MarkovWind | None]:
        """Realized wind for this trial; Markov processes are built per class count."""
        key = K if self.cfg.wind.kind == "markov" else None
        hit = self._winds.get(key)
        if hit is None:
            hit = self._winds[key] = _build_wind(self.cfg, self.wind_seed, K, self.region_of)
        return hit


def _obstacles(cfg: ScenarioConfig) -> tuple[Obstacle, ...]:
    return tuple(Obstacle((float(x), float(y)), float(r)) for x, y, r in cfg.obstacles)


def _blocked(g: TimeGraph, obstacles: Sequence[Obstacle]) -> list[bool]:
    return [not segment_clear(g.pos[e.src][:2], g.pos[e.dst][:2], obstacles) for e in g.edges]


def build_graph(cfg: ScenarioConfig, seed) -> TimeGraph:
    gs = cfg.graph
    if gs.kind == "file":
        g = TimeGraph.from_json(Path(gs.path).read_text(encoding="utf-8"))
    else:
        g = generate_er(gs.n, gs.p, area=(gs.side_m, gs.side_m, tuple(gs.z_band)), seed=seed)
    obs = _obstacles(cfg)
    return g.with_blocked(_blocked(g, obs)) if obs else g


def _markov(cfg: ScenarioConfig, K: int) -> MarkovWind:
    w = cfg.wind
    move = (1.0 - w.stay) / 2.0
    P = [[0.0] * K for _ in range(K)]
    for i in range(K):
        P[i][i] += w.stay
        P[i][(i + 1) % K] += move
        P[i][(i - 1) % K] += move
    return MarkovWind(tuple(map(tuple, P)), (w.magnitude,) * K, w.dwell_s, 0)


def _build_wind(cfg: ScenarioConfig, seed: np.random.SeedSequence, K: int,
                region_of: dict[int, int] | None) -> tuple[WindField, MarkovWind | None]:
    w = cfg.wind
    top = max(w.ladder)
    seeds = seed.spawn(w.regions)
    if w.kind == "synthetic":
        srcs = [synthetic_log(s, w.duration_s, w.dt_s, top, tuple(w.mean_speed), w.sigma, w.tau_s)
                for s in seeds]
        return WindField(srcs, region_of), None
    if w.kind == "log":
        log = read_wind_log(w.path)
        if log.max_speed > top + 1e-9:
            raise ExperimentError(f"wind log exceeds the ladder top ({log.max_speed} > {top})")
        return WindField([log], None), None
    if w.kind == "constant":
        proc = constant_wind(WindVector(w.speed, w.direction_rad), K)
        return WindField([WindSource(proc, seeds[0])], None), proc
    proc = _markov(cfg, K)
    return WindField([WindSource(proc, s) for s in seeds], region_of), proc


def build_trial(cfg: ScenarioConfig, seed: int) -> Trial:
    """Graph, target, start time and wind stream for trial ``seed`` (independent of planner and cell)."""
    g_seed, w_seed, t_seed = np.random.SeedSequence(seed).spawn(3)
    g = build_graph(cfg, g_seed)
    rng = np.random.default_rng(t_seed)
    if cfg.target is None:
        target = int(rng.integers(1, g.n))
        if target == g.depot:
            target = 0 if g.depot != 0 else 1
    else:
        target = cfg.target
        if not 0 <= target < g.n or target == g.depot:
            raise ExperimentError(f"target {target} is not a non-depot vertex")
    t0 = 0.0
    if cfg.wind.kind == "log":
        t_last = read_wind_log(cfg.wind.path).rows[-1][0]
        t0 = float(rng.uniform(0.0, max(t_last - 3600.0, 0.0)))
    region_of = None
    if cfg.wind.regions > 1 and cfg.wind.kind in ("synthetic", "markov"):
        xs = np.asarray([p[0] for p in g.pos])
        edges = np.linspace(xs.min(), xs.max(), cfg.wind.regions + 1)[1:-1]
        region_of = {v: int(np.searchsorted(edges, xs[v], side="right")) for v in range(g.n)}
    return Trial(seed, g, target, t0, w_seed, _obstacles(cfg), cfg, region_of)


def mission_for(trial: Trial, B: float, K: int, params: EnergyParams | None = None) -> Mission:
    cfg = trial.cfg
    wind, proc = trial.wind(K)
    return Mission(
        g=trial.g, target=trial.target, wind=wind, B0=B,
        params=params or cfg.energy.build(), limits=cfg.limits.build(), K=K,
        ladder=tuple(cfg.wind.ladder), markov=proc, obstacles=trial.obstacles, t0=trial.t0,
        seed=trial.seed, _shared=trial._shared,
    )


# --- cells ----------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    planner: str
    B: float
    K: int
    lam: float
    variant: str = "full"

    def sort_key(self):
        return (self.variant, self.planner, self.B, self.K, self.lam)


def run_cells(cfg: ScenarioConfig, cells: Sequence[Cell], trials: int | None = None
              ) -> dict[Cell, list[MissionRecord]]:
    """Every cell over the same trial seeds ``seed .. seed + trials - 1``."""
    n = cfg.experiment.trials if trials is None else trials
    out: dict[Cell, list[MissionRecord]] = {c: [] for c in cells}
    for i in range(n):
        seed = cfg.seed + i
        try:
            trial = build_trial(cfg, seed)
        except Exception as exc:
            raise ExperimentError(f"trial seed {seed}: {exc}") from exc
        for c in cells:
            try:
                if c.variant in FLEET_VARIANTS:
                    out[c].extend(_fleet_records(cfg, trial, c))
                else:
                    pcfg = cfg.planner.build(c.planner, ABLATIONS[c.variant], c.lam)
                    out[c].append(run_mission(mission_for(trial, c.B, c.K), pcfg))
            except Exception as exc:
                raise ExperimentError(f"cell {c} seed {seed}: {exc}") from exc
    return out


def fleet_scenario(cfg: ScenarioConfig, trial: Trial, B: float, K: int, clusters: int | None,
                   lam: float | None = None) -> FleetScenario:
    fs = cfg.fleet
    rng = np.random.default_rng(np.random.SeedSequence([trial.seed, 7]))
    g = trial.g
    pool = [v for v in range(g.n) if v != g.depot]
    count = min(fs.customers, len(pool))
    ids = sorted(int(v) for v in rng.choice(pool, size=count, replace=False))
    customers = []
    for v in ids:
        payload = float(rng.uniform(0.0, fs.payload_max))
        service = Service.TRUCK_ONLY if rng.random() < fs.truck_share else Service.DRONE_CAPABLE
        customers.append(Customer(v, g.pos[v], payload, service))
    limits = cfg.limits.build()
    drones = {d: DroneSpec(fs.capacity, limits.V_A, B) for d in range(fs.drones)}
    wind, proc = trial.wind(K)
    return FleetScenario(
        g=g, customers=tuple(customers), drones=drones, wind=wind,
        cfg=cfg.planner.build("BER", ABLATIONS["full"], lam), params=cfg.energy.build(), limits=limits,
        K=K, ladder=tuple(cfg.wind.ladder), markov=proc, obstacles=trial.obstacles,
        truck_speed=fs.truck_speed, launch_stagger=fs.launch_stagger_s, clusters=clusters,
        d_safe=fs.d_safe_m, seed=trial.seed,
    )


def _fleet_records(cfg: ScenarioConfig, trial: Trial, c: Cell) -> list[MissionRecord]:
    clusters = cfg.fleet.clusters if c.variant == "kmeans" else None
    rec = run_fleet(fleet_scenario(cfg, trial, c.B, c.K, clusters, c.lam))
    return [m for _, _, m in rec.missions]


# --- aggregation ------------------------------------------------------------


def _rounds(records: Sequence[MissionRecord], rounds: int) -> list[list[MissionRecord]]:
    seeds = sorted({r.seed for r in records})
    groups = np.array_split(np.arange(len(seeds)), min(rounds, len(seeds)))
    where = {}
    for k, grp in enumerate(groups):
        for j in grp:
            where[seeds[j]] = k
    out: list[list[MissionRecord]] = [[] for _ in groups]
    for r in records:
        out[where[r.seed]].append(r)
    return out


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    if len(a) == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def aggregate(cell: Cell, records: Sequence[MissionRecord], rounds: int) -> dict:
    """Round-level frequencies (%) and metric means, then mean and sample std over rounds."""
    row = {"planner": cell.planner, "B": cell.B, "K": cell.K, "lambda": cell.lam, "variant": cell.variant,
           "n": len(records)}
    groups = [g for g in _rounds(records, rounds) if g]
    for o in OUTCOMES:
        freqs = [100.0 * sum(r.outcome.value == o for r in g) / len(g) for g in groups]
        row[o.lower()], row[o.lower() + "_std"] = _mean_std(freqs)
    for m in METRICS:
        means = [float(np.mean([getattr(r, m) for r in g])) for g in groups]
        row[m], row[m + "_std"] = _mean_std(means)
    return row


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_aggregate(path, rows: Iterable[dict]) -> None:
    lines = [",".join(AGG_HEADER)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in AGG_HEADER))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_records(path, records: Iterable[MissionRecord]) -> None:
    lines = [MissionRecord.CSV_HEADER] + [r.csv_row() for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path) -> list[MissionRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MissionRecord.CSV_HEADER.split(","):
            raise ExperimentError(f"{path}: unexpected header")
        for row in reader:
            out.append(MissionRecord(
                seed=int(row["seed"]), planner=row["planner"], B0=float(row["B0"]), K=int(row["K"]),
                lam=float(row["lambda"]), outcome=Outcome(row["outcome"]),
                energy_wh=float(row["energy_wh"]), margin_wh=float(row["margin_wh"]),
                time_s=float(row["time_s"]), steps=int(row["steps"]),
                max_turn_deg=float(row["max_turn_deg"]), path=(), debits=(),
            ))
    return out


def _sorted_records(results: dict[Cell, list[MissionRecord]]) -> dict[str, list[MissionRecord]]:
    """Canonical order per variant: cell key, then seed."""
    by_variant: dict[str, list[MissionRecord]] = {}
    for cell in sorted(results, key=Cell.sort_key):
        recs = sorted(results[cell], key=lambda r: r.seed)  # stable: fleet sorties keep launch order
        by_variant.setdefault(cell.variant, []).extend(recs)
    return by_variant


def persist(results: dict[Cell, list[MissionRecord]], out_dir, rounds: int) -> list[dict]:
    """Write raw records first, then the manifest, then re-aggregate from what was written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for variant, recs in _sorted_records(results).items():
        name = f"raw_{variant}.csv"
        write_records(out / name, recs)
        files[variant] = name
    manifest = {"rounds": rounds, "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report(out)


def report(in_dir) -> list[dict]:
    """Re-aggregate persisted raw records into ``aggregate.csv``; a pure fold over the raw files."""
    d = Path(in_dir)
    try:
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ExperimentError(f"{d}: no manifest.json") from None
    rows = []
    for variant in sorted(manifest["files"]):
        recs = read_records(d / manifest["files"][variant])
        cells: dict[Cell, list[MissionRecord]] = {}
        for r in recs:
            cells.setdefault(Cell(r.planner, r.B0, r.K, r.lam, variant), []).append(r)
        for cell in sorted(cells, key=Cell.sort_key):
            rows.append(aggregate(cell, cells[cell], manifest["rounds"]))
    write_aggregate(d / "aggregate.csv", rows)
    return rows


# --- experiments ------------------------------------------------------------


def experiment_cells(cfg: ScenarioConfig) -> list[Cell]:
    ex = cfg.experiment
    return [Cell(p, float(B), int(K), float(lam)) for p in ex.planners for B in ex.B for K in ex.K
            for lam in ex.lam]


def run_experiment(cfg: ScenarioConfig, out_dir) -> list[dict]:
    """Planner x B x K x lambda grid; raw records persisted before aggregation."""
    results = run_cells(cfg, experiment_cells(cfg))
    return persist(results, out_dir, cfg.experiment.rounds)


def lambda_sweep(cfg: ScenarioConfig, lams: Sequence[float], out_dir) -> list[tuple[float, str, float, float, float]]:
    """Per-(lambda, planner) SUC / ABRT / FAIL curves at the first B and K of the grid."""
    lams = [float(x) for x in lams]
    if not lams:
        raise ExperimentError("lambda grid is empty")
    if lams != sorted(lams):
        raise ExperimentError("lambda grid must be sorted")
    ex = cfg.experiment
    cells = [Cell(p, float(ex.B[0]), int(ex.K[0]), lam) for lam in lams for p in ex.planners]
    rows = persist(run_cells(cfg, cells), out_dir, ex.rounds)
    table = [(r["lambda"], r["planner"], r["suc"], r["abrt"], r["fail"]) for r in rows]
    table.sort(key=lambda t: (t[0], ex.planners.index(t[1])))
    lines = ["lambda,planner,suc,abrt,fail"] + [f"{lam!r},{p},{s:.6f},{a:.6f},{f:.6f}" for lam, p, s, a, f in table]
    (Path(out_dir) / "lambda_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return table


ABLATION_HEADER = ["variant", "suc", "suc_std", "abrt", "abrt_std", "fail", "fail_std", "energy_wh",
                   "energy_wh_std", "margin_wh", "margin_wh_std", "time_s", "time_s_std", "max_turn_deg",
                   "max_turn_deg_std"]


def ablate(cfg: ScenarioConfig, out_dir, variants: Sequence[str] | None = None) -> dict[str, dict]:
    """BER with one component removed at a time, paired on identical trial seeds."""
    ex = cfg.experiment
    variants = list(variants or ex.ablations)
    lam = float(ex.lam[0])
    cells = [Cell("BER", float(ex.ablation_B), int(ex.ablation_K), lam, v) for v in variants]
    rows = persist(run_cells(cfg, cells), out_dir, ex.rounds)
    by_variant = {r["variant"]: r for r in rows}
    lines = [",".join(ABLATION_HEADER)]
    for v in variants:
        lines.append(",".join([v] + [_fmt(by_variant[v][k]) for k in ABLATION_HEADER[1:]]))
    (Path(out_dir) / "ablation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return by_variant


# --- speed curve ------------------------------------------------------------

SPEED_GRID = tuple(np.round(np.arange(6.0, 25.0 + 1e-9, 0.5), 6))
SPEED_WINDS = (("headwind", WindVector(5.0, math.pi)), ("calm", WindVector(0.0, 0.0)),
               ("tailwind", WindVector(5.0, 0.0)))


def speed_curve(payloads: Sequence[float] = (0.0, 8.0), params: EnergyParams | None = None,
                grid: Sequence[float] = SPEED_GRID, gamma_deg: float = 3.0):
    """Wh/km against airspeed per payload and wind case, under parabolic drag.

    A shallow climb couples mass into thrust, which is what separates the
    payload curves under this model.
    """
    base = params or EnergyParams(drag=ParabolicDrag())
    if not isinstance(base.drag, ParabolicDrag):
        raise ValueError("speed curves need parabolic drag")
    rows = []
    for m in payloads:
        p = base.with_payload(float(m))
        for v, case, whkm in energy_per_distance_curve(p, SPEED_WINDS, grid, math.radians(gamma_deg),
                                                       KinematicLimits()):
            rows.append((float(m), v, case, whkm))
    return rows


def write_speed_curve(path, rows) -> None:
    lines = ["payload_kg,v_a_mps,case,wh_per_km"]
    for m, v, case, whkm in rows:
        lines.append(f"{m!r},{v!r},{case},{'' if whkm is None else repr(whkm)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


__all__ = [
    "ABLATION_HEADER", "AGG_HEADER", "Cell", "ExperimentError", "OUTCOMES", "SPEED_GRID", "Trial",
    "ablate", "aggregate", "build_graph", "build_trial", "experiment_cells", "fleet_scenario",
    "lambda_sweep", "mission_for", "persist", "read_records", "report", "run_cells", "run_experiment",
    "speed_curve", "write_aggregate", "write_records", "write_speed_curve",
]
