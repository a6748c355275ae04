"""Command-line entry point: ``python -m windroute <command> ...``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path


from .config import ConfigError, ScenarioConfig, read_config
from .executor import run_fleet, write_assignments, write_fleet_log
from .graph import generate_er
from .harness import (
    ExperimentError,
    ablate,
    build_trial,
    fleet_scenario,
    lambda_sweep,
    report,
    run_experiment,
    speed_curve,
    write_records,
    write_speed_curve,
)
from .wind import synthetic_log, write_wind_log


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(path: str | None) -> ScenarioConfig:
    return read_config(path) if path else ScenarioConfig().validate()


def _out(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate_graph(a) -> int:
    g = generate_er(a.n, a.p, area=(a.side, a.side, (a.z_low, a.z_high)), seed=a.seed)
    Path(a.out).write_text(g.to_json(), encoding="utf-8")
    print(f"wrote {g.n} vertices, {len(g.edges)} edges to {a.out}")
    return 0


def cmd_wind_log(a) -> int:
    log = synthetic_log(a.seed, duration=a.duration, max_speed=a.max_speed)
    write_wind_log(a.out, log)
    print(f"wrote {len(log.rows)} rows to {a.out}")
    return 0


def _print_rows(rows) -> None:
    for r in rows:
        print(f"{r['variant']:>13} {r['planner']} B={r['B']:g} K={r['K']} lambda={r['lambda']:g}  "
              f"SUC {r['suc']:5.1f}±{r['suc_std']:.1f}  DEL {r['del']:5.1f}  FAIL {r['fail']:5.1f}  "
              f"ABRT {r['abrt']:5.1f}")


def cmd_run(a) -> int:
    rows = run_experiment(_config(a.config), _out(a.out))
    _print_rows(rows)
    return 0


def cmd_sweep(a) -> int:
    table = lambda_sweep(_config(a.config), a.lambdas, _out(a.out))
    for lam, p, s, ab, f in table:
        print(f"lambda={lam:g} {p}: SUC {s:.1f} ABRT {ab:.1f} FAIL {f:.1f}")
    return 0


def cmd_ablate(a) -> int:
    rows = ablate(_config(a.config), _out(a.out))
    for v, r in rows.items():
        print(f"{v:>13}: SUC {r['suc']:5.1f}  ABRT {r['abrt']:5.1f}  FAIL {r['fail']:5.1f}  "
              f"energy {r['energy_wh']:.2f} Wh  max turn {r['max_turn_deg']:.1f} deg")
    return 0


def cmd_speed_curve(a) -> int:
    rows = speed_curve(a.payloads)
    out = _out(a.out)
    write_speed_curve(out / "speed_curve.csv", rows)
    print(f"wrote {len(rows)} rows to {out / 'speed_curve.csv'}")
    return 0


def cmd_report(a) -> int:
    _print_rows(report(a.indir))
    return 0


def cmd_fleet(a) -> int:
    cfg = _config(a.config)
    ex = cfg.experiment
    trial = build_trial(cfg, cfg.seed if a.seed is None else a.seed)
    clusters = None if a.no_clustering else cfg.fleet.clusters
    rec = run_fleet(fleet_scenario(cfg, trial, float(ex.ablation_B), int(ex.ablation_K), clusters))
    out = _out(a.out)
    write_fleet_log(out / "fleet_log.csv", rec)
    write_assignments(out / "assignments.csv", rec)
    write_records(out / "records.csv", [m for _, _, m in rec.missions])
    print(f"{len(rec.missions)} sorties, {len(rec.truck_served)} truck customers, "
          f"{len(rec.undelivered)} undelivered, {rec.conflicts} conflicts")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="windroute", description="Wind-aware UAV delivery routing experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-graph", help="write a random ER waypoint graph as JSON")
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--p", type=float, default=0.08)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=float, default=27000.0, help="square area side (m)")
    p.add_argument("--z-low", type=float, default=50.0)
    p.add_argument("--z-high", type=float, default=150.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_graph)

    p = sub.add_parser("wind-log", help="write a synthetic quasi-real wind log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=20000.0)
    p.add_argument("--max-speed", type=float, default=9.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wind_log)

    p = sub.add_parser("run", help="planner x budget x class-count grid")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="risk-sensitivity sweep")
    p.add_argument("--config")
    p.add_argument("--lambda", dest="lambdas", type=_floats, default=[1.0, 1.5, 2.0, 2.5])
    p.add_argument("--out", default="sweep_out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="BER component ablations on paired seeds")
    p.add_argument("--config")
    p.add_argument("--out", default="ablate_out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("speed-curve", help="energy per km against airspeed")
    p.add_argument("--payloads", type=_floats, default=[0.0, 8.0])
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_speed_curve)

    p = sub.add_parser("report", help="re-aggregate persisted raw records")
    p.add_argument("--in", dest="indir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fleet", help="one truck-and-drones scenario")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-clustering", action="store_true")
    p.add_argument("--out", default="fleet_out")
    p.set_defaults(func=cmd_fleet)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ExperimentError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
