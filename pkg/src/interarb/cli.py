"""Command-line entry point: ``interarb <command> -c study.yaml``.

Exit codes: 0 optimal, 2 infeasible, 3 node/time limit, 4 config or data error.
Every file written carries the SHA-256 of the config (and input files) it
was produced from.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analytics
from .analytics import SweepPointError, compute_metrics, to_jsonable
from .dispatch import clear_market, corridor_flow, extract_flows
from .config import StudyConfig, build_study, dispatch_case, load_config, load_data
from .errors import (
    ConfigError, DataError, DispatchInfeasibleError, InfeasibleBuildError, InterarbError, ParameterError,
)
from .ingest import _iso, prepare, write_report
from .milp import revenue_split
from .solver.mps import write_mps
from .study import build_problem, run_rolling, run_scenario
from .synthetic import write_dataset

EXIT_OK, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_CONFIG = 0, 2, 3, 4
_STATUS_EXIT = {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE, "limit": EXIT_LIMIT}

log = logging.getLogger("interarb")

SWEEP_DEFAULTS = {
    "rent": "0:30:1",
    "blocking": "0:0.4:0.05",
    "reserved": "0,0.25,0.5,0.75,1",
}


def parse_axis(text: str) -> list:
    """``"a:b:step"`` (inclusive of ``b``) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad axis {text!r}; expected start:stop:step") from exc
        if step <= 0 or stop < start:
            raise ConfigError(f"bad axis {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(count)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad axis {text!r}") from exc


def _header(digest: str) -> str:
    return f"# config_sha256={digest}\n"


def _write_rows(path: Path, digest: str, header: list, rows):
    with open(path, "w", newline="") as fh:
        fh.write(_header(digest))
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, digest: str, payload: dict):
    payload = dict(payload, config_sha256=digest)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _f(v: float) -> str:
    return f"{float(v):.10g}"


def _outdir(cfg: StudyConfig, override) -> Path:
    out = Path(override) if override else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> StudyConfig:
    overrides = {
        "scenario": getattr(args, "scenario", None),
        "start": getattr(args, "start", None),
        "end": getattr(args, "end", None),
        "rent": getattr(args, "rent", None),
        "b_block": getattr(args, "b_block", None),
    }
    return load_config(args.config, **overrides)


# ---------------------------------------------------------------- commands
def cmd_solve(args) -> int:
    cfg = _load(args)
    study, stamps = build_study(cfg)
    out = _outdir(cfg, args.out)
    digest = cfg.digest()
    steps_per_day = int(round(24 / cfg.battery.h))
    if cfg.window_days:
        outcome = run_rolling(study, cfg.scenario, int(cfg.window_days) * steps_per_day)
    else:
        outcome = run_scenario(study, cfg.scenario)
    result = outcome.result
    log_rows = result.log_lines(timing=False)
    (out / "solver.log").write_text(_header(digest) + "\n".join(log_rows) + "\n")
    summary = {
        "scenario": cfg.scenario,
        "status": result.status,
        "objective": result.objective,
        "bound": result.bound,
        "gap": result.gap,
        "nodes": result.nodes,
        "steps": study.n_steps,
        "days": study.horizon_days,
    }
    sol = outcome.solution
    if sol is not None:
        rows = ([_iso(t), _f(a), _f(b), _f(s), int(z)]
                for t, a, b, s, z in zip(stamps, sol.x_a, sol.x_b, sol.soc, sol.z_ch))
        _write_rows(out / "trajectory.csv", digest, ["timestamp", "x_a", "x_b", "soc", "z_ch"], rows)
        flow, l_max = (study.links[-1].flow, abs(study.links[-1].l_max)) if study.links else (None, None)
        m = compute_metrics(sol, study.battery, study.horizon_days, flow, l_max)
        summary["metrics"] = m.row()
        summary["revenue"] = m.revenue
        summary["split"] = revenue_split(sol, study.prices(), study.battery)
    _write_json(out / "metrics.json", digest, summary)
    log.info("%s %s: revenue %s after %d nodes (%.2f s)", cfg.scenario, result.status,
             summary.get("revenue", float("nan")), result.nodes, result.elapsed)
    if result.status == "infeasible":
        print(f"infeasible: scenario {cfg.scenario} has no feasible schedule", file=sys.stderr)
    return _STATUS_EXIT.get(result.status, EXIT_LIMIT)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    kind = args.kind
    axis = parse_axis(args.axis or cfg.sweep.get(kind) or SWEEP_DEFAULTS[kind])
    default_sc = {"rent": ["C1", "C2", "C3"], "blocking": ["C2", "C3"], "reserved": ["C1", "C3"]}[kind]
    scenarios = args.scenarios.split(",") if args.scenarios else cfg.sweep.get("scenarios", default_sc)
    study, _ = build_study(cfg, with_flows="C3" in scenarios)
    workers = args.workers
    if kind == "rent":
        res = analytics.sweep_rent(study, axis, scenarios, workers=workers)
    elif kind == "blocking":
        share = float((cfg.blocking or {}).get("lower_share", 0.5))
        res = analytics.sweep_blocking(study.with_(blocking=None), axis, scenarios, share, workers=workers)
    else:
        rent = float(cfg.sweep.get("reserved_rent", 5.0))
        res = analytics.sweep_reserved(study, axis, rent=rent, workers=workers)
    out = _outdir(cfg, args.out)
    digest = cfg.digest()
    header = f"config_sha256={digest}"
    res.to_csv(out / f"sweep_{kind}.csv", header)
    res.to_long_csv(out / f"sweep_{kind}_long.csv", header)
    extra = {"config_sha256": digest, "scenarios": list(res.metrics)}
    if res.extra:
        extra["extra"] = res.extra
    res.to_json(out / f"sweep_{kind}.json", extra)
    log.info("%s sweep: %d points written to %s", kind, len(axis), out)
    return EXIT_OK


def cmd_dispatch(args) -> int:
    cfg = _load(args)
    series = load_data(cfg, ["price_a", "price_b", "demand_be", "demand_uk", "wind"])
    case = dispatch_case(cfg, series)
    try:
        res = clear_market(case)
    except DispatchInfeasibleError as exc:
        print(f"dispatch infeasible at hours {exc.hours}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _outdir(cfg, args.out)
    digest = cfg.digest()
    stamps = [_iso(t) for t in series["price_a"].timestamps]
    nodes = list(res.prices)
    _write_rows(out / "prices.csv", digest, ["timestamp"] + nodes,
                ([t] + [_f(res.prices[n][i]) for n in nodes] for i, t in enumerate(stamps)))
    names = list(res.flows)
    _write_rows(out / "flows.csv", digest, ["timestamp"] + names,
                ([t] + [_f(res.flows[n][i]) for n in names] for i, t in enumerate(stamps)))
    # per-line flows in the envelope convention, ready for data.flow of a C3 solve
    per_line = {ln.name: extract_flows(res, case, ln.name) for ln in case.lines}
    for a, b in (("BE", "EI"), ("EI", "UK")):
        try:
            per_line[f"{a}-{b}"] = corridor_flow(res, case, a, b)[0]
        except KeyError:
            pass
    for name, flow in per_line.items():
        _write_rows(out / f"flow_{name}.csv", digest, ["timestamp", "value"],
                    ([t, _f(v)] for t, v in zip(stamps, flow)))
    summary = {
        "hours": case.n_hours,
        "total_cost": res.total_cost,
        "max_residual": float(np.max(res.residuals)) if res.residuals is not None else 0.0,
        "tied_hours": res.tied_hours,
        "lines": {ln.name: {"from": ln.src, "to": ln.dst, "capacity": ln.capacity} for ln in case.lines},
    }
    _write_json(out / "dispatch.json", digest, summary)
    log.info("dispatch: %d hours cleared, %d tied", case.n_hours, len(res.tied_hours))
    return EXIT_OK


def cmd_clean(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args.out)
    digest = cfg.digest()
    cleaned = []
    for name, spec in cfg.data.items():
        s = prepare(spec.path, spec.unit, name, cfg.conversion)
        cleaned.append(s)
        with open(out / f"{name}.clean.csv", "w", newline="") as fh:
            fh.write(_header(digest))
            s.to_csv(fh)
    write_report(cleaned, out / "cleaning_report.json")
    report = json.loads((out / "cleaning_report.json").read_text())
    _write_json(out / "cleaning_report.json", digest, report)
    return EXIT_OK


def cmd_export_mps(args) -> int:
    cfg = _load(args)
    study, _ = build_study(cfg)
    problem = build_problem(study, cfg.scenario)
    out = _outdir(cfg, args.out)
    path = out / (args.name or f"{cfg.scenario.lower()}.mps")
    write_mps(problem, path)
    path.write_text(f"* config_sha256={cfg.digest()}\n" + path.read_text())
    log.info("wrote %s (%d rows, %d columns)", path, problem.n_rows, problem.n_vars)
    return EXIT_OK


def cmd_demo_data(args) -> int:
    """Synthetic week plus a ready-to-run config."""
    target = Path(args.directory)
    paths = write_dataset(target, days=args.days, seed=args.seed)
    config = {
        "data": {
            "price_a": {"path": paths["price_a"].name, "unit": "EUR/MWh"},
            "price_b": {"path": paths["price_b"].name, "unit": "EUR/MWh"},
            "flow": {"path": paths["flow"].name, "unit": "MW"},
            "demand_be": {"path": paths["demand_be"].name, "unit": "MW"},
            "demand_uk": {"path": paths["demand_uk"].name, "unit": "MW"},
            "wind": {"path": paths["wind"].name, "unit": "MW"},
        },
        "scenario": "C3",
        "rent": 0.0,
        "envelope": {"source": "flows-file", "l_max": 1000.0},
        "output_dir": "out",
    }
    (target / "study.yaml").write_text(yaml.safe_dump(config, sort_keys=False))
    print(target / "study.yaml")
    return EXIT_OK


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interarb", description="Inter-regional battery arbitrage studies.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        sp.add_argument("-c", "--config", required=True, help="study YAML file")
        sp.add_argument("-o", "--out", help="output directory (overrides output_dir)")
        sp.add_argument("--start", help="first day (YYYY-MM-DD), inclusive")
        sp.add_argument("--end", help="last day (YYYY-MM-DD), inclusive")
        sp.add_argument("--rent", type=float, help="interconnector rent, EUR/MWh")
        sp.add_argument("--b-block", type=float, dest="b_block", help="blocked capacity, MWh")
        if scenario:
            sp.add_argument("-s", "--scenario", choices=("C1", "C2", "C3", "K1"))

    sp = sub.add_parser("solve", help="optimise one scenario")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="rent, blocking or reserved-capacity sweep")
    common(sp, scenario=False)
    sp.add_argument("kind", choices=("rent", "blocking", "reserved"))
    sp.add_argument("--axis", help="start:stop:step or comma list")
    sp.add_argument("--scenarios", help="comma list, e.g. C1,C2,C3")
    sp.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("dispatch", help="three-node market clearing (prices and flows)")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_dispatch)

    sp = sub.add_parser("clean-data", help="clean, convert and report on the input series")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_clean)

    sp = sub.add_parser("export-mps", help="write the scenario MILP in MPS format")
    common(sp)
    sp.add_argument("--name", help="file name inside the output directory")
    sp.set_defaults(func=cmd_export_mps)

    sp = sub.add_parser("demo-data", help="write a synthetic week and a sample config")
    sp.add_argument("directory")
    sp.add_argument("--days", type=int, default=7)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_demo_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SweepPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _STATUS_EXIT.get(exc.status, EXIT_LIMIT) or EXIT_LIMIT
    except (DispatchInfeasibleError, InfeasibleBuildError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, DataError, ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InterarbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
