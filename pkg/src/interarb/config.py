"""Study configuration files (YAML) and the data loading they drive.

Example::

    battery: {rated_capacity: 1.0, min_capacity: 0.1}   # or battery_file: bat.yaml
    data:
      price_a: {path: price_be.csv, unit: EUR/MWh}
      price_b: {path: price_uk.csv, unit: GBP/MWh}
      flow: {path: flow_nemo.csv, unit: MW}
    scenario: C3
    horizon: {start: 2019-01-01, end: 2019-01-07}
    rent: 5.0
    envelope: {source: flows-file, l_max: 1000}
    output_dir: out

Relative paths resolve against ``data_dir``, which defaults to the
``INTERARB_DATA`` environment variable and then to the config file's folder.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .battery import BatteryParams
from .dispatch import build_case2, clear_market, corridor_flow, extract_flows, case_lines
from .errors import ConfigError, InterarbError
from .ingest import align_series, prepare
from .milp import BlockingSpec
from .solver.bnb import BnbConfig
from .study import SCENARIOS, Study, link_from_flow

DATA_ENV = "INTERARB_DATA"
DEFAULT_ETA_LINE = 0.975  # 2.5% NEMO loss
DEFAULT_RENT = 5.0  # EUR/MWh, case study 2

_TOP_KEYS = {
    "battery", "battery_file", "data", "data_dir", "scenario", "horizon", "rent", "eta_line",
    "blocking", "envelope", "dispatch", "solver", "sweep", "output_dir", "window_days", "conversion",
}
_SOURCES = ("flows-file", "dispatch-sim")


@dataclass(frozen=True)
class SeriesSpec:
    path: Path
    unit: str


@dataclass
class StudyConfig:
    raw: dict
    base_dir: Path
    battery: BatteryParams
    data: dict  # name -> SeriesSpec
    scenario: str = "C1"
    start: str | None = None
    end: str | None = None
    rent: float | SeriesSpec = DEFAULT_RENT
    eta_line: float = DEFAULT_ETA_LINE
    blocking: dict | None = None  # {b_block, lower_share}
    envelope: dict = field(default_factory=dict)
    dispatch: dict = field(default_factory=dict)
    solver: BnbConfig = field(default_factory=BnbConfig)
    sweep: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    window_days: int | None = None
    conversion: float = 1.16

    @property
    def source(self) -> str:
        return self.envelope.get("source", "flows-file")

    @property
    def hoa(self) -> bool:
        return bool(self.envelope.get("hoa", False))

    def digest(self) -> str:
        """SHA-256 over the resolved settings and the bytes of every input file."""
        h = hashlib.sha256()
        h.update(json.dumps(self.raw, sort_keys=True, default=str).encode())
        for name in sorted(self.data):
            spec = self.data[name]
            h.update(name.encode())
            if spec.path.exists():
                h.update(hashlib.sha256(spec.path.read_bytes()).digest())
        return h.hexdigest()

    def blocking_spec(self, b_block: float | None = None) -> BlockingSpec | None:
        if b_block is None:
            if not self.blocking:
                return None
            b_block = float(self.blocking.get("b_block", 0.0))
        share = float((self.blocking or {}).get("lower_share", 0.5))
        return BlockingSpec.from_block(self.battery, b_block, share)


def _need(mapping, key, kind, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing key {key!r}")
    value = mapping[key]
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: {key!r} should be {kind.__name__}")
    return value


def _series(entry, name, base: Path) -> SeriesSpec:
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict):
        raise ConfigError(f"data.{name}: expected a path or {{path, unit}} mapping")
    default_unit = "MW" if name in ("flow", "flow_uk", "demand_be", "demand_uk", "wind") else "EUR/MWh"
    path = Path(_need(entry, "path", str, f"data.{name}"))
    path = path if path.is_absolute() else base / path
    return SeriesSpec(path, str(entry.get("unit", default_unit)))


def apply_overrides(raw: dict, **overrides) -> dict:
    """Copy of ``raw`` with command-line values written in (``None`` skips a key)."""
    out = copy.deepcopy(raw)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "b_block":
            out.setdefault("blocking", {})
            out["blocking"] = dict(out["blocking"] or {}, b_block=value)
        elif key in ("start", "end"):
            out["horizon"] = dict(out.get("horizon") or {}, **{key: value})
        else:
            out[key] = value
    return out


def parse_config(raw: dict, config_dir: Path) -> StudyConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = Path(raw.get("data_dir") or os.environ.get(DATA_ENV) or config_dir)
    if not base.is_absolute():
        base = (config_dir / base).resolve()
    try:
        if "battery_file" in raw:
            bf = Path(raw["battery_file"])
            battery = BatteryParams.from_file(bf if bf.is_absolute() else config_dir / bf)
        else:
            battery = BatteryParams.from_mapping(raw.get("battery") or {})
    except FileNotFoundError as exc:
        raise ConfigError(f"battery file not found: {exc.filename}") from exc
    except InterarbError as exc:
        raise ConfigError(f"battery: {exc}") from exc

    data = {name: _series(entry, name, base) for name, entry in (raw.get("data") or {}).items()}
    for name, spec in data.items():
        if not spec.path.is_file():
            raise ConfigError(f"data.{name}: file not found: {spec.path}")

    scenario = str(raw.get("scenario", "C1"))
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")

    horizon = raw.get("horizon") or {}
    start = str(horizon["start"]) if horizon.get("start") is not None else None
    end = str(horizon["end"]) if horizon.get("end") is not None else None

    rent_raw = raw.get("rent", DEFAULT_RENT)
    if isinstance(rent_raw, (int, float)):
        if rent_raw < 0:
            raise ConfigError("rent must be non-negative")
        rent = float(rent_raw)
    else:
        rent = _series(rent_raw, "rent", base)
        if not rent.path.is_file():
            raise ConfigError(f"rent: file not found: {rent.path}")

    envelope = dict(raw.get("envelope") or {})
    if envelope.get("source", "flows-file") not in _SOURCES:
        raise ConfigError(f"envelope.source must be one of {_SOURCES}")

    solver_raw = dict(raw.get("solver") or {})
    try:
        solver = BnbConfig(**solver_raw)
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from exc
    except InterarbError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    blocking = raw.get("blocking")
    if blocking is not None and not isinstance(blocking, dict):
        raise ConfigError("blocking must be a mapping {b_block, lower_share}")

    cfg = StudyConfig(
        raw=raw, base_dir=base, battery=battery, data=data, scenario=scenario, start=start, end=end,
        rent=rent, eta_line=float(raw.get("eta_line", DEFAULT_ETA_LINE)), blocking=blocking,
        envelope=envelope, dispatch=dict(raw.get("dispatch") or {}), solver=solver,
        sweep=dict(raw.get("sweep") or {}), output_dir=Path(raw.get("output_dir", "out")),
        window_days=raw.get("window_days"), conversion=float(raw.get("conversion", 1.16)),
    )
    if blocking is not None:
        try:
            cfg.blocking_spec()
        except InterarbError as exc:
            raise ConfigError(f"blocking: {exc}") from exc
    return cfg


def load_config(path, **overrides) -> StudyConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(apply_overrides(raw, **overrides), path.parent.resolve())


def require(cfg: StudyConfig, *names):
    missing = [n for n in names if n not in cfg.data]
    if missing:
        raise ConfigError(f"data section lacks {missing}")


def load_data(cfg: StudyConfig, names) -> dict:
    """Clean, convert and align the named series; restrict to the horizon dates."""
    require(cfg, *names)
    series = [prepare(cfg.data[n].path, cfg.data[n].unit, n, cfg.conversion) for n in names]
    aligned = align_series(*series)
    out = {}
    for name, s in zip(names, aligned):
        if cfg.start or cfg.end:
            days = np.array(s.day_index, dtype="datetime64[D]")
            keep = np.ones(days.shape, dtype=bool)
            if cfg.start:
                keep &= days >= np.datetime64(cfg.start, "D")
            if cfg.end:
                keep &= days <= np.datetime64(cfg.end, "D")
            s = s.restrict_days(days[keep])
        out[name] = s
    if not len(next(iter(out.values()))):
        raise ConfigError("no complete days left in the selected horizon")
    return out


def dispatch_case(cfg: StudyConfig, series: dict):
    """Case-2 market from the loaded price, demand and wind series."""
    opts = cfg.dispatch
    lines = case_lines(int(opts.get("case", 2)))
    return build_case2(series["price_a"].values, series["price_b"].values, series["demand_be"].values,
                       series["demand_uk"].values, series["wind"].values,
                       block_size=float(opts.get("block_size", 1000.0)), lines=lines,
                       block_rule=str(opts.get("block_rule", "residual")))


def dispatch_links(cfg: StudyConfig, case, result) -> tuple:
    """Envelope links from simulated flows: one named line, or both sides of the island."""
    if cfg.hoa:
        f_be, cap_be = corridor_flow(result, case, "BE", "EI")
        f_uk, cap_uk = corridor_flow(result, case, "EI", "UK")
        return (link_from_flow(f_be, cap_be, cfg.eta_line), link_from_flow(f_uk, cap_uk, cfg.eta_line))
    name = str(cfg.envelope.get("line", "NEMO"))
    try:
        line = case.line(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    return (link_from_flow(extract_flows(result, case, name), line.capacity, cfg.eta_line),)


def build_study(cfg: StudyConfig, with_flows: bool | None = None) -> tuple:
    """Assemble a :class:`Study` and its timestamps from the configured files.

    Flows are loaded when ``with_flows`` is true (default: scenario C3),
    either from ``data.flow`` or by simulating the case-2 dispatch.
    """
    want = cfg.scenario == "C3" if with_flows is None else with_flows
    names = ["price_a", "price_b"]
    if want:
        if cfg.source == "flows-file":
            if "flow" not in cfg.data:
                raise ConfigError("C3 needs data.flow or envelope.source: dispatch-sim")
            names += ["flow", "flow_uk"] if cfg.hoa else ["flow"]
        else:
            names += ["demand_be", "demand_uk", "wind"]
    if isinstance(cfg.rent, SeriesSpec):
        cfg.data.setdefault("rent", cfg.rent)
        names.append("rent")
    series = load_data(cfg, names)
    rent = series["rent"].values if "rent" in series else cfg.rent
    links = ()
    if want and cfg.source == "flows-file":
        links = (link_from_flow(series["flow"].values, float(cfg.envelope.get("l_max", 1000.0)), cfg.eta_line),)
        if cfg.hoa:
            links += (link_from_flow(series["flow_uk"].values, float(cfg.envelope.get("l_max_uk", 1400.0)),
                                     cfg.eta_line),)
    elif want:
        case = dispatch_case(cfg, series)
        links = dispatch_links(cfg, case, clear_market(case))
    pa = series["price_a"]
    try:
        study = Study(pa.values, series["price_b"].values, cfg.battery, rent=rent, eta_line=cfg.eta_line,
                      links=links, blocking=cfg.blocking_spec(),
                      reserved=float(cfg.envelope.get("reserved", 0.0)), days=float(len(pa.day_index)),
                      solver=cfg.solver)
    except InterarbError as exc:
        raise ConfigError(str(exc)) from exc
    return study, pa.timestamps
