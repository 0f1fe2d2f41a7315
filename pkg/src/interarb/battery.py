"""Battery parameters, efficiencies, adjusted cross-border prices and SoC checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ParameterError, ShapeError

FEAS_TOL = 1e-6  # MWh

# Config-file keys (datasheet wording) -> BatteryParams field names.
_CONFIG_KEYS = {
    "cost": "cost_per_kwh",
    "rated_capacity": "b_max",
    "min_capacity": "b_min",
    "max_rate": "delta_max",
    "min_rate": "delta_min",
    "charging_efficiency": "eta_ch",
    "discharging_efficiency": "eta_dis",
    "converter_efficiency": "eta_inv",
    "initial_charge": "b0",
    "cycle_life": "cycle_life_100dod",
    "calendar_life": "calendar_life",
    "sampling_period": "h",
}


@dataclass(frozen=True)
class BatteryParams:
    """Physical and economic description of a battery.

    Energies are in MWh, powers in MW, ``h`` in hours and ``cost_per_kwh`` in
    EUR/kWh. Defaults are the 1 MWh / 0.5 MW unit used for the NEMO studies.
    """

    b_min: float = 0.1
    b_max: float = 1.0
    b0: float = 0.5
    delta_min: float = -0.5
    delta_max: float = 0.5
    eta_ch: float = 0.95
    eta_dis: float = 0.95
    eta_inv: float = 0.95
    h: float = 1.0
    cost_per_kwh: float = 100.0
    cycle_life_100dod: float = 7200
    calendar_life: float = 10.0

    def __post_init__(self):
        if not self.b_min < self.b_max:
            raise ParameterError(f"need b_min < b_max, got {self.b_min}, {self.b_max}")
        if not self.b_min <= self.b0 <= self.b_max:
            raise ParameterError(f"b0={self.b0} outside [{self.b_min}, {self.b_max}]")
        if not self.delta_min < 0 < self.delta_max:
            raise ParameterError("need delta_min < 0 < delta_max")
        if self.h <= 0:
            raise ParameterError("sampling period must be positive")
        for name in ("eta_ch", "eta_dis", "eta_inv"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name}={v} not in (0, 1]")

    @property
    def x_min(self) -> float:
        return self.delta_min * self.h

    @property
    def x_max(self) -> float:
        return self.delta_max * self.h

    @property
    def investment(self) -> float:
        """Capital cost in EUR (rated capacity times unit cost)."""
        return self.cost_per_kwh * 1000.0 * self.b_max

    @classmethod
    def from_mapping(cls, data: dict) -> "BatteryParams":
        kwargs = {}
        for key, value in data.items():
            name = _CONFIG_KEYS.get(key, key)
            if name not in cls.__dataclass_fields__:
                raise ParameterError(f"unknown battery key {key!r}")
            kwargs[name] = float(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "BatteryParams":
        with open(Path(path)) as fh:
            data = yaml.safe_load(fh) or {}
        if "battery" in data and isinstance(data["battery"], dict):
            data = data["battery"]
        return cls.from_mapping(data)

    def to_mapping(self) -> dict:
        inverse = {v: k for k, v in _CONFIG_KEYS.items()}
        return {inverse[name]: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class EffectiveEfficiencies:
    eta_ch_star: float
    eta_dis_star: float


def effective_efficiencies(p: BatteryParams) -> EffectiveEfficiencies:
    return EffectiveEfficiencies(p.eta_ch * p.eta_inv, p.eta_dis * p.eta_inv)


def adjust_prices(p_buy_b, p_sell_b, rent, eta_line: float):
    """Grid-B prices as seen from the battery's side of the interconnector.

    Buying across the line costs ``(p + rent) / eta_line``; selling earns
    ``(p - rent) * eta_line``. Returns ``(buy_adj, sell_adj)`` arrays.
    """
    if not 0 < eta_line <= 1:
        raise ParameterError(f"eta_line={eta_line} not in (0, 1]")
    p_buy_b = np.asarray(p_buy_b, dtype=float)
    p_sell_b = np.asarray(p_sell_b, dtype=float)
    rent = np.broadcast_to(np.asarray(rent, dtype=float), p_buy_b.shape)
    if np.any(rent < 0):
        raise ParameterError("interconnector rent must be non-negative")
    return (p_buy_b + rent) / eta_line, (p_sell_b - rent) * eta_line


@dataclass(frozen=True)
class PriceSet:
    """Buy/sell prices for both grids plus the adjusted grid-B pair."""

    p_buy_a: np.ndarray
    p_sell_a: np.ndarray
    p_buy_b: np.ndarray
    p_sell_b: np.ndarray
    rent: np.ndarray
    eta_line: float
    p_buy_b_adj: np.ndarray = field(init=False)
    p_sell_b_adj: np.ndarray = field(init=False)

    def __post_init__(self):
        arrays = {}
        for name in ("p_buy_a", "p_sell_a", "p_buy_b", "p_sell_b"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float)
        n = arrays["p_buy_a"].shape[0]
        if any(a.shape != (n,) for a in arrays.values()):
            raise ShapeError("price series must be 1-D and of equal length")
        arrays["rent"] = np.broadcast_to(np.asarray(self.rent, dtype=float), (n,)).copy()
        buy_adj, sell_adj = adjust_prices(arrays["p_buy_b"], arrays["p_sell_b"], arrays["rent"], self.eta_line)
        arrays["p_buy_b_adj"] = buy_adj
        arrays["p_sell_b_adj"] = sell_adj
        for name, value in arrays.items():
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def from_markets(cls, price_a, price_b, rent=0.0, eta_line=1.0) -> "PriceSet":
        """Single clearing price per zone, used for both buying and selling."""
        price_a = np.asarray(price_a, dtype=float)
        price_b = np.asarray(price_b, dtype=float)
        return cls(price_a, price_a, price_b, price_b, rent, eta_line)

    def __len__(self):
        return self.p_buy_a.shape[0]

    def with_rent(self, rent) -> "PriceSet":
        return PriceSet(self.p_buy_a, self.p_sell_a, self.p_buy_b, self.p_sell_b, rent, self.eta_line)

    def slice(self, start: int, stop: int) -> "PriceSet":
        return PriceSet(
            self.p_buy_a[start:stop], self.p_sell_a[start:stop],
            self.p_buy_b[start:stop], self.p_sell_b[start:stop],
            self.rent[start:stop], self.eta_line,
        )


def simulate_soc(p: BatteryParams, x) -> np.ndarray:
    """State of charge after each step, ``b_i = b_{i-1} + x_i`` from ``b0``."""
    x = np.asarray(x, dtype=float)
    return p.b0 + np.cumsum(x)


def grid_power(p: BatteryParams, x, starred: bool = False) -> np.ndarray:
    """Grid-side power drawn for battery-side energy changes ``x``.

    ``starred=True`` folds the inverter efficiency into both directions.
    """
    x = np.asarray(x, dtype=float)
    if starred:
        eff = effective_efficiencies(p)
        eta_ch, eta_dis = eff.eta_ch_star, eff.eta_dis_star
    else:
        eta_ch, eta_dis = p.eta_ch, p.eta_dis
    return np.maximum(0.0, x) / (p.h * eta_ch) - eta_dis * np.maximum(0.0, -x) / p.h


@dataclass
class Violation:
    index: int
    kind: str  # ramp_a | envelope | joint_ramp | capacity | sign
    amount: float


@dataclass
class FeasibilityReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def check_feasible(p: BatteryParams, x_a, x_b, envelope=None, b_lo=None, b_hi=None,
                   tol: float = FEAS_TOL) -> FeasibilityReport:
    """Check ramp, envelope, joint-ramp, capacity and same-sign constraints.

    ``envelope`` defaults to the full ramp range; ``b_lo``/``b_hi`` default to
    the battery's own capacity bounds (pass blocked bounds when blocking).
    Every violated step is reported, not just the first.
    """
    x_a = np.asarray(x_a, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    if x_a.shape != x_b.shape or x_a.ndim != 1:
        raise ShapeError("x_a and x_b must be 1-D of equal length")
    n = x_a.shape[0]
    if envelope is None:
        env_lo, env_hi = np.full(n, p.x_min), np.full(n, p.x_max)
    else:
        env_lo, env_hi = np.asarray(envelope.x_min_adj), np.asarray(envelope.x_max_adj)
        if env_lo.shape != (n,):
            raise ShapeError("envelope length does not match trajectories")
    b_lo = p.b_min if b_lo is None else b_lo
    b_hi = p.b_max if b_hi is None else b_hi

    out = []

    def flag(mask, kind, amount):
        for i in np.flatnonzero(mask):
            out.append(Violation(int(i), kind, float(amount[i])))

    flag((x_a < p.x_min - tol) | (x_a > p.x_max + tol), "ramp_a",
         np.maximum(p.x_min - x_a, x_a - p.x_max))
    flag((x_b < env_lo - tol) | (x_b > env_hi + tol), "envelope",
         np.maximum(env_lo - x_b, x_b - env_hi))
    s = x_a + x_b
    flag((s < p.x_min - tol) | (s > p.x_max + tol), "joint_ramp",
         np.maximum(p.x_min - s, s - p.x_max))
    soc = simulate_soc(p, s)
    flag((soc < b_lo - tol) | (soc > b_hi + tol), "capacity",
         np.maximum(b_lo - soc, soc - b_hi))
    prod = x_a * x_b
    # products are quadratic in energy, so compare against tol squared scale
    flag(prod < -tol * max(p.x_max, -p.x_min), "sign", -prod)
    out.sort(key=lambda v: (v.index, v.kind))
    return FeasibilityReport(out)
