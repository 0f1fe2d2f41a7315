"""Scenario definitions and the single-solve runner shared by sweeps and the CLI.

Scenarios:

* ``C1``: grid A only (grid-B exchange closed at every step).
* ``C2``: both grids, grid-B exchange limited only by the ramp.
* ``C3``: both grids, grid-B exchange limited by the interconnector envelope
  (one link, or the two sides of the island for the hybrid asset), optionally
  widened by a reserved capacity.
* ``K1``: single-action baseline using the best price of either grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .battery import BatteryParams, PriceSet
from .envelope import LinkState, OperatingEnvelope, envelope_hoa, envelope_single_link, reserve_capacity
from .errors import ParameterError
from .milp import ArbitrageSolution, BlockingSpec, build_k1, build_pmilp, decode_solution
from .solver.bnb import BnbConfig, MilpResult, relative_gap, solve_milp

SCENARIOS = ("C1", "C2", "C3", "K1")


@dataclass(frozen=True)
class Study:
    price_a: np.ndarray  # EUR/MWh, grid A (home market of the battery)
    price_b: np.ndarray  # EUR/MWh, grid B
    battery: BatteryParams = field(default_factory=BatteryParams)
    rent: float = 0.0
    eta_line: float = 0.975
    links: tuple = ()  # (LinkState,) for one line, (be_side, uk_side) for the island
    blocking: BlockingSpec | None = None
    reserved: float = 0.0  # MW of firm capacity for grid-B exchange
    days: float | None = None  # retained days the horizon stands for
    solver: BnbConfig = field(default_factory=BnbConfig)

    def __post_init__(self):
        pa = np.asarray(self.price_a, dtype=float)
        pb = np.asarray(self.price_b, dtype=float)
        if pa.shape != pb.shape or pa.ndim != 1:
            raise ParameterError("price series must be 1-D and aligned")
        object.__setattr__(self, "price_a", pa)
        object.__setattr__(self, "price_b", pb)
        for link in self.links:
            if link.flow.shape != pa.shape:
                raise ParameterError("flow series must align with prices")
        if len(self.links) > 2:
            raise ParameterError("at most two links (Belgian and UK sides)")

    @property
    def n_steps(self) -> int:
        return self.price_a.shape[0]

    @property
    def horizon_days(self) -> float:
        if self.days is not None:
            return float(self.days)
        return self.n_steps * self.battery.h / 24.0

    def with_(self, **changes) -> "Study":
        return replace(self, **changes)

    def prices(self, rent: float | None = None) -> PriceSet:
        return PriceSet.from_markets(self.price_a, self.price_b, self.rent if rent is None else rent,
                                     self.eta_line)

    def envelope(self, scenario: str, reserved: float | None = None) -> OperatingEnvelope:
        n, bat = self.n_steps, self.battery
        if scenario == "C1":
            return OperatingEnvelope.closed(n)
        if scenario == "C2":
            return OperatingEnvelope.full(n, bat.x_min, bat.x_max)
        if scenario != "C3":
            raise ParameterError(f"no envelope for scenario {scenario!r}")
        if not self.links:
            raise ParameterError("scenario C3 needs interconnector flows")
        if len(self.links) == 1:
            env = envelope_single_link(self.links[0], bat.x_min, bat.x_max)
        else:
            env = envelope_hoa(self.links[0], self.links[1], bat.x_min, bat.x_max)
        r = self.reserved if reserved is None else reserved
        if r > 0:
            env = reserve_capacity(env, r, bat.x_min, bat.x_max)
        return env


@dataclass
class ScenarioOutcome:
    scenario: str
    solution: ArbitrageSolution | None
    result: MilpResult
    problem: object = field(repr=False, default=None)

    @property
    def status(self) -> str:
        return self.result.status

    @property
    def revenue(self) -> float:
        return -self.result.objective if self.solution is not None else float("nan")


def build_problem(study: Study, scenario: str, rent: float | None = None,
                  blocking: BlockingSpec | None = None, reserved: float | None = None):
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    prices = study.prices(rent)
    blocking = blocking if blocking is not None else study.blocking
    if scenario == "K1":
        return build_k1(prices, study.battery, blocking)
    return build_pmilp(prices, study.battery, study.envelope(scenario, reserved), blocking)


def run_scenario(study: Study, scenario: str, rent: float | None = None,
                 blocking: BlockingSpec | None = None, reserved: float | None = None) -> ScenarioOutcome:
    """Build, solve and decode one scenario."""
    problem = build_problem(study, scenario, rent, blocking, reserved)
    result = solve_milp(problem, study.solver)
    solution = None
    if result.x is not None:
        solution = decode_solution(problem, result.x, status=result.status)
    return ScenarioOutcome(scenario, solution, result, problem)


def link_from_flow(flow, l_max: float, eta_line: float = 1.0) -> LinkState:
    return LinkState(float(l_max), np.asarray(flow, dtype=float), eta_line)


def _slice_study(study: Study, start: int, stop: int, b0: float) -> Study:
    links = tuple(LinkState(ln.l_max, ln.flow[start:stop], ln.eta_line) for ln in study.links)
    return replace(study, price_a=study.price_a[start:stop], price_b=study.price_b[start:stop],
                   links=links, battery=replace(study.battery, b0=b0), days=None)


def run_rolling(study: Study, scenario: str, window: int, rent: float | None = None,
                blocking: BlockingSpec | None = None, reserved: float | None = None) -> ScenarioOutcome:
    """Solve consecutive windows of ``window`` steps, carrying the final SoC forward.

    Long horizons become a chain of small MILPs; the result is optimal per
    window, not for the horizon as a whole.
    """
    if window < 1:
        raise ParameterError("window must be at least one step")
    n = study.n_steps
    if window >= n:
        return run_scenario(study, scenario, rent, blocking, reserved)
    parts, results = [], []
    b0 = study.battery.b0
    for start in range(0, n, window):
        sub = _slice_study(study, start, min(n, start + window), b0)
        out = run_scenario(sub, scenario, rent, blocking, reserved)
        results.append(out.result)
        if out.solution is None:
            break
        parts.append(out.solution)
        b0 = float(np.clip(out.solution.soc[-1], study.battery.b_min, study.battery.b_max))
    statuses = [r.status for r in results]
    status = next((s for s in ("infeasible", "limit") if s in statuses), "optimal")
    objective = sum(r.objective for r in results)
    bound = sum(r.bound for r in results)
    combined = MilpResult(status, None, objective, bound, relative_gap(objective, bound),
                          sum(r.nodes for r in results), sum(r.iterations for r in results),
                          sum(r.elapsed for r in results), [])
    solution = None
    if status != "infeasible":
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
        solution = ArbitrageSolution(cat("x_a"), cat("x_b"), cat("t_a"), cat("t_b"), cat("z_ch"),
                                     cat("z_dis"), float(sum(p.objective for p in parts)), cat("soc"), status)
    return ScenarioOutcome(scenario, solution, combined, None)
