"""Three-node transport-model dispatch producing nodal prices and line flows.

Each hour is an independent LP::

    min  sum_g price_g * gen_g
    s.t. sum_{g at n} gen_g + inflow_n - outflow_n = demand_n   (dual: nodal price)
         -cap_l <= flow_l <= cap_l,   0 <= gen_g <= cap_g

Line flows are signed along the line's ``(from, to)`` orientation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DispatchInfeasibleError, ParameterError, ShapeError
from .solver.simplex import solve_lp

NODES = ("BE", "EI", "UK")
WIND_BID = 0.95
BLOCK_BID = 0.95
INFINITE_CAP_FACTOR = 10.0

# Belgian offshore plan lines, GVA; from/to as listed in the plan
INTERCONNECTORS = (
    ("NEMO", "UK", "BE", 1.0),
    ("Nautilus-UK", "UK", "EI", 1.4),
    ("Nautilus-BE", "EI", "BE", 1.4),
    ("HVAC", "EI", "BE", 2.1),
)


@dataclass(frozen=True)
class Line:
    name: str
    src: str
    dst: str
    capacity: float  # MW


@dataclass(frozen=True)
class Generator:
    name: str
    node: str
    price: np.ndarray  # EUR/MWh per hour
    capacity: np.ndarray  # MW per hour
    kind: str  # infinite | block | wind


@dataclass
class DispatchCase:
    lines: list
    generators: list
    demands: dict  # node -> MW series
    nodes: tuple = NODES

    def __post_init__(self):
        n = self.n_hours
        for g in self.generators:
            if g.node not in self.nodes:
                raise ParameterError(f"generator {g.name} at unknown node {g.node}")
            if g.kind not in ("infinite", "block", "wind"):
                raise ParameterError(f"generator {g.name}: unknown kind {g.kind!r}")
            if len(g.price) != n or len(g.capacity) != n:
                raise ShapeError(f"generator {g.name} series length differs from {n}")
            if np.any(np.asarray(g.capacity) < 0):
                raise DataError(f"generator {g.name} has negative capacity")
        for ln in self.lines:
            if ln.src not in self.nodes or ln.dst not in self.nodes:
                raise ParameterError(f"line {ln.name} joins unknown nodes")
            if ln.capacity < 0:
                raise ParameterError(f"line {ln.name} has negative capacity")
        for node, d in self.demands.items():
            if node not in self.nodes:
                raise ParameterError(f"demand at unknown node {node}")
            if len(d) != n:
                raise ShapeError(f"demand series at {node} has wrong length")

    @property
    def n_hours(self) -> int:
        if self.generators:
            return len(self.generators[0].price)
        return len(next(iter(self.demands.values())))

    def line(self, name: str) -> Line:
        for ln in self.lines:
            if ln.name == name:
                return ln
        raise KeyError(f"unknown line {name!r}")


@dataclass
class DispatchResult:
    generation: dict  # generator name -> MW series
    flows: dict  # line name -> MW series
    prices: dict  # node -> EUR/MWh series
    total_cost: float
    tied_hours: list = field(default_factory=list)
    residuals: np.ndarray | None = None  # max nodal balance residual per hour

    def to_csv(self, prices_path, flows_path, timestamps=None):
        n = len(next(iter(self.prices.values())))
        stamps = timestamps if timestamps is not None else range(n)
        with open(prices_path, "w", newline="") as fh:
            w = csv.writer(fh)
            nodes = list(self.prices)
            w.writerow(["timestamp"] + nodes)
            for i, ts in enumerate(stamps):
                w.writerow([ts] + [f"{self.prices[k][i]:.10g}" for k in nodes])
        with open(flows_path, "w", newline="") as fh:
            w = csv.writer(fh)
            names = list(self.flows)
            w.writerow(["timestamp"] + names)
            for i, ts in enumerate(stamps):
                w.writerow([ts] + [f"{self.flows[k][i]:.10g}" for k in names])


def _check_demand(name, d):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise DataError(f"negative demand in {name}")
    return d


def case_lines(case: int = 2) -> list:
    """Interconnectors of test case 1 (NEMO only) or test case 2 (all four), in MW."""
    rows = INTERCONNECTORS[:1] if case == 1 else INTERCONNECTORS
    return [Line(name, a, b, gva * 1000.0) for name, a, b, gva in rows]


def build_case2(prices_be, prices_uk, demand_be, demand_uk, wind, block_size: float = 1000.0,
                lines: list | None = None, block_rule: str = "residual") -> DispatchCase:
    """Case-2 market: historical-price generators, block generators and the island wind plant.

    ``block_rule="residual"`` sizes g2/g4 as ``max(0, demand - block_size)``;
    ``"block"`` uses ``block_size`` itself, the alternative reading.
    """
    pa = np.asarray(prices_be, dtype=float)
    pb = np.asarray(prices_uk, dtype=float)
    d_be = _check_demand("demand_be", demand_be)
    d_uk = _check_demand("demand_uk", demand_uk)
    w = np.asarray(wind, dtype=float)
    n = pa.shape[0]
    if not (pb.shape[0] == d_be.shape[0] == d_uk.shape[0] == w.shape[0] == n):
        raise ShapeError("case-2 series must be aligned")
    if np.any(w < 0):
        raise DataError("negative wind availability")
    if block_size < 0:
        raise ParameterError("block_size must be non-negative")
    if block_rule == "residual":
        cap_g4 = np.maximum(0.0, d_be - block_size)
        cap_g2 = np.maximum(0.0, d_uk - block_size)
    elif block_rule == "block":
        cap_g4 = np.full(n, float(block_size))
        cap_g2 = np.full(n, float(block_size))
    else:
        raise ParameterError(f"unknown block_rule {block_rule!r}")
    peak = max(d_be.max(initial=0.0), d_uk.max(initial=0.0), 1.0)
    big_be = np.full(n, INFINITE_CAP_FACTOR * max(d_be.max(initial=0.0), 1.0) if d_be.any() else INFINITE_CAP_FACTOR * peak)
    big_uk = np.full(n, INFINITE_CAP_FACTOR * max(d_uk.max(initial=0.0), 1.0) if d_uk.any() else INFINITE_CAP_FACTOR * peak)
    gens = [
        Generator("g3", "BE", pa, big_be, "infinite"),
        Generator("g4", "BE", BLOCK_BID * pa, cap_g4, "block"),
        Generator("g1", "UK", pb, big_uk, "infinite"),
        Generator("g2", "UK", BLOCK_BID * pb, cap_g2, "block"),
        Generator("owpp", "EI", WIND_BID * pa, w, "wind"),
    ]
    demands = {"BE": d_be, "EI": np.zeros(n), "UK": d_uk}
    return DispatchCase(lines if lines is not None else case_lines(2), gens, demands)


def _hour_lp(case: DispatchCase, i: int):
    nodes = case.nodes
    ng, nl = len(case.generators), len(case.lines)
    c = np.r_[[g.price[i] for g in case.generators], np.zeros(nl)]
    A = np.zeros((len(nodes), ng + nl))
    for k, g in enumerate(case.generators):
        A[nodes.index(g.node), k] = 1.0
    for k, ln in enumerate(case.lines):
        A[nodes.index(ln.src), ng + k] = -1.0
        A[nodes.index(ln.dst), ng + k] = 1.0
    b = np.array([case.demands.get(nd, np.zeros(case.n_hours))[i] for nd in nodes], dtype=float)
    lb = np.r_[np.zeros(ng), [-ln.capacity for ln in case.lines]]
    ub = np.r_[[g.capacity[i] for g in case.generators], [ln.capacity for ln in case.lines]]
    return c, A, b, lb, ub


def clear_market(case: DispatchCase, hours=None, tol: float = 1e-9) -> DispatchResult:
    """Solve the hourly dispatch LPs; nodal prices are the balance-row duals.

    Hours whose optimal basis is primal degenerate (a basic variable sitting
    on a bound) have non-unique duals; they are reported in ``tied_hours``
    and the basic duals of the solver are returned.
    """
    n = case.n_hours
    hours = range(n) if hours is None else hours
    hours = list(hours)
    gen = {g.name: np.zeros(len(hours)) for g in case.generators}
    flows = {ln.name: np.zeros(len(hours)) for ln in case.lines}
    prices = {nd: np.zeros(len(hours)) for nd in case.nodes}
    residuals = np.zeros(len(hours))
    infeasible, tied = [], []
    total = 0.0
    ng = len(case.generators)
    for k, i in enumerate(hours):
        c, A, b, lb, ub = _hour_lp(case, i)
        res = solve_lp(c, A_eq=A, b_eq=b, lb=lb, ub=ub)
        if res.status != "optimal":
            infeasible.append(i)
            continue
        x = res.x
        for j, g in enumerate(case.generators):
            gen[g.name][k] = x[j]
        for j, ln in enumerate(case.lines):
            flows[ln.name][k] = x[ng + j]
        for j, nd in enumerate(case.nodes):
            prices[nd][k] = res.duals[j]
        residuals[k] = float(np.max(np.abs(A @ x - b))) if len(b) else 0.0
        total += float(c @ x)
        basic = res.basis.head[res.basis.head < len(c)]
        at_bound = np.any((np.abs(x[basic] - lb[basic]) <= tol) | (np.abs(x[basic] - ub[basic]) <= tol))
        if at_bound:
            tied.append(i)
    if infeasible:
        raise DispatchInfeasibleError(infeasible)
    return DispatchResult(gen, flows, prices, total, tied, residuals)


def _orientation(src: str, dst: str) -> float:
    """+1 when the line points from the Belgian side toward the UK side."""
    order = {"BE": 0, "EI": 1, "UK": 2}
    return 1.0 if order[src] < order[dst] else -1.0


def extract_flows(result: DispatchResult, case: DispatchCase, line: str) -> np.ndarray:
    """Flow of one line in the envelope convention (positive = toward the UK)."""
    if line not in result.flows:
        raise KeyError(f"unknown line {line!r}")
    ln = case.line(line)
    return _orientation(ln.src, ln.dst) * result.flows[line]


def corridor_flow(result: DispatchResult, case: DispatchCase, a: str, b: str):
    """Aggregate flow and capacity of every line joining nodes ``a`` and ``b``.

    Sign follows the envelope convention. Used to lump Nautilus-BE and the
    HVAC link into the single Belgian-side limit of the island.
    """
    total = None
    cap = 0.0
    for ln in case.lines:
        if {ln.src, ln.dst} == {a, b}:
            f = extract_flows(result, case, ln.name)
            total = f if total is None else total + f
            cap += ln.capacity
    if total is None:
        raise KeyError(f"no line between {a} and {b}")
    return total, cap
