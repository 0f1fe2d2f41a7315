"""Performance indices and the parameter studies built on them.

Indices: interconnector utilisation factor, arbitrage revenue, rainflow
cycle count, simple payback period and the cycles needed to reach payback.
Studies: rent sensitivity, capacity-blocking sweeps with the knee (M1) and
calendar-life (M2) selections, reserved interconnector capacity, and a
bootstrap timing harness.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .battery import BatteryParams
from .errors import DataError, InterarbError, ParameterError
from .milp import ArbitrageSolution, BlockingSpec
from .study import Study, run_scenario

DAYS_PER_YEAR = 365.0


class SweepPointError(InterarbError, RuntimeError):
    """A sweep point did not solve to optimality; the sweep stops there."""

    def __init__(self, message: str, status: str = "error"):
        self.status = status
        super().__init__(message)


# ---------------------------------------------------------------- indices
def utilization_factor(flow, l_max: float) -> float:
    """Mean absolute flow as a percentage of the line limit."""
    flow = np.asarray(flow, dtype=float)
    if flow.size == 0:
        raise DataError("empty flow series")
    if l_max <= 0:
        raise ParameterError("l_max must be positive")
    return 100.0 * float(np.sum(np.abs(flow))) / (l_max * flow.size)


def turning_points(series) -> np.ndarray:
    """Local extrema of a path, flat runs collapsed, endpoints kept."""
    s = np.asarray(series, dtype=float)
    if s.size == 0:
        return s
    keep = np.r_[True, np.diff(s) != 0]
    s = s[keep]
    if s.size < 3:
        return s
    d = np.diff(s)
    interior = np.sign(d[1:]) != np.sign(d[:-1])
    return s[np.r_[True, interior, True]]


def rainflow(series) -> list:
    """Rainflow ranges as ``(range, count)`` with count 1.0 (cycle) or 0.5 (half).

    Three-point extraction with start-point handling, as in ASTM E1049;
    the residue is counted as half cycles.
    """
    out = []
    stack = []
    for p in turning_points(series):
        stack.append(float(p))
        while len(stack) >= 3:
            x = abs(stack[-1] - stack[-2])
            y = abs(stack[-2] - stack[-3])
            if x < y:
                break
            if len(stack) == 3:
                out.append((y, 0.5))
                stack.pop(0)
            else:
                out.append((y, 1.0))
                last = stack.pop()
                del stack[-2:]
                stack.append(last)
    for a, b in zip(stack, stack[1:]):
        out.append((abs(b - a), 0.5))
    return out


def linear_depth(d: float) -> float:
    return d


def count_cycles(soc, b_max: float, weight=linear_depth) -> float:
    """Equivalent full (100% depth) cycles of a state-of-charge path.

    A closed cycle of depth ``d`` (range over ``b_max``) adds ``weight(d)``;
    a residual half cycle adds half of that.
    """
    if b_max <= 0:
        raise ParameterError("b_max must be positive")
    terms = sorted(c * weight(r / b_max) for r, c in rainflow(soc))
    return math.fsum(terms)


def annualize(value: float, days: float) -> float:
    if days <= 0:
        raise ParameterError("days must be positive")
    return value * DAYS_PER_YEAR / days


def simple_payback(investment: float, annual_revenue: float) -> float:
    """Years to recover ``investment``; infinite when revenue is not positive."""
    if investment <= 0:
        raise ParameterError("investment must be positive")
    if annual_revenue <= 0:
        return math.inf
    return investment / annual_revenue


@dataclass(frozen=True)
class Metrics:
    revenue: float  # EUR over the horizon
    cycles_100dod: float  # over the horizon
    spp: float  # years
    cycles_to_payback: float
    uf: float | None  # percent, None without flow data
    days: float
    annual_revenue: float
    annual_cycles: float
    viable: bool  # cycles_to_payback within the cycle life

    def row(self) -> dict:
        return asdict(self)


def cycles_to_payback(metrics: Metrics) -> float:
    """Cycles accumulated before the investment is recovered."""
    if math.isinf(metrics.spp):
        return math.inf
    return metrics.annual_cycles * metrics.spp


def compute_metrics(solution: ArbitrageSolution, battery: BatteryParams, days: float,
                    flow=None, l_max: float | None = None, weight=linear_depth) -> Metrics:
    revenue = solution.revenue
    path = np.r_[battery.b0, solution.soc]
    cycles = count_cycles(path, battery.b_max, weight)
    annual_rev = annualize(revenue, days)
    annual_cyc = annualize(cycles, days)
    spp = simple_payback(battery.investment, annual_rev)
    uf = utilization_factor(flow, l_max) if flow is not None and l_max else None
    ctp = math.inf if math.isinf(spp) else annual_cyc * spp
    return Metrics(revenue, cycles, spp, ctp, uf, days, annual_rev, annual_cyc,
                   bool(ctp <= battery.cycle_life_100dod))


# ------------------------------------------------------------- selections
@dataclass(frozen=True)
class Selection:
    value: float
    index: int | None
    flag: str  # ok | no-knee | insufficient | not-viable | no-crossing | ambiguous


def select_blocking_m1(axis, spp) -> Selection:
    """Knee of the SPP-vs-b_block curve by maximum distance to the chord.

    Both axes are min-max normalised first, which makes the choice invariant
    to affine rescaling. Only the finite part of the curve is used.
    """
    x = np.asarray(axis, dtype=float)
    y = np.asarray(spp, dtype=float)
    ok = np.isfinite(y)
    idx = np.flatnonzero(ok)
    if idx.size < 3:
        return Selection(float(x[0]), 0, "insufficient")
    xs, ys = x[idx], y[idx]
    xr, yr = xs.max() - xs.min(), ys.max() - ys.min()
    if xr == 0 or yr == 0:
        return Selection(float(xs[0]), int(idx[0]), "no-knee")
    xn, yn = (xs - xs.min()) / xr, (ys - ys.min()) / yr
    dx, dy = xn[-1] - xn[0], yn[-1] - yn[0]
    dist = np.abs(dx * (yn - yn[0]) - dy * (xn - xn[0])) / math.hypot(dx, dy)
    k = int(np.argmax(dist))
    if dist[k] <= 1e-9:
        return Selection(float(xs[0]), int(idx[0]), "no-knee")
    flag = "ok" if ok.all() else "insufficient"
    return Selection(float(xs[k]), int(idx[k]), flag)


def select_blocking_m2(axis, spp, calendar_life: float) -> Selection:
    """Largest b_block whose SPP stays within the calendar life (interpolated)."""
    x = np.asarray(axis, dtype=float)
    y = np.asarray(spp, dtype=float)
    if y[0] > calendar_life:
        return Selection(0.0, None, "not-viable")
    above = np.flatnonzero(y > calendar_life)
    if above.size == 0:
        return Selection(float(x[-1]), int(x.size - 1), "no-crossing")
    k = int(above[0])
    flag = "ambiguous" if np.any(y[k:] <= calendar_life) else "ok"
    if not np.isfinite(y[k]):
        return Selection(float(x[k - 1]), k - 1, flag)
    frac = (calendar_life - y[k - 1]) / (y[k] - y[k - 1])
    return Selection(float(x[k - 1] + frac * (x[k] - x[k - 1])), None, flag)


# ------------------------------------------------------------------ sweeps
@dataclass
class SweepResult:
    kind: str  # rent | blocking | reserved
    axis: np.ndarray
    metrics: dict  # scenario -> list of Metrics, one per axis point
    selections: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # additional per-point columns

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        if self.axis.size and np.any(np.diff(self.axis) <= 0):
            raise ParameterError("sweep axis must be strictly increasing")
        for sc, rows in self.metrics.items():
            if len(rows) != self.axis.size:
                raise ParameterError(f"scenario {sc}: {len(rows)} points for {self.axis.size} axis values")

    def column(self, scenario: str, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics[scenario]], dtype=float)

    def to_csv(self, path, header: str | None = None):
        """Wide table: one row per axis point."""
        names = ("revenue", "cycles_100dod", "spp", "cycles_to_payback", "uf", "viable")
        cols = [f"{sc}_{n}" for sc in self.metrics for n in names] + list(self.extra)
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow([self.kind] + cols)
            for k, a in enumerate(self.axis):
                row = [_fmt(a)]
                for sc, rows in self.metrics.items():
                    m = rows[k]
                    row += [_fmt(getattr(m, n)) for n in names]
                row += [_fmt(self.extra[c][k]) for c in self.extra]
                w.writerow(row)

    def to_long_csv(self, path, header: str | None = None):
        """Plot-ready long format: axis, scenario, metric, value."""
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow([self.kind, "scenario", "metric", "value"])
            for k, a in enumerate(self.axis):
                for sc, rows in self.metrics.items():
                    for n, v in rows[k].row().items():
                        w.writerow([_fmt(a), sc, n, _fmt(v)])

    def summary(self) -> dict:
        out = {"kind": self.kind, "points": int(self.axis.size), "selections": {}}
        for sc, sel in self.selections.items():
            out["selections"][sc] = {k: asdict(v) for k, v in sel.items()}
        for sc in self.metrics:
            out.setdefault("viable", {})[sc] = [bool(m.viable) for m in self.metrics[sc]]
        return out

    def to_json(self, path, extra: dict | None = None):
        payload = self.summary()
        if extra:
            payload.update(extra)
        with open(path, "w") as fh:
            json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}" if isinstance(v, (float, np.floating)) else str(v)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _flow_info(study: Study):
    if not study.links:
        return None, None
    link = study.links[-1]  # UK side for the island; the line itself otherwise
    return link.flow, abs(link.l_max)


def _solve_point(args):
    study, scenario, kwargs = args
    out = run_scenario(study, scenario, **kwargs)
    if out.solution is None or out.status != "optimal":
        raise SweepPointError(f"{scenario} {kwargs}: solver status {out.status}", out.status)
    flow, l_max = _flow_info(study)
    return compute_metrics(out.solution, study.battery, study.horizon_days, flow, l_max)


def _run_axis(kind: str, axis, scenario: str, kwargs_list, study: Study, workers: int) -> list:
    """Metrics for each axis point in axis order; the first failing point aborts the sweep."""
    tasks = [(study, scenario, kw) for kw in kwargs_list]

    def fail(value, exc):
        return SweepPointError(f"{kind} sweep failed at {value:g} ({scenario}): {exc}",
                               getattr(exc, "status", "error"))

    out = []
    if workers <= 1:
        for value, task in zip(axis, tasks):
            try:
                out.append(_solve_point(task))
            except InterarbError as exc:
                raise fail(value, exc) from exc
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_solve_point, t) for t in tasks]
        for value, fut in zip(axis, futures):
            try:
                out.append(fut.result())
            except InterarbError as exc:
                for rest in futures:
                    rest.cancel()
                raise fail(value, exc) from exc
    return out


def sweep_rent(study: Study, rents, scenarios=("C1", "C2", "C3"), workers: int = 1) -> SweepResult:
    """Solve every scenario at each rent; grid-A-only C1 is solved once."""
    rents = [float(r) for r in rents]
    metrics = {}
    for sc in scenarios:
        if sc == "C1":
            metrics[sc] = _run_axis("rent", rents[:1], sc, [{}], study, 1) * len(rents)
        else:
            metrics[sc] = _run_axis("rent", rents, sc, [{"rent": r} for r in rents], study, workers)
    return SweepResult("rent", rents, metrics)


def sweep_blocking(study: Study, blocks, scenarios=("C2", "C3"), lower_share: float = 0.5,
                   workers: int = 1) -> SweepResult:
    """SPP and cycles against b_block, with M1 and M2 selections per scenario."""
    blocks = [float(b) for b in blocks]
    specs = [BlockingSpec.from_block(study.battery, b, lower_share) for b in blocks]
    metrics = {sc: _run_axis("blocking", blocks, sc, [{"blocking": s} for s in specs], study, workers)
               for sc in scenarios}
    res = SweepResult("blocking", blocks, metrics)
    for sc in scenarios:
        spp = res.column(sc, "spp")
        res.selections[sc] = {
            "M1": select_blocking_m1(blocks, spp),
            "M2": select_blocking_m2(blocks, spp, study.battery.calendar_life),
        }
    return res


def sweep_reserved(study: Study, fractions, rent: float = 5.0, workers: int = 1) -> SweepResult:
    """C3 revenue against the reserved share of the ramp limit, relative to C1."""
    fractions = [float(f) for f in fractions]
    if any(f < 0 or f > 1 for f in fractions):
        raise ParameterError("fractions must lie in [0, 1]")
    bat = study.battery
    ramp = max(-bat.x_min, bat.x_max)
    base = _run_axis("reserved", fractions[:1], "C1", [{}], study, 1)[0]
    c3 = _run_axis("reserved", fractions, "C3", [{"rent": rent, "reserved": f * ramp} for f in fractions],
                   study, workers)
    gain = [m.revenue - base.revenue for m in c3]
    if base.revenue != 0:
        pct = [100.0 * g / abs(base.revenue) for g in gain]
    else:
        pct = [0.0 if g == 0 else math.copysign(math.inf, g) for g in gain]
    res = SweepResult("reserved", fractions, {"C1": [base] * len(fractions), "C3": c3})
    res.extra["revenue_gain"] = gain
    res.extra["marginal_increase_pct"] = pct
    return res


@dataclass(frozen=True)
class TimingResult:
    times: np.ndarray
    median: float
    q1: float
    q3: float


def _bootstrap(study: Study, rng) -> Study:
    """Resample whole days (with replacement) of prices and flows."""
    steps = int(round(24 / study.battery.h))
    n_days = study.n_steps // steps
    if n_days < 1:
        return study
    pick = rng.integers(0, n_days, n_days)
    idx = (pick[:, None] * steps + np.arange(steps)).ravel()
    links = tuple(type(ln)(ln.l_max, ln.flow[idx], ln.eta_line) for ln in study.links)
    return study.with_(price_a=study.price_a[idx], price_b=study.price_b[idx], links=links)


def timing_harness(study: Study, runs: int, scenario: str = "C3", seed: int = 0) -> TimingResult:
    """Wall-clock solve times over bootstrap resamples of the day ordering."""
    if runs < 1:
        raise ParameterError("runs must be at least 1")
    rng = np.random.default_rng(seed)
    times = []
    for _ in range(runs):
        s = _bootstrap(study, rng)
        t0 = time.perf_counter()
        run_scenario(s, scenario)
        times.append(time.perf_counter() - t0)
    t = np.array(times)
    return TimingResult(t, float(np.median(t)), float(np.percentile(t, 25)), float(np.percentile(t, 75)))
