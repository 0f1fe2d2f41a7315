"""Best-first branch-and-bound for the orthant-selection binaries.

Node LPs are solved by the dual simplex warm-started from the parent's
optimal basis; only the bound of the branched binary changes between a node
and its parent, so typically a handful of pivots suffice.

A node whose relaxation already keeps ``x_a`` and ``x_b`` in a common orthant
at every step is integral up to a relabelling of ``z``: the binaries carry no
cost, so they are rounded to the orthant actually used and the node is
fathomed with the LP objective.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError
from .simplex import Simplex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BnbConfig:
    integer_tol: float = 1e-6
    gap_tol: float = 1e-7
    node_limit: int = 1_000_000
    time_limit: float | None = None
    heuristic_every: int = 10  # rounding heuristic every k nodes (0: root only)

    def __post_init__(self):
        if self.integer_tol <= 0 or self.gap_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.node_limit <= 0:
            raise ParameterError("node_limit must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ParameterError("time_limit must be positive")


@dataclass
class MilpResult:
    status: str  # optimal | infeasible | limit
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    iterations: int
    elapsed: float
    trajectory: list = field(default_factory=list, repr=False)  # (node, bound, incumbent, gap, time)

    def log_lines(self, timing: bool = True) -> list:
        """CSV rows of the search trajectory; ``timing=False`` drops wall-clock time."""
        rows = ["node,bound,incumbent,gap" + (",time" if timing else "")]
        for node, bnd, inc, gap, t in self.trajectory:
            row = f"{node},{bnd:.10g},{inc:.10g},{gap:.6g}"
            rows.append(row + (f",{t:.3f}" if timing else ""))
        return rows


def relative_gap(incumbent: float, bound: float) -> float:
    if not np.isfinite(incumbent):
        return np.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


class _Layout:
    """Column positions of x_a, x_b, z_ch, z_dis for a P_MILP-shaped problem."""

    def __init__(self, problem):
        n = problem.n_steps
        self.n = n
        self.xa = np.arange(n)
        self.xb = n + np.arange(n)
        self.zch = 4 * n + np.arange(n)
        self.zdis = 5 * n + np.arange(n)


def _repair(x, lb, ub, lay: _Layout, tol):
    """Round z to the orthant used by x; None if some step mixes orthants."""
    xa, xb = x[lay.xa], x[lay.xb]
    neg = (xa < -tol) | (xb < -tol)
    pos = (xa > tol) | (xb > tol)
    if np.any(neg & pos):
        return None
    zlo_ch, zhi_ch = lb[lay.zch], ub[lay.zch]
    zlo_dis, zhi_dis = lb[lay.zdis], ub[lay.zdis]
    zch = np.where(neg, 1.0, 0.0)
    zdis = np.where(pos, 1.0, 0.0)
    idle = ~neg & ~pos
    # idle steps: any assignment respecting the node bounds; prefer (0, 1)
    zdis = np.where(idle, np.where(zhi_dis >= 1, 1.0, 0.0), zdis)
    zch = np.where(idle, np.where((zlo_ch >= 1) & (zdis == 0), 1.0, 0.0), zch)
    if (np.any(zch < zlo_ch) or np.any(zch > zhi_ch) or np.any(zdis < zlo_dis) or np.any(zdis > zhi_dis)
            or np.any(zch + zdis > 1)):
        return None
    out = x.copy()
    out[lay.zch] = zch
    out[lay.zdis] = zdis
    return out


def _lp_form(problem):
    if problem.kind == "pmilp" or problem.kind == "k1":
        return problem.compact()
    return problem.f, problem.A, problem.b, None, None, problem.lb, problem.ub


def solve_milp(problem, cfg: BnbConfig | None = None) -> MilpResult:
    """Minimise a :class:`~interarb.milp.MilpProblem` over its binaries.

    Nodes are explored best-bound first (ties by node id). Branching picks
    the most fractional binary among steps whose relaxation mixes orthants;
    ties go to the lowest index.
    """
    cfg = cfg or BnbConfig()
    t0 = time.perf_counter()
    c, A_ub, b_ub, A_eq, b_eq, lb0, ub0 = _lp_form(problem)
    nx = problem.n_vars
    engine = Simplex(c, A_ub, b_ub, A_eq, b_eq, lb0, ub0)
    heur = None
    bins = np.asarray(problem.binary_idx, dtype=int)
    lay = _Layout(problem) if problem.kind == "pmilp" else None

    inc_obj, inc_x = np.inf, None
    trajectory = []
    nodes = 0
    iterations = 0

    def elapsed():
        return time.perf_counter() - t0

    def record(bound):
        trajectory.append((nodes, bound, inc_obj, relative_gap(inc_obj, bound), elapsed()))

    def offer(x, obj):
        nonlocal inc_obj, inc_x
        if obj < inc_obj - 1e-12:
            inc_obj, inc_x = obj, x.copy()
            return True
        return False

    def round_heuristic(x, lb, ub):
        """Fix every step to the orthant of its net exchange and re-solve."""
        nonlocal heur, iterations
        if lay is None:
            return
        if heur is None:
            heur = Simplex(c, A_ub, b_ub, A_eq, b_eq, lb0, ub0)
        net = x[lay.xa] + x[lay.xb]
        lo, hi = lb.copy(), ub.copy()
        discharge = net < 0
        zch = np.where(discharge, 1.0, 0.0)
        zch = np.clip(zch, lb[lay.zch], ub[lay.zch])
        lo[lay.zch] = hi[lay.zch] = zch
        lo[lay.zdis] = hi[lay.zdis] = np.where(zch > 0.5, 0.0, np.clip(1.0, lb[lay.zdis], ub[lay.zdis]))
        heur.set_bounds(lo, hi)
        heur.set_basis(engine.basis)
        res = heur.solve(cutoff=inc_obj)
        iterations += res.iterations
        if res.status == "optimal":
            offer(res.x, res.objective)

    def integral(x, lb, ub):
        z = x[bins]
        if np.all(np.abs(z - np.round(z)) <= cfg.integer_tol):
            return x
        if lay is not None:
            return _repair(x, lb, ub, lay, cfg.integer_tol)
        return None

    def pick_branch(x):
        z = x[bins]
        frac = np.abs(z - np.round(z))
        cand = frac > cfg.integer_tol
        if lay is not None:
            mixed = (x[lay.xa] * x[lay.xb] < 0) & (
                (np.abs(x[lay.xa]) > cfg.integer_tol) & (np.abs(x[lay.xb]) > cfg.integer_tol))
            step_of = np.r_[np.arange(lay.n), np.arange(lay.n)]
            relevant = mixed[step_of]
            if np.any(cand & relevant):
                cand = cand & relevant
        score = np.where(cand, np.minimum(z - np.floor(z), np.ceil(z) - z), -1.0)
        return int(bins[int(np.argmax(score))])  # argmax keeps the lowest index on ties

    lb_root, ub_root = lb0.copy(), ub0.copy()
    res = engine.solve(warm=False)
    iterations += res.iterations
    nodes = 1
    if res.status == "infeasible":
        record(np.inf)
        return MilpResult("infeasible", None, np.inf, np.inf, np.inf, nodes, iterations, elapsed(), trajectory)
    if res.status != "optimal":
        raise ParameterError(f"root relaxation {res.status}; the relaxation must be bounded")

    heap = []  # (bound, node id, lb, ub, basis, x)
    counter = 0
    heapq.heappush(heap, (res.objective, counter, lb_root, ub_root, res.basis, res.x))
    round_heuristic(res.x, lb_root, ub_root)
    record(res.objective)
    status = "optimal"
    global_bound = res.objective
    floor = np.inf  # lowest cutoff used to fathom a child; bounds the closed part of the tree

    while heap:
        bound, nid, lb, ub, basis, x = heapq.heappop(heap)
        global_bound = bound
        tol_abs = cfg.gap_tol * max(1.0, abs(inc_obj)) if np.isfinite(inc_obj) else 0.0
        if bound >= inc_obj - tol_abs:
            # best-first: every remaining node is at least as bad
            global_bound = min(inc_obj, bound, floor)
            heap.clear()
            break
        fixed = integral(x, lb, ub)
        if fixed is not None:
            offer(fixed, bound)
            record(bound)
            continue
        if nodes >= cfg.node_limit or (cfg.time_limit is not None and elapsed() > cfg.time_limit):
            heapq.heappush(heap, (bound, nid, lb, ub, basis, x))
            status = "limit"
            break
        j = pick_branch(x)
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            engine.set_bounds(clb, cub)
            engine.set_basis(basis)
            cut = inc_obj - cfg.gap_tol * max(1.0, abs(inc_obj)) if np.isfinite(inc_obj) else None
            r = engine.solve(cutoff=cut)
            iterations += r.iterations
            nodes += 1
            if r.status == "cutoff":
                floor = min(floor, cut)
            if r.status != "optimal":
                continue
            if r.objective >= inc_obj:
                continue
            counter += 1
            heapq.heappush(heap, (max(r.objective, bound), counter, clb, cub, r.basis, r.x))
            if cfg.heuristic_every and nodes % cfg.heuristic_every == 0:
                round_heuristic(r.x, clb, cub)
        if nodes % 50 == 0:
            record(heap[0][0] if heap else bound)

    if heap:
        global_bound = min(global_bound, heap[0][0], floor)
    elif np.isfinite(inc_obj):
        # tree exhausted: every node closed at or above the incumbent or a cutoff
        global_bound = min(inc_obj, floor)
    if inc_x is None:
        status = "infeasible" if status == "optimal" else status
        record(global_bound)
        return MilpResult(status, None, np.inf, global_bound, np.inf, nodes, iterations, elapsed(), trajectory)
    gap = relative_gap(inc_obj, global_bound)
    record(global_bound)
    x = inc_x[:nx].copy()
    z = x[bins]
    x[bins] = np.round(z)
    return MilpResult(status, x, float(problem.f @ x), global_bound, gap, nodes, iterations, elapsed(), trajectory)
