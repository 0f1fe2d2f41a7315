"""Exhaustive orthant enumeration, the verification oracle for small horizons."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SizeError
from .simplex import Simplex

MAX_STEPS = 16


@dataclass
class BruteResult:
    status: str  # optimal | infeasible
    x: np.ndarray | None
    objective: float
    patterns: int


def _gray(n):
    """Yield (index of flipped bit or -1, pattern) over all n-bit Gray codes."""
    pattern = np.zeros(n, dtype=bool)
    yield -1, pattern
    for k in range(1, 2 ** n):
        bit = (k & -k).bit_length() - 1
        pattern[bit] = ~pattern[bit]
        yield bit, pattern


def _fix_pattern(lb, ub, problem, pattern):
    """Pin z to the orthant chosen per step (True = non-negative)."""
    n = problem.n_steps
    lo, hi = lb.copy(), ub.copy()
    zch = np.where(pattern, 0.0, 1.0)
    lo[4 * n:5 * n] = hi[4 * n:5 * n] = zch
    lo[5 * n:6 * n] = hi[5 * n:6 * n] = 1.0 - zch
    return lo, hi


def brute_force(problem, backend: str = "simplex") -> BruteResult:
    """Best objective over every per-step orthant choice of a P_MILP instance.

    Each step is pinned to ``z = (0, 1)`` or ``(1, 0)``; the idle assignment
    ``(0, 0)`` is contained in both and never needs separate treatment.
    ``backend="simplex"`` walks the patterns in Gray-code order so each LP
    warm-starts from its neighbour; ``backend="highs"`` solves every LP from
    scratch with scipy's HiGHS on the uncompacted matrix.
    """
    n = problem.n_steps
    if problem.kind != "pmilp":
        raise SizeError("brute force applies to P_MILP instances only")
    if n > MAX_STEPS:
        raise SizeError(f"N={n} exceeds the brute-force limit of {MAX_STEPS} steps")
    best_obj, best_x = np.inf, None
    count = 0
    if backend == "simplex":
        c, A_ub, b_ub, A_eq, b_eq, lb, ub = problem.compact()
        engine = Simplex(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
        first = True
        for _, pattern in _gray(n):
            lo, hi = _fix_pattern(lb, ub, problem, pattern)
            engine.set_bounds(lo, hi)
            res = engine.solve(warm=not first)
            first = False
            count += 1
            if res.status == "optimal" and res.objective < best_obj:
                best_obj, best_x = res.objective, res.x[: problem.n_vars].copy()
    elif backend == "highs":
        from scipy.optimize import linprog

        for _, pattern in _gray(n):
            lo, hi = _fix_pattern(problem.lb, problem.ub, problem, pattern)
            res = linprog(problem.f, A_ub=problem.A, b_ub=problem.b, bounds=np.c_[lo, hi], method="highs")
            count += 1
            if res.status == 0 and res.fun < best_obj:
                best_obj, best_x = float(res.fun), res.x.copy()
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if best_x is None:
        return BruteResult("infeasible", None, np.inf, count)
    return BruteResult("optimal", best_x, float(best_obj), count)
