"""K1 baseline LP and the two-market epigraph MILP in matrix form.

Variable layout of the MILP (length 6N)::

    [x_a(1..N), x_b(1..N), t_a(1..N), t_b(1..N), z_ch(1..N), z_dis(1..N)]

Row blocks of ``A x <= b`` (13 blocks of N rows, in order):

    0  grid-A buy segment      P_buy_a/eta_ch* x_a - t_a <= 0
    1  grid-A sell segment     P_sell_a*eta_dis* x_a - t_a <= 0
    2  grid-B buy segment      P~_buy_b/eta_ch* x_b - t_b <= 0
    3  grid-B sell segment     P~_sell_b*eta_dis* x_b - t_b <= 0
    4  capacity upper          cumsum(x_a + x_b) <= b_max' - b0
    5  capacity lower         -cumsum(x_a + x_b) <= b0 - b_min'
    6  joint ramp upper        x_a + x_b <= X_max
    7  joint ramp lower       -x_a - x_b <= -X_min
    8  -x_a + X_min z_ch <= 0
    9   x_a - X_max z_dis <= 0
    10 -x_b + X_min z_ch <= 0
    11  x_b - X_max z_dis <= 0
    12  z_ch + z_dis <= 1

``z_ch = 1`` selects the non-positive orthant (the lower bound ``X_min`` is
released) and ``z_dis = 1`` the non-negative one. Block 12 is an inequality
as in the matrix layout; the all-zero assignment pins ``x_a = x_b = 0``, which
lies in both orthants, so decoding canonicalises it to ``z_dis = 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .battery import BatteryParams, PriceSet, check_feasible, effective_efficiencies, simulate_soc
from .envelope import OperatingEnvelope
from .errors import InfeasibleBuildError, ParameterError, ShapeError, SolverInconsistencyError

N_BLOCKS = 13
ZERO_TOL = 1e-9

BLOCK_NAMES = (
    "epi_buy_a", "epi_sell_a", "epi_buy_b", "epi_sell_b",
    "cap_upper", "cap_lower", "ramp_upper", "ramp_lower",
    "lin_xa_lo", "lin_xa_hi", "lin_xb_lo", "lin_xb_hi", "z_sum",
)


@dataclass(frozen=True)
class BlockingSpec:
    """Usable SoC range after reserving capacity for emergency services."""

    b_max_prime: float
    b_min_prime: float

    def blocked(self, battery: BatteryParams) -> float:
        return (battery.b_max - self.b_max_prime) + (self.b_min_prime - battery.b_min)

    def validate(self, battery: BatteryParams):
        tol = 1e-12
        if not (battery.b_min - tol <= self.b_min_prime <= self.b_max_prime + tol
                and self.b_max_prime <= battery.b_max + tol):
            raise ParameterError(
                f"blocking range [{self.b_min_prime}, {self.b_max_prime}] not inside "
                f"[{battery.b_min}, {battery.b_max}]")

    @classmethod
    def none(cls, battery: BatteryParams) -> "BlockingSpec":
        return cls(battery.b_max, battery.b_min)

    @classmethod
    def from_block(cls, battery: BatteryParams, b_block: float, lower_share: float = 0.5) -> "BlockingSpec":
        """Split ``b_block`` MWh between raising b_min and lowering b_max.

        ``lower_share`` is the fraction taken from the bottom of the range.
        """
        if b_block < 0 or b_block > battery.b_max - battery.b_min + 1e-12:
            raise ParameterError(f"b_block={b_block} outside [0, {battery.b_max - battery.b_min}]")
        if not 0 <= lower_share <= 1:
            raise ParameterError("lower_share must lie in [0, 1]")
        spec = cls(battery.b_max - (1 - lower_share) * b_block, battery.b_min + lower_share * b_block)
        spec.validate(battery)
        return spec


@dataclass(frozen=True)
class MilpProblem:
    """``min f'X  s.t.  A X <= b,  lb <= X <= ub,  X[binary_idx] in {0, 1}``."""

    f: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary_idx: np.ndarray
    n_steps: int
    kind: str = "pmilp"  # "pmilp" | "k1"
    battery: BatteryParams | None = field(default=None, compare=False)
    prices: PriceSet | None = field(default=None, compare=False)
    envelope: OperatingEnvelope | None = field(default=None, compare=False)
    blocking: BlockingSpec | None = field(default=None, compare=False)

    @property
    def n_vars(self) -> int:
        return self.f.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def block(self, k: int) -> sp.csr_matrix:
        n = self.n_steps
        return self.A[k * n:(k + 1) * n]

    def with_bounds(self, lb, ub) -> "MilpProblem":
        return MilpProblem(self.f, self.A, self.b, np.asarray(lb, float), np.asarray(ub, float),
                           self.binary_idx, self.n_steps, self.kind, self.battery, self.prices,
                           self.envelope, self.blocking)

    def compact(self):
        """Equivalent LP with the cumulative capacity rows replaced by SoC variables.

        Returns ``(c, A_ub, b_ub, A_eq, b_eq, lb, ub)`` over ``X`` followed by
        N auxiliary variables ``s_i = sum_{j<=i}(x_a_j + x_b_j)`` whose bounds
        carry the capacity limits. Keeps the constraint matrix O(N) in size;
        ``A`` itself stays available as the dense-prefix fallback.
        """
        n = self.n_steps
        if self.kind == "pmilp":
            cap = slice(4 * n, 6 * n)
            keep = np.r_[0:4 * n, 6 * n:self.n_rows]
            flow_cols = [0, n]  # x_a and x_b blocks
        else:
            cap = slice(2 * n, 4 * n)
            keep = np.r_[0:2 * n, 4 * n:self.n_rows]
            flow_cols = [0]
        hi = self.b[cap][:n]
        lo = -self.b[cap][n:]
        nv = self.n_vars
        A_ub = sp.hstack([self.A[keep], sp.csr_matrix((keep.size, n))]).tocsr()
        # s_i - s_{i-1} - sum(x_i) = 0
        diff = sp.eye(n, format="csr") - sp.eye(n, k=-1, format="csr")
        parts = []
        for c0 in flow_cols:
            parts.append(sp.csr_matrix((-np.ones(n), (np.arange(n), c0 + np.arange(n))), shape=(n, nv)))
        A_eq = sp.hstack([sum(parts), diff]).tocsr()
        c = np.r_[self.f, np.zeros(n)]
        lb = np.r_[self.lb, lo]
        ub = np.r_[self.ub, hi]
        return c, A_ub, self.b[keep], A_eq, np.zeros(n), lb, ub


def _check_series(prices: PriceSet, n: int):
    if len(prices) != n:
        raise ShapeError(f"price horizon {len(prices)} != {n}")
    raw = np.r_[prices.p_buy_a, prices.p_sell_a, prices.p_buy_b, prices.p_sell_b]
    if np.any(raw < 0):
        raise ParameterError("negative market prices; clamp them before optimising")
    if np.any(prices.p_buy_b_adj < 0):
        raise ParameterError("negative adjusted buy price")


def _capacity_rhs(battery: BatteryParams, blocking: BlockingSpec | None):
    blocking = blocking or BlockingSpec.none(battery)
    blocking.validate(battery)
    if not blocking.b_min_prime - 1e-12 <= battery.b0 <= blocking.b_max_prime + 1e-12:
        raise InfeasibleBuildError(
            f"b0={battery.b0} outside blocked range [{blocking.b_min_prime}, {blocking.b_max_prime}]")
    return blocking, blocking.b_max_prime - battery.b0, battery.b0 - blocking.b_min_prime


def _prefix_matrix(n: int) -> sp.csr_matrix:
    """Lower-triangular ones; row i sums steps 1..i."""
    r, c = np.tril_indices(n)
    return sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))


def _t_bounds(buy, sell, xabs, eta_min):
    return np.maximum(np.abs(buy), np.abs(sell)) * xabs / eta_min + 1.0


def build_pmilp(prices: PriceSet, battery: BatteryParams, envelope: OperatingEnvelope | None = None,
                blocking: BlockingSpec | None = None, terminal_soc: bool = False) -> MilpProblem:
    """Assemble the two-market epigraph MILP.

    ``envelope`` bounds x_b (defaults to the full ramp range). With
    ``terminal_soc`` two extra rows force ``b_N = b0``; the default layout has
    exactly 13N rows.
    """
    n = len(prices)
    if n < 1:
        raise ShapeError("empty horizon")
    _check_series(prices, n)
    envelope = envelope or OperatingEnvelope.full(n, battery.x_min, battery.x_max)
    if len(envelope) != n:
        raise ShapeError(f"envelope horizon {len(envelope)} != {n}")
    if np.any(envelope.x_min_adj > 1e-12) or np.any(envelope.x_max_adj < -1e-12):
        raise ParameterError("envelope must contain zero at every step")
    blocking, cap_hi, cap_lo = _capacity_rhs(battery, blocking)
    eff = effective_efficiencies(battery)
    xmin, xmax = battery.x_min, battery.x_max

    I = sp.identity(n, format="csr")
    Z = sp.csr_matrix((n, n))
    L = _prefix_matrix(n)
    D = lambda v: sp.diags(np.asarray(v, dtype=float), format="csr")  # noqa: E731
    rows = [
        [D(prices.p_buy_a / eff.eta_ch_star), Z, -I, Z, Z, Z],
        [D(prices.p_sell_a * eff.eta_dis_star), Z, -I, Z, Z, Z],
        [Z, D(prices.p_buy_b_adj / eff.eta_ch_star), Z, -I, Z, Z],
        [Z, D(prices.p_sell_b_adj * eff.eta_dis_star), Z, -I, Z, Z],
        [L, L, Z, Z, Z, Z],
        [-L, -L, Z, Z, Z, Z],
        [I, I, Z, Z, Z, Z],
        [-I, -I, Z, Z, Z, Z],
        [-I, Z, Z, Z, xmin * I, Z],
        [I, Z, Z, Z, Z, -xmax * I],
        [Z, -I, Z, Z, xmin * I, Z],
        [Z, I, Z, Z, Z, -xmax * I],
        [Z, Z, Z, Z, I, I],
    ]
    b = np.r_[np.zeros(4 * n), np.full(n, cap_hi), np.full(n, cap_lo),
              np.full(n, xmax), np.full(n, -xmin), np.zeros(4 * n), np.ones(n)]
    if terminal_soc:
        last = sp.csr_matrix(np.r_[np.ones(2 * n), np.zeros(4 * n)][None, :])
        rows.append([last[:, 0:n], last[:, n:2 * n]] + [sp.csr_matrix((1, n))] * 4)
        rows.append([-last[:, 0:n], -last[:, n:2 * n]] + [sp.csr_matrix((1, n))] * 4)
        b = np.r_[b, 0.0, 0.0]
    A = sp.bmat(rows, format="csr")
    A.eliminate_zeros()

    eta_min = min(eff.eta_ch_star, eff.eta_dis_star)
    xabs = max(-xmin, xmax)
    ta = _t_bounds(prices.p_buy_a, prices.p_sell_a, xabs, eta_min)
    tb = _t_bounds(prices.p_buy_b_adj, prices.p_sell_b_adj, xabs, eta_min)
    lb = np.r_[np.full(n, xmin), envelope.x_min_adj, -ta, -tb, np.zeros(2 * n)]
    ub = np.r_[np.full(n, xmax), envelope.x_max_adj, ta, tb, np.ones(2 * n)]
    f = np.r_[np.zeros(2 * n), np.ones(2 * n), np.zeros(2 * n)]
    return MilpProblem(f, A, b, lb, ub, np.arange(4 * n, 6 * n), n, "pmilp",
                       battery, prices, envelope, blocking)


def build_k1(prices: PriceSet, battery: BatteryParams, blocking: BlockingSpec | None = None) -> MilpProblem:
    """Single-action baseline: per step, best buy price and best sell price of the two grids.

    Variables ``[x(1..N), t(1..N)]``; raw (non-inverter) efficiencies.
    Rows: buy segment, sell segment, capacity upper, capacity lower.
    """
    n = len(prices)
    if n < 1:
        raise ShapeError("empty horizon")
    _check_series(prices, n)
    blocking, cap_hi, cap_lo = _capacity_rhs(battery, blocking)
    buy = np.minimum(prices.p_buy_a, prices.p_buy_b_adj)
    sell = np.maximum(prices.p_sell_a, prices.p_sell_b_adj)
    I = sp.identity(n, format="csr")
    L = _prefix_matrix(n)
    Z = sp.csr_matrix((n, n))
    A = sp.bmat([
        [sp.diags(buy / battery.eta_ch), -I],
        [sp.diags(sell * battery.eta_dis), -I],
        [L, Z],
        [-L, Z],
    ], format="csr")
    A.eliminate_zeros()
    b = np.r_[np.zeros(2 * n), np.full(n, cap_hi), np.full(n, cap_lo)]
    xabs = max(-battery.x_min, battery.x_max)
    tt = _t_bounds(buy, sell, xabs, min(battery.eta_ch, battery.eta_dis))
    lb = np.r_[np.full(n, battery.x_min), -tt]
    ub = np.r_[np.full(n, battery.x_max), tt]
    f = np.r_[np.zeros(n), np.ones(n)]
    return MilpProblem(f, A, b, lb, ub, np.array([], dtype=int), n, "k1", battery, prices, None, blocking)


@dataclass
class ArbitrageSolution:
    x_a: np.ndarray
    x_b: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray
    z_ch: np.ndarray
    z_dis: np.ndarray
    objective: float
    soc: np.ndarray
    status: str = "optimal"

    @property
    def revenue(self) -> float:
        return -self.objective

    @property
    def x(self) -> np.ndarray:
        return self.x_a + self.x_b

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_a", "x_b", "soc", "z_ch"])
            for i in range(self.x_a.shape[0]):
                w.writerow([i + 1, f"{self.x_a[i]:.10g}", f"{self.x_b[i]:.10g}",
                            f"{self.soc[i]:.10g}", int(self.z_ch[i])])


def _clean(v):
    v = np.array(v, dtype=float)
    v[np.abs(v) < ZERO_TOL] = 0.0
    return v


def decode_solution(problem: MilpProblem, raw_x, status: str = "optimal", tol: float = 1e-6) -> ArbitrageSolution:
    """Slice a solver vector into trajectories and re-check feasibility.

    A failed re-check on an optimal vector raises
    :class:`SolverInconsistencyError`.
    """
    n = problem.n_steps
    raw_x = np.asarray(raw_x, dtype=float)
    bat = problem.battery
    blk = problem.blocking or BlockingSpec.none(bat)
    if problem.kind == "k1":
        if raw_x.shape != (2 * n,):
            raise ShapeError(f"expected vector of length {2 * n}")
        x = _clean(raw_x[:n])
        zeros = np.zeros(n)
        z_ch = (x < 0).astype(float)
        sol = ArbitrageSolution(x, zeros, raw_x[n:], zeros.copy(), z_ch, 1 - z_ch,
                                float(raw_x[n:].sum()), simulate_soc(bat, x), status)
        env = OperatingEnvelope.closed(n)
    else:
        if raw_x.shape != (6 * n,):
            raise ShapeError(f"expected vector of length {6 * n}")
        x_a, x_b = _clean(raw_x[:n]), _clean(raw_x[n:2 * n])
        t_a, t_b = raw_x[2 * n:3 * n], raw_x[3 * n:4 * n]
        z_ch = np.round(raw_x[4 * n:5 * n])
        z_dis = np.round(raw_x[5 * n:6 * n])
        idle = (x_a == 0) & (x_b == 0)
        z_ch[idle], z_dis[idle] = 0.0, 1.0
        sol = ArbitrageSolution(x_a, x_b, t_a.copy(), t_b.copy(), z_ch, z_dis,
                                float(t_a.sum() + t_b.sum()), simulate_soc(bat, x_a + x_b), status)
        env = problem.envelope
    if status == "optimal":
        rep = check_feasible(bat, sol.x_a, sol.x_b, env, blk.b_min_prime, blk.b_max_prime, tol=tol)
        if not rep.ok:
            raise SolverInconsistencyError(f"optimal vector fails feasibility re-check: {rep.violations[:5]}")
        if problem.kind == "pmilp":
            if np.any(sol.z_ch + sol.z_dis != 1):
                raise SolverInconsistencyError("binary pair does not sum to one")
    return sol


def market_costs(solution: ArbitrageSolution, prices: PriceSet, battery: BatteryParams):
    """Per-step costs ``(C_a, C_b)`` of a two-market trajectory."""
    eff = effective_efficiencies(battery)
    pos = lambda v: np.maximum(v, 0.0)  # noqa: E731
    c_a = prices.p_buy_a * pos(solution.x_a) / eff.eta_ch_star - prices.p_sell_a * pos(-solution.x_a) * eff.eta_dis_star
    c_b = (prices.p_buy_b_adj * pos(solution.x_b) / eff.eta_ch_star
           - prices.p_sell_b_adj * pos(-solution.x_b) * eff.eta_dis_star)
    return c_a, c_b


def revenue_split(solution: ArbitrageSolution, prices: PriceSet, battery: BatteryParams) -> dict:
    """Revenue per market and grid-side energy bought/sold in each."""
    eff = effective_efficiencies(battery)
    c_a, c_b = market_costs(solution, prices, battery)
    out = {"revenue_a": float(-c_a.sum()), "revenue_b": float(-c_b.sum())}
    for tag, x in (("a", solution.x_a), ("b", solution.x_b)):
        out[f"bought_{tag}"] = float(np.maximum(x, 0).sum() / eff.eta_ch_star)
        out[f"sold_{tag}"] = float(np.maximum(-x, 0).sum() * eff.eta_dis_star)
    out["revenue"] = out["revenue_a"] + out["revenue_b"]
    return out
