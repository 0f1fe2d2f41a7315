"""LP/MILP solvers: revised simplex, branch-and-bound, brute-force oracle, MPS export."""
from .bnb import BnbConfig, MilpResult, solve_milp
from .brute import BruteResult, brute_force
from .mps import write_mps
from .simplex import LpResult, Simplex, solve_lp

__all__ = ["BnbConfig", "MilpResult", "solve_milp", "BruteResult", "brute_force", "write_mps",
           "LpResult", "Simplex", "solve_lp"]
