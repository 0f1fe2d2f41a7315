"""Fixed-format MPS export for cross-checking with external solvers.

Names are at most 8 characters and fields start at the classic columns
(2, 5, 15, 25, 40, 50). Numbers are written with the shortest repr that
round-trips exactly; a value longer than its 12-character field pushes the
following field right, which free-format readers accept unchanged.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..milp import BLOCK_NAMES, MilpProblem

_ROW_PREFIX = {
    "epi_buy_a": "EBA", "epi_sell_a": "ESA", "epi_buy_b": "EBB", "epi_sell_b": "ESB",
    "cap_upper": "CUP", "cap_lower": "CLO", "ramp_upper": "RUP", "ramp_lower": "RLO",
    "lin_xa_lo": "LAL", "lin_xa_hi": "LAH", "lin_xb_lo": "LBL", "lin_xb_hi": "LBH", "z_sum": "ZSM",
}
_COL_PREFIX = {"pmilp": ("XA", "XB", "TA", "TB", "ZC", "ZD"), "k1": ("X", "T")}
_K1_ROWS = ("EBY", "ESL", "CUP", "CLO")


def _num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _pad(text: str, col: int, line: str) -> str:
    """Append ``text`` starting at 1-based column ``col`` (or after a space)."""
    if len(line) < col - 1:
        line = line.ljust(col - 1)
    elif line and not line.endswith(" "):
        line += " "
    return line + text


def _line(*fields):
    starts = (2, 5, 15, 25, 40, 50)
    line = ""
    for start, text in zip(starts, fields):
        if text is not None:
            line = _pad(text, start, line)
    return line.rstrip()


def row_names(problem: MilpProblem) -> list:
    n = problem.n_steps
    width = max(5, len(str(n)))
    if width > 5:
        return [f"R{i:07d}" for i in range(problem.n_rows)]
    prefixes = [_ROW_PREFIX[b] for b in BLOCK_NAMES] if problem.kind == "pmilp" else list(_K1_ROWS)
    names = [f"{p}{i + 1:05d}" for p in prefixes for i in range(n)]
    extra = problem.n_rows - len(names)
    names += [f"TRM{k + 1:05d}" for k in range(extra)]
    return names


def col_names(problem: MilpProblem) -> list:
    n = problem.n_steps
    prefixes = _COL_PREFIX.get(problem.kind)
    if prefixes is None or len(str(n)) > 6:
        return [f"C{j:07d}" for j in range(problem.n_vars)]
    return [f"{p}{i + 1:0{8 - len(p)}d}" for p in prefixes for i in range(n)]


def write_mps(problem: MilpProblem, path, name: str = "ARBMILP") -> Path:
    """Write ``min f'x, A x <= b, lb <= x <= ub`` with integer markers around binaries."""
    path = Path(path)
    rows = row_names(problem)
    cols = col_names(problem)
    A = sp.csc_matrix(problem.A)
    is_bin = np.zeros(problem.n_vars, dtype=bool)
    is_bin[np.asarray(problem.binary_idx, dtype=int)] = True

    out = [f"NAME          {name}", "ROWS", _line("N", "OBJ")]
    out += [_line("L", r) for r in rows]
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, cname in enumerate(cols):
        if is_bin[j] != in_int:
            tag = "'INTORG'" if is_bin[j] else "'INTEND'"
            out.append(_line(None, f"MARKER{marker:02d}"[:8], "'MARKER'", None, tag))
            marker += 1
            in_int = bool(is_bin[j])
        entries = []
        if problem.f[j] != 0:
            entries.append(("OBJ", problem.f[j]))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            if v != 0:
                entries.append((rows[i], v))
        if not entries:
            entries.append(("OBJ", 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            fields = [None, cname, pair[0][0], _num(pair[0][1])]
            if len(pair) == 2:
                fields += [pair[1][0], _num(pair[1][1])]
            out.append(_line(*fields))
    if in_int:
        out.append(_line(None, f"MARKER{marker:02d}"[:8], "'MARKER'", None, "'INTEND'"))
    out.append("RHS")
    nz = [(rows[i], v) for i, v in enumerate(problem.b) if v != 0]
    for k in range(0, len(nz), 2):
        pair = nz[k:k + 2]
        fields = [None, "RHS", pair[0][0], _num(pair[0][1])]
        if len(pair) == 2:
            fields += [pair[1][0], _num(pair[1][1])]
        out.append(_line(*fields))
    out.append("BOUNDS")
    for j, cname in enumerate(cols):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == hi:
            out.append(_line("FX", "BND", cname, _num(lo)))
            continue
        if np.isinf(lo) and np.isinf(hi):
            out.append(_line("FR", "BND", cname))
            continue
        if np.isinf(lo):
            out.append(_line("MI", "BND", cname))
        elif lo != 0 or is_bin[j]:
            out.append(_line("LO", "BND", cname, _num(lo)))
        if np.isfinite(hi):
            out.append(_line("UP", "BND", cname, _num(hi)))
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")
    return path
