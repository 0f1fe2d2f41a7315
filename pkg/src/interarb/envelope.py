"""Interconnector operating envelopes for the battery's grid-B exchange.

Sign convention: positive flow means Belgium (grid A) -> UK (grid B). A
battery discharging into grid B adds flow in the positive direction, so a
line saturated A->B blocks discharge while still allowing charge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class LinkState:
    l_max: float
    flow: np.ndarray
    eta_line: float = 1.0

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=float)
        if self.l_max == 0 or not np.isfinite(self.l_max):
            raise ParameterError("line capacity must be finite and non-zero")
        if not np.all(np.isfinite(flow)):
            raise ParameterError("flow values must be finite")
        object.__setattr__(self, "flow", flow)


@dataclass(frozen=True)
class OperatingEnvelope:
    x_min_adj: np.ndarray
    x_max_adj: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.x_min_adj, dtype=float)
        hi = np.asarray(self.x_max_adj, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("envelope bounds must be 1-D of equal length")
        object.__setattr__(self, "x_min_adj", lo)
        object.__setattr__(self, "x_max_adj", hi)

    def __len__(self):
        return self.x_min_adj.shape[0]

    @classmethod
    def full(cls, n: int, x_min: float, x_max: float) -> "OperatingEnvelope":
        return cls(np.full(n, float(x_min)), np.full(n, float(x_max)))

    @classmethod
    def closed(cls, n: int) -> "OperatingEnvelope":
        """Grid B unreachable at every step."""
        return cls(np.zeros(n), np.zeros(n))

    def slice(self, start, stop) -> "OperatingEnvelope":
        return OperatingEnvelope(self.x_min_adj[start:stop], self.x_max_adj[start:stop])

    def to_csv(self, path, timestamps=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "x_min_adj", "x_max_adj"])
            for i, (lo, hi) in enumerate(zip(self.x_min_adj, self.x_max_adj)):
                ts = timestamps[i] if timestamps is not None else i
                w.writerow([ts, repr(float(lo)), repr(float(hi))])


def _one_side(l_max: float, flow: np.ndarray, x_min: float, x_max: float):
    l_max = abs(l_max)
    importing = flow < 0
    hi = np.where(importing, np.maximum(0.0, np.minimum(x_max, l_max + flow)), x_max)
    lo = np.where(importing, x_min, np.minimum(0.0, np.maximum(x_min, -l_max + flow)))
    return lo, hi


def envelope_single_link(link: LinkState, x_min: float, x_max: float) -> OperatingEnvelope:
    """Admissible grid-B exchange per step for a single interconnector."""
    if not x_min < 0 < x_max:
        raise ParameterError("need x_min < 0 < x_max")
    lo, hi = _one_side(link.l_max, link.flow, x_min, x_max)
    return OperatingEnvelope(lo, hi)


def envelope_hoa(link_be: LinkState, link_uk: LinkState, x_min: float, x_max: float) -> OperatingEnvelope:
    """Intersection of the Belgian-side and UK-side regions of a hybrid offshore asset.

    ``link_be.l_max`` is the aggregate Belgium<->island capacity seen by the
    battery (HVDC and HVAC paths lumped together).
    """
    if not x_min < 0 < x_max:
        raise ParameterError("need x_min < 0 < x_max")
    if link_be.flow.shape != link_uk.flow.shape:
        raise ShapeError("BE and UK flow series differ in length")
    lo_be, hi_be = _one_side(link_be.l_max, link_be.flow, x_min, x_max)
    lo_uk, hi_uk = _one_side(link_uk.l_max, link_uk.flow, x_min, x_max)
    return OperatingEnvelope(np.maximum(lo_be, lo_uk), np.minimum(hi_be, hi_uk))


def reserve_capacity(envelope: OperatingEnvelope, reserved: float, x_min: float, x_max: float) -> OperatingEnvelope:
    """Widen an envelope by a firm capacity reservation of ``reserved`` MWh per step."""
    if reserved < 0:
        raise ParameterError("reserved capacity must be non-negative")
    if reserved > max(-x_min, x_max) + 1e-12:
        raise ParameterError("reservation exceeds the battery ramp limit")
    hi = np.minimum(x_max, np.maximum(envelope.x_max_adj, reserved))
    lo = np.maximum(x_min, np.minimum(envelope.x_min_adj, -reserved))
    return OperatingEnvelope(lo, hi)


def load_envelope_csv(path) -> OperatingEnvelope:
    lo, hi = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            lo.append(float(row["x_min_adj"]))
            hi.append(float(row["x_max_adj"]))
    return OperatingEnvelope(np.array(lo), np.array(hi))
