"""Reproducible synthetic market data for examples and tests.

Prices follow a daily shape with noise; grid B is dearer than grid A on
average (the skewed A<B setting of the Belgium-UK corridor). Flows follow
the price gradient the way flow-based market coupling tends to push them.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import write_series_csv

START = np.datetime64("2019-01-01T00", "h")


def skewed_prices(days: int = 7, seed: int = 0, skew: float = 1.24, offset: float = 0.0, noise_b: float = 0.5):
    """Hourly ``(price_a, price_b)`` in EUR/MWh with ``price_b ~ skew * price_a + offset``."""
    rng = np.random.default_rng(seed)
    n = 24 * days
    t = np.arange(n, dtype=float)
    shape = np.sin(2 * np.pi * (t - 7) / 24) + 0.5 * np.sin(4 * np.pi * (t - 3) / 24)
    pa = 45.0 + 15.0 * shape + rng.normal(0.0, 4.0, n)
    pb = skew * pa + offset + rng.normal(0.0, noise_b, n)
    return np.maximum(pa, 0.0), np.maximum(pb, 0.0)


def gradient_flows(price_a, price_b, l_max: float, seed: int = 0, saturated_share: float = 0.5,
                   slack=(0.25, 2.0)):
    """Flows pointing from the cheap grid to the dear one, saturated in part of the hours.

    Unsaturated hours leave a residual margin drawn from ``slack`` (MW).
    Positive flow runs toward grid B.
    """
    rng = np.random.default_rng(seed)
    direction = np.sign(np.asarray(price_b, dtype=float) - np.asarray(price_a, dtype=float))
    n = direction.shape[0]
    margin = rng.choice(np.asarray(slack, dtype=float), n)
    margin[rng.random(n) < saturated_share] = 0.0
    return direction * (abs(l_max) - margin)


def saturated_flows(price_a, price_b, l_max: float):
    """Every line saturated in the price-gradient direction."""
    direction = np.sign(np.asarray(price_b, dtype=float) - np.asarray(price_a, dtype=float))
    return direction * abs(l_max)


def case2_inputs(days: int = 1, seed: int = 0):
    """Demands (MW) and wind availability (MW) for a small three-node case."""
    rng = np.random.default_rng(seed)
    n = 24 * days
    t = np.arange(n, dtype=float)
    daily = 1 + 0.25 * np.sin(2 * np.pi * (t - 9) / 24)
    demand_be = 9000.0 * daily + rng.normal(0, 200, n)
    demand_uk = 30000.0 * daily + rng.normal(0, 500, n)
    wind = np.clip(2000.0 + 1200.0 * np.sin(2 * np.pi * t / 37) + rng.normal(0, 300, n), 0, 3500)
    return demand_be, demand_uk, wind


def write_dataset(directory, days: int = 7, seed: int = 0, l_max: float = 1000.0) -> dict:
    """Write a complete toy dataset as ``timestamp,value`` CSVs; returns the paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    pa, pb = skewed_prices(days, seed)
    flow = gradient_flows(pa, pb, l_max, seed)
    d_be, d_uk, wind = case2_inputs(days, seed)
    ts = START + np.arange(24 * days)
    series = {
        "price_a": pa, "price_b": pb, "flow": flow,
        "demand_be": d_be, "demand_uk": d_uk, "wind": wind,
    }
    paths = {}
    for name, values in series.items():
        paths[name] = out / f"{name}.csv"
        write_series_csv(paths[name], ts, values)
    return paths
