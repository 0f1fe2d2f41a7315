import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from interarb.analytics import (
    Metrics, SweepResult, compute_metrics, count_cycles, cycles_to_payback, rainflow, select_blocking_m1,
    select_blocking_m2, simple_payback, sweep_blocking, sweep_rent, sweep_reserved, timing_harness,
    turning_points, utilization_factor,
)
from interarb.battery import BatteryParams
from interarb.errors import DataError, ParameterError
from interarb.study import Study, link_from_flow, run_scenario
from interarb.synthetic import gradient_flows, saturated_flows, skewed_prices


def test_uf_examples():
    assert utilization_factor(np.full(24, 685.6), 1000.0) == pytest.approx(68.56, abs=1e-12)
    assert utilization_factor(np.full(24, -685.6), 1000.0) == pytest.approx(68.56, abs=1e-12)
    assert utilization_factor(np.zeros(5), 1000.0) == 0.0
    assert utilization_factor(np.full(5, 1000.0), 1000.0) == 100.0
    with pytest.raises(DataError):
        utilization_factor([], 1000.0)
    with pytest.raises(ParameterError):
        utilization_factor([1.0], 0.0)


def test_rainflow_suite():
    assert count_cycles([0.0, 1.0, 0.0], 1.0) == 1.0
    assert count_cycles([0.4] * 10, 1.0) == 0.0
    assert count_cycles([0.0, 0.5, 0.0, 0.5, 0.0], 1.0) == 1.0
    path = [0.1, 0.9, 0.3, 0.7, 0.2, 1.0, 0.5]
    assert count_cycles(path, 1.0) == count_cycles(path[::-1], 1.0)


def test_rainflow_known_extraction():
    # textbook sequence: interior 4-2-4 closes as one cycle of range 2
    cycles = rainflow([0, 4, 2, 4, 0])
    assert sorted(cycles) == [(2.0, 1.0), (4.0, 0.5), (4.0, 0.5)]
    assert turning_points([1, 1, 2, 3, 3, 1]).tolist() == [1, 3, 1]


def test_count_cycles_scales_with_capacity():
    assert count_cycles([0.0, 2.0, 0.0], 2.0) == 1.0
    with pytest.raises(ParameterError):
        count_cycles([0.0], 0.0)


socs = arrays(float, st.integers(2, 60), elements=st.floats(0.1, 1.0))


@given(socs)
def test_cycles_properties(path):
    c = count_cycles(path, 1.0)
    assert c >= 0
    assert c == count_cycles(path[::-1], 1.0)
    padded = np.r_[path[0], path[0], path, path[-1]]
    assert c == count_cycles(padded, 1.0)
    # with linear weighting the count equals half the total variation
    assert c == pytest.approx(np.abs(np.diff(path)).sum() / 2.0, abs=1e-12)
    # two half cycles of one range weigh the same as one full cycle
    assert _tally(rainflow(path)) == _tally(rainflow(path[::-1]))


def _tally(cycles):
    out = {}
    for r, c in cycles:
        out[r] = out.get(r, 0.0) + c
    return out


def test_spp_examples():
    assert simple_payback(BatteryParams().investment, 10_000.0) == 10.0
    assert math.isinf(simple_payback(100_000.0, 0.0))
    assert math.isinf(simple_payback(100_000.0, -5.0))
    assert simple_payback(100_000.0, 20_000.0) == simple_payback(100_000.0, 10_000.0) / 2


def _metrics(annual_cycles, spp, life=7200):
    ctp = math.inf if math.isinf(spp) else annual_cycles * spp
    return Metrics(0.0, 0.0, spp, ctp, None, 365.0, 0.0, annual_cycles, ctp <= life)


def test_cycles_to_payback_examples():
    m = _metrics(700.0, 10.0)
    assert cycles_to_payback(m) == 7000.0 and m.viable
    m = _metrics(800.0, 10.0)
    assert cycles_to_payback(m) == 8000.0 and not m.viable
    m = _metrics(800.0, math.inf)
    assert math.isinf(cycles_to_payback(m)) and not m.viable


def test_m1_examples():
    b = np.round(np.arange(0, 0.81, 0.05), 10)
    spp = np.where(b <= 0.3, 10.0 + 0.1 * b, 10.03 + 20.0 * (b - 0.3))
    sel = select_blocking_m1(b, spp)
    assert sel.value == pytest.approx(0.3) and sel.flag == "ok"
    line = select_blocking_m1(b, 5 + 2 * b)
    assert line.flag == "no-knee" and line.value == 0.0
    assert select_blocking_m1(b[:2], spp[:2]).flag == "insufficient"


@given(st.floats(0.1, 100), st.floats(-50, 50), st.floats(0.1, 100), st.floats(-50, 50))
def test_m1_rescale_invariant(ax, bx, ay, by):
    b = np.linspace(0, 0.8, 17)
    spp = 10 + np.exp(6 * b)
    ref = select_blocking_m1(b, spp).index
    assert select_blocking_m1(ax * b + bx, ay * spp + by).index == ref


def test_m2_examples():
    b = np.linspace(0, 0.5, 6)
    sel = select_blocking_m2(b, 8 + 10 * b, 10.0)
    assert sel.value == pytest.approx(0.2) and sel.flag == "ok"
    assert sel.value >= b[0] and sel.value <= b[-1]
    none = select_blocking_m2(b, 12 + b, 10.0)
    assert none.value == 0.0 and none.flag == "not-viable"
    assert select_blocking_m2(b, 5 + b, 10.0).flag == "no-crossing"
    wiggly = np.array([8, 11, 9, 12, 13, 14.0])
    assert select_blocking_m2(b, wiggly, 10.0).flag == "ambiguous"


def test_sweep_result_validation(tmp_path):
    m = _metrics(100.0, 5.0)
    with pytest.raises(ParameterError):
        SweepResult("rent", [0, 0], {"C2": [m, m]})
    with pytest.raises(ParameterError):
        SweepResult("rent", [0, 1], {"C2": [m]})
    res = SweepResult("rent", [0, 1], {"C2": [m, m]})
    res.to_csv(tmp_path / "w.csv", header="config_sha256=x")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "# config_sha256=x" and len(lines) == 4
    res.to_json(tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["points"] == 2


@pytest.fixture(scope="module")
def small_study():
    pa, pb = skewed_prices(days=2, seed=1)
    return Study(pa, pb, links=(link_from_flow(gradient_flows(pa, pb, 1000.0, seed=1), 1000.0),))


def test_compute_metrics(small_study):
    out = run_scenario(small_study, "C2")
    m = compute_metrics(out.solution, small_study.battery, 2.0)
    assert m.revenue == pytest.approx(-out.result.objective)
    assert m.annual_revenue == pytest.approx(m.revenue * 365 / 2)
    assert m.spp == pytest.approx(100_000 / m.annual_revenue)
    assert m.cycles_to_payback == pytest.approx(m.annual_cycles * m.spp)
    assert m.uf is None


def test_rent_sweep_small(small_study):
    res = sweep_rent(small_study, [0, 10, 40])
    c1 = res.column("C1", "revenue")
    assert np.all(c1 == c1[0])
    for sc in ("C2", "C3"):
        assert np.all(np.diff(res.column(sc, "revenue")) <= 1e-6)
    assert np.all(res.column("C3", "revenue") <= res.column("C2", "revenue") + 1e-6)
    assert res.column("C3", "uf")[0] > 0


def test_blocking_sweep_small(small_study):
    res = sweep_blocking(small_study, [0.0, 0.1, 0.2, 0.3, 0.4])
    base = run_scenario(small_study, "C2")
    assert res.column("C2", "revenue")[0] == pytest.approx(base.revenue)
    for sc in ("C2", "C3"):
        assert np.all(np.diff(res.column(sc, "spp")) >= -1e-9)
        assert set(res.selections[sc]) == {"M1", "M2"}
    with pytest.raises(ParameterError):
        sweep_blocking(small_study, [1.0])


def test_reserved_sweep_small():
    pa, pb = skewed_prices(days=2, seed=1)
    study = Study(pa, pb, links=(link_from_flow(saturated_flows(pa, pb, 1000.0), 1000.0),))
    res = sweep_reserved(study, [0.0, 0.5, 1.0])
    pct = np.array(res.extra["marginal_increase_pct"])
    assert pct[0] == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.diff(pct) >= -1e-9) and pct[-1] > 0
    with pytest.raises(ParameterError):
        sweep_reserved(study, [1.5])


def test_timing_harness(small_study):
    one = timing_harness(small_study, 1, scenario="C1")
    assert one.times.size == 1 and one.median == one.times[0]
    res = timing_harness(small_study, 5, scenario="C1", seed=3)
    assert res.median == float(np.median(res.times))
    assert res.q1 <= res.median <= res.q3
    with pytest.raises(ParameterError):
        timing_harness(small_study, 0)
