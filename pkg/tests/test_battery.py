import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from interarb.battery import (
    BatteryParams, PriceSet, adjust_prices, check_feasible, effective_efficiencies, grid_power,
    simulate_soc,
)
from interarb.envelope import OperatingEnvelope
from interarb.errors import ParameterError, ShapeError


def test_effective_efficiencies(battery):
    eff = effective_efficiencies(battery)
    assert eff.eta_ch_star == pytest.approx(0.9025, abs=1e-12)
    assert eff.eta_dis_star == pytest.approx(0.9025, abs=1e-12)
    ideal = BatteryParams(eta_inv=1.0)
    assert effective_efficiencies(ideal).eta_ch_star == ideal.eta_ch


def test_adjust_prices_examples():
    buy, sell = adjust_prices([40.0], [40.0], [5.0], 0.975)
    assert buy[0] == pytest.approx(46.1538, abs=1e-4)
    assert sell[0] == pytest.approx(34.125, abs=1e-12)
    buy, sell = adjust_prices([40.0, 12.0], [39.0, 11.0], 0.0, 1.0)
    assert buy.tolist() == [40.0, 12.0]
    assert sell.tolist() == [39.0, 11.0]


def test_adjust_prices_errors():
    with pytest.raises(ParameterError):
        adjust_prices([1.0], [1.0], 0.0, 0.0)
    with pytest.raises(ParameterError):
        adjust_prices([1.0], [1.0], -1.0, 1.0)


def test_large_rent_gives_negative_sell_price():
    _, sell = adjust_prices([10.0], [10.0], [30.0], 1.0)
    assert sell[0] == -20.0


def test_simulate_soc(battery):
    assert simulate_soc(battery, [0.2, -0.3]) == pytest.approx([0.7, 0.4])
    assert np.all(simulate_soc(battery, np.zeros(5)) == 0.5)
    path = simulate_soc(battery, [0.5, 0.5])
    assert path.tolist() == [1.0, 1.5]
    report = check_feasible(battery, [0.5, 0.5], [0.0, 0.0])
    assert [(v.index, v.kind) for v in report.violations] == [(1, "capacity")]


def test_check_feasible_examples(battery):
    rep = check_feasible(BatteryParams(b0=0.2), [0.3], [0.3])
    assert [v.kind for v in rep.violations] == ["joint_ramp"]
    assert rep.violations[0].amount == pytest.approx(0.1)
    rep = check_feasible(battery, [0.2], [-0.1])
    assert [v.kind for v in rep.violations] == ["sign"]
    assert check_feasible(battery, np.zeros(24), np.zeros(24)).ok


def test_check_feasible_reports_every_step(battery):
    env = OperatingEnvelope.closed(3)
    rep = check_feasible(battery, [0.0, 0.0, 0.0], [0.1, 0.0, -0.1], envelope=env)
    assert [(v.index, v.kind) for v in rep.violations] == [(0, "envelope"), (2, "envelope")]
    with pytest.raises(ShapeError):
        check_feasible(battery, [0.0], [0.0, 0.0])


def test_check_feasible_blocked_bounds(battery):
    rep = check_feasible(battery, [-0.3], [0.0], b_lo=0.3, b_hi=0.9)
    assert [v.kind for v in rep.violations] == ["capacity"]


def test_grid_power_examples(battery):
    assert grid_power(battery, [0.5])[0] == pytest.approx(0.5263, abs=1e-4)
    assert grid_power(battery, [-0.5])[0] == pytest.approx(-0.475, abs=1e-12)
    assert grid_power(battery, [0.0])[0] == 0.0
    assert grid_power(battery, [0.5], starred=True)[0] == pytest.approx(0.5 / 0.9025)


def test_params_validation():
    with pytest.raises(ParameterError):
        BatteryParams(b0=2.0)
    with pytest.raises(ParameterError):
        BatteryParams(b_min=1.0, b_max=1.0, b0=1.0)
    with pytest.raises(ParameterError):
        BatteryParams(delta_min=0.1)
    with pytest.raises(ParameterError):
        BatteryParams(eta_ch=1.2)
    p = BatteryParams(h=0.5)
    assert (p.x_min, p.x_max) == (-0.25, 0.25)
    assert BatteryParams().investment == 100_000.0


def test_params_from_file(tmp_path):
    f = tmp_path / "b.yaml"
    f.write_text("battery:\n  rated_capacity: 2\n  initial_charge: 1\n  charging_efficiency: 0.9\n")
    p = BatteryParams.from_file(f)
    assert (p.b_max, p.b0, p.eta_ch) == (2.0, 1.0, 0.9)
    assert BatteryParams.from_mapping(p.to_mapping()) == p
    with pytest.raises(ParameterError):
        BatteryParams.from_mapping({"colour": 1})


def test_priceset():
    ps = PriceSet.from_markets([40.0, 50.0], [60.0, 70.0], rent=5.0, eta_line=0.975)
    assert len(ps) == 2
    assert ps.p_buy_b_adj[0] == pytest.approx(46.1538 + 20 / 0.975, abs=1e-4)
    assert ps.slice(1, 2).p_sell_b_adj[0] == pytest.approx(65 * 0.975)
    with pytest.raises(ShapeError):
        PriceSet([1.0], [1.0], [1.0, 2.0], [1.0], 0.0, 1.0)


# cleaned prices are non-negative; for negative prices dividing by eta_line lowers the buy price
prices = arrays(float, st.integers(1, 30), elements=st.floats(0, 500))


@given(prices, st.floats(0, 50), st.floats(0.5, 1.0))
def test_adjusted_prices_bracket_raw(p, rent, eta_line):
    buy, sell = adjust_prices(p, p, rent, eta_line)
    assert np.all(buy >= p - 1e-9)
    assert np.all(sell <= p + 1e-9)
    if rent == 0 and eta_line == 1:
        assert np.array_equal(buy, p) and np.array_equal(sell, p)


steps = arrays(float, st.integers(1, 40), elements=st.floats(-0.5, 0.5))


@given(steps)
def test_grid_power_properties(x):
    p = BatteryParams()
    xs = np.sort(x)
    g = grid_power(p, xs)
    assert np.all(np.diff(g) >= -1e-12)
    assert grid_power(p, [0.0])[0] == 0.0
    charge = xs > 0
    assert np.all(np.abs(g[charge]) >= np.abs(xs[charge]) - 1e-12)
    assert np.all(np.abs(g[~charge]) <= np.abs(xs[~charge]) + 1e-12)


@given(steps)
def test_soc_is_prefix_sum(x):
    p = BatteryParams()
    assert np.array_equal(simulate_soc(p, x), p.b0 + np.cumsum(x))
    assert np.allclose(simulate_soc(p, x) - simulate_soc(p, np.zeros_like(x)), np.cumsum(x), rtol=0, atol=1e-12)
