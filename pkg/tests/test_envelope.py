import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from interarb.envelope import (
    LinkState, OperatingEnvelope, envelope_hoa, envelope_single_link, load_envelope_csv, reserve_capacity,
)
from interarb.errors import ParameterError, ShapeError


def single(flow, l_max=1000.0):
    return envelope_single_link(LinkState(l_max, np.atleast_1d(np.asarray(flow, float))), -0.5, 0.5)


def test_single_link_examples():
    env = single(0.0)
    assert (env.x_min_adj[0], env.x_max_adj[0]) == (-0.5, 0.5)
    env = single(-999.8)
    assert env.x_max_adj[0] == pytest.approx(0.2, abs=1e-9)
    assert env.x_min_adj[0] == -0.5
    env = single(1000.0)
    assert (env.x_min_adj[0], env.x_max_adj[0]) == (0.0, 0.5)


def test_single_link_saturated_import_blocks_charge():
    env = single(-1000.0)
    assert (env.x_min_adj[0], env.x_max_adj[0]) == (-0.5, 0.0)


def test_hoa_examples():
    free = LinkState(3500.0, np.zeros(2))
    env = envelope_hoa(free, LinkState(1400.0, np.zeros(2)), -0.5, 0.5)
    assert env.x_min_adj.tolist() == [-0.5, -0.5] and env.x_max_adj.tolist() == [0.5, 0.5]
    be = LinkState(1000.0, [-999.8])   # BE side allows [-0.5, 0.2]
    uk = LinkState(1000.0, [999.9])    # UK side allows [-0.1, 0.5]
    env = envelope_hoa(be, uk, -0.5, 0.5)
    assert env.x_min_adj[0] == pytest.approx(-0.1, abs=1e-9)
    assert env.x_max_adj[0] == pytest.approx(0.2, abs=1e-9)
    env = envelope_hoa(LinkState(3500.0, [0.0]), LinkState(1400.0, [-1400.0]), -0.5, 0.5)
    assert env.x_max_adj[0] == 0.0
    with pytest.raises(ShapeError):
        envelope_hoa(LinkState(1.0, [0.0]), LinkState(1.0, [0.0, 0.0]), -0.5, 0.5)


def test_reserve_examples():
    env = single([0.0, 1000.0, -999.8])
    same = reserve_capacity(env, 0.0, -0.5, 0.5)
    assert np.array_equal(same.x_min_adj, env.x_min_adj) and np.array_equal(same.x_max_adj, env.x_max_adj)
    r = reserve_capacity(OperatingEnvelope.closed(1), 0.25, -0.5, 0.5)
    assert (r.x_min_adj[0], r.x_max_adj[0]) == (-0.25, 0.25)
    full = reserve_capacity(OperatingEnvelope.closed(3), 0.5, -0.5, 0.5)
    assert np.all(full.x_min_adj == -0.5) and np.all(full.x_max_adj == 0.5)
    with pytest.raises(ParameterError):
        reserve_capacity(env, -0.1, -0.5, 0.5)


def test_link_validation():
    with pytest.raises(ParameterError):
        LinkState(0.0, [0.0])
    with pytest.raises(ParameterError):
        LinkState(10.0, [np.nan])


def test_csv_roundtrip(tmp_path):
    env = single([0.0, 1000.0, -999.8, 500.0])
    env.to_csv(tmp_path / "env.csv")
    back = load_envelope_csv(tmp_path / "env.csv")
    assert np.array_equal(back.x_min_adj, env.x_min_adj)
    assert np.array_equal(back.x_max_adj, env.x_max_adj)


flows = arrays(float, st.integers(1, 30), elements=st.floats(-2000, 2000))
caps = st.floats(0.01, 2000)
ramps = st.floats(0.05, 2.0)


@given(flows, caps, ramps, ramps)
def test_envelope_contains_zero_and_stays_in_ramp(flow, l_max, dn, up):
    env = envelope_single_link(LinkState(l_max, flow), -dn, up)
    assert np.all(env.x_min_adj <= 0) and np.all(env.x_max_adj >= 0)
    assert np.all(env.x_min_adj >= -dn) and np.all(env.x_max_adj <= up)


@given(flows, caps, st.floats(0, 1000), ramps)
def test_looser_line_never_shrinks(flow, l_max, extra, ramp):
    a = envelope_single_link(LinkState(l_max, flow), -ramp, ramp)
    b = envelope_single_link(LinkState(l_max + extra, flow), -ramp, ramp)
    assert np.all(b.x_min_adj <= a.x_min_adj) and np.all(b.x_max_adj >= a.x_max_adj)


@given(flows, flows, caps, caps)
def test_hoa_is_intersection(fb, fu, lb, lu):
    n = min(fb.size, fu.size)
    fb, fu = fb[:n], fu[:n]
    env = envelope_hoa(LinkState(lb, fb), LinkState(lu, fu), -0.5, 0.5)
    a = envelope_single_link(LinkState(lb, fb), -0.5, 0.5)
    b = envelope_single_link(LinkState(lu, fu), -0.5, 0.5)
    assert np.array_equal(env.x_min_adj, np.maximum(a.x_min_adj, b.x_min_adj))
    assert np.array_equal(env.x_max_adj, np.minimum(a.x_max_adj, b.x_max_adj))
    assert np.all(env.x_min_adj <= 0) and np.all(env.x_max_adj >= 0)


@given(st.integers(1, 20), caps)
def test_idle_wide_line_is_full_ramp(n, extra):
    env = envelope_single_link(LinkState(0.5 + extra, np.zeros(n)), -0.5, 0.5)
    assert np.all(env.x_min_adj == -0.5) and np.all(env.x_max_adj == 0.5)


@given(flows, caps, st.floats(0, 0.5), st.floats(0, 0.5))
def test_reserve_monotone(flow, l_max, r1, r2):
    env = envelope_single_link(LinkState(l_max, flow), -0.5, 0.5)
    lo, hi = sorted((r1, r2))
    a = reserve_capacity(env, lo, -0.5, 0.5)
    b = reserve_capacity(env, hi, -0.5, 0.5)
    assert np.all(b.x_min_adj <= a.x_min_adj) and np.all(b.x_max_adj >= a.x_max_adj)
    assert np.all(a.x_max_adj >= lo) and np.all(a.x_min_adj <= -lo)
