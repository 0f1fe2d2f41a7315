import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interarb.errors import OrderingError, ParseError, SchemaError, UnitError
from interarb.ingest import (
    CLAMPED, INTERPOLATED, OBSERVED, BoundaryInterpolationWarning, CleanSeries, RawSeries,
    align_series, clamp_negative_prices, clean_series, convert_currency, load_series, prepare,
)

T0 = np.datetime64("2019-03-01T00", "h")


def write_csv(path, values, start="2019-03-01T00:00:00Z", stamps=None):
    if stamps is None:
        stamps = [str(np.datetime64(start.rstrip("Z"), "h") + k) + ":00:00Z" for k in range(len(values))]
    lines = ["timestamp,value"]
    for t, v in zip(stamps, values):
        lines.append(f"{t},{'' if v is None else v}")
    path.write_text("\n".join(lines) + "\n")
    return path


def raw(values, unit="EUR/MWh"):
    values = np.array([np.nan if v is None else v for v in values], dtype=float)
    return RawSeries("s", T0 + np.arange(values.size), values, unit)


def test_load_24_rows(tmp_path):
    s = load_series(write_csv(tmp_path / "p.csv", list(range(24))), "EUR/MWh")
    assert len(s) == 24
    assert s.missing.sum() == 0
    assert s.timestamps[0] == T0


def test_load_marks_empty_cell(tmp_path):
    vals = list(range(24))
    vals[7] = None
    s = load_series(write_csv(tmp_path / "p.csv", vals), "EUR/MWh")
    assert np.flatnonzero(s.missing).tolist() == [7]


def test_load_duplicate_timestamp(tmp_path):
    stamps = ["2019-03-01T00:00:00Z", "2019-03-01T01:00:00Z", "2019-03-01T01:00:00Z"]
    with pytest.raises(OrderingError):
        load_series(write_csv(tmp_path / "p.csv", [1, 2, 3], stamps=stamps), "EUR/MWh")


def test_load_errors(tmp_path):
    with pytest.raises(SchemaError):
        load_series(write_csv(tmp_path / "p.csv", [1]), "USD/MWh")
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,value\nnot-a-date,3\n")
    with pytest.raises(ParseError):
        load_series(bad, "MW")
    hdr = tmp_path / "hdr.csv"
    hdr.write_text("time,price\n2019-03-01T00:00:00Z,3\n")
    with pytest.raises(SchemaError):
        load_series(hdr, "MW")


def test_load_fills_grid_gaps_and_skips_comments(tmp_path):
    stamps = ["2019-03-01T00:00:00Z", "2019-03-01T02:00:00Z"]
    p = write_csv(tmp_path / "p.csv", [1, 3], stamps=stamps)
    p.write_text("# config_sha256=abc\n" + p.read_text())
    s = load_series(p, "MW")
    assert len(s) == 3
    assert np.isnan(s.values[1])


def test_clean_drops_day_with_consecutive_gap():
    vals = [float(v) for v in range(48)]
    vals[5] = vals[6] = None
    c = clean_series(raw(vals))
    assert c.day_index == [np.datetime64("2019-03-02").tolist()]
    assert len(c) == 24
    assert len(c.report.dropped_days) == 1


def test_clean_interpolates_lone_gap():
    vals = [1.0] * 24
    vals[4], vals[5], vals[6] = 30.0, None, 50.0
    c = clean_series(raw(vals))
    assert c.values[5] == 40.0
    assert c.flags[5] == INTERPOLATED
    assert c.report.interpolated_hours == 1


def test_clean_boundary_gap_warns_and_drops():
    vals = [None] + [1.0] * 47
    with pytest.warns(BoundaryInterpolationWarning):
        c = clean_series(raw(vals))
    assert len(c) == 24
    assert c.report.boundary_days


def test_clean_run_across_midnight_drops_both_days():
    vals = [1.0] * 72
    vals[23] = vals[24] = None
    c = clean_series(raw(vals))
    assert len(c.day_index) == 1


def test_clamp_examples():
    c = clean_series(raw([10.0, -5.0, 20.0] + [1.0] * 21))
    out = clamp_negative_prices(c)
    assert out.values[:3].tolist() == [10.0, 0.0, 20.0]
    assert out.report.clamped_hours == 1
    assert out.flags[1] == CLAMPED
    same = clamp_negative_prices(clean_series(raw([1.0] * 24)))
    assert same.report.clamped_hours == 0
    with pytest.raises(UnitError):
        clamp_negative_prices(clean_series(raw([1.0] * 24, unit="MW")))


def test_convert_currency():
    c = clean_series(raw([100.0] * 24, unit="GBP/MWh"))
    out = convert_currency(c, 1.16)
    assert out.unit == "EUR/MWh"
    assert out.values[0] == pytest.approx(116.0, abs=1e-12)
    assert np.array_equal(convert_currency(c, 1.0).values, c.values)
    with pytest.raises(UnitError):
        convert_currency(out)
    empty = CleanSeries("e", np.array([], dtype="datetime64[h]"), np.array([]), np.array([], dtype=object),
                        "GBP/MWh")
    assert len(convert_currency(empty)) == 0


def test_align_keeps_common_days():
    a = clean_series(raw([1.0] * 48))
    vals = [2.0] * 48
    vals[30] = vals[31] = None
    b = clean_series(raw(vals))
    a2, b2 = align_series(a, b)
    assert a2.day_index == b2.day_index == [np.datetime64("2019-03-01").tolist()]


def test_prepare_gbp_pipeline(tmp_path):
    vals = [-1.0] + [10.0] * 23
    s = prepare(write_csv(tmp_path / "uk.csv", vals), "GBP/MWh", "uk")
    assert s.unit == "EUR/MWh"
    assert s.values[0] == 0.0
    assert s.values[1] == pytest.approx(11.6)


gap_values = st.lists(st.one_of(st.none(), st.floats(-50, 200, allow_nan=False)), min_size=24, max_size=96)


@settings(max_examples=150, deadline=None)
@given(gap_values)
def test_clean_properties(vals):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryInterpolationWarning)
        once = clean_series(raw(vals))
        twice = clean_series(once)
    assert not np.isnan(once.values).any()
    assert len(once) % 24 == 0
    assert np.array_equal(once.values, twice.values)
    assert np.array_equal(once.timestamps, twice.timestamps)
    assert set(once.flags.tolist()) <= {OBSERVED, INTERPOLATED, CLAMPED}
    clamped = clamp_negative_prices(once)
    assert np.all(clamped.values >= 0)
    assert np.all(clamped.values <= np.maximum(once.values, 0))
    nonneg = once.values >= 0
    assert np.array_equal(clamped.values[nonneg], once.values[nonneg])
