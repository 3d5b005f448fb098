import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailcast.errors import (
    CoverageError,
    DegenerateInputError,
    EmptySeriesError,
    InputError,
    ParseError,
)
from tailcast.ingest import (
    SECONDS_PER_DAY,
    EventSeries,
    RescalePlan,
    WeeklyActivity,
    apply_rescale,
    block_maxima,
    bucket_weekly,
    cumulative_weekly,
    parse_events,
    parse_timestamp,
    rescale_factors,
    serialize_events,
)

DAY = SECONDS_PER_DAY
T0 = 1262304000.0


def series_at_days(days, mags=None):
    days = np.asarray(days, dtype=float)
    mags = np.ones_like(days) if mags is None else np.asarray(mags, dtype=float)
    return EventSeries(T0 + days * DAY, mags)


def weeks(*counts):
    return [WeeklyActivity(i + 1, c) for i, c in enumerate(counts)]


# -- parse_events ----------------------------------------------------------------


def test_parse_single_row():
    s = parse_events(b"1262304000,100\n")
    assert len(s) == 1
    assert s.magnitudes[0] == 100.0
    assert s.origin == T0


def test_parse_sorts_rows():
    s = parse_events("timestamp,shares\n1262304100,5\n1262304000,7\n")
    assert list(s.timestamps) == [1262304000.0, 1262304100.0]
    assert list(s.magnitudes) == [7.0, 5.0]


def test_parse_negative_magnitude_is_row_error():
    rows = "\n".join(f"{T0 + i},{i}" for i in range(20)) + f"\n{T0 + 99},-5\n"
    s = parse_events(rows)
    assert len(s) == 20
    assert len(s.row_errors) == 1
    assert s.row_errors[0].line == 21
    assert "negative" in s.row_errors[0].message


def test_parse_too_many_bad_rows():
    rows = f"{T0},1\n{T0 + 1},x\n{T0 + 2},3\n"
    with pytest.raises(ParseError) as info:
        parse_events(rows)
    assert [e.line for e in info.value.row_errors] == [2]


def test_parse_single_bad_row_only():
    with pytest.raises(ParseError):
        parse_events("1262304000,-5\n")


@pytest.mark.parametrize("src", [b"", "", "\n\n", "timestamp,shares\n"])
def test_parse_empty_input(src):
    with pytest.raises(EmptySeriesError):
        parse_events(src)


def test_empty_series_error_is_input_error():
    assert issubclass(EmptySeriesError, InputError)


def test_parse_iso_timestamps_and_magnitude_column():
    s = parse_events("timestamp,magnitude\n2010-01-01T00:00:00Z,3\n2010-01-01T00:00:10,4\n")
    assert list(s.timestamps) == [T0, T0 + 10]


def test_parse_timestamp_forms():
    assert parse_timestamp("1262304000") == T0
    assert parse_timestamp("2010-01-01T01:00:00+01:00") == T0
    with pytest.raises(ValueError):
        parse_timestamp("yesterday")


def test_parse_jsonl():
    lines = [json.dumps({"timestamp": T0 + 60, "shares": 2}), json.dumps({"timestamp": T0, "shares": 9})]
    s = parse_events(io.BytesIO(("\n".join(lines) + "\n").encode()), format="jsonl")
    assert list(s.magnitudes) == [9.0, 2.0]


def test_parse_unknown_format():
    with pytest.raises(InputError):
        parse_events(b"1,1\n", format="xml")


def test_parse_invalid_utf8():
    with pytest.raises(ParseError):
        parse_events(b"\xff\xfe\x00garbage")


def test_serialize_round_trip_exact():
    s = EventSeries(np.array([T0, T0 + 0.1, T0 + 1e5]), np.array([0.1, 1 / 3, 12345.678901234567]))
    assert parse_events(serialize_events(s)) == s


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(0, 4e9, allow_nan=False), st.floats(0, 1e12, allow_nan=False)),
        min_size=1,
        max_size=40,
    )
)
def test_serialize_round_trip_property(rows):
    ts, mags = zip(*rows)
    s = EventSeries(np.array(ts), np.array(mags))
    back = parse_events(serialize_events(s).encode())
    assert back == s


def test_series_is_immutable():
    s = series_at_days([0, 1])
    with pytest.raises(ValueError):
        s.magnitudes[0] = 5.0


def test_series_rejects_negative_magnitude():
    with pytest.raises(InputError):
        EventSeries(np.array([T0]), np.array([-1.0]))


# -- weekly bucketing ----------------------------------------------------------------


def test_bucket_three_events_one_week():
    assert bucket_weekly(series_at_days([0, 2, 6.99])) == [WeeklyActivity(1, 3)]


def test_bucket_half_open_boundary():
    assert bucket_weekly(series_at_days([0, 7])) == [WeeklyActivity(1, 1), WeeklyActivity(2, 1)]


def test_bucket_emits_empty_interior_week():
    assert bucket_weekly(series_at_days([0, 15])) == weeks(1, 0, 1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 2000), min_size=1, max_size=200))
def test_bucket_conserves_count(days):
    w = bucket_weekly(series_at_days(days))
    assert sum(x.count for x in w) == len(days)
    assert [x.week_index for x in w] == list(range(1, len(w) + 1))


@pytest.mark.parametrize(
    "counts,expected",
    [((1, 2, 3), [1, 3, 6]), ((0, 0, 0), [0, 0, 0]), ((10, 0, 5), [10, 10, 15])],
)
def test_cumulative_weekly(counts, expected):
    assert cumulative_weekly(weeks(*counts)) == list(zip(range(1, len(counts) + 1), expected))


# -- rescaling --------------------------------------------------------------------


def test_rescale_max():
    assert rescale_factors(weeks(10, 20), "max").factors == (0.5, 1.0)


def test_rescale_mean():
    np.testing.assert_allclose(rescale_factors(weeks(10, 20, 30), "mean").factors, [0.5, 1.0, 1.5])


def test_rescale_median():
    np.testing.assert_allclose(rescale_factors(weeks(10, 40, 20), "median").factors, [0.5, 2.0, 1.0])


def test_rescale_single_week():
    assert rescale_factors(weeks(5), "max").factors == (1.0,)


def test_rescale_zero_weeks_get_smallest_nonzero():
    assert rescale_factors(weeks(4, 0, 8), "max").factors == (0.5, 0.5, 1.0)


def test_rescale_all_zero():
    with pytest.raises(DegenerateInputError):
        rescale_factors(weeks(0, 0), "max")


def test_rescale_zero_median():
    with pytest.raises(DegenerateInputError):
        rescale_factors(weeks(0, 0, 3), "median")


def test_rescale_unknown_mode():
    with pytest.raises(InputError):
        rescale_factors(weeks(1), "sum")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=300).filter(lambda c: any(c)))
def test_rescale_max_is_exactly_one(counts):
    f = rescale_factors(weeks(*counts), "max").factors
    assert max(f) == 1.0
    assert all(0 < x <= 1 for x in f)


def test_apply_rescale_divides():
    s = series_at_days([0, 8], [100.0, 100.0])
    out = apply_rescale(s, RescalePlan((0.5, 1.0), "max"))
    assert list(out.magnitudes) == [200.0, 100.0]
    np.testing.assert_array_equal(out.timestamps, s.timestamps)


def test_apply_rescale_identity_plan():
    rng = np.random.default_rng(3)
    s = series_at_days(np.sort(rng.uniform(0, 100, 50)), rng.exponential(10, 50))
    n_weeks = len(bucket_weekly(s))
    assert apply_rescale(s, RescalePlan((1.0,) * n_weeks, "max")) == s


def test_apply_rescale_coverage_error():
    with pytest.raises(CoverageError):
        apply_rescale(series_at_days([0, 15]), RescalePlan((1.0, 1.0), "max"))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 200), st.floats(0, 1e6)), min_size=2, max_size=80)
)
def test_max_rescale_preserves_week_ranks_and_never_deflates(rows):
    days, mags = zip(*rows)
    s = series_at_days(days, mags)
    out = apply_rescale(s, rescale_factors(bucket_weekly(s), "max"))
    assert np.all(out.magnitudes >= s.magnitudes)
    wk = s.week_indices()
    for w in np.unique(wk):
        sel = wk == w
        np.testing.assert_array_equal(
            np.argsort(s.magnitudes[sel], kind="stable"), np.argsort(out.magnitudes[sel], kind="stable")
        )


# -- block maxima ------------------------------------------------------------------


def test_block_maxima_one_block():
    assert block_maxima(series_at_days([0, 1, 2], [1, 5, 3]), 30) == [5.0]


def test_block_maxima_two_blocks():
    assert block_maxima(series_at_days([0, 1, 31], [1, 5, 3]), 30) == [5.0, 3.0]


def test_block_maxima_skips_empty_block():
    assert block_maxima(series_at_days([0, 65], [2, 4]), 30) == [2.0, 4.0]


def test_block_maxima_rejects_bad_length():
    with pytest.raises(InputError):
        block_maxima(series_at_days([0]), 0)
