import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beaconfold.errors import TraceFormatError
from beaconfold.rssi import (
    QuantizerConfig,
    RssiTrace,
    dumps_trace,
    edge_filter_array,
    loads_trace,
    packet_edge_filter,
    quantize,
    read_trace,
    write_trace,
)

bits = st.lists(st.integers(0, 1), min_size=1, max_size=300)


class TestQuantize:
    def test_above_threshold_is_busy(self):
        assert quantize([-70.0]).samples.tolist() == [1]

    def test_below_threshold_is_idle(self):
        assert quantize([-80.0]).samples.tolist() == [0]

    def test_threshold_itself_is_busy(self):
        assert quantize([-75.0]).samples.tolist() == [1]

    def test_custom_threshold(self):
        t = quantize([-82.0, -85.0, -90.0], QuantizerConfig(-85.0))
        assert t.samples.tolist() == [1, 1, 0]

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError, match="empty trace"):
            quantize([])

    def test_non_finite_threshold_rejected(self):
        with pytest.raises(ValueError):
            QuantizerConfig(float("nan"))

    @given(st.lists(st.floats(-120, 0), min_size=1, max_size=50),
           st.integers(0, 49), st.floats(0, 50))
    def test_monotone_in_power(self, power, i, bump):
        i %= len(power)
        raised = list(power)
        raised[i] += bump
        before = quantize(power).samples
        after = quantize(raised).samples
        assert (after >= before).all()


class TestEdgeFilter:
    def test_long_run_truncated_to_two(self):
        assert edge_filter_array([0, 1, 1, 1, 1, 0]).tolist() == [0, 1, 1, 0, 0, 0]

    def test_single_sample_runs_kept(self):
        assert edge_filter_array([1, 0, 1, 0]).tolist() == [1, 0, 1, 0]

    def test_twelve_sample_run_is_reduced_sixfold(self):
        raw = [0] + [1] * 12 + [0]
        out = edge_filter_array(raw)
        assert out.tolist() == [0, 1, 1] + [0] * 11
        assert sum(raw) / sum(out) == 6

    def test_run_at_start_of_trace(self):
        assert edge_filter_array([1, 1, 1]).tolist() == [1, 1, 0]

    def test_empty_array(self):
        assert edge_filter_array([]).size == 0

    def test_trace_wrapper_keeps_metadata(self):
        t = RssiTrace([1, 1, 1, 0], 64, 1000, awake=[1, 1, 1, 1])
        out = packet_edge_filter(t)
        assert out.samples.tolist() == [1, 1, 0, 0]
        assert (out.sample_period_us, out.origin_time_us) == (64, 1000)
        assert out.awake.tolist() == [1, 1, 1, 1]

    @given(bits)
    def test_idempotent(self, x):
        once = edge_filter_array(x)
        assert np.array_equal(edge_filter_array(once), once)

    @given(bits)
    def test_never_creates_busy_samples(self, x):
        assert (edge_filter_array(x) <= np.asarray(x)).all()

    @given(st.integers(2, 20), st.lists(st.integers(1, 10), min_size=1, max_size=20))
    def test_uniform_runs_scale_by_two_over_length(self, run, gaps):
        x = []
        for g in gaps:
            x += [0] * g + [1] * run
        x = np.array(x)
        out = edge_filter_array(x)
        assert out.sum() * run == x.sum() * 2


class TestRssiTrace:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            RssiTrace([0, 2])

    def test_samples_are_read_only(self):
        t = RssiTrace([0, 1])
        with pytest.raises(ValueError):
            t.samples[0] = 1

    def test_awake_mask_length_checked(self):
        with pytest.raises(ValueError):
            RssiTrace([0, 1], awake=[1])

    def test_equality_and_busy_fraction(self):
        a = RssiTrace([0, 1, 1, 0])
        assert a == RssiTrace(np.array([0, 1, 1, 0]))
        assert a != RssiTrace([0, 1, 1, 0], origin_time_us=5)
        assert a.busy_fraction == 0.5
        assert a.duration_us == 4 * 128


class TestTraceFile:
    def test_round_trip_small(self):
        t = RssiTrace([0, 1, 0], 128)
        buf = io.StringIO()
        write_trace(t, buf)
        assert read_trace(io.StringIO(buf.getvalue())) == t

    def test_parse_minimal_file(self):
        text = "beaconfold-trace v1\nsample_period_us=128\norigin_time_us=0\n010\n"
        t = loads_trace(text)
        assert len(t) == 3 and t.samples.tolist() == [0, 1, 0]

    def test_body_wraps_at_eighty(self):
        text = dumps_trace(RssiTrace([1] * 170))
        body = text.splitlines()[3:]
        assert [len(line) for line in body] == [80, 80, 10]

    def test_bad_character_reports_line(self):
        text = "beaconfold-trace v1\nsample_period_us=128\norigin_time_us=0\n0101\n0121\n"
        with pytest.raises(TraceFormatError, match="line 5"):
            loads_trace(text)

    def test_missing_magic(self):
        with pytest.raises(TraceFormatError, match="line 1"):
            loads_trace("sample_period_us=128\n")

    def test_bad_header_value(self):
        with pytest.raises(TraceFormatError, match="line 2"):
            loads_trace("beaconfold-trace v1\nsample_period_us=abc\norigin_time_us=0\n")

    def test_zero_period_rejected(self):
        with pytest.raises(TraceFormatError, match="line 2"):
            loads_trace("beaconfold-trace v1\nsample_period_us=0\norigin_time_us=0\n")

    def test_empty_body_gives_empty_trace(self):
        t = loads_trace("beaconfold-trace v1\nsample_period_us=128\norigin_time_us=7\n")
        assert len(t) == 0 and t.origin_time_us == 7

    def test_non_ascii_character_is_format_error(self, tmp_path):
        path = tmp_path / "t.trace"
        path.write_bytes(b"beaconfold-trace v1\nsample_period_us=128\norigin_time_us=0\n0\xff1\n")
        with pytest.raises(TraceFormatError, match="line 4"):
            read_trace(path)

    def test_path_round_trip(self, tmp_path):
        t = RssiTrace([1, 0, 0, 1, 1], 256, 4096)
        path = tmp_path / "t.trace"
        write_trace(t, path)
        assert read_trace(str(path)) == t

    @given(bits, st.integers(1, 10_000), st.integers(0, 10**9))
    def test_round_trip_property(self, x, period, origin):
        t = RssiTrace(x, period, origin)
        assert loads_trace(dumps_trace(t)) == t
