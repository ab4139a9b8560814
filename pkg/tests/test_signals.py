import numpy as np
import pytest

from selfonn.signals import (
    Recording,
    Segment,
    SegmentMeta,
    normalize_segment,
    segment_recording,
)


class TestSegmentRecording:
    def test_exact_multiple_gives_full_windows(self):
        rec = Recording(np.arange(8192, dtype=np.float64))
        windows = segment_recording(rec)
        assert len(windows) == 2
        assert all(w.shape == (4096,) for w in windows)

    def test_trailing_remainder_is_dropped(self):
        rec = Recording(np.arange(10000, dtype=np.float64))
        assert len(segment_recording(rec)) == 2

    def test_below_one_window_yields_nothing(self):
        rec = Recording(np.arange(4095, dtype=np.float64))
        assert segment_recording(rec) == []

    def test_windows_are_consecutive_and_non_overlapping(self):
        rng = np.random.default_rng(0)
        samples = rng.normal(size=3 * 4096 + 17)
        windows = segment_recording(Recording(samples))
        joined = np.concatenate(windows)
        np.testing.assert_array_equal(joined, samples[: 3 * 4096])

    def test_custom_window_size(self):
        rec = Recording(np.arange(25, dtype=np.float64))
        windows = segment_recording(rec, window=10)
        assert len(windows) == 2
        np.testing.assert_array_equal(windows[1], np.arange(10, 20))

    def test_window_must_be_positive(self):
        with pytest.raises(ValueError):
            segment_recording(Recording(np.arange(10, dtype=np.float64)), window=0)


class TestNormalizeSegment:
    def test_linear_ramp_endpoints(self):
        window = np.arange(0, 8192, 2, dtype=np.float64)
        out = normalize_segment(window, dtype=np.float64)
        np.testing.assert_allclose(out[:3], [-1.0, 2 / 4095 - 1.0, 4 / 4095 - 1.0])

    def test_min_maps_to_minus_one_max_to_plus_one_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            window = rng.normal(scale=rng.uniform(0.1, 50.0), size=4096)
            out = normalize_segment(window, dtype=np.float64)
            assert out.min() == -1.0
            assert out.max() == 1.0
            assert out[np.argmin(window)] == -1.0
            assert out[np.argmax(window)] == 1.0

    def test_constant_window_becomes_zeros(self):
        out = normalize_segment(np.full(4096, 5.0))
        np.testing.assert_array_equal(out, np.zeros(4096, dtype=np.float32))

    def test_range_is_closed_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            out = normalize_segment(rng.normal(size=4096))
            assert np.all(out >= -1.0) and np.all(out <= 1.0)

    def test_idempotent_on_non_constant_windows(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            window = rng.normal(size=4096)
            once = normalize_segment(window, dtype=np.float64)
            twice = normalize_segment(once, dtype=np.float64)
            np.testing.assert_array_equal(once, twice)

    def test_invariant_under_positive_scale_and_offset(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            window = rng.normal(size=4096)
            a = rng.uniform(0.25, 8.0)
            c = rng.uniform(-30.0, 30.0)
            base = normalize_segment(window, dtype=np.float64)
            moved = normalize_segment(a * window + c, dtype=np.float64)
            np.testing.assert_allclose(moved, base, atol=1e-12)

    def test_sign_flip_negates_output(self):
        rng = np.random.default_rng(17)
        window = rng.normal(size=4096)
        base = normalize_segment(window, dtype=np.float64)
        flipped = normalize_segment(-window, dtype=np.float64)
        np.testing.assert_allclose(flipped, -base, atol=1e-12)

    def test_default_dtype_is_float32(self):
        assert normalize_segment(np.random.default_rng(0).normal(size=4096)).dtype == np.float32


class TestDomainTypes:
    def test_recording_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Recording(np.zeros(8), sample_rate_hz=0)

    def test_recording_rejects_matrix_input(self):
        with pytest.raises(ValueError):
            Recording(np.zeros((2, 4)))

    def test_segment_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            Segment(np.zeros(17, dtype=np.float32), "healthy")

    def test_segment_rejects_out_of_range_values(self):
        values = np.zeros(4096, dtype=np.float32)
        values[0] = 1.5
        with pytest.raises(ValueError):
            Segment(values, "healthy")

    def test_segment_rejects_unknown_label(self):
        with pytest.raises(ValueError):
            Segment(np.zeros(4096, dtype=np.float32), "broken")

    def test_segment_meta_window_index(self):
        with pytest.raises(ValueError):
            SegmentMeta(None, -1)
