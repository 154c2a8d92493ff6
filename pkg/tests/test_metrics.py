"""Round diagnostics and the metrics CSV round trip."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsampler.metrics import (
    COLUMNS,
    SCHEMA_MARKER,
    RoundMetrics,
    emit_csv,
    entropy,
    phi_ratio,
    read_csv,
    update_gap,
)


def record(i=0, loss=1.0):
    return RoundMetrics(round=i, global_loss=loss, full_grad_norm=0.5,
                        update_gap=0.25, update_variance=0.125, phi_ratio=1.5,
                        selected=(2, 0, 7), probabilities_entropy=1.1,
                        wall_ms=3.25)


class TestDiagnostics:
    def test_update_gap_is_l2_distance(self):
        g = update_gap(np.array([3.0, 1.5]), np.array([4.0, 0.0]))
        assert g == pytest.approx(np.sqrt(1.0 + 2.25))

    def test_update_gap_zero_for_exact_surrogate(self):
        v = np.array([1.0, -2.0])
        assert update_gap(v, v) == 0.0

    def test_update_gap_shape_mismatch(self):
        with pytest.raises(ValueError):
            update_gap(np.zeros(2), np.zeros(3))

    def test_phi_ratio_equal_scores_is_one(self):
        assert phi_ratio(np.full(5, 0.3)) == pytest.approx(1.0)

    def test_phi_ratio_known_value(self):
        # m=2, c=(1, 3): 2 * 10 / 16
        assert phi_ratio([1.0, 3.0]) == pytest.approx(1.25)

    def test_phi_ratio_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            phi_ratio([1.0, 0.0])
        with pytest.raises(ValueError):
            phi_ratio([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=50))
    def test_phi_ratio_at_least_one(self, scores):
        assert phi_ratio(np.asarray(scores)) >= 1.0 - 1e-9

    def test_entropy_uniform_is_log_m(self):
        assert entropy(np.full(8, 0.125)) == pytest.approx(np.log(8))

    def test_entropy_point_mass_is_zero(self):
        assert entropy(np.array([1.0, 0.0, 0.0])) == 0.0


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        recs = [record(i, loss=1.0 / (i + 1)) for i in range(5)]
        emit_csv(recs, path)
        cols = read_csv(path)
        assert list(cols) == COLUMNS
        np.testing.assert_array_equal(cols["round"], np.arange(5))
        np.testing.assert_allclose(cols["global_loss"], [1 / (i + 1) for i in range(5)])
        assert cols["selected"][0] == (2, 0, 7)

    def test_marker_is_first_line(self, tmp_path):
        path = tmp_path / "m.csv"
        emit_csv([record()], path)
        assert path.read_text().splitlines()[0] == SCHEMA_MARKER

    def test_wall_ms_zeroed_by_default(self, tmp_path):
        path = tmp_path / "m.csv"
        emit_csv([record()], path)
        assert read_csv(path)["wall_ms"][0] == 0.0

    def test_wall_ms_kept_when_requested(self, tmp_path):
        path = tmp_path / "m.csv"
        emit_csv([record()], path, deterministic_timing=False)
        assert read_csv(path)["wall_ms"][0] == 3.25

    def test_missing_marker_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("round,global_loss\n0,1.0\n")
        with pytest.raises(ValueError, match="schema marker"):
            read_csv(path)

    def test_reals_survive_bit_exact(self, tmp_path):
        path = tmp_path / "m.csv"
        loss = 1.0 / 3.0 + 1e-16
        emit_csv([record(loss=loss)], path)
        assert read_csv(path)["global_loss"][0] == loss
