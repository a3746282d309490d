import numpy as np
import pytest

from tests.conftest import random_orthonormal
from thermaltwin.decomposition import truncated_svd
from thermaltwin.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InsufficientHistory,
)
from thermaltwin.prediction import (
    AnomalyHistory,
    CoefficientHistory,
    evaluate_rmse,
    merge_predictions,
    predict_anomaly,
    predict_state,
)


class TestCoefficientHistory:
    def test_ring_buffer_wraps_chronologically(self):
        h = CoefficientHistory(r=2, capacity=5, dt=1.0)
        for i in range(8):
            h.append([float(i), float(-i)], t=float(i))
        assert len(h) == 5
        np.testing.assert_array_equal(h.last(5)[0], [3, 4, 5, 6, 7])
        np.testing.assert_array_equal(h.last(2)[1], [-6, -7])
        assert h.last_time() == 7.0

    def test_insufficient_history(self):
        h = CoefficientHistory(r=2, capacity=5, dt=1.0)
        h.append([1.0, 2.0], t=0.0)
        with pytest.raises(InsufficientHistory):
            h.last(2)
        empty = CoefficientHistory(r=1, capacity=3, dt=1.0)
        with pytest.raises(InsufficientHistory):
            empty.last_time()

    def test_dimension_check(self):
        h = CoefficientHistory(r=3, capacity=4, dt=1.0)
        with pytest.raises(DimensionMismatch):
            h.append([1.0, 2.0], t=0.0)


class TestAnomalyHistory:
    def test_resets_on_membership_change(self):
        h = AnomalyHistory(capacity=10)
        frame = np.arange(20.0)
        ids_a = np.array([3, 7])
        for _ in range(4):
            h.update(ids_a, frame)
        assert len(h) == 4
        h.update(np.array([3, 8]), frame)  # membership changed
        assert len(h) == 1
        np.testing.assert_array_equal(h.pixel_ids, [3, 8])

    def test_empty_set_clears(self):
        h = AnomalyHistory(capacity=10)
        h.update(np.array([1]), np.arange(5.0))
        h.update(np.empty(0, dtype=np.int64), np.arange(5.0))
        assert len(h) == 0
        assert h.pixel_ids.size == 0

    def test_matrix_columns_are_frames(self):
        h = AnomalyHistory(capacity=10)
        ids = np.array([0, 2])
        h.update(ids, np.array([1.0, 9.0, 3.0]))
        h.update(ids, np.array([2.0, 9.0, 4.0]))
        np.testing.assert_array_equal(h.matrix(), [[1, 2], [3, 4]])

    def test_capacity_bound(self):
        h = AnomalyHistory(capacity=3)
        ids = np.array([0])
        for i in range(6):
            h.update(ids, np.array([float(i)]))
        assert len(h) == 3
        np.testing.assert_array_equal(h.matrix(), [[3, 4, 5]])


class TestMerge:
    def test_empty_set_is_bitwise_identity(self, rng):
        x = rng.standard_normal(100)
        merged = merge_predictions(x, np.empty(0), np.empty(0, dtype=np.int64))
        assert merged.tobytes() == x.tobytes()

    def test_naive_loop_oracle(self, rng):
        x_osl = rng.standard_normal(200)
        ids = np.sort(rng.choice(200, size=30, replace=False))
        x_anom = rng.standard_normal(30)
        merged = merge_predictions(x_osl, x_anom, ids)
        # Oracle: per-pixel two-case rule evaluated one pixel at a time.
        lookup = dict(zip(ids.tolist(), x_anom.tolist()))
        for i in range(200):
            expected = lookup.get(i, x_osl[i])
            assert merged[i] == expected  # bit-exact, no blending

    def test_errors(self):
        with pytest.raises(IndexOutOfRange):
            merge_predictions(np.zeros(5), np.zeros(1), np.array([9]))
        with pytest.raises(DimensionMismatch):
            merge_predictions(np.zeros(5), np.zeros(2), np.array([1]))


class TestPredictState:
    def test_linear_coefficients_predicted_exactly(self):
        # Coefficients evolving under a stable linear map, lifted through
        # an orthonormal basis: forecast must match the true future state.
        rng = np.random.default_rng(2)
        r, n, w, l = 3, 40, 10, 6
        A = rng.standard_normal((r, r))
        A *= 0.9 / np.abs(np.linalg.eigvals(A)).max()
        Q = random_orthonormal(n, r, rng)

        total = w + 1 + 2 * l
        a = np.empty((r, total))
        a[:, 0] = rng.standard_normal(r)
        for j in range(1, total):
            a[:, j] = A @ a[:, j - 1]
        X = Q @ a
        basis = truncated_svd(X, r)

        hist = CoefficientHistory(r=r, capacity=total, dt=1.0)
        for j in range(w + 1 + l):
            hist.append(basis.modes.T @ X[:, j], t=float(j))

        pred = predict_state(hist, basis, w=w, l=l)
        truth = X[:, w + 2 * l]
        np.testing.assert_allclose(pred, truth, atol=1e-8)

    def test_insufficient_history(self):
        basis = truncated_svd(np.random.default_rng(0).standard_normal((10, 8)), 2)
        hist = CoefficientHistory(r=2, capacity=50, dt=1.0)
        hist.append([0.0, 0.0], t=0.0)
        with pytest.raises(InsufficientHistory):
            predict_state(hist, basis, w=5, l=3)


class TestPredictAnomaly:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_decaying_pixels(self):
        # Two anomaly pixels decaying geometrically: the l-step forecast
        # matches the closed form.
        h = AnomalyHistory(capacity=100)
        ids = np.array([4, 9])
        w, l = 6, 3
        amp = np.array([10.0, -5.0])
        for j in range(w + 1 + l):
            frame = np.zeros(20)
            frame[ids] = amp * 0.8 ** j
            h.update(ids, frame)
        pred = predict_anomaly(h, w=w, l=l)
        expected = amp * 0.8 ** (w + 2 * l)
        np.testing.assert_allclose(pred, expected, atol=1e-8)

    def test_insufficient_history(self):
        h = AnomalyHistory(capacity=100)
        h.update(np.array([1]), np.arange(5.0))
        with pytest.raises(InsufficientHistory):
            predict_anomaly(h, w=5, l=2)


class TestEvaluateRmse:
    def test_hand_computed(self):
        rows = evaluate_rmse([[1.0, 2.0], [0.0, 0.0]],
                             [[0.0, 0.0], [3.0, 4.0]],
                             horizons_s=[70.0, 350.0])
        assert rows[0]["horizon_s"] == 70.0
        assert rows[0]["rmse"] == pytest.approx(np.sqrt((1 + 4) / 2))
        assert rows[0]["worst_pixel_abs"] == 2.0
        assert rows[0]["worst_pixel_rel"] == pytest.approx(2.0 / 170.0)
        assert rows[1]["worst_pixel_abs"] == 4.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            evaluate_rmse([[1.0, 2.0]], [[1.0]])
