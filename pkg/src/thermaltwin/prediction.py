"""Forecasting: DMD on the sampled-coefficient history for global state
prediction, parallel DMD on the anomaly-pixel history, and the merged
prediction that overlays the anomaly subset on the global forecast."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import PodBasis, dmd_predict, fit_dmd
from .errors import DimensionMismatch, IndexOutOfRange, InsufficientHistory


class CoefficientHistory:
    """Ring buffer of time-varying coefficient vectors a(t), uniform dt."""

    def __init__(self, r: int, capacity: int, dt: float):
        self.r = r
        self.capacity = capacity
        self.dt = dt
        self._buf = np.zeros((r, capacity))
        self._times = np.zeros(capacity)
        self._len = 0
        self._head = 0

    def __len__(self) -> int:
        return self._len

    def append(self, a: np.ndarray, t: float) -> None:
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (self.r,):
            raise DimensionMismatch(f"coefficient vector must have length {self.r}")
        self._buf[:, self._head] = a
        self._times[self._head] = t
        self._head = (self._head + 1) % self.capacity
        self._len = min(self._len + 1, self.capacity)

    def last(self, count: int) -> np.ndarray:
        """The most recent `count` columns in chronological order."""
        if count > self._len:
            raise InsufficientHistory(
                f"have {self._len} columns, need {count}")
        idx = (self._head - count + np.arange(count)) % self.capacity
        return self._buf[:, idx]

    def last_time(self) -> float:
        if self._len == 0:
            raise InsufficientHistory("empty history")
        return float(self._times[(self._head - 1) % self.capacity])


class AnomalyHistory:
    """Raw pixel values for the current anomaly set; resets whenever the
    set changes membership (DMD needs a fixed state dimension)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.pixel_ids = np.empty(0, dtype=np.int64)
        self._cols: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._cols)

    def update(self, anomaly_set: np.ndarray, frame_values: np.ndarray) -> None:
        ids = np.asarray(anomaly_set, dtype=np.int64)
        if ids.size == 0:
            self.pixel_ids = ids
            self._cols = []
            return
        if not np.array_equal(ids, self.pixel_ids):
            self.pixel_ids = ids.copy()
            self._cols = []
        self._cols.append(np.asarray(frame_values, dtype=np.float64)[ids])
        if len(self._cols) > self.capacity:
            self._cols.pop(0)

    def matrix(self) -> np.ndarray:
        return np.column_stack(self._cols)


@dataclass(frozen=True)
class PredictionBundle:
    horizon_steps: int
    x_osl_pred: np.ndarray
    x_anomaly_pred: np.ndarray   # values for anomaly_set pixels
    anomaly_set: np.ndarray
    x_merged: np.ndarray
    rmse_vs_truth: float | None = None


def predict_state(history: CoefficientHistory, basis: PodBasis, w: int,
                  l: int, r_dmd: int | None = None) -> np.ndarray:
    """Fit DMD on the last w+1+l coefficient columns, step the newest
    coefficients l steps forward, and lift through the POD modes."""
    need = w + 1 + l
    if len(history) < need:
        raise InsufficientHistory(
            f"state prediction needs {need} columns, have {len(history)}")
    A = history.last(need)
    model = fit_dmd(A, l=l, r_dmd=r_dmd or history.r)
    a_pred = dmd_predict(model, A[:, -1])
    return basis.modes @ a_pred


def predict_anomaly(history: AnomalyHistory, w: int, l: int) -> np.ndarray:
    """DMD forecast of the anomaly-pixel series, l steps ahead."""
    need = w + 1 + l
    if len(history) < need:
        raise InsufficientHistory(
            f"anomaly prediction needs {need} columns of stable membership, "
            f"have {len(history)}")
    M = history.matrix()[:, -need:]
    r_dmd = min(M.shape[0], w + 1)
    model = fit_dmd(M, l=l, r_dmd=r_dmd)
    return dmd_predict(model, M[:, -1])


def merge_predictions(x_osl_pred: np.ndarray, x_anomaly_pred: np.ndarray,
                      anomaly_set) -> np.ndarray:
    """Two-case overlay: anomaly pixels take the anomaly forecast, all
    others the OSL forecast. Values are copied bit-exactly, no blending."""
    ids = np.asarray(anomaly_set, dtype=np.int64)
    n = x_osl_pred.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexOutOfRange("anomaly index outside the frame")
    if ids.size != np.asarray(x_anomaly_pred).size:
        raise DimensionMismatch("one anomaly value per anomaly index")
    merged = x_osl_pred.copy()
    merged[ids] = x_anomaly_pred
    return merged


SENSING_RANGE = 170.0  # degC span of the -20..150 measurement range


def evaluate_rmse(predictions, truths, horizons_s=None):
    """Per-horizon RMSE plus worst-pixel absolute and relative error
    (relative to the sensing range). Returns a list of row dicts."""
    rows = []
    for i, (pred, truth) in enumerate(zip(predictions, truths)):
        pred = np.asarray(pred, dtype=np.float64)
        truth = np.asarray(truth, dtype=np.float64)
        if pred.shape != truth.shape:
            raise DimensionMismatch("prediction/truth shape mismatch")
        e = pred - truth
        worst = float(np.max(np.abs(e)))
        rows.append({
            "horizon_s": float(horizons_s[i]) if horizons_s is not None else float(i),
            "rmse": float(np.sqrt(np.mean(e * e))),
            "worst_pixel_abs": worst,
            "worst_pixel_rel": worst / SENSING_RANGE,
        })
    return rows
