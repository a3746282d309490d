"""Streaming anomaly detection on the OSL reconstruction error.

Two triggers: the mean of the m largest per-pixel errors against gamma1,
and the absolute gradient of its weighted moving average against gamma2.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MTooLarge


@dataclass(frozen=True)
class DetectorConfig:
    m: int = 100
    gamma1: float = 1.0      # level threshold, degC
    gamma2: float = 0.01     # gradient threshold, degC/s
    N: int = 100             # WMA window
    dt: float = 3.5          # sample interval, s
    warmup: int = 10         # frames before the gradient rule may fire

    def __post_init__(self):
        if self.m < 1 or self.N < 2 or self.gamma1 <= 0 or self.gamma2 <= 0 \
                or self.dt <= 0 or self.warmup < 0:
            raise ValueError("invalid detector configuration")


@dataclass(frozen=True)
class AnomalyReport:
    t: float
    e_abs: np.ndarray
    e_max_m: float
    wma: float
    grad_wma: float
    triggered_level: bool
    triggered_gradient: bool
    anomaly_set: np.ndarray  # pixel indices, ascending

    @property
    def triggered(self) -> bool:
        return self.triggered_level or self.triggered_gradient

    def to_json(self) -> str:
        return json.dumps({
            "t": self.t,
            "e_max_m": self.e_max_m,
            "wma": self.wma,
            "grad_wma": self.grad_wma,
            "triggered_level": self.triggered_level,
            "triggered_gradient": self.triggered_gradient,
            "anomaly_pixels": self.anomaly_set.tolist(),
        })


def top_m_error(x, x_hat, m: int, e_abs_out=None, scratch=None):
    """Per-pixel absolute error e = |x_hat - x| and the mean of its m
    largest entries. e_abs_out/scratch allow allocation-free reuse on the
    per-frame hot path."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionMismatch("frame and reconstruction differ in shape")
    n = x.size
    if m > n:
        raise MTooLarge(f"m={m} exceeds pixel count {n}")
    if e_abs_out is None:
        e_abs = np.abs(x_hat - x)
    else:
        np.subtract(x_hat, x, out=e_abs_out)
        np.abs(e_abs_out, out=e_abs_out)
        e_abs = e_abs_out
    if m == n:
        e_max_m = float(e_abs.mean())
    else:
        if scratch is None:
            scratch = e_abs.copy()
        else:
            np.copyto(scratch, e_abs)
        scratch.partition(n - m)
        e_max_m = float(scratch[n - m:].mean())
    return e_abs, e_max_m


def wma_update(history, N: int) -> float:
    """Weighted moving average with weights 1..N, the newest value
    weighted heaviest. A shorter warmup history uses weights 1..len."""
    vals = np.asarray(list(history)[-N:], dtype=np.float64)
    if vals.size == 0:
        raise ValueError("history must contain at least one value")
    w = np.arange(1, vals.size + 1, dtype=np.float64)
    return float(np.dot(w, vals) / w.sum())


@dataclass
class DetectorState:
    """Single-writer per-stream state; one instance per frame stream."""

    cfg: DetectorConfig
    history: deque = field(default_factory=deque)
    prev_wma: float | None = None
    steps: int = 0

    def __post_init__(self):
        self.history = deque(self.history, maxlen=self.cfg.N)


def detect(x, x_hat, state: DetectorState, t: float | None = None,
           e_abs_out=None, scratch=None) -> AnomalyReport:
    """One detection step: update the error statistic, its WMA, and the
    WMA gradient; emit the anomaly pixel set when a trigger fires."""
    cfg = state.cfg
    e_abs, e_max_m = top_m_error(x, x_hat, cfg.m, e_abs_out=e_abs_out,
                                 scratch=scratch)

    state.history.append(e_max_m)
    wma = wma_update(state.history, cfg.N)
    if state.prev_wma is None:
        grad = 0.0        # warmup: no gradient before 2 WMA updates
    else:
        grad = abs(wma - state.prev_wma) / cfg.dt
    state.prev_wma = wma
    state.steps += 1

    triggered_level = e_max_m > cfg.gamma1
    # The moving average is supported by very few samples early on, so
    # its gradient reflects estimator noise rather than the plate; the
    # gradient rule stays inert for the first `warmup` frames.
    triggered_gradient = grad > cfg.gamma2 and state.steps > cfg.warmup
    if triggered_level or triggered_gradient:
        anomaly_set = np.flatnonzero(e_abs > cfg.gamma1)
    else:
        anomaly_set = np.empty(0, dtype=np.int64)

    return AnomalyReport(
        t=float(t) if t is not None else state.steps * cfg.dt,
        e_abs=e_abs,
        e_max_m=e_max_m,
        wma=wma,
        grad_wma=grad,
        triggered_level=triggered_level,
        triggered_gradient=triggered_gradient,
        anomaly_set=anomaly_set.astype(np.int64),
    )
