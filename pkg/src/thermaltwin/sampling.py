"""Optimal sampling locations via pivoted QR on the POD modes, plus
coefficient estimation and full-frame reconstruction from s pixels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .decomposition import PodBasis, SIGMA_FLOOR
from .errors import DimensionMismatch, TooFewSamples, TooManySamples


@dataclass(frozen=True)
class MeasurementPlan:
    """Sparse measurement matrix C in index form, with Theta = C Psi_r and
    its precomputed pseudo-inverse."""

    indices: np.ndarray      # s distinct pixel indices, ascending
    s: int
    theta: np.ndarray        # s x r
    theta_pinv: np.ndarray   # r x s


def _pinv(theta: np.ndarray) -> np.ndarray:
    U, s, Vt = np.linalg.svd(theta, full_matrices=False)
    cutoff = SIGMA_FLOOR * (s[0] if s.size else 1.0)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


def select_locations(basis: PodBasis, s: int) -> MeasurementPlan:
    """Pick s pixel indices by QR with column pivoting on Psi_r^T.

    Requires s >= r. For s > r the selection continues greedily, adding
    the pixel that maximizes the smallest singular value of the stacked
    Theta (oversampling).
    """
    n, r = basis.modes.shape
    if s < r:
        raise TooFewSamples(f"s={s} < r={r}")
    if s > n:
        raise TooManySamples(f"s={s} > n={n}")

    _, _, piv = scipy.linalg.qr(basis.modes.T, pivoting=True, mode="economic")
    chosen = list(piv[:r])

    if s > r:
        remaining = np.setdiff1d(np.arange(n), chosen)
        for _ in range(s - r):
            best_idx, best_score = None, -np.inf
            theta_now = basis.modes[chosen, :]
            for cand in remaining:
                trial = np.vstack([theta_now, basis.modes[cand, :]])
                score = np.linalg.svd(trial, compute_uv=False)[-1]
                if score > best_score:
                    best_idx, best_score = cand, score
            chosen.append(int(best_idx))
            remaining = remaining[remaining != best_idx]

    indices = np.sort(np.asarray(chosen, dtype=np.int64))
    theta = basis.modes[indices, :].copy()
    return MeasurementPlan(indices=indices, s=s, theta=theta,
                           theta_pinv=_pinv(theta))


def estimate_coefficients(plan: MeasurementPlan, y, out=None) -> np.ndarray:
    """Least-squares coefficient estimate a = Theta^+ y."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (plan.s,):
        raise DimensionMismatch(f"expected {plan.s} samples, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DimensionMismatch("sampled values must be finite")
    if out is not None:
        return np.dot(plan.theta_pinv, y, out=out)
    return plan.theta_pinv @ y


def reconstruct(basis: PodBasis, plan: MeasurementPlan, y,
                out=None, coeff_out=None) -> np.ndarray:
    """Full-frame estimate x_hat = Psi_r (C Psi_r)^+ y.

    out/coeff_out allow allocation-free reuse on the per-frame hot path.
    """
    a = estimate_coefficients(plan, y, out=coeff_out)
    if out is not None:
        return np.dot(basis.modes, a, out=out)
    return basis.modes @ a
