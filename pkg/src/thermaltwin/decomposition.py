"""Truncated SVD / POD basis extraction and windowed l-step DMD."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .datamodel import SnapshotMatrix
from .errors import (
    DimensionMismatch,
    NonFiniteInput,
    RankTooLarge,
    SvdFailure,
    WindowTooShort,
)

# Relative floor below which singular values are treated as zero.
SIGMA_FLOOR = 1e-12


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, SnapshotMatrix):
        return X.data
    return np.asarray(X, dtype=np.float64)


@dataclass(frozen=True)
class PodBasis:
    """Rank-r POD basis: modes are the leading left singular vectors."""

    modes: np.ndarray          # n x r, orthonormal columns
    singular_values: np.ndarray  # r, descending
    right_vectors: np.ndarray  # k x r
    total_energy: float        # sum of squared singular values of full X
    r: int

    @property
    def n(self) -> int:
        return self.modes.shape[0]


def _svd(X: np.ndarray):
    try:
        return np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc


def _gram_svd(X: np.ndarray, r: int):
    """Leading-r SVD via the k x k Gram matrix; exact for well-separated
    leading singular values and much cheaper when n >> k."""
    G = X.T @ X
    evals, evecs = np.linalg.eigh(G)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    s = np.sqrt(evals[:r])
    V = evecs[:, :r]
    safe = np.where(s > 0, s, 1.0)
    U = (X @ V) / safe
    return U, s, V


def truncated_svd(X, r: int, center: bool = False) -> PodBasis:
    """Rank-r POD of a snapshot matrix.

    The raw matrix is decomposed (no mean-centering) unless center=True.
    """
    A = _as_matrix(X)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("snapshot matrix contains NaN/Inf")
    n, k = A.shape
    if r < 1 or r > min(n, k):
        raise RankTooLarge(f"rank {r} outside [1, {min(n, k)}]")
    if center:
        A = A - A.mean(axis=1, keepdims=True)
    total_energy = float(np.sum(A * A))

    # Gram route avoids the O(n k^2) LAPACK SVD when the matrix is tall.
    if n >= 8 * k and k >= 64:
        U, s, V = _gram_svd(A, r)
        Ur, sr, Vr = U[:, :r], s[:r], V[:, :r]
    else:
        U, s, Vt = _svd(A)
        Ur, sr, Vr = U[:, :r], s[:r], Vt[:r, :].T

    return PodBasis(
        modes=np.ascontiguousarray(Ur),
        singular_values=np.ascontiguousarray(sr),
        right_vectors=np.ascontiguousarray(Vr),
        total_energy=total_energy,
        r=r,
    )


def pod_energy_ratio(basis: PodBasis, r: int) -> float:
    """Fraction of total variance captured by the first r modes."""
    if r < 1 or r > basis.r:
        raise RankTooLarge(f"rank {r} outside [1, {basis.r}]")
    if basis.total_energy == 0:
        return 1.0
    return float(np.sum(basis.singular_values[:r] ** 2) / basis.total_energy)


@dataclass(frozen=True)
class DmdModel:
    """l-step transition operator Phi = P Lambda P+ in eigenpair form."""

    r_dmd: int
    w: int
    l: int
    eig_values: np.ndarray       # complex, r_dmd
    exact_modes: np.ndarray      # P, complex, ambient_dim x r_dmd
    pseudo_inverse_P: np.ndarray  # complex, r_dmd x ambient_dim
    ambient_dim: int


def fit_dmd(window, l: int, r_dmd: int) -> DmdModel:
    """Fit DMD on a window of w+1+l uniformly spaced columns.

    X = columns [0..w], X' = columns [l..w+l]; the fitted operator maps
    l steps forward per application.
    """
    W = _as_matrix(window)
    if not np.all(np.isfinite(W)):
        raise NonFiniteInput("DMD window contains NaN/Inf")
    rows, cols = W.shape
    if l < 1:
        raise WindowTooShort("shift l must be >= 1")
    w = cols - 1 - l
    if w < 1:
        raise WindowTooShort(f"window of {cols} columns too short for l={l}")
    if r_dmd < 1 or r_dmd > min(rows, w + 1):
        raise RankTooLarge(f"r_dmd {r_dmd} outside [1, {min(rows, w + 1)}]")

    X = W[:, : w + 1]
    Xp = W[:, l : w + 1 + l]

    U, s, Vt = _svd(X)
    # Auto-truncate near-zero singular values instead of inverting them.
    r_eff = min(r_dmd, int(np.sum(s > SIGMA_FLOOR * s[0])))
    if r_eff < 1:
        raise SvdFailure("window is numerically zero")
    if r_eff < r_dmd:
        warnings.warn(
            f"DMD rank auto-reduced from {r_dmd} to {r_eff} "
            "(near-singular window)", RuntimeWarning, stacklevel=2)
    Ur = U[:, :r_eff]
    sr = s[:r_eff]
    Vr = Vt[:r_eff, :].T

    B = Xp @ (Vr / sr)          # X' Vr Sigma^-1
    phi_tilde = Ur.T @ B
    lam, vecs = np.linalg.eig(phi_tilde)
    P = B @ vecs
    P_pinv = np.linalg.pinv(P)

    return DmdModel(
        r_dmd=r_eff, w=w, l=l,
        eig_values=lam,
        exact_modes=P,
        pseudo_inverse_P=P_pinv,
        ambient_dim=rows,
    )


def dmd_predict(model: DmdModel, X_recent, with_residual: bool = False):
    """Apply the fitted operator: Re(P Lambda P+ X). Optionally also return
    the max imaginary residual magnitude as a diagnostic."""
    X = np.asarray(X_recent, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.shape[0] != model.ambient_dim:
        raise DimensionMismatch(
            f"input rows {X.shape[0]} != ambient dim {model.ambient_dim}")
    Z = model.exact_modes @ (model.eig_values[:, None]
                             * (model.pseudo_inverse_P @ X))
    out = np.real(Z)
    if squeeze:
        out = out[:, 0]
    if with_residual:
        return out, float(np.max(np.abs(np.imag(Z)), initial=0.0))
    return out


def save_dmd(path, model: DmdModel) -> None:
    """Archive a DMD model (complex arrays as real+imag planes + JSON meta)."""
    meta = json.dumps({"r_dmd": model.r_dmd, "w": model.w, "l": model.l,
                       "ambient_dim": model.ambient_dim})
    np.savez(path,
             meta=np.frombuffer(meta.encode(), dtype=np.uint8),
             eig_real=np.real(model.eig_values),
             eig_imag=np.imag(model.eig_values),
             p_real=np.real(model.exact_modes),
             p_imag=np.imag(model.exact_modes),
             pinv_real=np.real(model.pseudo_inverse_P),
             pinv_imag=np.imag(model.pseudo_inverse_P))


def load_dmd(path) -> DmdModel:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        return DmdModel(
            r_dmd=meta["r_dmd"], w=meta["w"], l=meta["l"],
            eig_values=z["eig_real"] + 1j * z["eig_imag"],
            exact_modes=z["p_real"] + 1j * z["p_imag"],
            pseudo_inverse_P=z["pinv_real"] + 1j * z["pinv_imag"],
            ambient_dim=meta["ambient_dim"],
        )
