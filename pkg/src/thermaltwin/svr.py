"""Epsilon-insensitive SVR with an SMO-style dual solver, plus the
per-pixel imputation models and guard bands built on the sampled pixels."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateKernel, DimensionMismatch, NoData, SensorFault


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"      # "gaussian" | "linear"
    gamma: float | None = None  # None => 1 / (d * var(features))

    def resolve_gamma(self, X: np.ndarray) -> float:
        if self.kind == "linear":
            return 0.0
        if self.gamma is not None:
            return self.gamma
        var = float(X.var())
        d = X.shape[1]
        return 1.0 / (d * var) if var > 0 else 1.0


def kernel_matrix(spec: KernelSpec, gamma: float, A: np.ndarray,
                  B: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "gaussian":
        sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
              - 2.0 * (A @ B.T))
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {spec.kind!r}")


@dataclass(frozen=True)
class SvrProblem:
    x_train: np.ndarray
    y_train: np.ndarray
    c: float = 1.0
    epsilon: float = 0.1
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.x_train, dtype=np.float64))
        y = np.asarray(self.y_train, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch("x_train rows must match y_train length")
        if y.size < 1:
            raise NoData("empty training set")
        if self.c <= 0 or self.epsilon < 0:
            raise ValueError("require c > 0 and epsilon >= 0")
        object.__setattr__(self, "x_train", X)
        object.__setattr__(self, "y_train", y)


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha - alpha*, in [-c, c]
    bias: float
    kernel: KernelSpec
    gamma: float


def svr_fit(problem: SvrProblem, tol: float = 1e-3,
            max_iter: int = 200_000) -> SvrModel:
    """Solve the epsilon-SVR dual by SMO with maximal-violating-pair
    selection; stops when the KKT violation drops below tol."""
    X, y = problem.x_train, problem.y_train
    q = y.size
    c, eps = problem.c, problem.epsilon
    gamma = problem.kernel.resolve_gamma(X)

    K = kernel_matrix(problem.kernel, gamma, X, X)
    if not np.all(np.isfinite(K)):
        raise DegenerateKernel("Gram matrix contains NaN/Inf")

    # 2q-variable box-constrained dual: z = [alpha; alpha*], u = [+1; -1].
    u = np.concatenate([np.ones(q), -np.ones(q)])
    p = np.concatenate([eps - y, eps + y])
    z = np.zeros(2 * q)
    h = np.zeros(q)                      # h = K (alpha - alpha*)

    idx = np.concatenate([np.arange(q), np.arange(q)])
    diag = np.diag(K)
    for _ in range(max_iter):
        g = u * h[idx] + p
        neg_ug = -u * g
        up = np.where(u > 0, z < c, z > 0)
        low = np.where(u > 0, z > 0, z < c)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(neg_ug[up])])
        j_min = int(np.flatnonzero(low)[np.argmin(neg_ug[low])])
        if neg_ug[i] - neg_ug[j_min] <= tol:
            break
        # Second-order choice of j: maximize the objective decrease
        # b^2 / a among the violating candidates (first-order pairing can
        # zigzag without converging on low-rank Gram matrices).
        cand = np.flatnonzero(low & (neg_ug < neg_ug[i]))
        b_cand = neg_ug[i] - neg_ug[cand]
        # Curvature along the paired direction; the u sign factors cancel.
        a_cand = diag[idx[i]] + diag[idx[cand]] - 2.0 * K[idx[i], idx[cand]]
        a_cand = np.maximum(a_cand, 1e-12)
        j = int(cand[np.argmax(b_cand * b_cand / a_cand)])

        ii, jj = idx[i], idx[j]
        sgn = u[i] * u[j]
        a = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
        step = (neg_ug[i] - neg_ug[j]) / max(a, 1e-12) * u[i]
        # Box clipping along the feasible direction (dz_j = -sgn * dz_i).
        lo_i, hi_i = -z[i], c - z[i]
        if sgn > 0:
            lo_j, hi_j = z[j] - c, z[j]
        else:
            lo_j, hi_j = -z[j], c - z[j]
        step = np.clip(step, max(lo_i, lo_j), min(hi_i, hi_j))
        if step == 0.0:
            break
        z[i] += step
        z[j] -= sgn * step
        h += K[:, ii] * (u[i] * step) - K[:, jj] * (u[i] * step)
    else:
        warnings.warn("SVR solver hit the iteration cap before reaching the "
                      "KKT tolerance", RuntimeWarning, stacklevel=2)

    beta = z[:q] - z[q:]
    g = u * h[idx] + p
    neg_ug = -u * g
    up = np.where(u > 0, z < c, z > 0)
    low = np.where(u > 0, z > 0, z < c)
    hi = neg_ug[up].max() if up.any() else 0.0
    lo = neg_ug[low].min() if low.any() else 0.0
    bias = 0.5 * (hi + lo)

    keep = np.abs(beta) > 1e-12
    return SvrModel(support_vectors=X[keep].copy(), dual_coefs=beta[keep],
                    bias=float(bias), kernel=problem.kernel, gamma=gamma)


def svr_predict(model: SvrModel, x) -> float | np.ndarray:
    """f(x) = sum_i beta_i K(x, sv_i) + bias."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    single = x.shape[0] == 1
    if model.support_vectors.size == 0:
        out = np.full(x.shape[0], model.bias)
        return float(out[0]) if single else out
    if x.shape[1] != model.support_vectors.shape[1]:
        raise DimensionMismatch(
            f"feature dim {x.shape[1]} != {model.support_vectors.shape[1]}")
    Kx = kernel_matrix(model.kernel, model.gamma, x, model.support_vectors)
    out = Kx @ model.dual_coefs + model.bias
    return float(out[0]) if single else out


@dataclass(frozen=True)
class PixelGuard:
    """Plausibility band from the training distribution of one pixel."""

    train_mean: float
    train_std: float
    k_sigma: float = 5.0

    def is_erroneous(self, value: float) -> bool:
        return abs(value - self.train_mean) > self.k_sigma * self.train_std


@dataclass(frozen=True)
class PixelImputer:
    """SVR model for one sampled pixel, fed by the other sampled pixels
    (standardized features)."""

    model: SvrModel
    feat_mean: np.ndarray
    feat_std: np.ndarray

    def predict(self, other_values: np.ndarray) -> float:
        feats = (np.asarray(other_values, dtype=np.float64)
                 - self.feat_mean) / self.feat_std
        return float(svr_predict(self.model, feats))


def build_imputers(training, plan, c: float = 1.0, epsilon: float = 0.1,
                   kernel: KernelSpec | None = None, k_sigma: float = 5.0,
                   max_train_samples: int = 1500):
    """One (imputer, guard) pair per sampled pixel.

    Pixel i is regressed on the other s-1 sampled pixel values. Training
    columns are subsampled uniformly beyond max_train_samples to keep the
    dual solve tractable.
    """
    from .decomposition import _as_matrix

    data = _as_matrix(training)
    if plan.s < 2:
        raise NoData("imputation needs at least 2 sampled pixels")
    kernel = kernel or KernelSpec()

    Y = data[plan.indices, :]            # s x k
    k = Y.shape[1]
    if k > max_train_samples:
        cols = np.linspace(0, k - 1, max_train_samples).astype(int)
        Y = Y[:, cols]

    imputers, guards = [], []
    for i in range(plan.s):
        others = np.delete(Y, i, axis=0).T      # k x (s-1)
        target = Y[i, :]
        mean = others.mean(axis=0)
        std = others.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        feats = (others - mean) / std
        model = svr_fit(SvrProblem(feats, target, c=c, epsilon=epsilon,
                                   kernel=kernel))
        imputers.append(PixelImputer(model=model, feat_mean=mean,
                                     feat_std=std))
        guards.append(PixelGuard(train_mean=float(target.mean()),
                                 train_std=float(target.std()),
                                 k_sigma=k_sigma))
    return imputers, guards


def impute_if_erroneous(y, imputers, guards):
    """Replace out-of-band pixels by their imputer predictions.

    Raises SensorFault when fewer than two pixels remain trustworthy.
    Returns (y_clean, flags) with flags listing substituted positions.
    """
    y = np.asarray(y, dtype=np.float64)
    s = y.size
    if len(imputers) != s or len(guards) != s:
        raise DimensionMismatch("one imputer and guard per sampled pixel")
    flags = [i for i in range(s) if guards[i].is_erroneous(float(y[i]))]
    if len(flags) >= s - 1 and flags:
        raise SensorFault(f"{len(flags)} of {s} sampled pixels out of band")
    if not flags:
        return y.copy(), []
    # Flagged features of other pixels are replaced by their training mean
    # so a bad pixel never feeds another pixel's imputer.
    safe = y.copy()
    for i in flags:
        safe[i] = guards[i].train_mean
    y_clean = y.copy()
    for i in flags:
        y_clean[i] = imputers[i].predict(np.delete(safe, i))
    return y_clean, flags
