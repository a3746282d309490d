"""The live twin loop: per-frame sample -> guard/impute -> reconstruct ->
detect -> (on demand) predict. Owns all runtime state and buffers."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .anomaly import AnomalyReport, DetectorConfig, DetectorState, detect
from .config import PredictionConfig, TrainingConfig, TwinConfig
from .datamodel import Dataset, Frame, RunMeta, SnapshotMatrix, load_dataset, save_dataset
from .decomposition import PodBasis, truncated_svd
from .errors import DiskFull, InsufficientHistory, NoData, SensorFault
from .prediction import (
    AnomalyHistory,
    CoefficientHistory,
    PredictionBundle,
    merge_predictions,
    predict_anomaly,
    predict_state,
)
from .rpca import rpca
from .sampling import MeasurementPlan, estimate_coefficients, reconstruct, select_locations
from .svr import KernelSpec, PixelGuard, PixelImputer, SvrModel, build_imputers, impute_if_erroneous


@dataclass(frozen=True)
class TwinModel:
    basis: PodBasis
    plan: MeasurementPlan
    imputers: list
    guards: list
    detector_cfg: DetectorConfig
    prediction_cfg: PredictionConfig
    width: int
    height: int
    fit_timestamp: float = 0.0

    @property
    def n(self) -> int:
        return self.basis.n


def train(datasets, cfg: TwinConfig | None = None) -> TwinModel:
    """Concatenate training runs, extract the POD basis, place sensors,
    and fit the per-pixel imputation models."""
    cfg = cfg or TwinConfig()
    tcfg = cfg.training
    datasets = list(datasets)
    if not datasets:
        raise NoData("no training datasets")
    width, height = datasets[0].width, datasets[0].height

    blocks = []
    for ds in datasets:
        data = ds.snapshots.data
        if tcfg.rpca_clean:
            data = rpca(data, cfg.rpca).L
        blocks.append(data)
    X = np.concatenate(blocks, axis=1)

    basis = truncated_svd(X, tcfg.rank)
    plan = select_locations(basis, tcfg.sensors)
    imputers, guards = build_imputers(X, plan, c=tcfg.svr_c,
                                      epsilon=tcfg.svr_epsilon)
    return TwinModel(basis=basis, plan=plan, imputers=imputers, guards=guards,
                     detector_cfg=cfg.detector, prediction_cfg=cfg.prediction,
                     width=width, height=height, fit_timestamp=time.time())


@dataclass
class FrameVerdict:
    t: float
    y_raw: np.ndarray
    y_clean: np.ndarray
    imputed: list
    x_hat: np.ndarray
    report: AnomalyReport
    latency_ms: float
    fault: str | None = None

    def to_json(self) -> str:
        """Deterministic serialization: wall latency is runtime telemetry
        and is intentionally left out so replays match byte-for-byte."""
        return json.dumps({
            "t": self.t,
            "y_raw": [float(v) for v in self.y_raw],
            "y_clean": [float(v) for v in self.y_clean],
            "imputed": list(self.imputed),
            "fault": self.fault,
            "e_max_m": self.report.e_max_m,
            "wma": self.report.wma,
            "grad_wma": self.report.grad_wma,
            "triggered_level": self.report.triggered_level,
            "triggered_gradient": self.report.triggered_gradient,
            "anomaly_pixels": self.report.anomaly_set.tolist(),
        })


class RuntimeState:
    """Single-writer per-stream runtime state with preallocated hot-path
    buffers."""

    def __init__(self, model: TwinModel):
        pcfg = model.prediction_cfg
        dt = model.detector_cfg.dt
        self.coeff_history = CoefficientHistory(
            r=model.basis.r, capacity=pcfg.history_capacity, dt=dt)
        self.anomaly_history = AnomalyHistory(capacity=pcfg.history_capacity)
        self.detector = DetectorState(cfg=model.detector_cfg)
        n, r, s = model.n, model.basis.r, model.plan.s
        self._frame64 = np.empty(n)
        self._x_hat = np.empty(n)
        self._e_abs = np.empty(n)
        self._scratch = np.empty(n)
        self._coeffs = np.zeros(r)
        self._y = np.empty(s)
        self.have_coeffs = False
        self.frames_seen = 0


def process_frame(model: TwinModel, frame: Frame,
                  state: RuntimeState) -> FrameVerdict:
    """Process one camera frame through the full monitoring loop."""
    t0 = time.perf_counter()
    np.copyto(state._frame64, frame.values, casting="unsafe")
    np.take(state._frame64, model.plan.indices, out=state._y)
    y_raw = state._y.copy()

    fault = None
    imputed: list = []
    try:
        y_clean, imputed = impute_if_erroneous(state._y, model.imputers,
                                               model.guards)
    except SensorFault as exc:
        fault = str(exc)
        y_clean = y_raw

    if fault is None or not state.have_coeffs:
        estimate_coefficients(model.plan, y_clean, out=state._coeffs)
        state.have_coeffs = True
    # On a sensor fault the previous coefficients carry over unchanged.

    np.dot(model.basis.modes, state._coeffs, out=state._x_hat)
    report = detect(state._frame64, state._x_hat, state.detector,
                    t=frame.t, e_abs_out=state._e_abs,
                    scratch=state._scratch)

    state.coeff_history.append(state._coeffs, frame.t)
    state.anomaly_history.update(report.anomaly_set, state._frame64)
    state.frames_seen += 1

    return FrameVerdict(
        t=frame.t, y_raw=y_raw, y_clean=np.array(y_clean), imputed=imputed,
        x_hat=state._x_hat, report=report,
        latency_ms=(time.perf_counter() - t0) * 1e3, fault=fault)


def request_prediction(model: TwinModel, state: RuntimeState,
                       w: int | None = None, l: int | None = None) -> PredictionBundle:
    """Forecast l steps ahead: DMD on the coefficient history lifted
    through the POD basis, overlaid with the anomaly-subset forecast."""
    pcfg = model.prediction_cfg
    w = w or pcfg.state_w
    l = l or pcfg.state_l
    x_osl = predict_state(state.coeff_history, model.basis, w=w, l=l,
                          r_dmd=pcfg.r_dmd or model.basis.r)
    S = state.anomaly_history.pixel_ids
    if S.size:
        try:
            x_anom = predict_anomaly(state.anomaly_history,
                                     w=pcfg.anomaly_w, l=l)
        except InsufficientHistory:
            x_anom = x_osl[S]   # fall back to the global forecast
    else:
        x_anom = np.empty(0)
    merged = merge_predictions(x_osl, x_anom, S)
    return PredictionBundle(horizon_steps=l, x_osl_pred=x_osl,
                            x_anomaly_pred=x_anom, anomaly_set=S.copy(),
                            x_merged=merged)


# --- model archive -----------------------------------------------------

def save_model(path, model: TwinModel) -> None:
    """Single-file archive: arrays plus a JSON metadata block."""
    meta = {
        "r": model.basis.r,
        "s": model.plan.s,
        "width": model.width,
        "height": model.height,
        "total_energy": model.basis.total_energy,
        "fit_timestamp": model.fit_timestamp,
        "detector": vars(model.detector_cfg).copy(),
        "prediction": vars(model.prediction_cfg).copy(),
        "imputers": [
            {"bias": imp.model.bias, "gamma": imp.model.gamma,
             "kernel": imp.model.kernel.kind}
            for imp in model.imputers
        ],
        "guards": [
            {"mean": g.train_mean, "std": g.train_std, "k": g.k_sigma}
            for g in model.guards
        ],
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
        "modes": model.basis.modes,
        "singular_values": model.basis.singular_values,
        "right_vectors": model.basis.right_vectors,
        "indices": model.plan.indices.astype(np.uint32),
        "theta": model.plan.theta,
        "theta_pinv": model.plan.theta_pinv,
    }
    for i, imp in enumerate(model.imputers):
        arrays[f"imp{i}_sv"] = imp.model.support_vectors
        arrays[f"imp{i}_coef"] = imp.model.dual_coefs
        arrays[f"imp{i}_mean"] = imp.feat_mean
        arrays[f"imp{i}_std"] = imp.feat_std
    # Write through a file handle so the exact path is honored (np.savez
    # appends .npz to bare string paths).
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> TwinModel:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        basis = PodBasis(modes=z["modes"],
                         singular_values=z["singular_values"],
                         right_vectors=z["right_vectors"],
                         total_energy=meta["total_energy"], r=meta["r"])
        plan = MeasurementPlan(indices=z["indices"].astype(np.int64),
                               s=meta["s"], theta=z["theta"],
                               theta_pinv=z["theta_pinv"])
        imputers, guards = [], []
        for i, (im, gm) in enumerate(zip(meta["imputers"], meta["guards"])):
            kernel = KernelSpec(kind=im["kernel"], gamma=im["gamma"])
            svm = SvrModel(support_vectors=z[f"imp{i}_sv"],
                           dual_coefs=z[f"imp{i}_coef"], bias=im["bias"],
                           kernel=kernel, gamma=im["gamma"])
            imputers.append(PixelImputer(model=svm,
                                         feat_mean=z[f"imp{i}_mean"],
                                         feat_std=z[f"imp{i}_std"]))
            guards.append(PixelGuard(train_mean=gm["mean"],
                                     train_std=gm["std"], k_sigma=gm["k"]))
        return TwinModel(
            basis=basis, plan=plan, imputers=imputers, guards=guards,
            detector_cfg=DetectorConfig(**meta["detector"]),
            prediction_cfg=PredictionConfig(**meta["prediction"]),
            width=meta["width"], height=meta["height"],
            fit_timestamp=meta["fit_timestamp"])


# --- run persistence ---------------------------------------------------

def persist_run(run_dir, frames, verdicts, config: TwinConfig | None = None,
                width: int | None = None, height: int | None = None) -> None:
    """Write a replayable run: THERM1 frames, JSON-lines verdicts, and a
    config snapshot."""
    frames = list(frames)
    if not frames:
        raise NoData("nothing to persist")
    w = width or frames[0].width
    h = height or frames[0].height
    try:
        os.makedirs(run_dir, exist_ok=True)
        from .datamodel import stack
        ds = Dataset(snapshots=stack(frames), width=w, height=h,
                     meta=RunMeta(0.0, "heating", "run"))
        save_dataset(os.path.join(run_dir, "frames.therm"), ds)
        with open(os.path.join(run_dir, "verdicts.jsonl"), "w") as fh:
            for v in verdicts:
                fh.write(v.to_json() + "\n")
        (config or TwinConfig()).save(os.path.join(run_dir, "config.json"))
    except OSError as exc:
        raise DiskFull(f"could not persist run: {exc}") from exc


def replay_run(model: TwinModel, run_dir):
    """Re-run a persisted run through a fresh pipeline; returns the list
    of verdicts (deterministic, so they match the persisted ones)."""
    ds = load_dataset(os.path.join(run_dir, "frames.therm"))
    from .datamodel import unstack
    frames = unstack(ds.snapshots, ds.width, ds.height)
    state = RuntimeState(model)
    return [process_frame(model, f, state) for f in frames]
