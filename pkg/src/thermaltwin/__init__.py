"""Predictive digital twin for a heated plate observed through simulated
thermal imaging: reduced-order modeling, sparse-pixel reconstruction,
anomaly detection, forecasting, and a live telemetry service."""

from .anomaly import AnomalyReport, DetectorConfig, DetectorState, detect, top_m_error, wma_update
from .config import TwinConfig
from .datamodel import (
    Dataset,
    Frame,
    RunMeta,
    SnapshotMatrix,
    load_dataset,
    regularize_time,
    save_dataset,
    stack,
    unstack,
)
from .decomposition import DmdModel, PodBasis, dmd_predict, fit_dmd, pod_energy_ratio, truncated_svd
from .pipeline import (
    FrameVerdict,
    RuntimeState,
    TwinModel,
    load_model,
    process_frame,
    request_prediction,
    save_model,
    train,
)
from .prediction import (
    AnomalyHistory,
    CoefficientHistory,
    PredictionBundle,
    evaluate_rmse,
    merge_predictions,
    predict_anomaly,
    predict_state,
)
from .rpca import RpcaParams, RpcaResult, rpca, rpca_bench
from .sampling import MeasurementPlan, estimate_coefficients, reconstruct, select_locations
from .simulator import PlateConfig, SimState, generate_training_sweep, inject_anomaly, render_frame, step
from .svr import KernelSpec, PixelGuard, SvrModel, SvrProblem, build_imputers, impute_if_erroneous, svr_fit, svr_predict

__version__ = "0.1.0"
