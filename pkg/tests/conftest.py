import dataclasses

import numpy as np
import pytest

from thermaltwin import TwinConfig
from thermaltwin.config import ServiceConfig
from thermaltwin.pipeline import RuntimeState, persist_run, process_frame, train
from thermaltwin.simulator import (
    PlateConfig,
    SimState,
    disc_mask,
    generate_training_sweep,
    inject_anomaly,
    render_frame,
    step,
)


@pytest.fixture(scope="session")
def small_cfg() -> TwinConfig:
    """Small-grid configuration used by the fast integration fixtures."""
    return TwinConfig(
        simulator=PlateConfig(width=40, height=44, noise_sigma=0.05),
        service=ServiceConfig(speedup=1000.0, frame_period_s=3.5),
    )


@pytest.fixture(scope="session")
def small_sweep(small_cfg):
    return generate_training_sweep(small_cfg.simulator,
                                   voltages=[40, 80, 120], seed=7)


@pytest.fixture(scope="session")
def small_model(small_cfg, small_sweep):
    return train(small_sweep, small_cfg)


def make_run(cfg: TwinConfig, model, n_frames: int = 160,
             splash_at: int | None = 90, voltage: float = 100.0,
             seed: int = 1000):
    """Simulate a monitored run; returns (frames, verdicts)."""
    sim = SimState.ambient(cfg.simulator)
    sim.voltage = voltage
    state = RuntimeState(model)
    frames, verdicts = [], []
    for i in range(n_frames):
        sim = step(sim, cfg.simulator.dt)
        if splash_at is not None and i == splash_at:
            inject_anomaly(sim, "splash",
                           disc_mask(cfg.simulator, cfg.simulator.width // 2,
                                     cfg.simulator.height // 2, 4), 4.0)
        f = render_frame(sim, noise_seed=seed + i)
        verdicts.append(process_frame(model, f, state))
        frames.append(f)
    return frames, verdicts


@pytest.fixture(scope="session")
def small_run_dir(tmp_path_factory, small_cfg, small_model):
    """A persisted run containing a splash, for replay/predict tests."""
    frames, verdicts = make_run(small_cfg, small_model)
    run_dir = tmp_path_factory.mktemp("runs") / "splashrun"
    persist_run(run_dir, frames, verdicts, small_cfg)
    return run_dir


def random_orthonormal(n: int, r: int, rng) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(0)
