"""Physics stand-in for the instrumented plate: explicit finite-difference
heat equation with a voltage-driven coil source, convective losses, sensor
noise, and injectable anomalies (water splash, attached object)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .datamodel import Dataset, Frame, RunMeta, SnapshotMatrix, stack
from .errors import RegionOutOfBounds

FTCS_LIMIT = 0.25  # explicit-stencil stability bound for alpha*dt/dx^2


@lru_cache(maxsize=8)
def serpentine_mask(width: int, height: int, lanes: int = 6,
                    thickness_frac: float = 0.06) -> np.ndarray:
    """Horizontal serpentine coil pattern in [0, 1], (height, width)."""
    mask = np.zeros((height, width))
    lane_h = max(1, int(round(height * thickness_frac)))
    margin_y = height // 10
    margin_x = width // 10
    ys = np.linspace(margin_y, height - margin_y - lane_h, lanes).astype(int)
    for i, y in enumerate(ys):
        mask[y:y + lane_h, margin_x:width - margin_x] = 1.0
        if i + 1 < len(ys):  # vertical connector, alternating sides
            x0 = width - margin_x - lane_h if i % 2 == 0 else margin_x
            mask[y:ys[i + 1] + lane_h, x0:x0 + lane_h] = 1.0
    return mask


@dataclass(frozen=True)
class PlateConfig:
    width: int = 260
    height: int = 300
    alpha: float = 0.6        # diffusivity, grid units^2 / s
    h_loss: float = 0.02      # convective loss, 1/s
    t_env: float = 20.0       # ambient, degC
    resistance: float = 9000.0
    noise_sigma: float = 0.1
    dt: float = 3.5           # frame interval, s
    emissivity_defects: bool = False  # static per-pixel response defects

    def coil(self) -> np.ndarray:
        return serpentine_mask(self.width, self.height)


@dataclass
class Anomaly:
    id: int
    kind: str                 # "splash" | "object"
    mask: np.ndarray          # boolean, (height, width)
    magnitude: float
    decay: float = 60.0       # splash wet-patch relaxation time constant, s
    age: float = 0.0


@dataclass
class SimState:
    cfg: PlateConfig
    field_: np.ndarray        # (height, width) temperature, degC
    voltage: float = 0.0
    time: float = 0.0
    active_anomalies: list = field(default_factory=list)
    _next_id: int = 0

    @classmethod
    def ambient(cls, cfg: PlateConfig) -> "SimState":
        return cls(cfg=cfg, field_=np.full((cfg.height, cfg.width), cfg.t_env))


def _laplacian(T: np.ndarray, out: np.ndarray, pad: np.ndarray) -> np.ndarray:
    """Five-point Laplacian with reflective (Neumann) boundaries; pad is a
    reusable (h+2, w+2) work buffer."""
    pad[1:-1, 1:-1] = T
    pad[0, 1:-1] = T[0]
    pad[-1, 1:-1] = T[-1]
    pad[1:-1, 0] = T[:, 0]
    pad[1:-1, -1] = T[:, -1]
    np.copyto(out, pad[:-2, 1:-1])
    out += pad[2:, 1:-1]
    out += pad[1:-1, :-2]
    out += pad[1:-1, 2:]
    out -= 4.0 * T
    return out


def step(state: SimState, dt: float) -> SimState:
    """Advance the plate by dt seconds, sub-stepped for stability."""
    cfg = state.cfg
    n_sub = max(1, int(np.ceil(cfg.alpha * dt / FTCS_LIMIT)))
    dt_sub = dt / n_sub

    T = state.field_.copy()
    source = cfg.coil() * (state.voltage ** 2 / cfg.resistance)
    h_map = np.full_like(T, cfg.h_loss)
    wet_extra = np.zeros_like(T)
    for an in state.active_anomalies:
        if an.kind == "object":
            # Object acts as a local heat sink: tripled loss coefficient.
            h_map[an.mask] *= an.magnitude if an.magnitude > 0 else 3.0
        elif an.kind == "splash":
            # Lingering wet patch with exponentially decaying extra loss.
            wet_extra[an.mask] += (cfg.h_loss * 2.0
                                   * np.exp(-an.age / max(an.decay, 1e-9)))
    h_map += wet_extra

    lap = np.empty_like(T)
    pad = np.empty((T.shape[0] + 2, T.shape[1] + 2))
    for _ in range(n_sub):
        _laplacian(T, lap, pad)
        T += dt_sub * (cfg.alpha * lap + source - h_map * (T - cfg.t_env))

    anomalies = [replace(an, age=an.age + dt) for an in state.active_anomalies]
    return SimState(cfg=cfg, field_=T, voltage=state.voltage,
                    time=state.time + dt, active_anomalies=anomalies,
                    _next_id=state._next_id)


def _defect_map(cfg: PlateConfig) -> np.ndarray:
    rng = np.random.default_rng(1234)
    gain = np.ones((cfg.height, cfg.width))
    ph = max(2, cfg.height // 12)
    pw = max(2, cfg.width // 5)
    for _ in range(4):  # a few adhesive-strip style patches
        y = rng.integers(0, max(1, cfg.height - ph))
        x = rng.integers(0, max(1, cfg.width - pw))
        gain[y:y + ph, x:x + pw] *= rng.uniform(0.85, 0.95)
    return gain


def render_frame(state: SimState, noise_seed: int | None = None) -> Frame:
    """Camera view of the plate: true field plus Gaussian sensor noise."""
    cfg = state.cfg
    T = state.field_
    if cfg.emissivity_defects:
        gain = _defect_map(cfg)
        T = cfg.t_env + (T - cfg.t_env) * gain
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(noise_seed)
        T = T + rng.normal(0.0, cfg.noise_sigma, T.shape)
    return Frame(width=cfg.width, height=cfg.height, t=state.time,
                 values=T.reshape(-1).astype(np.float32))


def disc_mask(cfg: PlateConfig, cx: int, cy: int, radius: int) -> np.ndarray:
    if not (0 <= cx < cfg.width and 0 <= cy < cfg.height) or radius < 1:
        raise RegionOutOfBounds(f"disc ({cx},{cy},r={radius}) outside grid")
    yy, xx = np.ogrid[:cfg.height, :cfg.width]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2


def inject_anomaly(state: SimState, kind: str, mask: np.ndarray,
                   magnitude: float, decay: float = 60.0) -> int:
    """Add an anomaly in place; returns its id. A splash also applies its
    immediate localized cooling."""
    if mask.shape != state.field_.shape:
        raise RegionOutOfBounds("anomaly mask shape must match the grid")
    if not mask.any():
        raise RegionOutOfBounds("empty anomaly region")
    if kind not in ("splash", "object"):
        raise ValueError(f"unknown anomaly kind {kind!r}")
    an = Anomaly(id=state._next_id, kind=kind, mask=mask,
                 magnitude=magnitude, decay=decay)
    state._next_id += 1
    if kind == "splash":
        state.field_[mask] -= magnitude
    state.active_anomalies.append(an)
    return an.id


def remove_anomaly(state: SimState, anomaly_id: int) -> bool:
    before = len(state.active_anomalies)
    state.active_anomalies = [a for a in state.active_anomalies
                              if a.id != anomaly_id]
    return len(state.active_anomalies) < before


def run_to_equilibrium(state: SimState, settle_tol: float = 0.01,
                       max_frames: int = 2000, record=None,
                       seed_base: int | None = None):
    """Step at the frame interval until the per-frame max change drops
    below settle_tol degC; optionally record rendered frames."""
    cfg = state.cfg
    for i in range(max_frames):
        prev = state.field_
        state = step(state, cfg.dt)
        if record is not None:
            seed = None if seed_base is None else seed_base + i
            record.append(render_frame(state, noise_seed=seed))
        if np.max(np.abs(state.field_ - prev)) < settle_tol:
            break
    return state


def generate_training_sweep(cfg: PlateConfig | None = None,
                            voltages=None, seed: int = 0):
    """Voltage sweep protocol: per level, heat from ambient to equilibrium
    then cool back, recording frames at the frame interval. Returns one
    Dataset per (voltage, phase)."""
    cfg = cfg or PlateConfig()
    voltages = list(voltages) if voltages is not None else list(range(10, 130, 10))
    datasets = []
    for vi, volts in enumerate(voltages):
        state = SimState.ambient(cfg)
        state.voltage = float(volts)
        frames: list[Frame] = []
        state = run_to_equilibrium(state, record=frames,
                                   seed_base=seed + vi * 1_000_000)
        datasets.append(Dataset(
            snapshots=stack(frames), width=cfg.width, height=cfg.height,
            meta=RunMeta(voltage=float(volts), phase="heating",
                         label=f"{volts:g}V-heating")))

        state.voltage = 0.0
        state.time = 0.0
        frames = []
        state = run_to_equilibrium(state, record=frames,
                                   seed_base=seed + vi * 1_000_000 + 500_000)
        datasets.append(Dataset(
            snapshots=stack(frames), width=cfg.width, height=cfg.height,
            meta=RunMeta(voltage=float(volts), phase="cooling",
                         label=f"{volts:g}V-cooling")))
    return datasets
