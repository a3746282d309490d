"""Twin configuration: one JSON file with sections for the simulator,
detector, prediction profiles, RPCA, and the service."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .anomaly import DetectorConfig
from .errors import BadConfig
from .rpca import RpcaParams
from .simulator import PlateConfig


@dataclass(frozen=True)
class PredictionConfig:
    state_w: int = 100
    state_l: int = 100
    anomaly_w: int = 20
    anomaly_l: int = 100
    r_dmd: int | None = None       # None => POD rank
    history_capacity: int = 2000


@dataclass(frozen=True)
class TrainingConfig:
    rank: int = 3
    sensors: int = 3
    svr_c: float = 1.0
    svr_epsilon: float = 0.1
    rpca_clean: bool = False


@dataclass(frozen=True)
class ServiceConfig:
    addr: str = "127.0.0.1:8080"
    frame_period_s: float = 3.5    # wall time between simulator frames
    speedup: float = 1.0
    client_buffer: int = 64        # SSE events buffered per client
    runs_dir: str = "runs"
    heatmap_max_w: int = 130
    heatmap_max_h: int = 150


@dataclass(frozen=True)
class TwinConfig:
    simulator: PlateConfig = field(default_factory=PlateConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    rpca: RpcaParams = field(default_factory=RpcaParams)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TwinConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadConfig(f"invalid JSON: {exc}") from exc
        sections = {
            "simulator": PlateConfig,
            "detector": DetectorConfig,
            "prediction": PredictionConfig,
            "rpca": RpcaParams,
            "training": TrainingConfig,
            "service": ServiceConfig,
        }
        kwargs = {}
        for name, typ in sections.items():
            block = raw.get(name, {})
            if not isinstance(block, dict):
                raise BadConfig(f"section {name!r} must be an object")
            known = {f.name for f in dataclasses.fields(typ)}
            unknown = set(block) - known
            if unknown:
                raise BadConfig(f"unknown keys in {name!r}: {sorted(unknown)}")
            try:
                kwargs[name] = typ(**block)
            except (TypeError, ValueError) as exc:
                raise BadConfig(f"bad {name!r} section: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "TwinConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
