"""Run configuration: a single JSON document validated with pydantic."""
from __future__ import annotations

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from .gp import MaternParams
from .placement import DetectionModel


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    length_km: PositiveFloat = 13.0
    n_cells: int = Field(260, ge=2)


class MaternConfig(_Strict):
    marginal_variance: PositiveFloat = 1.0
    smoothness: PositiveFloat = 1.5
    range_km: PositiveFloat = 2.0


class AISConfig(_Strict):
    path: str
    endpoint_a: Tuple[float, float]
    endpoint_b: Tuple[float, float]
    corridor_halfwidth_km: PositiveFloat
    window: Tuple[datetime, datetime]
    unit_time_hours: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _window_order(self):
        if self.window[1] <= self.window[0]:
            raise ValueError("window end must be after window start")
        return self


class HistoryConfig(_Strict):
    source: Literal["synthetic", "ais"] = "synthetic"
    duration: PositiveFloat = 1.0
    normals_per_unit_time: PositiveFloat = 4.03
    background_fraction: float = Field(0.05, ge=0.0, le=1.0)
    lanes: List[Tuple[float, PositiveFloat, PositiveFloat]] = [
        (10.0, 0.6, 0.55), (12.4, 0.4, 0.35), (4.2, 0.5, 0.10),
    ]
    ais: Optional[AISConfig] = None

    @model_validator(mode="after")
    def _ais_present(self):
        if self.source == "ais" and self.ais is None:
            raise ValueError("source 'ais' requires an 'ais' section")
        return self


class OutlierConfig(_Strict):
    rate_per_km: float = Field(1.54, ge=0.0)
    lambda1_init_per_km: float = Field(0.75, ge=0.0)
    window: PositiveFloat = 1.0
    count_mode: Literal["expected", "poisson"] = "poisson"


class DetectionConfig(_Strict):
    rho: float = Field(0.98, ge=0.0, le=1.0)
    sigma_l: PositiveFloat = 0.05
    n_sensors: PositiveInt = 7
    horizon_ratio: PositiveFloat = 1.0


class ExperimentConfig(_Strict):
    count_model_samples: int = Field(10_000, ge=2)
    mc_samples: int = Field(10_000, ge=2)
    classification_iterations: PositiveInt = 10_000
    detection_trials: PositiveInt = 10_000
    replications: PositiveInt = 200
    scales: List[PositiveFloat] = [1.0, 7.0, 30.0]


class RunConfig(_Strict):
    grid: GridConfig = GridConfig()
    matern: MaternConfig = MaternConfig()
    history: HistoryConfig = HistoryConfig()
    outliers: OutlierConfig = OutlierConfig()
    detection: DetectionConfig = DetectionConfig()
    experiment: ExperimentConfig = ExperimentConfig()
    workers: PositiveInt = 1

    def matern_params(self) -> MaternParams:
        return MaternParams(**self.matern.model_dump())

    def detection_model(self) -> DetectionModel:
        return DetectionModel(self.detection.rho, self.detection.sigma_l)


def load_config(path) -> tuple[RunConfig, str]:
    """Parse and validate a config file; returns the model and the SHA-256 of its bytes.

    Relative AIS paths are resolved against the config file's directory.
    """
    path = Path(path)
    raw = path.read_bytes()
    doc = json.loads(raw)
    ais = doc.get("history", {}).get("ais") if isinstance(doc, dict) else None
    if isinstance(ais, dict) and "path" in ais and not Path(ais["path"]).is_absolute():
        ais["path"] = str((path.parent / ais["path"]).resolve())
    return RunConfig.model_validate(doc), hashlib.sha256(raw).hexdigest()
