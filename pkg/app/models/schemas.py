"""Pydantic schemas for experiment configuration and reports."""
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.domain import MetricKind


def encode_value(value: Any) -> Any:
    """Convert numpy scalars/arrays to plain Python and non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [encode_value(v) for v in (value.tolist() if isinstance(value, np.ndarray) else value)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Enum):
        return value.value
    return value


# Space schemas
class GalleryKind(str, Enum):
    GRID_EUCLIDEAN = "grid-euclidean"
    SEGMENT = "segment"
    GLUED_PLANES = "glued-planes"
    CARPET_LIKE = "carpet-like"


class GallerySpec(BaseModel):
    """Recipe for a generated space."""
    model_config = ConfigDict(extra="forbid")

    kind: GalleryKind
    dimension: int = Field(2, ge=1, le=3)
    extent: float = Field(1.0, gt=0)
    h: float = Field(0.05, gt=0, description="Grid resolution")
    diagonal: bool = False
    origin: Optional[List[float]] = None
    metric: MetricKind = MetricKind.AMBIENT_EUCLIDEAN
    n: Optional[int] = Field(None, ge=2, description="Vertex count for segments")
    gluing_dimension: int = Field(0, ge=0, le=1)
    level: int = Field(0, ge=0, le=5)
    fattening: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_shape(self):
        if self.kind == GalleryKind.GLUED_PLANES and self.dimension != 2:
            raise ValueError("glued planes are two-dimensional")
        if self.origin is not None and len(self.origin) != self.dimension:
            raise ValueError("origin must have one entry per dimension")
        if self.kind == GalleryKind.CARPET_LIKE and len(self.fattening) < self.level:
            raise ValueError("fattening needs one entry per level")
        return self


class SpaceSource(BaseModel):
    """Either a gallery recipe or a point-cloud file."""
    model_config = ConfigDict(extra="forbid")

    gallery: Optional[GallerySpec] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def exactly_one(self):
        if (self.gallery is None) == (self.file is None):
            raise ValueError("space needs exactly one of 'gallery' or 'file'")
        return self


class PolePair(BaseModel):
    """Poles given as vertex ids or as coordinates (snapped to the nearest vertex)."""
    x: Union[int, List[float]]
    y: Union[int, List[float]]


# Run schemas
class Tolerances(BaseModel):
    """Pass/fail tolerances; defaults are the documented per-module values."""
    model_config = ConfigDict(extra="forbid")

    flow_cut: float = 1e-9
    duality: float = 1e-9
    admissibility: float = 1e-9
    sandwich: float = 0.2
    coarea: float = 0.15
    lip: Optional[float] = Field(None, description="Defaults to 2h / min edge length")
    width_h: float = Field(2.0, description="Allowed |width - exact| in units of h")
    halfspace: float = 0.15
    sphere_energy: float = 1e-3
    sphere_energy_pairwise: float = 5e-3
    gradient: float = 1e-5
    refinement_factor: float = 2.0
    obstacle_c: float = 4.0


class Parameters(BaseModel):
    """Run-wide defaults; each command may override any of them."""
    model_config = ConfigDict(extra="allow")

    L: float = Field(1.0, ge=1.0)
    delta: List[float] = Field(default_factory=lambda: [0.1])
    k: Union[int, List[int]] = 20
    lam: float = Field(1.0, ge=1.0)
    radii: Optional[List[float]] = None
    algorithm: str = "edmonds-karp"


class CommandSpec(BaseModel):
    command: str
    params: Dict[str, Any] = Field(default_factory=dict)


class CandidateSpec(BaseModel):
    """Region candidates: named regions plus the optional standard families."""
    model_config = ConfigDict(extra="forbid")

    standard: bool = True
    n_blobs: int = Field(50, ge=0)
    offsets: int = Field(5, ge=1)
    include: List[str] = Field(default_factory=list, description="Named regions to add")


class ExperimentConfig(BaseModel):
    """A complete batch run."""
    model_config = ConfigDict(extra="forbid")

    space: SpaceSource
    pairs: List[PolePair] = Field(default_factory=list)
    parameters: Parameters = Field(default_factory=Parameters)
    regions: Dict[str, str] = Field(default_factory=dict, description="Named region expressions")
    candidates: CandidateSpec = Field(default_factory=CandidateSpec)
    commands: List[CommandSpec] = Field(default_factory=list)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_dir: Optional[str] = None
    seed: int = Field(0, ge=0, lt=2 ** 64)
    jobs: Optional[int] = Field(None, ge=1)
    plots: bool = True

    @field_validator("commands", mode="before")
    @classmethod
    def accept_names(cls, value):
        """Allow bare command names in place of {"command": name}."""
        if isinstance(value, list):
            return [{"command": v} if isinstance(v, str) else v for v in value]
        return value


class Record(BaseModel):
    """One numeric result, tagged with the command and parameters that produced it."""
    command: str
    pair: Optional[List[int]] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, Any] = Field(default_factory=dict)
    passed: Optional[bool] = None
    error: Optional[str] = None

    @field_validator("params", "outputs", "tolerances", mode="before")
    @classmethod
    def plain(cls, value):
        return encode_value(value)

    @property
    def failed(self) -> bool:
        return self.error is not None or self.passed is False


class Provenance(BaseModel):
    app_name: str
    app_version: str
    space_name: str = ""
    space_hash: str = ""
    vertices: int = 0
    config_hash: str = ""
    seed: int = 0
    versions: Dict[str, str] = Field(default_factory=dict)


class Report(BaseModel):
    provenance: Provenance
    config: Dict[str, Any] = Field(default_factory=dict)
    records: List[Record] = Field(default_factory=list)

    @field_validator("config", mode="before")
    @classmethod
    def plain(cls, value):
        return encode_value(value)

    @property
    def passed(self) -> bool:
        return not any(r.failed for r in self.records)
