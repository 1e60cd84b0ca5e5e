"""Pydantic schemas shared by the HTTP service and the command-line client."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment run.

    Defaults reproduce the two-interface disk benchmark: interfaces at 0.5 and
    0.25, the outermost layer pinned to 1, ground truth all ones.  Layer
    indices are 1-based and count inward from the boundary.  ``m`` left unset
    falls back to the per-command default (6 for the landscape and basin
    figures, 20 for calibration and recovery).
    """

    model_config = ConfigDict(frozen=True)

    radii: tuple[float, ...] = (0.5, 0.25)
    pinned: dict[int, float] = Field(default_factory=lambda: {1: 1.0})
    sigma_hat: tuple[float, ...] = (1.0, 1.0, 1.0)
    m: int | None = Field(None, ge=1)
    box_lower: tuple[float, ...] | None = None
    box_upper: tuple[float, ...] | None = None
    free_lower: float = Field(0.5, gt=0.0)
    free_upper: float = 2.0
    grid_range: tuple[tuple[float, float], tuple[float, float]] = ((0.1, 3.0), (0.1, 3.0))
    landscape_resolution: int = Field(300, ge=2)
    basins_resolution: int = Field(40, ge=2)
    residual_threshold: float = Field(1e-4, gt=0.0)
    good_threshold: float = Field(1e-6, gt=0.0)
    bad_threshold: float = Field(0.1, gt=0.0)
    deltas: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    noise_trials: int = Field(100, ge=1)
    property_trials: int = Field(1000, ge=1)
    seed: int = 0
    out_dir: str = "artifacts"
    clip_residual: tuple[float, float] = (1e-8, 1e2)
    clip_error: tuple[float, float] = (1e-6, 1e1)
    certificate_path: str | None = None
    grid_samples: int = Field(3, ge=2)
    random_samples: int = Field(0, ge=0)
    epsilon: float = Field(1e-6, gt=0.0)
    lm_box_mode: Literal["clamp", "none"] = "none"
    lm_max_iterations: int = Field(200, ge=1)
    backend: Literal["penalty", "barrier"] = "penalty"
    workers: int | None = Field(None, ge=1)

    @property
    def n_layers(self) -> int:
        return len(self.radii) + 1

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        n = self.n_layers
        if len(self.sigma_hat) != n:
            raise ValueError(f"sigma_hat has {len(self.sigma_hat)} entries, geometry has {n} layers")
        for layer in self.pinned:
            if not 1 <= layer <= n:
                raise ValueError(f"pinned layer {layer} outside 1..{n}")
        for lo, hi in self.grid_range:
            if not lo < hi:
                raise ValueError(f"grid range ({lo}, {hi}) is not increasing")
        if (self.box_lower is None) != (self.box_upper is None):
            raise ValueError("box_lower and box_upper must be given together")
        if self.box_lower is not None and (len(self.box_lower) != n or len(self.box_upper) != n):
            raise ValueError("box bounds must have one entry per layer")
        if not self.free_lower < self.free_upper:
            raise ValueError("free_lower must be below free_upper")
        for pair_name, pair in (("clip_residual", self.clip_residual), ("clip_error", self.clip_error)):
            if not (pair[0] > 0.0 and pair[1] > pair[0]):
                raise ValueError(f"{pair_name} must satisfy 0 < lo < hi")
        return self


class ReportModel(BaseModel):
    """Serialized solver outcome."""

    sigma: tuple[float, ...]
    objective: float
    feasibility: float | None
    iterations: int
    backend: str
    converged: bool
    status: str


class ForwardRequest(BaseModel):
    radii: tuple[float, ...]
    sigma: tuple[float, ...]
    m: int = Field(ge=1)


class ForwardResponse(BaseModel):
    matrix: list[list[float]]
    eigenvalues: list[float]


class LandscapeResponse(BaseModel):
    config_hash: str
    axis1: list[float]
    axis2: list[float]
    values: list[list[float]]
    free_layers: tuple[int, int]
    minima_total: int
    minima_above: int
    threshold: float


class BasinsResponse(BaseModel):
    config_hash: str
    axis1: list[float]
    axis2: list[float]
    errors: list[list[float]]
    free_layers: tuple[int, int]
    n_good: int
    n_bad: int
    n_diverged: int
    fraction_bad: float


class VerificationModel(BaseModel):
    min_definiteness: float
    lambda_claimed: float
    violations: tuple[int, ...]
    lambda_upheld: bool
    ok: bool


class CalibrateResponse(BaseModel):
    config_hash: str
    certificate: dict
    verification: VerificationModel


class SolveRequest(BaseModel):
    config: ExperimentConfig = ExperimentConfig()
    delta: float = Field(0.0, ge=0.0)
    y_source: Literal["exact", "inline"] = "exact"
    y_csv: str | None = None
    certificate: dict | None = None
    trials: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _source(self) -> "SolveRequest":
        if self.y_source == "inline" and not self.y_csv:
            raise ValueError("inline data source requires y_csv")
        return self


class NoiseTrialModel(BaseModel):
    delta: float
    trial: int
    lhs: float
    rhs: float
    holds: bool
    converged: bool
    iterations: int
    sigma: tuple[float, ...]
    sigma_hat: tuple[float, ...]


class SolveResponse(BaseModel):
    config_hash: str
    mode: Literal["single", "trials"]
    cost_source: Literal["certificate", "uniform"]
    report: ReportModel | None = None
    error_weighted: float | None = None
    error_euclidean: float | None = None
    rows: list[NoiseTrialModel] = Field(default_factory=list)
    all_hold: bool | None = None


class SuiteModel(BaseModel):
    name: str
    trials: int
    failures: int
    worst: float | None
    skipped: bool
    note: str
    passed: bool


class PropertiesResponse(BaseModel):
    config_hash: str
    suites: list[SuiteModel]
    all_pass: bool


class HealthResponse(BaseModel):
    status: str
    version: str
