"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

CriterionName = Literal["var", "sens"]
KindName = Literal["relaxation", "ramsey", "hahn_echo"]
StrategyName = Literal["adaptive_variance", "adaptive_sensitivity", "random", "sweep"]


class ReadoutSpec(BaseModel):
    p_click_0: float = Field(gt=0, le=1)
    p_click_1: float = Field(ge=0, lt=1)
    repetitions: int = Field(ge=1)


class XiRequest(BaseModel):
    beta: float = Field(gt=0)
    criterion: CriterionName


class XiResponse(BaseModel):
    beta: float
    criterion: CriterionName
    xi: float


class CrlbRequest(BaseModel):
    beta: float = Field(gt=0)
    t_chi: float = Field(gt=0)
    times: list[float] = Field(min_length=1)
    readout: ReadoutSpec | None = None
    criterion: CriterionName = "sens"
    n_shots: int | None = Field(default=None, ge=1)


class CrlbResponse(BaseModel):
    times: list[float]
    bounds: list[float]


class SessionCreate(BaseModel):
    strategy: StrategyName = "adaptive_variance"
    kind: KindName = "ramsey"
    beta: float | None = Field(default=None, gt=0)
    prior_low: float = Field(gt=0)
    prior_high: float = Field(gt=0)
    readout: ReadoutSpec | None = None
    particle_count: int = Field(default=200, ge=2)
    liu_west_a: float = Field(default=0.98, gt=0, lt=1)
    resample_threshold: float = Field(default=0.5, gt=0, le=1)
    seed: int = 0
    replica: int = 0
    total_epochs: int = Field(default=1000, ge=1)
    quantize: bool = False
    quantize_levels: int = Field(default=256, ge=2)
    iid_prior: bool = False
    full_variance_resample: bool = False


class SessionState(BaseModel):
    session_id: str
    strategy: StrategyName
    epoch: int
    repetitions: int
    cumulative_probing_time: float
    estimate: float
    estimate_std: float


class ProposeResponse(BaseModel):
    epoch: int
    tau: float


class AbsorbRequest(BaseModel):
    tau: float = Field(gt=0)
    outcome: int = Field(ge=0)


class EpochOut(BaseModel):
    epoch: int
    tau: float
    outcome: int
    cumulative_probing_time: float
    estimate: float
    estimate_std: float
    resampled: bool


class RunRequest(BaseModel):
    preset: str | None = None
    config: dict | None = None
    replicas: int | None = Field(default=None, ge=1)
    seed: int | None = None
    workers: int | None = Field(default=None, ge=1)


class BenchRequest(BaseModel):
    particles: list[int] = Field(default=[50, 100, 200, 400, 800, 1600], min_length=2)
    repeats: int = Field(default=300, ge=10)
    seed: int = 123


class RecordRequest(BaseModel):
    preset: str | None = None
    config: dict | None = None
    strategy: StrategyName | None = None
    replica: int = 0
    seed: int | None = None


class ReplayRequest(BaseModel):
    log: dict
    strict: bool = True


class ReplayResponse(BaseModel):
    records: list[EpochOut]
    final_estimate: float
    final_estimate_std: float
