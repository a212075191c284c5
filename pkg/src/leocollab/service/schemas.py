"""Request and response models of the HTTP service.

Every request carries an optional partial configuration (nested mapping
merged over the defaults) plus ``section.key=value`` override strings, so a
client can pin exactly what it needs. Responses echo the resolved
configuration hash, which is what makes results reproducible from their
manifest. Non-finite floats are reported as nulls.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class ConfigBody(BaseModel):
    """Partial configuration plus dotted overrides, merged over defaults."""

    config: dict = Field(default_factory=dict)
    overrides: list[str] = Field(default_factory=list)


class HealthResponse(BaseModel):
    status: str
    package: str
    version: str
    numpy: str


class TopologyRequest(ConfigBody):
    slot: int | None = None


class NodeModel(BaseModel):
    id: int
    role: str
    plane: int
    slot_in_plane: int
    position_km: list[float]


class LinkModel(BaseModel):
    u: int
    v: int
    length_m: float
    rate_bps: float
    kind: str


class TopologyResponse(BaseModel):
    slot: int
    config_hash: str
    nodes: list[NodeModel]
    links: list[LinkModel]


class TrainRequest(ConfigBody):
    pass


class TrainResponse(BaseModel):
    config_hash: str
    train_steps: int
    best_epoch: int
    best_eval_reward: float | None
    curves: dict[str, list[float | None]]
    policy: dict


class EvaluateRequest(ConfigBody):
    alphas: float | list[float] | None = None
    policy: dict | None = None
    router: str | None = None


class TaskRow(BaseModel):
    task_id: int
    alpha: float
    feasible: bool
    cause: str | None
    t_model: float | None
    t_feature: float | None
    t_data: float | None
    t_large: float | None
    t_local: float | None
    t_total: float | None
    binding_branch: str | None


class EvaluateResponse(BaseModel):
    config_hash: str
    objective: float | None
    feasible: bool
    tasks: list[TaskRow]
    statuses: list[str] | None
    t_bars: list[float | None] | None
    routes: list[dict] | None


class BisectRequest(ConfigBody):
    policy: dict | None = None
    iterations: int | None = None
    early_stop: bool | None = None
    router: str | None = None


class BisectIterationRow(BaseModel):
    k: int
    alphas: list[float]
    objective: float | None
    feasible: bool
    t_loc: list[float | None]
    t_offload: list[float | None]
    idle: list[float | None]
    causes: list[str | None] | None = None


class BisectResponse(BaseModel):
    config_hash: str
    alphas: list[float]
    objective: float | None
    iterations: int
    stopped_early: bool
    history: list[BisectIterationRow]
    tasks: list[TaskRow]


class BenchRequest(ConfigBody):
    policy: dict | None = None


class BenchResponse(BaseModel):
    config_hash: str
    fields: list[str]
    rows: list[dict]


class ReplayRequest(ConfigBody):
    """Record mode when a policy is given, verify mode when a transcript is."""

    policy: dict | None = None
    transcript: list[dict] | None = None
    epsilon: float = 0.0
    seed: int | None = None


class ReplayResponse(BaseModel):
    config_hash: str
    mode: str
    transcript: list[dict] | None = None
    report: dict | None = None


class ErrorBody(BaseModel):
    error: str
    message: str
    cause: str | None = None
