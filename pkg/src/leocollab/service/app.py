"""HTTP service exposing the simulator, trainer, optimizer, and benchmarks.

Each endpoint resolves its request body into a validated configuration
(defaults, then the partial ``config`` mapping, then dotted overrides),
executes the corresponding run, and returns JSON with the configuration hash
echoed for reproducibility. Domain failures map onto structured error
responses: invalid input is 422, an infeasible problem is 409, training
divergence is 500 with its own tag.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import apply_overrides, config_hash, from_dict, to_dict
from ..errors import (
    ConfigError,
    ContractViolation,
    InfeasibleError,
    LeoCollabError,
    RouteError,
    TrainingDiverged,
)
from ..bench import CSV_FIELDS
from ..qmix.training import QmixPolicy
from ..runs import (
    bench_run,
    bisect_search_run,
    evaluate_run,
    evaluation_task_rows,
    replay_record_run,
    replay_verify_run,
    topology_export,
    train_run,
    version_info,
)
from .schemas import (
    BenchRequest,
    BenchResponse,
    BisectRequest,
    BisectResponse,
    ConfigBody,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    ReplayRequest,
    ReplayResponse,
    TopologyRequest,
    TopologyResponse,
    TrainRequest,
    TrainResponse,
)

ERROR_STATUS = {
    ConfigError: (422, "config"),
    ContractViolation: (422, "contract"),
    InfeasibleError: (409, "infeasible"),
    RouteError: (409, "route"),
    TrainingDiverged: (500, "diverged"),
}


def _json_safe(value):
    """Replace non-finite floats with None so responses are valid JSON."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if np.isfinite(v) else None
    return value


def _resolve(body: ConfigBody):
    config = from_dict(body.config)
    if body.overrides:
        config = apply_overrides(config, body.overrides)
    return config


def _policy_of(payload: dict | None) -> QmixPolicy | None:
    return QmixPolicy.from_payload(payload) if payload is not None else None


def create_app() -> FastAPI:
    app = FastAPI(
        title="leocollab",
        version=__version__,
        description=(
            "Desk-scale simulator and optimizer for delay-aware collaboration "
            "between on-orbit detectors and a shared large model."
        ),
    )

    @app.exception_handler(LeoCollabError)
    async def _domain_error(request: Request, err: LeoCollabError):
        for cls, (status, tag) in ERROR_STATUS.items():
            if isinstance(err, cls):
                body = {"error": tag, "message": str(err)}
                if isinstance(err, InfeasibleError):
                    body["cause"] = str(err.cause)
                return JSONResponse(status_code=status, content=body)
        return JSONResponse(
            status_code=500, content={"error": "internal", "message": str(err)}
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return {"status": "ok", **version_info()}

    @app.post("/topology", response_model=TopologyResponse)
    def topology(body: TopologyRequest):
        config = _resolve(body)
        return _json_safe(topology_export(config, slot=body.slot))

    @app.post("/train", response_model=TrainResponse)
    def train(body: TrainRequest):
        config = _resolve(body)
        result = train_run(config)
        return _json_safe(
            {
                "config_hash": config_hash(config),
                "train_steps": result.train_steps,
                "best_epoch": result.best_epoch,
                "best_eval_reward": result.best_eval_reward,
                "curves": {k: v.tolist() for k, v in result.curves.items()},
                "policy": result.policy.to_payload(
                    extra={"config_hash": config_hash(config)}
                ),
            }
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(body: EvaluateRequest):
        config = _resolve(body)
        result = evaluate_run(
            config,
            alphas=body.alphas,
            policy=_policy_of(body.policy),
            router=body.router,
        )
        return _json_safe(
            {
                "config_hash": config_hash(config),
                "objective": result.objective,
                "feasible": result.feasible,
                "tasks": evaluation_task_rows(result),
                "statuses": result.statuses,
                "t_bars": result.t_bars,
                "routes": _routes_payload(result.routes),
            }
        )

    @app.post("/bisect", response_model=BisectResponse)
    def bisect(body: BisectRequest):
        config = _resolve(body)
        result = bisect_search_run(
            config,
            policy=_policy_of(body.policy),
            iterations=body.iterations,
            early_stop=body.early_stop,
            router=body.router,
        )
        history = [
            {
                "k": row["iteration"],
                "alphas": row["alphas"],
                "objective": row["objective"],
                "feasible": row["feasible"],
                "t_loc": row["t_loc"],
                "t_offload": row["t_offload"],
                "idle": row["idle"],
                "causes": row.get("causes") or None,
            }
            for row in result.history
        ]
        return _json_safe(
            {
                "config_hash": config_hash(config),
                "alphas": list(result.alphas),
                "objective": result.objective,
                "iterations": result.iterations,
                "stopped_early": result.stopped_early,
                "history": history,
                "tasks": evaluation_task_rows(result.evaluation),
            }
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench(body: BenchRequest):
        config = _resolve(body)
        rows = bench_run(config, policy=_policy_of(body.policy))
        return _json_safe(
            {
                "config_hash": config_hash(config),
                "fields": list(CSV_FIELDS),
                "rows": rows,
            }
        )

    @app.post("/replay", response_model=ReplayResponse)
    def replay(body: ReplayRequest):
        config = _resolve(body)
        if (body.policy is None) == (body.transcript is None):
            raise ConfigError(
                "replay needs exactly one of: a policy (record an episode) "
                "or a transcript (verify one)"
            )
        if body.policy is not None:
            rows = replay_record_run(
                config,
                _policy_of(body.policy),
                epsilon=body.epsilon,
                seed=body.seed,
            )
            return _json_safe(
                {
                    "config_hash": config_hash(config),
                    "mode": "record",
                    "transcript": rows,
                }
            )
        report = replay_verify_run(config, body.transcript)
        return _json_safe(
            {
                "config_hash": config_hash(config),
                "mode": "verify",
                "report": report,
            }
        )

    @app.post("/config/resolve")
    def resolve(body: ConfigBody):
        config = _resolve(body)
        return {"config_hash": config_hash(config), "config": to_dict(config)}

    return app


def _routes_payload(routes) -> list | None:
    if routes is None:
        return None
    return [
        {
            kind: ([int(n) for n in r[kind]] if r.get(kind) is not None else None)
            for kind in ("model", "data")
        }
        for r in routes
    ]


app = create_app()
