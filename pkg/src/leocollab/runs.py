"""Orchestration of full runs from a validated configuration.

Every entry point the service and command line expose maps onto one function
here, working purely on core objects: build the configured scenario, run the
requested procedure, and return structured results that serialize cleanly.
File layout, HTTP and exit-code concerns stay out of this module.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from .bench import run_grid
from .config import (
    ExperimentConfig,
    config_hash,
    env_from_config,
    instance_from_config,
)
from .constellation import (
    build_shell,
    default_role_assignment,
    snapshot_to_dict,
    snapshot_topology,
)
from .errors import ConfigError
from .optimizer import EvaluationResult, RunResult, evaluate
from .optimizer import run as bisect_run_core
from .qmix.training import QmixPolicy, TrainResult, train
from .transcript import record_episode, verify_transcript


def topology_export(config: ExperimentConfig, slot: int | None = None) -> dict:
    """Per-slot constellation graph with roles, positions, lengths, rates."""
    if slot is None:
        slot = config.tasks.slot
    if slot < 0:
        raise ConfigError("slot must be non-negative")
    placement_rng = (
        np.random.default_rng(config.tasks.placement_seed)
        if config.tasks.placement_seed is not None
        else None
    )
    roles = default_role_assignment(
        config.constellation,
        config.tasks.n_remote_sensing,
        config.tasks.n_computing,
        rng=placement_rng,
    )
    nodes = build_shell(config.constellation, roles, config.hardware)
    snapshot = snapshot_topology(config.constellation, nodes, slot, config.link_budget)
    out = snapshot_to_dict(snapshot)
    out["config_hash"] = config_hash(config)
    return out


def train_run(config: ExperimentConfig) -> TrainResult:
    """Train the routing policy on the configured scenario.

    The scenario is fixed across episodes (the per-slot snapshot the offline
    optimizer targets); greedy evaluations on the same scenario select the
    best snapshot of the run.
    """
    instance = instance_from_config(config)
    env = env_from_config(config, instance)
    eval_env = env_from_config(config, instance)
    return train(lambda i, rng: env, config.training, eval_envs=[eval_env])


def evaluate_run(
    config: ExperimentConfig,
    alphas=None,
    policy: QmixPolicy | None = None,
    router: str | None = None,
) -> EvaluationResult:
    """Route and price the configured scenario at fixed offloaded shares.

    The scenario is built at the configured shares; the requested ``alphas``
    are then re-solved per task, so an infeasible share comes back as a
    flagged per-task outcome instead of an exception.
    """
    instance = instance_from_config(config)
    if alphas is None:
        shares = [t.alpha for t in instance.tasks]
    elif np.isscalar(alphas):
        shares = [float(alphas)] * instance.num_tasks
    else:
        shares = [float(a) for a in alphas]
    return evaluate(
        instance,
        shares,
        policy=policy,
        reward=config.reward,
        router=router if router is not None else config.optimizer.router,
    )


def bisect_search_run(
    config: ExperimentConfig,
    policy: QmixPolicy | None = None,
    iterations: int | None = None,
    early_stop: bool | None = None,
    router: str | None = None,
) -> RunResult:
    """Optimize the offloaded shares by interval halving on the scenario."""
    instance = instance_from_config(config)
    return bisect_run_core(
        instance,
        policy=policy,
        iterations=iterations if iterations is not None else config.optimizer.iterations,
        early_stop=early_stop if early_stop is not None else config.optimizer.early_stop,
        reward=config.reward,
        router=router if router is not None else config.optimizer.router,
    )


def bench_run(
    config: ExperimentConfig, policy: QmixPolicy | None = None
) -> list[dict]:
    """Scheme-comparison sweep rows from the configured grid."""
    return run_grid(
        config.bench.grid(),
        schemes=config.bench.schemes,
        policy=policy,
        shell=config.constellation,
        workload=config.workload,
        hardware=config.hardware,
        budget=config.link_budget,
        n_remote_sensing=config.tasks.n_remote_sensing,
        n_computing=config.tasks.n_computing,
        iterations=config.optimizer.iterations,
        reward=config.reward,
        router=config.optimizer.router,
    )


def replay_record_run(
    config: ExperimentConfig,
    policy: QmixPolicy,
    epsilon: float = 0.0,
    seed: int | None = None,
) -> list[dict]:
    """Roll out one episode on the configured scenario as a transcript."""
    env = env_from_config(config)
    rng = np.random.default_rng(seed) if epsilon > 0 else None
    return record_episode(env, policy, epsilon=epsilon, rng=rng)


def replay_verify_run(config: ExperimentConfig, rows: list[dict]) -> dict:
    """Re-run a recorded transcript against the configured scenario."""
    env = env_from_config(config)
    return verify_transcript(env, rows)


def binding_branch(delay) -> str:
    """Which branch of the service-delay max is active for a task."""
    return "local" if delay.local >= delay.offload_branch else "offload"


def evaluation_task_rows(result: EvaluationResult) -> list[dict]:
    """Per-task delay breakdown rows in the stable result schema."""
    rows = []
    for outcome in result.tasks:
        d = outcome.delay
        rows.append(
            {
                "task_id": outcome.task_id,
                "alpha": outcome.alpha,
                "feasible": outcome.feasible,
                "cause": outcome.cause,
                "t_model": d.model if d else None,
                "t_feature": d.feature if d else None,
                "t_data": d.data if d else None,
                "t_large": d.large if d else None,
                "t_local": d.local if d else None,
                "t_total": d.total if d else None,
                "binding_branch": binding_branch(d) if d else None,
            }
        )
    return rows


def version_info() -> dict:
    return {"package": "leocollab", "version": __version__, "numpy": np.__version__}
