"""Baseline schemes and the sweep harness that compares them.

Four ways to serve the same detection tasks: keep everything on the sensing
satellite (small_only), ship every raw frame to a computing satellite
(centralized_large), split frames evenly with learned routing (even_split),
or search the split ratio around the learned router (proposed). The grid
runner sweeps one scenario knob at a time over seeded placements and emits
flat CSV rows, recording per-cell failures instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .constellation import (
    DEFAULT_HARDWARE,
    DEFAULT_LINK_BUDGET,
    HardwareProfile,
    LinkBudget,
    ShellConfig,
    TopologySnapshot,
)
from .delay import TaskDelay, link_loads, relay_loads, route_delay
from .errors import ConfigError, InfeasibleError, RouteError
from .optimizer import EvaluationResult, TaskOutcome, evaluate, run
from .paths import shortest_route_to_any
from .qmix.training import QmixPolicy
from .routing_env import Instance, RewardConfig, make_instance
from .workload import WorkloadConfig, image_bits, large_inference_time, local_inference_time

SCHEME_PROPOSED = "proposed"
SCHEME_SMALL_ONLY = "small_only"
SCHEME_CENTRALIZED = "centralized_large"
SCHEME_EVEN_SPLIT = "even_split"
ALL_SCHEMES = (
    SCHEME_SMALL_ONLY,
    SCHEME_CENTRALIZED,
    SCHEME_EVEN_SPLIT,
    SCHEME_PROPOSED,
)

SWEEP_DATA_VOLUME = "data_volume"
SWEEP_COMPUTE = "computing_capacity"
SWEEP_ITERATIONS = "bisection_iterations"
ALL_SWEEPS = (SWEEP_DATA_VOLUME, SWEEP_COMPUTE, SWEEP_ITERATIONS)

CSV_FIELDS = (
    "sweep",
    "value",
    "scheme",
    "seed",
    "objective",
    "objective_dijkstra",
    "t_model",
    "t_feature",
    "t_data",
    "t_large",
    "t_local",
    "mean_t_bar",
    "delivered_frac",
    "alphas",
    "iterations",
    "error",
)


@dataclass(frozen=True)
class ExperimentGrid:
    """One swept scenario knob, its values, and the seeds to average over."""

    sweep: str
    values: tuple
    seeds: tuple[int, ...]

    def __post_init__(self):
        if self.sweep not in ALL_SWEEPS:
            raise ConfigError(f"unknown sweep {self.sweep!r}; pick one of {ALL_SWEEPS}")
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        if not self.seeds:
            raise ConfigError("need at least one seed")


def dijkstra_route(
    snapshot: TopologySnapshot,
    source: int,
    destinations: Sequence[int],
    size_bits: float,
) -> list[int]:
    """Minimum-delay simple path to the nearest of several destinations.

    Edge weight is the unit-load transmission time plus propagation, with the
    per-bit relay charge at every forwarding satellite. Unreachable
    destination sets raise instead of returning a partial route.
    """
    got = shortest_route_to_any(snapshot, source, destinations, size_bits)
    if got is None:
        raise RouteError(
            f"no route from {source} to any of {sorted(destinations)}"
        )
    return got[0]


def _outcome(task_id, alpha, delay: TaskDelay) -> TaskOutcome:
    return TaskOutcome(
        task_id=task_id,
        alpha=alpha,
        feasible=True,
        local_time=delay.local,
        offload_time=delay.data + delay.large,
        delay=delay,
    )


def _small_only(instance: Instance) -> EvaluationResult:
    """Everything stays on board: no packets, no accuracy compensation."""
    outcomes = []
    w = instance.workload
    for task in instance.tasks:
        node = instance.snapshot.nodes[task.rs_node]
        local = local_inference_time(w, 0.0, node.compute_capacity_ops, node.utilization)
        delay = TaskDelay(model=0.0, feature=0.0, data=0.0, large=0.0, local=local)
        outcomes.append(_outcome(task.task_id, 0.0, delay))
    return EvaluationResult(
        alphas=(0.0,) * instance.num_tasks,
        objective=float(np.mean([o.delay.total for o in outcomes])),
        feasible=True,
        tasks=tuple(outcomes),
        statuses=("delivered",) * instance.num_tasks,
    )


def _centralized_large(instance: Instance) -> EvaluationResult:
    """All raw frames go to a computing satellite over shortest paths."""
    w = instance.workload
    bits = image_bits(w)
    cpts = instance.cpt_nodes
    routes = []
    for task in instance.tasks:
        routes.append(dijkstra_route(instance.snapshot, task.rs_node, cpts, bits))
    loads = link_loads(routes)
    node_loads = relay_loads(routes)
    outcomes = []
    for task, route in zip(instance.tasks, routes):
        t_d = route_delay(instance.snapshot, route, bits, loads, node_loads).total
        cpt = instance.snapshot.nodes[route[-1]]
        t_lar = large_inference_time(w, 1.0, cpt.compute_capacity_ops, cpt.utilization)
        delay = TaskDelay(model=0.0, feature=0.0, data=t_d, large=t_lar, local=0.0)
        outcomes.append(_outcome(task.task_id, 1.0, delay))
    return EvaluationResult(
        alphas=(1.0,) * instance.num_tasks,
        objective=float(np.mean([o.delay.total for o in outcomes])),
        feasible=True,
        tasks=tuple(outcomes),
        statuses=("delivered",) * instance.num_tasks,
        routes=tuple({"model": None, "data": list(r)} for r in routes),
    )


def run_scheme(
    scheme: str,
    instance: Instance,
    policy: QmixPolicy | None = None,
    iterations: int = 10,
    reward: RewardConfig = RewardConfig(),
    router: str = "policy",
) -> EvaluationResult:
    """Evaluate one scheme on one instance.

    ``small_only`` and ``centralized_large`` never touch the learned policy;
    the other two route with it (or with shortest paths when ``router`` says
    so, used for the reference column in sweep outputs).
    """
    if scheme == SCHEME_SMALL_ONLY:
        return _small_only(instance)
    if scheme == SCHEME_CENTRALIZED:
        return _centralized_large(instance)
    if scheme == SCHEME_EVEN_SPLIT:
        return evaluate(instance, 0.5, policy=policy, reward=reward, router=router)
    if scheme == SCHEME_PROPOSED:
        out = run(
            instance, policy=policy, iterations=iterations, reward=reward,
            router=router,
        )
        return out.evaluation
    raise ConfigError(f"unknown scheme {scheme!r}; pick one of {ALL_SCHEMES}")


def _apply_sweep(
    sweep: str,
    value,
    workload: WorkloadConfig,
    hardware: HardwareProfile,
    iterations: int,
) -> tuple[WorkloadConfig, HardwareProfile, int]:
    if sweep == SWEEP_DATA_VOLUME:
        return dataclasses.replace(workload, frames=int(value)), hardware, iterations
    if sweep == SWEEP_COMPUTE:
        return (
            workload,
            dataclasses.replace(hardware, cpt_capacity_ops=float(value)),
            iterations,
        )
    return workload, hardware, int(value)


def _mean_components(result: EvaluationResult) -> dict:
    delays = [o.delay for o in result.tasks if o.delay is not None]
    if not delays:
        return {k: float("nan") for k in ("t_model", "t_feature", "t_data", "t_large", "t_local")}
    return {
        "t_model": float(np.mean([d.model for d in delays])),
        "t_feature": float(np.mean([d.feature for d in delays])),
        "t_data": float(np.mean([d.data for d in delays])),
        "t_large": float(np.mean([d.large for d in delays])),
        "t_local": float(np.mean([d.local for d in delays])),
    }


def run_grid(
    grid: ExperimentGrid,
    schemes: Sequence[str] = ALL_SCHEMES,
    policy: QmixPolicy | None = None,
    shell: ShellConfig = ShellConfig(num_planes=8, sats_per_plane=8),
    workload: WorkloadConfig = WorkloadConfig(),
    hardware: HardwareProfile = DEFAULT_HARDWARE,
    budget: LinkBudget = DEFAULT_LINK_BUDGET,
    n_remote_sensing: int = 6,
    n_computing: int = 3,
    iterations: int = 10,
    reward: RewardConfig = RewardConfig(),
    router: str = "policy",
) -> list[dict]:
    """Full sweep: one row per (value, seed, scheme), failures recorded.

    Placements are drawn per seed, so every scheme inside a cell sees the
    same topology, task sites and reference delays; only the swept knob and
    the scheme itself change.
    """
    for s in schemes:
        if s not in ALL_SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}")
    rows = []
    for value in grid.values:
        w, hw, iters = _apply_sweep(grid.sweep, value, workload, hardware, iterations)
        for seed in grid.seeds:
            try:
                instance = make_instance(
                    shell, w,
                    alphas=0.5,
                    n_remote_sensing=n_remote_sensing,
                    n_computing=n_computing,
                    hardware=hw,
                    budget=budget,
                    placement_rng=np.random.default_rng(int(seed)),
                )
            except (ConfigError, InfeasibleError, RouteError) as err:
                for scheme in schemes:
                    rows.append(_error_row(grid.sweep, value, scheme, seed, err))
                continue
            for scheme in schemes:
                try:
                    result = run_scheme(
                        scheme, instance, policy=policy, iterations=iters,
                        reward=reward, router=router,
                    )
                    row = {
                        "sweep": grid.sweep,
                        "value": value,
                        "scheme": scheme,
                        "seed": int(seed),
                        "objective": result.objective,
                        "objective_dijkstra": "",
                        "mean_t_bar": (
                            float(np.nanmean(result.t_bars))
                            if result.t_bars is not None
                            else float("nan")
                        ),
                        "delivered_frac": (
                            result.statuses.count("delivered") / len(result.statuses)
                            if result.statuses is not None
                            else 1.0
                        ),
                        "alphas": json.dumps([round(a, 6) for a in result.alphas]),
                        "iterations": iters if scheme == SCHEME_PROPOSED else "",
                        "error": "",
                        **_mean_components(result),
                    }
                    if scheme == SCHEME_EVEN_SPLIT:
                        ref = evaluate(instance, 0.5, router="dijkstra")
                        row["objective_dijkstra"] = ref.objective
                    rows.append(row)
                except (ConfigError, InfeasibleError, RouteError) as err:
                    rows.append(_error_row(grid.sweep, value, scheme, seed, err))
    return rows


def _error_row(sweep, value, scheme, seed, err) -> dict:
    row = {field: "" for field in CSV_FIELDS}
    row.update(
        sweep=sweep, value=value, scheme=scheme, seed=int(seed),
        objective=float("nan"), error=f"{type(err).__name__}: {err}",
    )
    return row


def write_rows(rows: Sequence[dict], path: str | Path) -> None:
    """Plot-ready CSV with a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in CSV_FIELDS})
