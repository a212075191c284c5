"""Bisection search over per-task offload ratios around the routing policy.

Each iteration evaluates one shared routing episode at the current ratio
vector, then moves every task's interval endpoint according to a balance
test between its two delay branches: when local inference dominates, the
task should offload more, otherwise less. The search keeps the best iterate
seen (the raw stop-on-worsening rule could hand back a worse point) and
stops early once a feasible iteration fails to improve on the previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .delay import TaskDelay
from .errors import ConfigError, InfeasibleError
from .paths import shortest_route, shortest_route_to_any
from .qmix.training import QmixPolicy, evaluate_policy
from .routing_env import (
    Instance,
    RewardConfig,
    RoutingEnv,
    TaskSetup,
    assemble_task_delays,
)
from .workload import (
    feature_extraction_time,
    local_inference_time,
    solve_data_packet,
    solve_model_packet,
)

ROUTER_POLICY = "policy"
ROUTER_DIJKSTRA = "dijkstra"
ROUTERS = (ROUTER_POLICY, ROUTER_DIJKSTRA)

CAUSE_ROUTE_FAILED = "route_failed"


@dataclass(frozen=True)
class TaskOutcome:
    """One task's share of an evaluation: branch delays or a failure cause."""

    task_id: int
    alpha: float
    feasible: bool
    cause: str | None = None
    local_time: float = 0.0
    offload_time: float = 0.0  # data-packet delay plus large-model time
    delay: TaskDelay | None = None

    @property
    def idle_time(self) -> float:
        """Computing-side slack while local inference still runs."""
        return max(0.0, self.local_time - self.offload_time)

    @property
    def total(self) -> float:
        return self.delay.total if self.delay is not None else float("nan")


@dataclass(frozen=True)
class EvaluationResult:
    """Joint outcome of one ratio vector: per-task branches and the mean."""

    alphas: tuple[float, ...]
    objective: float
    feasible: bool
    tasks: tuple[TaskOutcome, ...]
    statuses: tuple[str, ...] | None = None
    routes: tuple[dict, ...] | None = None
    t_bars: tuple[float, ...] | None = None


@dataclass
class BisectionState:
    """Joint interval state of the search across all tasks."""

    alpha_low: np.ndarray
    alpha_up: np.ndarray
    alpha: np.ndarray
    iteration: int = 0
    previous_objective: float = float("nan")
    best_objective: float = float("inf")
    best_alpha: np.ndarray | None = None
    best_result: EvaluationResult | None = None

    @classmethod
    def initial(cls, n_tasks: int) -> "BisectionState":
        low = np.zeros(n_tasks)
        up = np.ones(n_tasks)
        return cls(alpha_low=low, alpha_up=up, alpha=(low + up) / 2.0)


@dataclass(frozen=True)
class RunResult:
    """Best iterate of a bisection run plus its full per-iteration history."""

    alphas: tuple[float, ...]
    objective: float
    evaluation: EvaluationResult
    history: tuple[dict, ...]
    iterations: int
    stopped_early: bool


def _rebuild_tasks(instance: Instance, alphas: np.ndarray,
                   cpt_assign: Sequence[int]) -> tuple[TaskSetup, ...]:
    """Re-solve both packet subproblems at the new ratios; keep placements."""
    w = instance.workload
    model_bits, _ = solve_model_packet(w)
    tasks = []
    for old, alpha, cpt in zip(instance.tasks, alphas, cpt_assign):
        node = instance.snapshot.nodes[old.rs_node]
        if alpha > 0.0:
            q_bar, data_bits, _ = solve_data_packet(w, float(alpha))
        else:
            q_bar, data_bits = None, 0.0
        tasks.append(
            TaskSetup(
                task_id=old.task_id,
                rs_node=old.rs_node,
                cpt_node=int(cpt),
                alpha=float(alpha),
                q_bar=q_bar,
                data_bits=data_bits,
                model_bits=model_bits,
                feature_time=feature_extraction_time(
                    w, float(alpha), node.compute_capacity_ops, node.utilization
                ),
                local_time=local_inference_time(
                    w, float(alpha), node.compute_capacity_ops, node.utilization
                ),
            )
        )
    return tuple(tasks)


def _dijkstra_episode(inst: Instance) -> tuple[list, list]:
    """Shortest-path routes for both phases (the non-learned router)."""
    model_routes, data_routes = [], []
    cpts = inst.cpt_nodes
    for task in inst.tasks:
        if task.has_data_packet:
            got = shortest_route_to_any(inst.snapshot, task.rs_node, cpts, task.data_bits)
            data_routes.append(got[0] if got else None)
        else:
            data_routes.append(None)
        if task.has_model_packet:
            origin = data_routes[-1][-1] if data_routes[-1] else task.cpt_node
            got = shortest_route(inst.snapshot, origin, task.rs_node, task.model_bits)
            model_routes.append(got[0] if got else None)
        else:
            model_routes.append(None)
    return model_routes, data_routes


def evaluate(
    instance: Instance,
    alphas: Sequence[float] | float,
    policy: QmixPolicy | None = None,
    reward: RewardConfig = RewardConfig(),
    router: str = ROUTER_POLICY,
    cpt_assignment: Sequence[int] | None = None,
) -> EvaluationResult:
    """Objective of one ratio vector under one shared routing episode.

    Packet subproblems are re-solved per task; any accuracy infeasibility or
    undelivered packet flags the result rather than raising, so the search
    loop can steer around it. The objective is the mean total delay over all
    tasks and only exists when every task is feasible and delivered.
    """
    n = instance.num_tasks
    if isinstance(alphas, (int, float)):
        alphas = [float(alphas)] * n
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.shape != (n,):
        raise ConfigError(f"need one ratio per task ({n}), got shape {alphas.shape}")
    if np.any((alphas < 0.0) | (alphas > 1.0)):
        raise ConfigError("offload ratios must lie in [0, 1]")
    if router not in (ROUTER_POLICY, ROUTER_DIJKSTRA):
        raise ConfigError(f"unknown router {router!r}")
    if router == ROUTER_POLICY and policy is None:
        raise ConfigError("the learned router needs a trained policy")
    cpt_assign = (
        [t.cpt_node for t in instance.tasks]
        if cpt_assignment is None
        else list(cpt_assignment)
    )

    causes: dict[int, str] = {}
    try_tasks = []
    w = instance.workload
    for task_id, alpha in enumerate(alphas):
        try:
            if alpha > 0.0:
                solve_data_packet(w, float(alpha))
            try_tasks.append(task_id)
        except InfeasibleError as err:
            causes[task_id] = err.cause or "infeasible"
    if causes:
        outcomes = tuple(
            TaskOutcome(
                task_id=i,
                alpha=float(alphas[i]),
                feasible=i not in causes,
                cause=causes.get(i),
            )
            for i in range(n)
        )
        return EvaluationResult(
            alphas=tuple(float(a) for a in alphas),
            objective=float("nan"),
            feasible=False,
            tasks=outcomes,
        )

    inst = Instance(
        config=instance.config,
        snapshot=instance.snapshot,
        workload=instance.workload,
        tasks=_rebuild_tasks(instance, alphas, cpt_assign),
        t_ref=instance.t_ref,
    )
    if router == ROUTER_POLICY:
        env = RoutingEnv(inst, reward)
        _, info = evaluate_policy(env, policy)
        statuses = info["statuses"]
        routes = info["routes"]
        delays = info["delays"]
        t_bars = info["t_bars"]
    else:
        model_routes, data_routes = _dijkstra_episode(inst)
        effective = [
            d[-1] if d else t.cpt_node for t, d in zip(inst.tasks, data_routes)
        ]
        if effective != [t.cpt_node for t in inst.tasks]:
            # model updates originate where the data actually landed
            inst = Instance(
                config=inst.config,
                snapshot=inst.snapshot,
                workload=inst.workload,
                tasks=_rebuild_tasks(instance, alphas, effective),
                t_ref=inst.t_ref,
            )
        statuses, routes = [], []
        for task, m, d in zip(inst.tasks, model_routes, data_routes):
            ok = (m is not None or not task.has_model_packet) and (
                d is not None or not task.has_data_packet
            )
            statuses.append("delivered" if ok else "failed")
            routes.append({"model": m, "data": d})
        if all(s == "delivered" for s in statuses):
            delays = assemble_task_delays(inst, model_routes, data_routes)
            t_bars = [d.total / r for d, r in zip(delays, inst.t_ref)]
        else:
            delays = [None] * n
            t_bars = [float("nan")] * n

    outcomes = []
    for task, status, delay in zip(inst.tasks, statuses, delays):
        if status != "delivered" or delay is None:
            outcomes.append(
                TaskOutcome(
                    task_id=task.task_id,
                    alpha=task.alpha,
                    feasible=False,
                    cause=CAUSE_ROUTE_FAILED,
                    local_time=task.local_time,
                )
            )
            continue
        outcomes.append(
            TaskOutcome(
                task_id=task.task_id,
                alpha=task.alpha,
                feasible=True,
                local_time=delay.local,
                offload_time=delay.data + delay.large,
                delay=delay,
            )
        )
    all_ok = all(o.feasible for o in outcomes)
    objective = (
        float(np.mean([o.delay.total for o in outcomes])) if all_ok else float("nan")
    )
    return EvaluationResult(
        alphas=tuple(float(a) for a in alphas),
        objective=objective,
        feasible=all_ok,
        tasks=tuple(outcomes),
        statuses=tuple(statuses),
        routes=tuple(routes),
        t_bars=tuple(float(t) for t in t_bars),
    )


def bisect_update(state: BisectionState, result: EvaluationResult) -> BisectionState:
    """Move every task's interval endpoint from its own balance test.

    Local inference dominating the offload branch means the task can afford
    to ship more frames, so the lower endpoint rises; the opposite shrinks
    from above. A task whose packet sizing was infeasible at this ratio can
    only be cured by offloading more. Routing failures leave the interval
    untouched (the branch delays never materialized).
    """
    for outcome in result.tasks:
        i = outcome.task_id
        a = state.alpha[i]
        if outcome.feasible:
            if outcome.local_time > outcome.offload_time:
                state.alpha_low[i] = a
            else:
                state.alpha_up[i] = a
        elif outcome.cause and outcome.cause != CAUSE_ROUTE_FAILED:
            state.alpha_low[i] = a
    state.alpha = (state.alpha_low + state.alpha_up) / 2.0
    state.iteration += 1
    return state


def bisect_search(
    evaluate_fn: Callable[[np.ndarray], EvaluationResult],
    n_tasks: int,
    iterations: int = 10,
    early_stop: bool = True,
) -> tuple[BisectionState, list[dict]]:
    """Generic joint bisection loop over any per-task evaluation.

    Tracks the best feasible iterate; the early-termination comparison only
    looks at consecutive feasible iterations, so an infeasible probe cannot
    end the search by itself.
    """
    if iterations < 1:
        raise ConfigError("need at least one bisection iteration")
    state = BisectionState.initial(n_tasks)
    history: list[dict] = []
    for k in range(1, iterations + 1):
        alphas = state.alpha.copy()
        result = evaluate_fn(alphas)
        record = {
            "iteration": k,
            "alphas": [float(a) for a in alphas],
            "objective": result.objective,
            "feasible": result.feasible,
            "t_loc": [o.local_time for o in result.tasks],
            "t_offload": [o.offload_time for o in result.tasks],
            "idle": [o.idle_time for o in result.tasks],
            "causes": [o.cause for o in result.tasks],
        }
        history.append(record)
        worsened = False
        if result.feasible:
            if result.objective < state.best_objective:
                state.best_objective = result.objective
                state.best_alpha = alphas
                state.best_result = result
            if not math.isnan(state.previous_objective):
                worsened = result.objective > state.previous_objective
            state.previous_objective = result.objective
        bisect_update(state, result)
        if early_stop and worsened:
            break
    return state, history


def run(
    instance: Instance,
    policy: QmixPolicy | None = None,
    iterations: int = 10,
    early_stop: bool = True,
    reward: RewardConfig = RewardConfig(),
    router: str = ROUTER_POLICY,
) -> RunResult:
    """Full ratio search on one instance; returns the best iterate found.

    The computing satellite each model update originates from starts at the
    instance's hop-nearest association and then follows wherever the task's
    data packet actually landed in the latest feasible evaluation.
    """
    cpt_assign = [t.cpt_node for t in instance.tasks]

    def eval_fn(alphas: np.ndarray) -> EvaluationResult:
        result = evaluate(
            instance, alphas, policy=policy, reward=reward, router=router,
            cpt_assignment=cpt_assign,
        )
        if result.feasible and result.routes is not None:
            for task_id, route in enumerate(result.routes):
                if route["data"]:
                    cpt_assign[task_id] = int(route["data"][-1])
        return result

    state, history = bisect_search(
        eval_fn, instance.num_tasks, iterations=iterations, early_stop=early_stop
    )
    if state.best_result is None:
        per_task = {
            i: cause
            for i, cause in enumerate(history[-1]["causes"])
            if cause is not None
        }
        raise InfeasibleError(
            f"no feasible iterate in {len(history)} iterations; "
            f"per-task causes: {per_task}",
            cause="no_feasible_iterate",
        )
    return RunResult(
        alphas=tuple(float(a) for a in state.best_alpha),
        objective=state.best_objective,
        evaluation=state.best_result,
        history=tuple(history),
        iterations=len(history),
        stopped_early=len(history) < iterations,
    )
