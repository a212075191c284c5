"""Cooperative multi-agent packet-routing environment over one topology slot.

Each task owns two packets routed in strict phases: first every computing
satellite pushes a model-update packet to its sensing satellite, then the
sensing satellites push their data packets to any computing satellite. One
agent per task steers whichever of its packets is live in the current phase
through {up, down, left, right} moves on the +grid, under an action mask that
forbids missing links, revisits, and forwarding through non-relay satellites.
Transitions are deterministic; the only reward arrives when the episode ends
and scores completed tasks plus a saturating bonus for beating a
shortest-path reference delay per task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constellation import (
    DIR_DOWN,
    DIR_LEFT,
    DIR_RIGHT,
    DIR_UP,
    ROLE_COMPUTING,
    ROLE_RELAY,
    ROLE_REMOTE_SENSING,
    DEFAULT_HARDWARE,
    DEFAULT_LINK_BUDGET,
    HardwareProfile,
    LinkBudget,
    ShellConfig,
    TopologySnapshot,
    build_shell,
    default_role_assignment,
    grid_diameter,
    grid_hop_distance,
    snapshot_topology,
)
from .delay import TaskDelay, link_loads, relay_loads, route_delay, validate_route
from .errors import ConfigError, ContractViolation, RouteError
from .paths import hop_nearest, shortest_route, shortest_route_to_any
from .workload import (
    WorkloadConfig,
    feature_extraction_time,
    large_inference_time,
    local_inference_time,
    solve_data_packet,
    solve_model_packet,
)

N_ACTIONS = 5
ACT_NOOP = 4

STATUS_LIVE = "live"
STATUS_DELIVERED = "delivered"
STATUS_FAILED = "failed"

PHASE_MODEL = "model"
PHASE_DATA = "data"


@dataclass(frozen=True)
class RewardConfig:
    """Terminal reward shaping: completion bounty plus delay-quality bonus."""

    delta: float = 10.0
    mu: float = 0.1
    r_complete: float = 1.0
    fail_norm: float = 10.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError("mu must be positive")
        if self.fail_norm <= 1.0:
            raise ConfigError("fail_norm must exceed 1 (a failed task is worse than the reference)")


@dataclass(frozen=True)
class TaskSetup:
    """One task's offload decision and precomputed on-board compute times."""

    task_id: int
    rs_node: int
    cpt_node: int
    alpha: float
    q_bar: float | None
    data_bits: float
    model_bits: float
    feature_time: float
    local_time: float

    @property
    def has_model_packet(self) -> bool:
        return self.model_bits > 0.0

    @property
    def has_data_packet(self) -> bool:
        return self.data_bits > 0.0

    @property
    def has_packets(self) -> bool:
        return self.has_model_packet or self.has_data_packet


@dataclass(frozen=True)
class Instance:
    """A fully specified routing problem bound to one topology snapshot."""

    config: ShellConfig
    snapshot: TopologySnapshot
    workload: WorkloadConfig
    tasks: tuple[TaskSetup, ...]
    t_ref: tuple[float, ...]

    @property
    def rs_nodes(self) -> list[int]:
        return [t.rs_node for t in self.tasks]

    @property
    def cpt_nodes(self) -> list[int]:
        return sorted(
            n.node_id for n in self.snapshot.nodes if n.role == ROLE_COMPUTING
        )

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)


def _large_time(instance: Instance, task: TaskSetup, cpt: int) -> float:
    node = instance.snapshot.nodes[cpt]
    if node.role != ROLE_COMPUTING:
        raise RouteError(f"node {cpt} is not a computing satellite")
    return large_inference_time(
        instance.workload, task.alpha, node.compute_capacity_ops, node.utilization
    )


def assemble_task_delays(
    instance: Instance,
    model_routes: Sequence[Sequence[int] | None],
    data_routes: Sequence[Sequence[int] | None],
) -> list[TaskDelay]:
    """Joint-load delay breakdown per task given both phases' routes.

    Packets of one phase are concurrent with each other only. Tasks pass None
    for each packet they do not own (no model update, or nothing offloaded);
    the large-model time of offloading tasks uses the computing satellite
    their data packet actually reached.
    """
    if len(model_routes) != instance.num_tasks or len(data_routes) != instance.num_tasks:
        raise RouteError("route lists must cover every task")
    m_link = link_loads([r for r in model_routes if r])
    m_node = relay_loads([r for r in model_routes if r])
    d_link = link_loads([r for r in data_routes if r])
    d_node = relay_loads([r for r in data_routes if r])
    out = []
    for task, m_route, d_route in zip(instance.tasks, model_routes, data_routes):
        t_m = 0.0
        if task.has_model_packet:
            if m_route is None:
                raise RouteError(f"task {task.task_id} expects a model route")
            if m_route[0] != task.cpt_node or m_route[-1] != task.rs_node:
                raise RouteError(f"model route of task {task.task_id} has wrong endpoints")
            t_m = route_delay(
                instance.snapshot, m_route, task.model_bits, m_link, m_node
            ).total
        elif m_route:
            raise RouteError(f"task {task.task_id} has no model packet to route")
        t_d, t_lar = 0.0, 0.0
        if task.has_data_packet:
            if d_route is None:
                raise RouteError(f"task {task.task_id} offloads but lacks a data route")
            if d_route[0] != task.rs_node:
                raise RouteError(f"data route of task {task.task_id} must start at its sensor")
            t_d = route_delay(
                instance.snapshot, d_route, task.data_bits, d_link, d_node
            ).total
            t_lar = _large_time(instance, task, d_route[-1])
        elif d_route:
            raise RouteError(f"task {task.task_id} has no data packet to route")
        out.append(
            TaskDelay(
                model=t_m,
                feature=task.feature_time,
                data=t_d,
                large=t_lar,
                local=task.local_time,
            )
        )
    return out


def reference_delays(
    config: ShellConfig,
    snapshot: TopologySnapshot,
    workload: WorkloadConfig,
    rs_nodes: Sequence[int],
    cpt_nodes: Sequence[int],
) -> list[float]:
    """Even-split shortest-path reference delay per task.

    Every task offloads half its frames and routes both packets along
    minimum-delay paths; the resulting totals (with joint loads) anchor the
    delay-normalization used by the terminal reward.
    """
    alpha = 0.5
    q_bar, data_bits, _ = solve_data_packet(workload, alpha)
    model_bits, _ = solve_model_packet(workload)
    model_routes, data_routes = [], []
    for rs in rs_nodes:
        got = shortest_route_to_any(snapshot, rs, cpt_nodes, data_bits)
        if got is None:
            raise RouteError(f"no computing satellite reachable from sensor {rs}")
        d_route, _, reached = got
        m_got = shortest_route(snapshot, reached, rs, model_bits)
        if m_got is None:
            raise RouteError(f"sensor {rs} unreachable from computing node {reached}")
        model_routes.append(m_got[0])
        data_routes.append(d_route)
    m_link, m_node = link_loads(model_routes), relay_loads(model_routes)
    d_link, d_node = link_loads(data_routes), relay_loads(data_routes)
    refs = []
    for rs, m_route, d_route in zip(rs_nodes, model_routes, data_routes):
        node = snapshot.nodes[rs]
        t_m = route_delay(snapshot, m_route, model_bits, m_link, m_node)
        t_d = route_delay(snapshot, d_route, data_bits, d_link, d_node)
        cpt = snapshot.nodes[d_route[-1]]
        t = TaskDelay(
            model=t_m.total,
            feature=feature_extraction_time(
                workload, alpha, node.compute_capacity_ops, node.utilization
            ),
            data=t_d.total,
            large=large_inference_time(
                workload, alpha, cpt.compute_capacity_ops, cpt.utilization
            ),
            local=local_inference_time(
                workload, alpha, node.compute_capacity_ops, node.utilization
            ),
        )
        refs.append(t.total)
    return refs


def make_instance(
    config: ShellConfig,
    workload: WorkloadConfig,
    alphas: Sequence[float] | float = 0.5,
    slot: int = 0,
    roles: Sequence[str] | None = None,
    n_remote_sensing: int = 6,
    n_computing: int = 3,
    hardware: HardwareProfile = DEFAULT_HARDWARE,
    budget: LinkBudget = DEFAULT_LINK_BUDGET,
    placement_rng: np.random.Generator | None = None,
    cpt_assignment: Sequence[int] | None = None,
) -> Instance:
    """Build a routing instance: topology, per-task packet sizes, references.

    ``alphas`` is one shared offloaded share or one per sensing satellite
    (ordered by node id). Computing-satellite association defaults to
    hop-nearest and can be pinned per task via ``cpt_assignment``.
    """
    if roles is None:
        roles = default_role_assignment(
            config, n_remote_sensing, n_computing, rng=placement_rng
        )
    nodes = build_shell(config, roles, hardware)
    snapshot = snapshot_topology(config, nodes, slot, budget)
    rs_nodes = sorted(n.node_id for n in nodes if n.role == ROLE_REMOTE_SENSING)
    cpt_nodes = sorted(n.node_id for n in nodes if n.role == ROLE_COMPUTING)
    if isinstance(alphas, (int, float)):
        alphas = [float(alphas)] * len(rs_nodes)
    if len(alphas) != len(rs_nodes):
        raise ConfigError(
            f"need one alpha per sensing satellite ({len(rs_nodes)}), got {len(alphas)}"
        )
    if cpt_assignment is not None and len(cpt_assignment) != len(rs_nodes):
        raise ConfigError("cpt_assignment must cover every task")
    tasks = []
    for i, (rs, alpha) in enumerate(zip(rs_nodes, alphas)):
        node = snapshot.nodes[rs]
        if cpt_assignment is not None:
            cpt = int(cpt_assignment[i])
            if snapshot.nodes[cpt].role != ROLE_COMPUTING:
                raise ConfigError(f"assigned node {cpt} is not a computing satellite")
        else:
            cpt = hop_nearest(snapshot, rs, cpt_nodes)
        # the model update is shipped regardless of alpha: the retained frames
        # are processed by the small detector, which must reach the accuracy
        # floor even when nothing is offloaded
        model_bits, _ = solve_model_packet(workload)
        if alpha > 0.0:
            q_bar, data_bits, _ = solve_data_packet(workload, alpha)
        else:
            q_bar, data_bits = None, 0.0
        tasks.append(
            TaskSetup(
                task_id=i,
                rs_node=rs,
                cpt_node=cpt,
                alpha=float(alpha),
                q_bar=q_bar,
                data_bits=data_bits,
                model_bits=model_bits,
                feature_time=feature_extraction_time(
                    workload, alpha, node.compute_capacity_ops, node.utilization
                ),
                local_time=local_inference_time(
                    workload, alpha, node.compute_capacity_ops, node.utilization
                ),
            )
        )
    refs = reference_delays(config, snapshot, workload, rs_nodes, cpt_nodes)
    return Instance(
        config=config,
        snapshot=snapshot,
        workload=workload,
        tasks=tuple(tasks),
        t_ref=tuple(refs),
    )


def episode_reward(
    t_bars: Sequence[float], n_delivered: int, reward: RewardConfig
) -> tuple[float, float, float]:
    """Terminal reward: completion bounty r0 plus delay-quality bonus r1.

    Each task contributes a sigmoid of its delay normalized by the reference;
    beating the reference pushes the contribution toward 1, failures (pinned
    at ``fail_norm``) toward 0. The exponent is clipped to keep exp() finite.
    """
    r0 = reward.r_complete * n_delivered
    r1 = 0.0
    for t_bar in t_bars:
        z = (t_bar - 1.0) / reward.mu
        r1 += 1.0 / (1.0 + math.exp(max(-500.0, min(500.0, z))))
    return r0 + reward.delta * r1, r0, r1


def _as_local_only(task: TaskSetup) -> TaskSetup:
    """Strip a failed task's packets so delay assembly skips it."""
    return TaskSetup(
        task_id=task.task_id,
        rs_node=task.rs_node,
        cpt_node=task.cpt_node,
        alpha=0.0,
        q_bar=None,
        data_bits=0.0,
        model_bits=0.0,
        feature_time=0.0,
        local_time=task.local_time,
    )


class _Packet:
    """Mutable routing state of one packet within its phase."""

    __slots__ = ("origin", "dest_nodes", "node", "visited", "route", "status", "delay")

    def __init__(self, origin: int, dest_nodes: frozenset[int]):
        self.origin = origin
        self.dest_nodes = dest_nodes
        self.node = origin
        self.visited = {origin}
        self.route = [origin]
        self.status = STATUS_LIVE if origin not in dest_nodes else STATUS_DELIVERED
        self.delay = 0.0


class RoutingEnv:
    """Deterministic two-phase packet-routing game over a frozen instance.

    Observations, the global state vector, and the action masks are all
    float/bool numpy arrays with one row per task agent. Submitting a masked
    action raises ContractViolation rather than being silently ignored.
    """

    def __init__(
        self,
        instance: Instance,
        reward: RewardConfig = RewardConfig(),
        step_limit_factor: int = 4,
    ):
        if instance.num_tasks == 0:
            raise ConfigError("instance has no tasks")
        if not any(t.has_packets for t in instance.tasks):
            raise ConfigError("no task offloads anything; nothing to route")
        self.instance = instance
        self.reward_cfg = reward
        self.n_agents = instance.num_tasks
        self.snapshot = instance.snapshot
        self.config = instance.config
        self.diameter = max(1, grid_diameter(instance.config))
        self.step_limit = step_limit_factor * (
            instance.config.num_planes + instance.config.sats_per_plane
        )
        self.cpt_nodes = frozenset(instance.cpt_nodes)
        self.obs_dim = 17 + self.n_agents
        # per task: both packets' (plane, slot, live, delivered, hops) records,
        # then phase flag, step fraction, and two aggregate load statistics
        self.state_dim = 10 * self.n_agents + 4
        self._reset_called = False

    # -- episode lifecycle -------------------------------------------------

    def reset(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        self.phase = PHASE_MODEL
        self.phase_steps = 0
        self.total_steps = 0
        self.done = False
        self.transcript: list[dict] = []
        self._link_use: dict[tuple[int, int], int] = {}
        self._relay_use: dict[int, int] = {}
        self.packets: dict[str, list[_Packet | None]] = {
            PHASE_MODEL: [],
            PHASE_DATA: [None] * self.n_agents,
        }
        for task in self.instance.tasks:
            if task.has_model_packet:
                self.packets[PHASE_MODEL].append(
                    _Packet(task.cpt_node, frozenset({task.rs_node}))
                )
            else:
                self.packets[PHASE_MODEL].append(None)
        self._fail_dead_ends()
        self._maybe_advance_phase()
        self._reset_called = True
        return self._observations(), self._state(), self.action_masks()

    def step(
        self, actions: Sequence[int]
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, bool, dict]:
        if not self._reset_called:
            raise ContractViolation("reset() must be called before step()")
        if self.done:
            raise ContractViolation("episode is done; reset() to start another")
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.n_agents,):
            raise ContractViolation(f"expected {self.n_agents} actions")
        masks = self.action_masks()
        for i, a in enumerate(actions):
            if not 0 <= a < N_ACTIONS:
                raise ContractViolation(f"agent {i}: action {a} out of range")
            if not masks[i, a]:
                raise ContractViolation(f"agent {i}: action {a} is masked")
        self.transcript.append(
            {
                "phase": self.phase,
                "step": self.total_steps,
                "actions": [int(a) for a in actions],
                "positions": [
                    (p.node if p is not None else -1) for p in self.packets[self.phase]
                ],
            }
        )
        for i, a in enumerate(actions):
            if a == ACT_NOOP:
                continue
            self._move(i, int(a))
        self.phase_steps += 1
        self.total_steps += 1
        if self.phase_steps >= self.step_limit:
            for p in self.packets[self.phase]:
                if p is not None and p.status == STATUS_LIVE:
                    p.status = STATUS_FAILED
        self._fail_dead_ends()
        self._maybe_advance_phase()
        reward = 0.0
        info: dict = {"phase": self.phase}
        if self.done:
            reward, extra = self._finalize()
            info.update(extra)
        return self._observations(), self._state(), self.action_masks(), reward, self.done, info

    # -- transition internals ----------------------------------------------

    def _move(self, agent: int, direction: int):
        packet = self.packets[self.phase][agent]
        if packet is None or packet.status != STATUS_LIVE:
            raise ContractViolation(f"agent {agent} has no live packet to move")
        nxt = int(self.snapshot.neighbors[packet.node, direction])
        key = (packet.node, nxt) if packet.node < nxt else (nxt, packet.node)
        self._link_use[key] = self._link_use.get(key, 0) + 1
        if packet.node != packet.origin:
            self._relay_use[packet.node] = self._relay_use.get(packet.node, 0) + 1
        link = self.snapshot.link_between(packet.node, nxt)
        size = self._packet_size(agent)
        if size > 0:
            packet.delay += size / link.rate_bps
        packet.delay += link.length_m / 299_792_458.0
        packet.node = nxt
        packet.visited.add(nxt)
        packet.route.append(nxt)
        if nxt in packet.dest_nodes:
            packet.status = STATUS_DELIVERED

    def _packet_size(self, agent: int) -> float:
        task = self.instance.tasks[agent]
        return task.model_bits if self.phase == PHASE_MODEL else task.data_bits

    def _legal_directions(self, packet: _Packet) -> list[bool]:
        legal = []
        for d in range(4):
            v = int(self.snapshot.neighbors[packet.node, d])
            if v < 0 or v in packet.visited:
                legal.append(False)
                continue
            role = self.snapshot.nodes[v].role
            if role != ROLE_RELAY and v not in packet.dest_nodes:
                legal.append(False)
                continue
            link = self.snapshot.link_between(packet.node, v)
            legal.append(link is not None and link.usable)
        return legal

    def _fail_dead_ends(self):
        for p in self.packets[self.phase]:
            if p is not None and p.status == STATUS_LIVE and not any(
                self._legal_directions(p)
            ):
                p.status = STATUS_FAILED

    def _maybe_advance_phase(self):
        if self.phase == PHASE_MODEL and self._phase_settled(PHASE_MODEL):
            self.phase = PHASE_DATA
            self.phase_steps = 0
            self._link_use.clear()
            self._relay_use.clear()
            for task in self.instance.tasks:
                if not task.has_data_packet:
                    continue
                model_p = self.packets[PHASE_MODEL][task.task_id]
                if model_p is None or model_p.status == STATUS_DELIVERED:
                    self.packets[PHASE_DATA][task.task_id] = _Packet(
                        task.rs_node, self.cpt_nodes
                    )
                else:
                    # the model update never arrived: the task is already
                    # failed, its data packet is never launched
                    dead = _Packet(task.rs_node, self.cpt_nodes)
                    dead.status = STATUS_FAILED
                    self.packets[PHASE_DATA][task.task_id] = dead
            self._fail_dead_ends()
        if self.phase == PHASE_DATA and self._phase_settled(PHASE_DATA):
            self.done = True

    def _phase_settled(self, phase: str) -> bool:
        return all(
            p is None or p.status != STATUS_LIVE for p in self.packets[phase]
        )

    # -- terminal accounting -------------------------------------------------

    def task_statuses(self) -> list[str]:
        """delivered / failed per task (failed means any owned packet failed)."""
        out = []
        for task in self.instance.tasks:
            m = self.packets[PHASE_MODEL][task.task_id]
            d = self.packets[PHASE_DATA][task.task_id]
            ok = True
            if task.has_model_packet:
                ok = ok and m is not None and m.status == STATUS_DELIVERED
            if task.has_data_packet:
                ok = ok and d is not None and d.status == STATUS_DELIVERED
            out.append(STATUS_DELIVERED if ok else STATUS_FAILED)
        return out

    def extract_routes(self) -> list[dict]:
        """Per task: the realized model/data routes (None when not delivered)."""
        out = []
        for task in self.instance.tasks:
            m = self.packets[PHASE_MODEL][task.task_id]
            d = self.packets[PHASE_DATA][task.task_id]
            out.append(
                {
                    "model": list(m.route) if m is not None and m.status == STATUS_DELIVERED else None,
                    "data": list(d.route) if d is not None and d.status == STATUS_DELIVERED else None,
                }
            )
        return out

    def _finalize(self) -> tuple[float, dict]:
        statuses = self.task_statuses()
        routes = self.extract_routes()
        model_routes = [
            r["model"] if s == STATUS_DELIVERED else None
            for r, s in zip(routes, statuses)
        ]
        data_routes = [
            r["data"] if s == STATUS_DELIVERED else None
            for r, s in zip(routes, statuses)
        ]
        # failed offloading tasks keep None routes, which the assembler treats
        # as "nothing to account": feed it a masked task list instead
        masked_tasks = tuple(
            task if status == STATUS_DELIVERED else _as_local_only(task)
            for task, status in zip(self.instance.tasks, statuses)
        )
        masked = Instance(
            config=self.instance.config,
            snapshot=self.instance.snapshot,
            workload=self.instance.workload,
            tasks=masked_tasks,
            t_ref=self.instance.t_ref,
        )
        assembled = assemble_task_delays(masked, model_routes, data_routes)
        delays: list[TaskDelay | None] = []
        t_bars = []
        for i, status in enumerate(statuses):
            if status == STATUS_DELIVERED:
                delays.append(assembled[i])
                t_bars.append(assembled[i].total / self.instance.t_ref[i])
            else:
                delays.append(None)
                t_bars.append(self.reward_cfg.fail_norm)
        n_delivered = statuses.count(STATUS_DELIVERED)
        rho, r0, r1 = episode_reward(t_bars, n_delivered, self.reward_cfg)
        info = {
            "statuses": statuses,
            "routes": routes,
            "delays": delays,
            "t_bars": t_bars,
            "reward_complete": r0,
            "reward_delay": r1,
            "mean_total_delay": (
                float(np.mean([d.total for d in delays if d is not None]))
                if any(d is not None for d in delays)
                else float("nan")
            ),
        }
        return rho, info

    # -- agent views ---------------------------------------------------------

    def action_masks(self) -> np.ndarray:
        masks = np.zeros((self.n_agents, N_ACTIONS), dtype=bool)
        for i in range(self.n_agents):
            p = self.packets[self.phase][i]
            if self.done or p is None or p.status != STATUS_LIVE:
                masks[i, ACT_NOOP] = True
                continue
            legal = self._legal_directions(p)
            if any(legal):
                masks[i, :4] = legal
            else:  # unreachable: dead ends are failed eagerly in step()
                masks[i, ACT_NOOP] = True
        return masks

    def _observations(self) -> np.ndarray:
        obs = np.zeros((self.n_agents, self.obs_dim), dtype=np.float64)
        n = self.n_agents
        for i, task in enumerate(self.instance.tasks):
            p = self.packets[self.phase][i]
            col = 0
            obs[i, col] = 1.0 if (p is not None and p.status == STATUS_LIVE) else 0.0
            col += 1
            obs[i, col] = 1.0 if self.phase == PHASE_DATA else 0.0
            col += 1
            obs[i, col + i] = 1.0
            col += n
            if p is not None:
                node = p.node
                # availability = link present AND currently usable by this
                # packet (not yet visited, right-role endpoint)
                if p.status == STATUS_LIVE:
                    legal = self._legal_directions(p)
                    for d in range(4):
                        obs[i, col + d] = 1.0 if legal[d] else 0.0
                col += 4
                obs[i, col] = min(1.0, self._dest_hops(p) / self.diameter)
                col += 1
                for d in range(4):
                    v = int(self.snapshot.neighbors[node, d])
                    if v >= 0:
                        key = (node, v) if node < v else (v, node)
                        obs[i, col + d] = min(1.0, self._link_use.get(key, 0) / n)
                col += 4
                for d in range(4):
                    v = int(self.snapshot.neighbors[node, d])
                    if v >= 0:
                        obs[i, col + d] = min(1.0, self._relay_use.get(v, 0) / n)
                col += 4
                obs[i, col] = min(1.0, p.delay / self.instance.t_ref[i])
                col += 1
                obs[i, col] = 1.0 if p.status == STATUS_DELIVERED else 0.0
            # tasks without packets keep zeros: no links, no congestion, done
        return obs

    def _dest_hops(self, packet: _Packet) -> int:
        p_count = self.config.num_planes
        s_count = self.config.sats_per_plane
        return min(
            grid_hop_distance(p_count, s_count, packet.node, d)
            for d in packet.dest_nodes
        )

    def _packet_record(self, packet: _Packet | None, rest_node: int) -> list[float]:
        """(plane, slot, live, delivered, hops) of one packet, normalized."""
        p_count = self.config.num_planes
        s_count = self.config.sats_per_plane
        if packet is None:
            node, live, delivered, hops = rest_node, 0.0, 0.0, 0
        else:
            node = packet.node
            live = 1.0 if packet.status == STATUS_LIVE else 0.0
            delivered = 1.0 if packet.status == STATUS_DELIVERED else 0.0
            hops = len(packet.route) - 1
        plane, slot = divmod(node, s_count)
        return [
            plane / p_count,
            slot / s_count,
            live,
            delivered,
            min(1.0, hops / self.step_limit),
        ]

    def _state(self) -> np.ndarray:
        x = np.zeros(self.state_dim, dtype=np.float64)
        for i, task in enumerate(self.instance.tasks):
            model_p = self.packets[PHASE_MODEL][i]
            data_p = self.packets[PHASE_DATA][i]
            rec = self._packet_record(model_p, task.cpt_node)
            rec += self._packet_record(data_p, task.rs_node)
            x[10 * i : 10 * (i + 1)] = rec
        base = 10 * self.n_agents
        x[base + 0] = 1.0 if self.phase == PHASE_DATA else 0.0
        x[base + 1] = min(1.0, self.phase_steps / self.step_limit)
        total_use = sum(self._link_use.values())
        x[base + 2] = min(1.0, total_use / max(1, self.n_agents * self.diameter))
        x[base + 3] = min(1.0, max(self._link_use.values(), default=0) / self.n_agents)
        return x
