"""Walker delta constellation: shell generation, circular-orbit propagation,
and per-slot quasi-static topology snapshots with +grid inter-satellite links.

All positions are Earth-centered inertial, in kilometers. Orbits are circular
Keplerian with a shared mean motion; no perturbations are modeled because the
topology is only sampled once per (30 s by default) slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError

R_EARTH_KM = 6378.137
MU_EARTH_KM3_S2 = 398600.4418
C_LIGHT_M_S = 299_792_458.0
BOLTZMANN_J_K = 1.380649e-23

ROLE_REMOTE_SENSING = "remote_sensing"
ROLE_RELAY = "relay"
ROLE_COMPUTING = "computing"
ROLES = (ROLE_REMOTE_SENSING, ROLE_RELAY, ROLE_COMPUTING)

# Neighbor direction indices used by snapshots, the routing environment and
# the action space: up/down are the in-plane ring, left/right adjacent planes.
DIR_UP, DIR_DOWN, DIR_LEFT, DIR_RIGHT = 0, 1, 2, 3
KIND_INTRA, KIND_INTER = "intra_plane", "inter_plane"


@dataclass(frozen=True)
class ShellConfig:
    """Geometry of one Walker delta shell."""

    num_planes: int
    sats_per_plane: int
    altitude_km: float = 800.0
    inclination_deg: float = 30.0
    phase_offset: float = 0.0
    slot_seconds: float = 30.0

    def __post_init__(self):
        if self.num_planes < 1:
            raise ConfigError("num_planes must be >= 1")
        if self.sats_per_plane < 2:
            raise ConfigError("sats_per_plane must be >= 2")
        if self.altitude_km <= 0:
            raise ConfigError("altitude_km must be positive")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigError("inclination_deg must lie in [0, 180]")
        if not 0.0 <= self.phase_offset < 1.0:
            raise ConfigError("phase_offset must lie in [0, 1)")
        if self.slot_seconds <= 0:
            raise ConfigError("slot_seconds must be positive")

    @property
    def num_nodes(self) -> int:
        return self.num_planes * self.sats_per_plane

    @property
    def orbit_radius_km(self) -> float:
        return R_EARTH_KM + self.altitude_km

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_EARTH_KM3_S2 / self.orbit_radius_km**3)


@dataclass(frozen=True)
class HardwareProfile:
    """Per-role compute/relay parameters applied when building a shell."""

    rs_capacity_ops: float = 1.0e12  # 1 TOPS on remote sensing satellites
    cpt_capacity_ops: float = 1.0e13  # 10 TOPS on computing satellites
    utilization: float = 0.8
    relay_cost_s_per_bit: float = 1.0e-9

    def __post_init__(self):
        if self.rs_capacity_ops <= 0 or self.cpt_capacity_ops <= 0:
            raise ConfigError("compute capacities must be positive")
        if not 0.0 < self.utilization <= 1.0:
            raise ConfigError("utilization must lie in (0, 1]")
        if self.relay_cost_s_per_bit < 0:
            raise ConfigError("relay cost must be non-negative")


@dataclass(frozen=True)
class SatelliteNode:
    node_id: int
    role: str
    plane: int
    slot_in_plane: int
    compute_capacity_ops: float  # F_i, cycles/s (0 for pure relays)
    utilization: float  # gamma_i
    relay_cost_s_per_bit: float  # xi_j (0 for non-relay roles)


@dataclass(frozen=True)
class IslLink:
    u: int
    v: int
    length_m: float
    rate_bps: float
    kind: str
    usable: bool = True

    def __post_init__(self):
        if self.u == self.v:
            raise ConfigError("a link cannot connect a node to itself")
        if self.u > self.v:
            raise ConfigError("link endpoints must be in canonical (u < v) order")
        if self.length_m <= 0:
            raise ConfigError("link length must be positive")


@dataclass(frozen=True)
class LinkBudget:
    """Shannon-capacity link model with free-space path loss.

    Bandwidth and noise temperature are configuration values; the remaining
    defaults follow the 10 W / 30 dBi / 23 GHz / 1.5 dB margin setup.
    """

    tx_power_w: float = 10.0
    tx_gain_dbi: float = 30.0
    rx_gain_dbi: float = 30.0
    carrier_hz: float = 23.0e9
    margin_db: float = 1.5
    bandwidth_hz: float = 5.0e8
    noise_temp_k: float = 300.0


DEFAULT_LINK_BUDGET = LinkBudget()
DEFAULT_HARDWARE = HardwareProfile()


@dataclass(frozen=True)
class TopologySnapshot:
    """Frozen per-slot topology: node positions, grid links, neighbor table.

    ``neighbors[n, d]`` holds the node reached from ``n`` in direction ``d``
    (DIR_UP/DOWN/LEFT/RIGHT) or -1 when that direction has no plane to go to.
    """

    slot: int
    positions_km: np.ndarray
    links: tuple[IslLink, ...]
    neighbors: np.ndarray
    nodes: tuple[SatelliteNode, ...]
    link_index: Mapping[tuple[int, int], IslLink] = field(repr=False, default=None)

    def link_between(self, u: int, v: int) -> IslLink | None:
        return self.link_index.get((u, v) if u < v else (v, u))


def normalize_roles(
    config: ShellConfig, roles: Sequence[str] | Mapping[int, str]
) -> list[str]:
    n = config.num_nodes
    if isinstance(roles, Mapping):
        if set(roles.keys()) != set(range(n)):
            raise ConfigError(f"role map must cover node ids 0..{n - 1}")
        role_list = [roles[i] for i in range(n)]
    else:
        role_list = list(roles)
        if len(role_list) != n:
            raise ConfigError(f"expected {n} roles, got {len(role_list)}")
    for r in role_list:
        if r not in ROLES:
            raise ConfigError(f"unknown role {r!r}")
    if role_list.count(ROLE_COMPUTING) == 0:
        raise ConfigError("role assignment has zero computing satellites")
    if role_list.count(ROLE_REMOTE_SENSING) == 0:
        raise ConfigError("role assignment has zero remote sensing satellites")
    return role_list


def default_role_assignment(
    config: ShellConfig,
    n_remote_sensing: int,
    n_computing: int,
    rng: np.random.Generator | None = None,
) -> list[str]:
    """Assign roles over the shell, relays filling the remainder.

    Without an ``rng`` the special nodes are scattered deterministically and
    maximally apart along the flat node index; with one they are placed
    uniformly at random (used for training-time domain randomization).
    """
    n = config.num_nodes
    if n_remote_sensing < 1 or n_computing < 1:
        raise ConfigError("need at least one remote sensing and one computing node")
    if n_remote_sensing + n_computing > n:
        raise ConfigError("more special roles than nodes in the shell")
    roles = [ROLE_RELAY] * n
    if rng is not None:
        picks = rng.choice(n, size=n_remote_sensing + n_computing, replace=False)
        special = list(picks)
    else:
        special = []
        taken = set()
        for count, offset in ((n_computing, 0.0), (n_remote_sensing, 0.5)):
            for j in range(count):
                idx = int((j + offset) * n / count) % n
                while idx in taken:  # collision: advance to the next free slot
                    idx = (idx + 1) % n
                taken.add(idx)
                special.append(idx)
    for idx in special[:n_computing]:
        roles[idx] = ROLE_COMPUTING
    for idx in special[n_computing:]:
        roles[idx] = ROLE_REMOTE_SENSING
    return roles


def build_shell(
    config: ShellConfig,
    roles: Sequence[str] | Mapping[int, str],
    hardware: HardwareProfile = DEFAULT_HARDWARE,
) -> list[SatelliteNode]:
    """Instantiate all satellites with row-major (plane-major) indexing."""
    role_list = normalize_roles(config, roles)
    nodes = []
    for i, role in enumerate(role_list):
        plane, slot = divmod(i, config.sats_per_plane)
        if role == ROLE_REMOTE_SENSING:
            capacity, relay_cost = hardware.rs_capacity_ops, 0.0
        elif role == ROLE_COMPUTING:
            capacity, relay_cost = hardware.cpt_capacity_ops, 0.0
        else:
            capacity, relay_cost = 0.0, hardware.relay_cost_s_per_bit
        nodes.append(
            SatelliteNode(
                node_id=i,
                role=role,
                plane=plane,
                slot_in_plane=slot,
                compute_capacity_ops=capacity,
                utilization=hardware.utilization,
                relay_cost_s_per_bit=relay_cost,
            )
        )
    return nodes


def _anomalies_and_raans(config: ShellConfig, slot: int) -> tuple[np.ndarray, np.ndarray]:
    planes = np.arange(config.num_nodes) // config.sats_per_plane
    slots = np.arange(config.num_nodes) % config.sats_per_plane
    t = slot * config.slot_seconds
    raan = 2.0 * math.pi * planes / config.num_planes
    anomaly = (
        2.0 * math.pi * slots / config.sats_per_plane
        + 2.0 * math.pi * config.phase_offset * planes / config.sats_per_plane
        + config.mean_motion_rad_s * t
    )
    return anomaly, raan


def node_positions(config: ShellConfig, slot: int) -> np.ndarray:
    """ECI positions (km) of every node in the shell at the given slot."""
    anomaly, raan = _anomalies_and_raans(config, slot)
    inc = math.radians(config.inclination_deg)
    r = config.orbit_radius_km
    # in-plane circle, tilted by inclination about x, then rotated by RAAN about z
    x_o, y_o = r * np.cos(anomaly), r * np.sin(anomaly)
    y_i, z_i = y_o * math.cos(inc), y_o * math.sin(inc)
    x = x_o * np.cos(raan) - y_i * np.sin(raan)
    y = x_o * np.sin(raan) + y_i * np.cos(raan)
    return np.stack([x, y, z_i], axis=1)


def position_at(node: SatelliteNode, config: ShellConfig, slot: int) -> np.ndarray:
    return node_positions(config, slot)[node.node_id]


def link_rate(length_m: float, budget: LinkBudget = DEFAULT_LINK_BUDGET) -> float:
    """Achievable ISL rate in bits/s; 0 marks the link unusable."""
    if length_m <= 0:
        raise ConfigError("link length must be positive")
    gain = 10.0 ** ((budget.tx_gain_dbi + budget.rx_gain_dbi - budget.margin_db) / 10.0)
    path_loss = (4.0 * math.pi * length_m * budget.carrier_hz / C_LIGHT_M_S) ** 2
    noise_w = BOLTZMANN_J_K * budget.noise_temp_k * budget.bandwidth_hz
    snr = budget.tx_power_w * gain / (path_loss * noise_w)
    if snr <= 0.0:
        return 0.0
    return budget.bandwidth_hz * math.log2(1.0 + snr)


def neighbor_table(config: ShellConfig) -> np.ndarray:
    """(N, 4) array of neighbor node ids per direction, -1 where absent."""
    p_count, s_count = config.num_planes, config.sats_per_plane
    table = np.full((config.num_nodes, 4), -1, dtype=np.int64)
    for i in range(config.num_nodes):
        p, s = divmod(i, s_count)
        table[i, DIR_UP] = p * s_count + (s + 1) % s_count
        table[i, DIR_DOWN] = p * s_count + (s - 1) % s_count
        if p_count >= 2:
            table[i, DIR_LEFT] = ((p - 1) % p_count) * s_count + s
            table[i, DIR_RIGHT] = ((p + 1) % p_count) * s_count + s
    return table


def snapshot_topology(
    config: ShellConfig,
    nodes: Sequence[SatelliteNode],
    slot: int,
    budget: LinkBudget = DEFAULT_LINK_BUDGET,
) -> TopologySnapshot:
    """Build the +grid topology for one slot.

    Every node links to its in-plane predecessor/successor and to the
    same-slot node in each adjacent plane, with full wrap-around; duplicate
    edges from tiny rings (2 satellites or 2 planes) are collapsed.
    """
    if len(nodes) != config.num_nodes:
        raise ConfigError("node list does not match the shell size")
    positions = node_positions(config, slot)
    table = neighbor_table(config)
    edges: dict[tuple[int, int], str] = {}
    for i in range(config.num_nodes):
        for d, kind in ((DIR_UP, KIND_INTRA), (DIR_RIGHT, KIND_INTER)):
            j = int(table[i, d])
            if j >= 0 and j != i:
                edges.setdefault((min(i, j), max(i, j)), kind)
    links = []
    for (u, v), kind in sorted(edges.items()):
        length_m = float(np.linalg.norm(positions[u] - positions[v])) * 1000.0
        rate = link_rate(length_m, budget)
        links.append(
            IslLink(u=u, v=v, length_m=length_m, rate_bps=rate, kind=kind, usable=rate > 0.0)
        )
    return TopologySnapshot(
        slot=slot,
        positions_km=positions,
        links=tuple(links),
        neighbors=table,
        nodes=tuple(nodes),
        link_index={(l.u, l.v): l for l in links},
    )


def grid_hop_distance(p_count: int, s_count: int, a: int, b: int) -> int:
    """Hop distance on a wrap-around (p_count x s_count) torus of node ids."""
    pa, sa = divmod(a, s_count)
    pb, sb = divmod(b, s_count)
    dp = abs(pa - pb)
    ds = abs(sa - sb)
    if p_count >= 2:
        dp = min(dp, p_count - dp)
    ds = min(ds, s_count - ds)
    return dp + ds


def hop_distance(config: ShellConfig, a: int, b: int) -> int:
    return grid_hop_distance(config.num_planes, config.sats_per_plane, a, b)


def grid_diameter(config: ShellConfig) -> int:
    return config.num_planes // 2 + config.sats_per_plane // 2


def snapshot_to_dict(snapshot: TopologySnapshot) -> dict:
    """JSON-ready topology export: nodes with roles/positions, links with rates."""
    return {
        "slot": snapshot.slot,
        "nodes": [
            {
                "id": n.node_id,
                "role": n.role,
                "plane": n.plane,
                "slot_in_plane": n.slot_in_plane,
                "position_km": [float(c) for c in snapshot.positions_km[n.node_id]],
            }
            for n in snapshot.nodes
        ],
        "links": [
            {
                "u": l.u,
                "v": l.v,
                "length_m": l.length_m,
                "rate_bps": l.rate_bps,
                "kind": l.kind,
            }
            for l in snapshot.links
        ],
    }
