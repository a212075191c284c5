"""End-to-end delay accounting for packets routed over a topology snapshot.

A route is a node-id sequence from source to destination. Per traversed link
the packet pays a transmission term stretched by how many concurrent packets
share that link, plus propagation at light speed; every intermediate node
charges a store-and-forward processing term scaled by how many packets it is
relaying. Task-level delay composes the model-packet route, on-board feature
extraction, and the slower of the offload branch (data route plus large-model
inference) and the local branch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .constellation import C_LIGHT_M_S, TopologySnapshot
from .errors import RouteError

Route = Sequence[int]


@dataclass(frozen=True)
class RouteDelay:
    transmission: float
    propagation: float
    processing: float

    @property
    def total(self) -> float:
        return self.transmission + self.propagation + self.processing


@dataclass(frozen=True)
class TaskDelay:
    """Delay breakdown of one task; all fields in seconds."""

    model: float
    feature: float
    data: float
    large: float
    local: float

    @property
    def offload_branch(self) -> float:
        return self.data + self.large

    @property
    def total(self) -> float:
        return self.model + self.feature + max(self.offload_branch, self.local)


def validate_route(
    snapshot: TopologySnapshot, route: Route, relays_only: bool = False
) -> None:
    """Check a route is walkable on the snapshot; optionally restrict
    intermediate hops to relay satellites."""
    if len(route) < 1:
        raise RouteError("route must contain at least the source node")
    n = len(snapshot.nodes)
    for node in route:
        if not 0 <= node < n:
            raise RouteError(f"route references unknown node {node}")
    if len(set(route)) != len(route):
        raise RouteError("route revisits a node")
    for u, v in zip(route, route[1:]):
        link = snapshot.link_between(u, v)
        if link is None:
            raise RouteError(f"no link between {u} and {v}")
        if not link.usable:
            raise RouteError(f"link {u}-{v} is unusable in this slot")
    if relays_only:
        for node in route[1:-1]:
            if snapshot.nodes[node].role != "relay":
                raise RouteError(
                    f"intermediate node {node} has role "
                    f"{snapshot.nodes[node].role!r}, expected a relay"
                )


def link_loads(routes: Iterable[Route]) -> Counter:
    """Concurrent-packet count per canonical (u, v) link."""
    loads: Counter = Counter()
    for route in routes:
        for u, v in zip(route, route[1:]):
            loads[(u, v) if u < v else (v, u)] += 1
    return loads


def relay_loads(routes: Iterable[Route]) -> Counter:
    """Concurrent-packet count per intermediate (store-and-forward) node."""
    loads: Counter = Counter()
    for route in routes:
        for node in route[1:-1]:
            loads[node] += 1
    return loads


def route_delay(
    snapshot: TopologySnapshot,
    route: Route,
    size_bits: float,
    shared_link_loads: Counter | None = None,
    shared_relay_loads: Counter | None = None,
) -> RouteDelay:
    """Delay of one packet along its route under the given concurrent loads.

    With no shared loads the packet is treated as alone in its phase (every
    multiplier is 1). A single-node route is a delivered-in-place packet and
    costs nothing.
    """
    validate_route(snapshot, route)
    if size_bits < 0:
        raise RouteError("packet size must be non-negative")
    if shared_link_loads is None:
        shared_link_loads = link_loads([route])
    if shared_relay_loads is None:
        shared_relay_loads = relay_loads([route])
    tran = prop = proc = 0.0
    for u, v in zip(route, route[1:]):
        link = snapshot.link_between(u, v)
        key = (u, v) if u < v else (v, u)
        load = max(1, shared_link_loads[key])
        if size_bits > 0 and link.rate_bps <= 0:
            raise RouteError(f"link {u}-{v} has zero rate")
        if size_bits > 0:
            tran += size_bits * load / link.rate_bps
        prop += link.length_m / C_LIGHT_M_S
    for node in route[1:-1]:
        count = max(1, shared_relay_loads[node])
        proc += snapshot.nodes[node].relay_cost_s_per_bit * size_bits * count
    return RouteDelay(transmission=tran, propagation=prop, processing=proc)
