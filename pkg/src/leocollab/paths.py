"""Shortest-delay routing over a topology snapshot.

Dijkstra over the +grid with the unloaded single-packet delay as edge weight:
transmission at the link rate, light-speed propagation, and the
store-and-forward charge at every node that ends up relaying the packet.
Intermediate hops are restricted to relay satellites; sensing and computing
nodes can only ever be endpoints. Loaded (concurrent) delays are recomputed
afterwards by the delay module once all routes of a phase are known.
"""

from __future__ import annotations

import heapq
from typing import Iterable, Sequence

from .constellation import (
    C_LIGHT_M_S,
    ROLE_RELAY,
    TopologySnapshot,
    grid_hop_distance,
)
from .errors import RouteError


def _edge_weight(snapshot: TopologySnapshot, u: int, v: int, size_bits: float, is_terminal: bool) -> float | None:
    link = snapshot.link_between(u, v)
    if link is None or not link.usable:
        return None
    w = link.length_m / C_LIGHT_M_S
    if size_bits > 0:
        w += size_bits / link.rate_bps
        if not is_terminal:
            w += snapshot.nodes[v].relay_cost_s_per_bit * size_bits
    return w


def shortest_route(
    snapshot: TopologySnapshot,
    src: int,
    dst: int,
    size_bits: float,
) -> tuple[list[int], float] | None:
    """Minimum-delay route from src to dst, or None when unreachable."""
    result = shortest_route_to_any(snapshot, src, [dst], size_bits)
    return None if result is None else result[:2]


def shortest_route_to_any(
    snapshot: TopologySnapshot,
    src: int,
    destinations: Iterable[int],
    size_bits: float,
) -> tuple[list[int], float, int] | None:
    """Minimum-delay route from src to the cheapest of several destinations.

    Returns ``(route, cost_seconds, reached)`` or None when no destination is
    reachable through relay intermediates.
    """
    n = len(snapshot.nodes)
    targets = set(destinations)
    if not targets:
        raise RouteError("no destinations given")
    for node in targets | {src}:
        if not 0 <= node < n:
            raise RouteError(f"unknown node {node}")
    if size_bits < 0:
        raise RouteError("packet size must be non-negative")
    if src in targets:
        return [src], 0.0, src
    dist = {src: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, src)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in targets:
            route = [u]
            while route[-1] != src:
                route.append(prev[route[-1]])
            return route[::-1], d, u
        for v in snapshot.neighbors[u]:
            v = int(v)
            if v < 0 or v in done:
                continue
            terminal = v in targets
            # only relays may forward; anything else must be a terminus
            if not terminal and snapshot.nodes[v].role != ROLE_RELAY:
                continue
            w = _edge_weight(snapshot, u, v, size_bits, terminal)
            if w is None:
                continue
            nd = d + w
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return None


def hop_nearest(
    snapshot: TopologySnapshot, src: int, candidates: Sequence[int]
) -> int:
    """Candidate with the fewest grid hops from src; ties break on node id."""
    if not candidates:
        raise RouteError("no candidates given")
    planes = max(node.plane for node in snapshot.nodes) + 1
    slots = max(node.slot_in_plane for node in snapshot.nodes) + 1
    best = None
    for c in sorted(candidates):
        d = grid_hop_distance(planes, slots, src, c)
        if best is None or d < best[0]:
            best = (d, c)
    return best[1]
