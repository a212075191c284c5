import itertools

import numpy as np
import pytest

from leocollab.constellation import (
    C_LIGHT_M_S,
    ShellConfig,
    build_shell,
    snapshot_topology,
)
from leocollab.delay import route_delay
from leocollab.errors import RouteError
from leocollab.paths import hop_nearest, shortest_route, shortest_route_to_any


def build_snap(num_planes, sats_per_plane, rs_nodes=(), cpt_nodes=(), slot=0):
    cfg = ShellConfig(num_planes=num_planes, sats_per_plane=sats_per_plane)
    roles = ["relay"] * cfg.num_nodes
    for i in rs_nodes:
        roles[i] = "remote_sensing"
    for i in cpt_nodes:
        roles[i] = "computing"
    return cfg, snapshot_topology(cfg, build_shell(cfg, roles), slot)


def enumerate_best_route(snap, src, dst, size):
    """Oracle: exhaustive DFS over simple paths with relay-only intermediates."""
    best = (None, float("inf"))

    def extend(route, seen):
        nonlocal best
        u = route[-1]
        for v in snap.neighbors[u]:
            v = int(v)
            if v < 0 or v in seen:
                continue
            if v == dst:
                cost = route_delay(snap, route + [v], size).total
                if cost < best[1]:
                    best = (route + [v], cost)
            elif snap.nodes[v].role == "relay":
                seen.add(v)
                extend(route + [v], seen)
                seen.remove(v)

    extend([src], {src})
    return best


def test_shortest_route_matches_exhaustive_enumeration():
    cfg, snap = build_snap(3, 3, rs_nodes=(0,), cpt_nodes=(8,))
    size = 5.0e7
    route, cost = shortest_route(snap, 0, 8, size)
    oracle_route, oracle_cost = enumerate_best_route(snap, 0, 8, size)
    assert cost == pytest.approx(oracle_cost, rel=1e-12)
    assert route_delay(snap, route, size).total == pytest.approx(oracle_cost, rel=1e-12)


def test_shortest_route_random_instances_match_oracle():
    rng = np.random.default_rng(21)
    for trial in range(15):
        p, s = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        n = p * s
        src, dst = rng.choice(n, size=2, replace=False)
        cfg, snap = build_snap(p, s, rs_nodes=(int(src),), cpt_nodes=(int(dst),),
                               slot=int(rng.integers(0, 5)))
        size = float(rng.uniform(1e5, 1e8))
        got = shortest_route(snap, int(src), int(dst), size)
        oracle_route, oracle_cost = enumerate_best_route(snap, int(src), int(dst), size)
        assert got is not None
        route, cost = got
        assert cost == pytest.approx(oracle_cost, rel=1e-12)


def test_route_respects_role_constraint():
    # plant a computing node directly between source and destination: the
    # router must go around it
    cfg, snap = build_snap(1, 8, rs_nodes=(0,), cpt_nodes=(1, 4))
    route, cost, reached = shortest_route_to_any(snap, 0, [4], 1e6)
    assert reached == 4
    assert all(snap.nodes[v].role == "relay" for v in route[1:-1])
    assert 1 not in route[1:-1]
    # the short way (0-1-2-3-4) is blocked at node 1, so we wrap the ring
    assert route == [0, 7, 6, 5, 4]


def test_unreachable_returns_none():
    # both ring neighbors of the source are computing nodes that are not the
    # destination, so nothing can be forwarded
    cfg, snap = build_snap(1, 5, rs_nodes=(0,), cpt_nodes=(1, 4))
    assert shortest_route(snap, 0, 3, 1e6) is None


def test_source_equals_destination():
    cfg, snap = build_snap(2, 3, rs_nodes=(0,), cpt_nodes=(5,))
    route, cost, reached = shortest_route_to_any(snap, 5, [5, 0], 1e7)
    assert route == [5] and cost == 0.0 and reached == 5


def test_multi_destination_picks_cheapest():
    cfg, snap = build_snap(4, 4, rs_nodes=(0,), cpt_nodes=(3, 10))
    route, cost, reached = shortest_route_to_any(snap, 0, [3, 10], 1e7)
    # node 3 is one ring hop away (wrap-around), node 10 needs four grid hops
    assert reached == 3
    single = shortest_route(snap, 0, 3, 1e7)
    assert cost == pytest.approx(single[1], rel=1e-15)
    # and the exhaustive check: no destination is cheaper than the one picked
    other = shortest_route(snap, 0, 10, 1e7)
    assert other is None or other[1] >= cost


def test_zero_size_route_minimizes_propagation_only():
    cfg, snap = build_snap(3, 3, rs_nodes=(0,), cpt_nodes=(4,))
    route, cost = shortest_route(snap, 0, 4, 0.0)
    d = route_delay(snap, route, 0.0)
    assert cost == pytest.approx(d.propagation, rel=1e-15)
    assert d.transmission == 0.0


def test_hop_nearest():
    cfg, snap = build_snap(8, 8, rs_nodes=(5,), cpt_nodes=(0, 21, 42))
    # node 5 = (plane 0, slot 5): 2 hops to 21 = (2, 5), 3 to 0, 6 to 42
    assert hop_nearest(snap, 5, [0, 21, 42]) == 21
    assert hop_nearest(snap, 0, [0, 21]) == 0
    with pytest.raises(RouteError):
        hop_nearest(snap, 0, [])


def test_bad_inputs():
    cfg, snap = build_snap(2, 3, rs_nodes=(0,), cpt_nodes=(5,))
    with pytest.raises(RouteError):
        shortest_route(snap, 0, 99, 1e6)
    with pytest.raises(RouteError):
        shortest_route_to_any(snap, 0, [], 1e6)
    with pytest.raises(RouteError):
        shortest_route(snap, 0, 5, -1.0)
