import csv
import math

import numpy as np
import pytest

from leocollab.bench import (
    ALL_SCHEMES,
    CSV_FIELDS,
    ExperimentGrid,
    dijkstra_route,
    run_grid,
    run_scheme,
    write_rows,
)
from leocollab.constellation import (
    DEFAULT_HARDWARE,
    HardwareProfile,
    ShellConfig,
    build_shell,
    snapshot_topology,
)
from leocollab.delay import route_delay
from leocollab.errors import ConfigError, RouteError
from leocollab.optimizer import evaluate
from leocollab.routing_env import make_instance
from leocollab.workload import WorkloadConfig, image_bits

CFG = ShellConfig(num_planes=8, sats_per_plane=8)
W = WorkloadConfig()


def build_snap(num_planes, sats_per_plane, rs_nodes=(), cpt_nodes=()):
    cfg = ShellConfig(num_planes=num_planes, sats_per_plane=sats_per_plane)
    roles = ["relay"] * cfg.num_nodes
    for i in rs_nodes:
        roles[i] = "remote_sensing"
    for i in cpt_nodes:
        roles[i] = "computing"
    return snapshot_topology(cfg, build_shell(cfg, roles), 0)


def enumerate_best_to_any(snap, src, dests, size):
    best = (None, float("inf"))

    def extend(route, seen):
        nonlocal best
        u = route[-1]
        for v in snap.neighbors[u]:
            v = int(v)
            if v < 0 or v in seen:
                continue
            if v in dests:
                cost = route_delay(snap, route + [v], size).total
                if cost < best[1]:
                    best = (route + [v], cost)
            elif snap.nodes[v].role == "relay":
                seen.add(v)
                extend(route + [v], seen)
                seen.remove(v)

    if src in dests:
        return [src], 0.0
    extend([src], {src})
    return best


def test_dijkstra_route_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    shells = [(2, 2), (2, 3), (3, 3), (2, 6)]
    for _ in range(25):
        p, s = shells[int(rng.integers(len(shells)))]
        n = p * s
        src = int(rng.integers(n))
        k = int(rng.integers(1, 3))
        others = [v for v in range(n) if v != src]
        dests = set(int(d) for d in rng.choice(others, size=k, replace=False))
        snap = build_snap(p, s, rs_nodes=(src,), cpt_nodes=tuple(dests))
        size = float(rng.uniform(1e5, 1e9))
        oracle_route, oracle_cost = enumerate_best_to_any(snap, src, dests, size)
        if oracle_route is None:
            with pytest.raises(RouteError):
                dijkstra_route(snap, src, sorted(dests), size)
            continue
        route = dijkstra_route(snap, src, sorted(dests), size)
        assert route_delay(snap, route, size).total == pytest.approx(
            oracle_cost, rel=1e-12
        )


def test_dijkstra_route_raises_when_unreachable():
    # sensing satellites cannot forward, so a destination behind one is cut off
    snap = build_snap(1, 4, rs_nodes=(1, 3), cpt_nodes=(2,))
    with pytest.raises(RouteError):
        dijkstra_route(snap, 1, [99], 1e6)


def test_small_only_closed_form():
    inst = make_instance(CFG, W, alphas=0.5)
    res = run_scheme("small_only", inst)
    expect = W.frames * W.small_model_ops_per_frame / (0.8 * 1.0e12)
    assert res.objective == pytest.approx(expect, rel=1e-12)  # 20 s
    assert res.feasible
    for o in res.tasks:
        assert o.delay.total == o.delay.local
        assert o.delay.model == o.delay.data == o.delay.large == o.delay.feature == 0.0
    assert res.alphas == (0.0,) * 6


def test_centralized_ships_full_frames():
    inst = make_instance(CFG, W, alphas=0.5)
    res = run_scheme("centralized_large", inst)
    assert res.feasible
    assert res.alphas == (1.0,) * 6
    bits = image_bits(W)
    for o, route in zip(res.tasks, res.routes):
        assert route["model"] is None
        data = route["data"]
        assert inst.snapshot.nodes[data[-1]].role == "computing"
        assert o.delay.local == 0.0 and o.delay.feature == 0.0 and o.delay.model == 0.0
        assert o.delay.total == pytest.approx(o.delay.data + o.delay.large)
    # each task pays at least one unloaded transmission of the raw frames
    slowest = min(l.rate_bps for l in inst.snapshot.links if l.usable)
    assert all(o.delay.data > 0 for o in res.tasks)
    assert bits == pytest.approx(8 * 100 * 131072)


def test_even_split_scheme_matches_evaluate():
    inst = make_instance(CFG, W, alphas=0.5)
    res = run_scheme("even_split", inst, router="dijkstra")
    ref = evaluate(inst, 0.5, router="dijkstra")
    assert res.objective == pytest.approx(ref.objective, rel=1e-12)


def test_proposed_beats_or_ties_even_split_with_dijkstra_router():
    inst = make_instance(CFG, W, alphas=0.5)
    even = run_scheme("even_split", inst, router="dijkstra")
    prop = run_scheme("proposed", inst, router="dijkstra", iterations=8)
    assert prop.objective <= even.objective + 1e-12


def test_run_scheme_rejects_unknown():
    inst = make_instance(CFG, W, alphas=0.5)
    with pytest.raises(ConfigError):
        run_scheme("warp_drive", inst)


def test_grid_validation():
    with pytest.raises(ConfigError):
        ExperimentGrid(sweep="nope", values=(1,), seeds=(0,))
    with pytest.raises(ConfigError):
        ExperimentGrid(sweep="data_volume", values=(), seeds=(0,))
    with pytest.raises(ConfigError):
        ExperimentGrid(sweep="data_volume", values=(1,), seeds=())


def test_compute_capacity_crossover():
    """Raising computing capacity flips centralized vs on-board ordering."""
    grid = ExperimentGrid(
        sweep="computing_capacity",
        values=(1.0e12, 5.0e12, 1.0e13, 2.0e13),
        seeds=(0,),
    )
    rows = run_grid(grid, schemes=("small_only", "centralized_large"))
    by_value = {}
    for row in rows:
        by_value.setdefault(row["value"], {})[row["scheme"]] = row["objective"]
    diffs = [
        by_value[v]["centralized_large"] - by_value[v]["small_only"]
        for v in grid.values
    ]
    assert diffs[0] > 0  # 1 TOPS: shipping everything is slower
    assert diffs[-1] < 0  # 20 TOPS: the large model wins
    signs = [d > 0 for d in diffs]
    assert signs == sorted(signs, reverse=True)  # one crossover, no flapping


def test_data_volume_sweep_scales_small_only_linearly():
    grid = ExperimentGrid(sweep="data_volume", values=(50, 100, 200), seeds=(1,))
    rows = run_grid(grid, schemes=("small_only",))
    objs = {row["value"]: row["objective"] for row in rows}
    assert objs[100] == pytest.approx(2 * objs[50], rel=1e-12)
    assert objs[200] == pytest.approx(2 * objs[100], rel=1e-12)


def test_grid_rows_and_csv_round_trip(tmp_path):
    grid = ExperimentGrid(sweep="bisection_iterations", values=(1, 3), seeds=(0, 1))
    rows = run_grid(
        grid, schemes=("small_only", "even_split", "proposed"), router="dijkstra"
    )
    assert len(rows) == 2 * 2 * 3
    for row in rows:
        assert row["error"] == ""
        assert row["scheme"] in ALL_SCHEMES
    # proposed at K=1 equals even_split within a cell
    cells = {}
    for row in rows:
        cells[(row["value"], row["seed"], row["scheme"])] = row["objective"]
    for seed in (0, 1):
        assert cells[(1, seed, "proposed")] == pytest.approx(
            cells[(1, seed, "even_split")], rel=1e-12
        )
    out = tmp_path / "grid.csv"
    write_rows(rows, out)
    with out.open() as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == len(rows)
    assert list(back[0].keys()) == list(CSV_FIELDS)
    got = float(back[0]["objective"])
    assert got == pytest.approx(rows[0]["objective"], rel=1e-12)


def test_grid_records_cell_failures_and_continues():
    # a shell too small to host all placements fails instance construction
    grid = ExperimentGrid(sweep="data_volume", values=(100,), seeds=(0,))
    rows = run_grid(
        grid,
        schemes=("small_only",),
        shell=ShellConfig(num_planes=2, sats_per_plane=2),
        n_remote_sensing=6,
        n_computing=3,
    )
    assert len(rows) == 1
    assert rows[0]["error"] != ""
    assert math.isnan(rows[0]["objective"])
