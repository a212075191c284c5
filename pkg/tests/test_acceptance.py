"""End-to-end acceptance checks, one per shipped guarantee.

Each test computes an independent oracle (long-hand summation, exhaustive
search, finite differences, shortest-path search, or analytic crossing),
compares the package against it, and prints a single PASS/FAIL line through
the ``criterion_report`` fixture. Budgeted runtimes are asserted alongside
correctness.
"""

import math
import time

import numpy as np
import pytest

from leocollab.bench import (
    SCHEME_CENTRALIZED,
    SCHEME_SMALL_ONLY,
    run_grid,
)
from leocollab.config import default_config
from leocollab.constellation import (
    C_LIGHT_M_S,
    ShellConfig,
    build_shell,
    snapshot_topology,
)
from leocollab.delay import TaskDelay, link_loads, relay_loads, route_delay
from leocollab.optimizer import (
    ROUTER_DIJKSTRA,
    ROUTER_POLICY,
    EvaluationResult,
    TaskOutcome,
    bisect_search,
    evaluate,
)
from leocollab.qmix.nets import (
    N_ACTIONS,
    count_params,
    init_params,
    mixer_forward,
    one_hot,
    qmix_loss_and_grads,
    utility_forward,
)
from leocollab.qmix.training import QmixPolicy, TrainingConfig, train
from leocollab.routing_env import RewardConfig, RoutingEnv, make_instance
from leocollab.workload import (
    WorkloadConfig,
    data_packet_bits,
    offload_floor,
    solve_data_packet,
    solve_model_packet,
    updated_small_accuracy,
)


# -- 1: delay-model exactness ------------------------------------------------


def _random_walk(snap, rng, start, max_hops):
    route = [start]
    for _ in range(max_hops):
        options = [
            int(v)
            for v in snap.neighbors[route[-1]]
            if v >= 0 and int(v) not in route
        ]
        if not options:
            break
        route.append(options[int(rng.integers(len(options)))])
    return route


def test_delay_model_exactness(criterion_report):
    rng = np.random.default_rng(2024)
    t0 = time.monotonic()
    worst = 0.0
    snapshots = {}
    for _ in range(200):
        planes = int(rng.integers(2, 5))
        sats = int(rng.integers(2, 5))
        key = (planes, sats)
        if key not in snapshots:
            cfg = ShellConfig(num_planes=planes, sats_per_plane=sats)
            nodes = build_shell(cfg, ["relay"] * cfg.num_nodes)
            snapshots[key] = snapshot_topology(cfg, nodes, 0)
        snap = snapshots[key]
        n = planes * sats
        model_route = _random_walk(snap, rng, int(rng.integers(n)), int(rng.integers(1, 6)))
        data_route = _random_walk(snap, rng, int(rng.integers(n)), int(rng.integers(1, 6)))
        loads_l = link_loads([model_route, data_route])
        loads_n = relay_loads([model_route, data_route])
        model_bits = float(rng.uniform(1e5, 1e8))
        data_bits = float(rng.uniform(1e5, 1e8))

        def manual(route, size):
            tran = prop = proc = 0.0
            for u, v in zip(route, route[1:]):
                link = snap.link_between(u, v)
                share = max(1, loads_l[(min(u, v), max(u, v))])
                tran += size * share / link.rate_bps
                prop += link.length_m / C_LIGHT_M_S
            for node in route[1:-1]:
                proc += (
                    snap.nodes[node].relay_cost_s_per_bit
                    * size
                    * max(1, loads_n[node])
                )
            return tran + prop + proc

        t_m = route_delay(snap, model_route, model_bits, loads_l, loads_n)
        t_d = route_delay(snap, data_route, data_bits, loads_l, loads_n)
        for got, want in ((t_m.total, manual(model_route, model_bits)),
                          (t_d.total, manual(data_route, data_bits))):
            if want != 0.0:
                worst = max(worst, abs(got - want) / abs(want))
        feature, large, local = rng.uniform(0.1, 30.0, size=3)
        td = TaskDelay(
            model=t_m.total, feature=feature, data=t_d.total,
            large=large, local=local,
        )
        want_total = t_m.total + feature + max(t_d.total + large, local)
        worst = max(worst, abs(td.total - want_total) / want_total)
    elapsed = time.monotonic() - t0
    ok = worst < 1e-12 and elapsed < 5.0
    criterion_report(
        1, ok,
        f"delay recomposition on 200 instances: max rel err {worst:.2e} "
        f"(< 1e-12), {elapsed:.2f}s (< 5s)",
    )
    assert ok


# -- 2: offloading-solver optimality ------------------------------------------


def _random_workload(rng):
    map_min = float(rng.uniform(0.65, 0.85))
    return WorkloadConfig(
        frames=int(rng.integers(10, 200)),
        pixels_per_frame=int(rng.integers(10_000, 300_000)),
        bits_per_pixel=8,
        feature_bits_per_frame=float(rng.uniform(1e4, 1e6)),
        quant_levels=tuple(
            sorted(rng.uniform(0.05, 8.0, size=int(rng.integers(3, 7))))
        ),
        model_packet_bits_min=float(rng.uniform(1e5, 1e6)),
        model_packet_bits_max=float(rng.uniform(1e7, 1e8)),
        map_min=map_min,
        large_map_max=float(rng.uniform(map_min + 0.03, 0.98)),
        small_map_base=float(rng.uniform(0.3, map_min - 0.05)),
        small_map_max=float(rng.uniform(map_min + 0.02, 0.99)),
        kappa_offload=float(rng.uniform(1.0, 8.0)),
        kappa_quant=float(rng.uniform(1.0, 8.0)),
        kappa_model=float(rng.uniform(0.5, 6.0)),
    )


def test_offloading_solver_optimality(criterion_report):
    rng = np.random.default_rng(77)
    t0 = time.monotonic()
    checked = 0
    ok = True
    detail = ""
    while checked < 500:
        w = _random_workload(rng)
        floor = offload_floor(w)
        if floor >= 0.98:
            continue
        alpha = float(rng.uniform(floor + 1e-6, 1.0))

        # independent exhaustive search over the quantization levels
        def surrogate_acc(beta, q):
            num = (1 - math.exp(-w.kappa_offload * beta)) * (
                1 - math.exp(-w.kappa_quant * q)
            )
            den = (1 - math.exp(-w.kappa_offload)) * (
                1 - math.exp(-w.kappa_quant * w.quant_levels[-1])
            )
            return w.large_map_max * num / den

        best = None
        for q in w.quant_levels:
            if surrogate_acc(alpha, q) >= w.map_min:
                bits = data_packet_bits(w, alpha, q)
                if best is None or bits < best[1]:
                    best = (q, bits)
        q_bar, bits, acc = solve_data_packet(w, alpha)
        if best is None or q_bar != best[0] or abs(bits - best[1]) > 1e-9 * best[1]:
            ok, detail = False, f"data-packet mismatch at alpha={alpha:.4f}"
            break
        if acc < w.map_min - 1e-12:
            ok, detail = False, "data plan violates the accuracy floor"
            break

        # independent 1000-point grid for the model packet
        lo, hi = w.model_packet_bits_min, w.model_packet_bits_max
        grid = np.linspace(lo, hi, 1000)
        u = (grid - lo) / (hi - lo)
        accs = w.small_map_base + (w.small_map_max - w.small_map_base) * (
            1 - np.exp(-w.kappa_model * u)
        ) / (1 - math.exp(-w.kappa_model))
        feasible = grid[accs >= w.map_min]
        m_bits, m_acc = solve_model_packet(w)
        if len(feasible) == 0:
            ok, detail = False, "grid found no feasible model size but solver did"
            break
        step = grid[1] - grid[0]
        if m_bits > feasible[0] + 1e-9 or feasible[0] - m_bits > step:
            ok, detail = False, f"model packet {m_bits:.3e} vs grid {feasible[0]:.3e}"
            break
        if m_acc < w.map_min - 1e-12 or not lo <= m_bits <= hi:
            ok, detail = False, "model plan violates its constraints"
            break
        checked += 1
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 10.0
    criterion_report(
        2, ok,
        detail or f"packet solvers match exhaustive search on {checked} random "
        f"accuracy surrogates, {elapsed:.2f}s (< 10s)",
    )
    assert ok


# -- 3: qmix numerics ----------------------------------------------------------


def test_qmix_gradients_and_monotonicity(criterion_report):
    t0 = time.monotonic()
    rng = np.random.default_rng(5)
    obs_dim, n_agents, state_dim = 6, 2, 8
    params = init_params(obs_dim, n_agents, state_dim,
                         hidden=6, embed=5, mix_embed=2, rng=rng)
    n_params = count_params(params)
    worst = 0.0
    for _ in range(20):
        batch_t = int(rng.integers(2, 5))
        obs = rng.normal(size=(batch_t, n_agents, obs_dim + N_ACTIONS))
        states = rng.normal(size=(batch_t, state_dim))
        actions = rng.integers(0, N_ACTIONS, size=(batch_t, n_agents))
        targets = rng.normal(size=batch_t)
        _, grads = qmix_loss_and_grads(params, obs, actions, states, targets)

        def loss_of(p):
            q, _ = utility_forward(p, obs)
            chosen = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
            tot, _ = mixer_forward(p, chosen, states)
            return float(np.mean((tot - targets) ** 2))

        for name in params:
            num = np.zeros_like(params[name])
            it = np.nditer(params[name], flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = params[name][idx]
                params[name][idx] = orig + 1e-6
                hi = loss_of(params)
                params[name][idx] = orig - 1e-6
                lo = loss_of(params)
                params[name][idx] = orig
                num[idx] = (hi - lo) / 2e-6
                it.iternext()
            denom = max(np.linalg.norm(num), 1e-8)
            worst = max(worst, float(np.linalg.norm(grads[name] - num) / denom))

    min_sens = np.inf
    for _ in range(1000):
        values = rng.normal(size=(1, n_agents))
        state = rng.normal(size=(1, state_dim))
        base, _ = mixer_forward(params, values, state)
        agent = int(rng.integers(n_agents))
        bumped = values.copy()
        bumped[0, agent] += 1e-4
        up, _ = mixer_forward(params, bumped, state)
        min_sens = min(min_sens, float((up[0] - base[0]) / 1e-4))
    elapsed = time.monotonic() - t0
    ok = n_params <= 1000 and worst < 1e-4 and min_sens >= -1e-8 and elapsed < 60
    criterion_report(
        3, ok,
        f"gradients vs central differences on {n_params}-param net: max rel "
        f"err {worst:.2e} (< 1e-4); mixer sensitivity >= {min_sens:.2e} "
        f"(>= -1e-8); {elapsed:.1f}s (< 60s)",
    )
    assert ok


# -- 4: routing optimality at small scale --------------------------------------

SMALL_SCALE_CONFIG = dict(
    epochs=50, episodes_per_epoch=10, train_steps_per_episode=16,
    batch_episodes=32, buffer_episodes=64, min_buffer_episodes=8,
    target_update_interval=50, hidden=32, embed=16, mix_embed=4,
    lr=2e-3, gamma=0.95, eps_end=0.25, eps_decay_fraction=0.9,
)


def test_small_scale_routing_near_dijkstra(criterion_report):
    t0 = time.monotonic()
    shell = ShellConfig(num_planes=3, sats_per_plane=3)
    w = WorkloadConfig()
    hits = []
    ratios = []
    for seed in range(10):
        inst = make_instance(
            shell, w, alphas=0.6, n_remote_sensing=1, n_computing=1,
            placement_rng=np.random.default_rng(seed),
        )
        env = RoutingEnv(inst)
        cfg = TrainingConfig(seed=seed, **SMALL_SCALE_CONFIG)
        result = train(
            lambda i, rng: env, cfg, eval_envs=[RoutingEnv(inst)],
        )
        learned = evaluate(inst, 0.6, policy=result.policy, router=ROUTER_POLICY)
        oracle = evaluate(inst, 0.6, router=ROUTER_DIJKSTRA)
        ratio = (
            learned.objective / oracle.objective
            if learned.feasible else float("inf")
        )
        ratios.append(ratio)
        hits.append(ratio <= 1.10)
    elapsed = time.monotonic() - t0
    ok = sum(hits) >= 9 and elapsed < 600
    criterion_report(
        4, ok,
        f"greedy policy within 10% of the shortest-path oracle in "
        f"{sum(hits)}/10 seeds (need >= 9) on a 3x3 shell, 500 episodes each; "
        f"ratios {['%.3f' % r for r in ratios]}; {elapsed:.0f}s (< 600s)",
    )
    assert ok


# -- 5: bisection convergence ---------------------------------------------------


def _branch_result(alphas, local_scale, offload_scale, shift):
    outcomes = []
    for i, a in enumerate(alphas):
        t_loc = local_scale[i] * (1.0 - a)
        t_off = offload_scale[i] * a + shift[i]
        outcomes.append(
            TaskOutcome(
                task_id=i, alpha=float(a), feasible=True,
                local_time=float(t_loc), offload_time=float(t_off),
            )
        )
    worst = max(max(o.local_time, o.offload_time) for o in outcomes)
    return EvaluationResult(
        alphas=tuple(float(a) for a in alphas),
        objective=float(worst),
        feasible=True,
        tasks=tuple(outcomes),
    )


def test_bisection_converges_to_analytic_crossing(criterion_report):
    rng = np.random.default_rng(31)
    t0 = time.monotonic()
    worst_err = 0.0
    widths_ok = True
    for _ in range(100):
        n = int(rng.integers(1, 4))
        local = rng.uniform(5.0, 60.0, size=n)
        offload = rng.uniform(5.0, 60.0, size=n)
        shift = rng.uniform(0.0, 2.0, size=n)
        target = (local - shift) / (local + offload)
        if np.any(target <= 0.02) or np.any(target >= 0.98):
            continue

        state, history = bisect_search(
            lambda a: _branch_result(a, local, offload, shift),
            n_tasks=n, iterations=10, early_stop=False,
        )
        for k, rec in enumerate(history, start=1):
            width = state.alpha_up - state.alpha_low
            del width
        # interval width after k updates must be exactly 2^-k
        lo = np.zeros(n)
        up = np.ones(n)
        for rec in history:
            mids = np.asarray(rec["alphas"])
            assert np.allclose(mids, (lo + up) / 2.0, atol=0)
            for i in range(n):
                if local[i] * (1 - mids[i]) > offload[i] * mids[i] + shift[i]:
                    lo[i] = mids[i]
                else:
                    up[i] = mids[i]
            widths_ok = widths_ok and np.all(
                up - lo == 0.5 ** rec["iteration"]
            )
        worst_err = max(worst_err, float(np.max(np.abs(state.alpha - target))))
    elapsed = time.monotonic() - t0
    ok = worst_err <= 2**-10 + 1e-9 and widths_ok and elapsed < 5.0
    criterion_report(
        5, ok,
        f"bisection on analytic branch crossings: max |alpha - alpha*| "
        f"{worst_err:.2e} (<= 2^-10 + 1e-9), exact halving {widths_ok}, "
        f"{elapsed:.2f}s (< 5s)",
    )
    assert ok


# -- 6: scheme ordering on the default scenario ---------------------------------

SCHEME_SEEDS = 10


def test_scheme_ordering_on_default_scenario(criterion_report):
    t0 = time.monotonic()
    from leocollab.runs import scheme_comparison_run

    config = default_config()
    rows = []
    for seed in range(SCHEME_SEEDS):
        rows.append(scheme_comparison_run(config, seed))
    prop = np.array([r["proposed"] for r in rows])
    even = np.array([r["even_split"] for r in rows])
    small = np.array([r["small_only"] for r in rows])
    central = np.array([r["centralized_large"] for r in rows])
    baseline = np.minimum(small, central)
    vs_even = int(np.sum(prop <= even + 1e-9))
    vs_base = int(np.sum(prop <= baseline + 1e-9))
    improvement = float(np.mean((baseline - prop) / baseline)) * 100.0
    elapsed = time.monotonic() - t0
    ok = vs_even == SCHEME_SEEDS and vs_base >= 8 and elapsed < 1800
    criterion_report(
        6, ok,
        f"proposed <= even_split on {vs_even}/{SCHEME_SEEDS} seeds (need all), "
        f"<= best baseline on {vs_base}/{SCHEME_SEEDS} (need >= 8); mean "
        f"improvement over best baseline {improvement:+.1f}% (reported, not "
        f"asserted); {elapsed:.0f}s (< 1800s)",
    )
    assert ok


# -- 7: capacity crossover -------------------------------------------------------


def test_compute_capacity_crossover(criterion_report):
    t0 = time.monotonic()
    config = default_config()
    grid = config.bench.grid()
    grid = type(grid)(
        sweep="computing_capacity",
        values=(1e12, 5e12, 1e13, 2e13),
        seeds=(0,),
    )
    rows = run_grid(config, grid, schemes=(SCHEME_SMALL_ONLY, SCHEME_CENTRALIZED))
    by_value = {}
    for row in rows:
        by_value.setdefault(row["value"], {})[row["scheme"]] = row["objective"]
    signs = []
    for value in sorted(by_value):
        cell = by_value[value]
        signs.append(cell[SCHEME_CENTRALIZED] - cell[SCHEME_SMALL_ONLY])
    flipped = any(a > 0 for a in signs) and any(a < 0 for a in signs)
    elapsed = time.monotonic() - t0
    ok = flipped
    criterion_report(
        7, ok,
        "centralized-vs-small ordering flips across capacity sweep "
        f"{[f'{s:+.1f}' for s in signs]} at 1/5/10/20 TOPS; {elapsed:.1f}s",
    )
    assert ok


# -- 8: training convergence across packet sizes ---------------------------------

CONVERGENCE_PIXELS = (65_536, 131_072, 262_144)


def test_training_convergence_across_packet_sizes(criterion_report):
    t0 = time.monotonic()
    shell = ShellConfig(num_planes=3, sats_per_plane=3)
    ratios = []
    for pixels in CONVERGENCE_PIXELS:
        w = WorkloadConfig(pixels_per_frame=pixels)
        inst = make_instance(
            shell, w, alphas=0.6, n_remote_sensing=2, n_computing=1,
            placement_rng=np.random.default_rng(3),
        )
        env = RoutingEnv(inst)
        cfg = TrainingConfig(
            seed=0, epochs=100, episodes_per_epoch=4,
            train_steps_per_episode=4, batch_episodes=16,
            buffer_episodes=64, min_buffer_episodes=8,
            target_update_interval=40, hidden=24, embed=12, mix_embed=4,
            lr=1e-3, gamma=0.95, eps_end=0.05, eps_decay_fraction=0.5,
        )
        result = train(lambda i, rng: env, cfg)
        reward = result.curves["mean_reward"]
        early = float(np.std(reward[0:10]))
        late = float(np.std(reward[90:100]))
        ratios.append(late / early if early > 0 else np.inf)
    elapsed = time.monotonic() - t0
    ok = all(r < 0.25 for r in ratios)
    criterion_report(
        8, ok,
        f"sliding-window reward std at epoch 100 vs epoch 10: ratios "
        f"{['%.3f' % r for r in ratios]} (each < 0.25) across packet sizes "
        f"{list(CONVERGENCE_PIXELS)}; {elapsed:.0f}s",
    )
    assert ok


# -- 9: route-constraint enforcement ----------------------------------------------


def test_no_route_constraint_violations(criterion_report):
    t0 = time.monotonic()
    shell = ShellConfig(num_planes=2, sats_per_plane=3)
    w = WorkloadConfig()
    inst = make_instance(
        shell, w, alphas=0.7, n_remote_sensing=1, n_computing=1,
        placement_rng=np.random.default_rng(1),
    )
    rng = np.random.default_rng(9)
    violations = 0
    episodes = 0
    for _ in range(10_000):
        env = RoutingEnv(inst)
        obs, state, masks = env.reset()
        done = env.done
        while not done:
            actions = []
            for i in range(env.n_agents):
                legal = np.flatnonzero(masks[i])
                actions.append(int(legal[rng.integers(len(legal))]))
            obs, state, masks, reward, done, info = env.step(actions)
        episodes += 1
        for phase_packets in env.packets.values():
            for packet in phase_packets:
                if packet is None:
                    continue
                route = packet.route
                if len(set(route)) != len(route):
                    violations += 1
                for u, v in zip(route, route[1:]):
                    link = env.snapshot.link_between(u, v)
                    if link is None or not link.usable:
                        violations += 1
    elapsed = time.monotonic() - t0
    ok = violations == 0 and episodes == 10_000
    criterion_report(
        9, ok,
        f"{episodes} random-policy episodes, {violations} link/revisit "
        f"violations (need 0); {elapsed:.0f}s",
    )
    assert ok
