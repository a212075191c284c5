"""Episode transcripts: record, serialize, and verify routing episodes.

A transcript is a list of JSON-friendly rows: a header (format tag and
episode shape), one row per environment step carrying the per-agent
observation hashes (pre-action), the submitted actions, and the link/relay
load counters after the step, and a terminal row with the episode reward and
per-task outcomes. Re-running the recorded actions in a fresh environment of
the same configuration must reproduce every hash, load, and the reward;
``verify_transcript`` reports the first divergence instead of crashing, which
is what makes it useful for debugging nondeterminism or contract drift.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractViolation
from .routing_env import RoutingEnv

TRANSCRIPT_FORMAT = "leocollab-transcript/v1"


def observation_hash(row: np.ndarray) -> str:
    """Stable 16-hex digest of one agent's observation vector."""
    data = np.ascontiguousarray(np.asarray(row, dtype=np.float64))
    return hashlib.sha256(data.tobytes()).hexdigest()[:16]


def _loads_of(env: RoutingEnv) -> tuple[list, list]:
    links = sorted([int(u), int(v), int(c)] for (u, v), c in env._link_use.items())
    relays = sorted([int(j), int(c)] for j, c in env._relay_use.items())
    return links, relays


def record_episode(env: RoutingEnv, policy, epsilon: float = 0.0,
                   rng: np.random.Generator | None = None) -> list[dict]:
    """Roll out the policy and capture a verifiable transcript."""
    obs, state, masks = env.reset()
    rows = [{
        "format": TRANSCRIPT_FORMAT,
        "n_agents": env.n_agents,
        "obs_dim": env.obs_dim,
    }]
    last_actions = np.full(env.n_agents, 4, dtype=np.int64)
    done = False
    reward = 0.0
    info: dict = {}
    step = 0
    while not done:
        actions = policy.act(obs, last_actions, masks, epsilon, rng)
        hashes = [observation_hash(obs[i]) for i in range(env.n_agents)]
        obs, state, masks, reward, done, info = env.step(actions)
        links, relays = _loads_of(env)
        rows.append({
            "step": step,
            "phase": info["phase"],
            "obs_hash": hashes,
            "actions": [int(a) for a in actions],
            "link_loads": links,
            "relay_loads": relays,
        })
        last_actions = np.asarray(actions, dtype=np.int64)
        step += 1
    rows.append({
        "terminal": True,
        "reward": float(reward),
        "statuses": list(info.get("statuses", [])),
        "t_bars": [float(t) for t in info.get("t_bars", [])],
    })
    return rows


def write_transcript(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_transcript(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise ConfigError(f"transcript {path} is empty")
    return rows


def _split_rows(rows: list[dict]) -> tuple[dict, list[dict], dict]:
    if not rows or rows[0].get("format") != TRANSCRIPT_FORMAT:
        raise ConfigError(
            f"not a transcript: expected format {TRANSCRIPT_FORMAT!r} header"
        )
    if not rows[-1].get("terminal"):
        raise ConfigError("transcript has no terminal row")
    return rows[0], rows[1:-1], rows[-1]


def verify_transcript(env: RoutingEnv, rows: list[dict]) -> dict:
    """Re-run the recorded actions and compare every captured quantity.

    Returns a report dict with ``ok`` plus the first mismatch description;
    raises ContractViolation only when the transcript cannot even be applied
    to this environment (wrong shape or an illegal recorded action).
    """
    header, steps, terminal = _split_rows(rows)
    obs, state, masks = env.reset()
    if header["n_agents"] != env.n_agents or header["obs_dim"] != env.obs_dim:
        raise ContractViolation(
            "transcript shape mismatch: recorded "
            f"{header['n_agents']} agents / obs_dim {header['obs_dim']}, "
            f"environment has {env.n_agents} / {env.obs_dim}"
        )
    mismatches: list[str] = []
    reward = 0.0
    done = False
    for row in steps:
        if done:
            mismatches.append(
                f"step {row['step']}: environment finished before the transcript"
            )
            break
        hashes = [observation_hash(obs[i]) for i in range(env.n_agents)]
        if hashes != row["obs_hash"]:
            bad = [i for i, (a, b) in enumerate(zip(hashes, row["obs_hash"])) if a != b]
            mismatches.append(f"step {row['step']}: observation hash differs for agents {bad}")
            break
        obs, state, masks, reward, done, info = env.step(row["actions"])
        links, relays = _loads_of(env)
        if links != [list(x) for x in row["link_loads"]]:
            mismatches.append(f"step {row['step']}: link loads differ")
            break
        if relays != [list(x) for x in row["relay_loads"]]:
            mismatches.append(f"step {row['step']}: relay loads differ")
            break
    else:
        if not done:
            mismatches.append("transcript ended before the environment finished")
        elif not np.isclose(reward, terminal["reward"], rtol=1e-12, atol=1e-12):
            mismatches.append(
                f"terminal reward {reward!r} != recorded {terminal['reward']!r}"
            )
    return {
        "ok": not mismatches,
        "steps_replayed": len(steps),
        "reward": float(reward),
        "recorded_reward": float(terminal["reward"]),
        "mismatches": mismatches,
    }
