"""Centralized training of the routing policy with decentralized execution.

Episodes are collected with per-agent epsilon-greedy action selection under
the environment's masks, stored whole in the replay buffer, and regressed
against double-estimator targets: the online utility picks the next action
under the mask, the target networks score it. Targets are snapshotted
(hard-copied) on a fixed cadence, the optimizer is plain gradient descent,
and a sustained explosion of the TD loss aborts the run rather than letting
a diverged policy masquerade as a result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, TrainingDiverged
from ..routing_env import RoutingEnv
from .nets import (
    N_ACTIONS,
    init_params,
    loss_and_grads,
    mixer_forward,
    one_hot,
    param_meta,
    sgd_step,
    utility_forward,
)
from .replay import ReplayBuffer

POLICY_FORMAT = "leocollab-policy/v1"


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 100
    episodes_per_epoch: int = 10
    lr: float = 5.0e-4
    gamma: float = 0.98
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    buffer_episodes: int = 500
    batch_episodes: int = 16
    min_buffer_episodes: int = 16
    train_steps_per_episode: int = 1
    target_update_interval: int = 200
    divergence_threshold: float = 1.0e6
    divergence_window: int = 10
    hidden: int = 64
    embed: int = 32
    mix_embed: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.episodes_per_epoch < 1:
            raise ConfigError("epochs and episodes_per_epoch must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError("need 0 <= eps_end <= eps_start <= 1")
        if not 0.0 < self.eps_decay_fraction <= 1.0:
            raise ConfigError("eps_decay_fraction must lie in (0, 1]")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.divergence_window < 1:
            raise ConfigError("divergence_window must be positive")


class QmixPolicy:
    """Online and target parameter sets plus the action-selection rule."""

    def __init__(self, params: dict, target_params: dict | None = None):
        self.params = params
        self.target_params = (
            target_params
            if target_params is not None
            else {k: v.copy() for k, v in params.items()}
        )
        self.meta = param_meta(params)

    @classmethod
    def create(
        cls,
        obs_dim: int,
        n_agents: int,
        state_dim: int,
        config: TrainingConfig,
        rng: np.random.Generator,
    ) -> "QmixPolicy":
        params = init_params(
            obs_dim,
            n_agents,
            state_dim,
            rng,
            hidden=config.hidden,
            embed=config.embed,
            mix_embed=config.mix_embed,
        )
        return cls(params)

    def action_values(self, obs: np.ndarray, last_actions: np.ndarray) -> np.ndarray:
        inp = np.concatenate(
            [obs, one_hot(last_actions, self.meta["n_actions"])], axis=-1
        )
        q, _ = utility_forward(self.params, inp)
        return q

    def act(
        self,
        obs: np.ndarray,
        last_actions: np.ndarray,
        masks: np.ndarray,
        epsilon: float,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Masked epsilon-greedy action per agent; epsilon=0 is deterministic."""
        if epsilon > 0.0 and rng is None:
            raise ConfigError("exploration needs a random generator")
        q = self.action_values(obs, last_actions)
        q = np.where(masks, q, -np.inf)
        actions = q.argmax(axis=-1)
        if epsilon > 0.0:
            for i in range(actions.shape[0]):
                if rng.random() < epsilon:
                    legal = np.flatnonzero(masks[i])
                    actions[i] = int(rng.choice(legal))
        return actions.astype(np.int64)

    def update_targets(self) -> None:
        self.target_params = {k: v.copy() for k, v in self.params.items()}

    # -- persistence -----------------------------------------------------------

    def to_payload(self, extra: dict | None = None) -> dict:
        """JSON-safe checkpoint: format tag, shape metadata, flat tensors."""
        return {
            "format": POLICY_FORMAT,
            "meta": {**self.meta, "extra": extra or {}},
            "params": _dump_tensors(self.params),
            "target_params": _dump_tensors(self.target_params),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "QmixPolicy":
        if payload.get("format") != POLICY_FORMAT:
            raise ConfigError(f"unrecognized policy format {payload.get('format')!r}")
        params = _load_tensors(payload["params"])
        target = _load_tensors(payload["target_params"])
        policy = cls(params, target)
        saved = {k: v for k, v in payload["meta"].items() if k != "extra"}
        if saved != policy.meta:
            raise ConfigError("checkpoint metadata does not match its tensors")
        return policy

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_payload(extra)))

    @classmethod
    def load(cls, path: str | Path) -> "QmixPolicy":
        return cls.from_payload(json.loads(Path(path).read_text()))


def _dump_tensors(params: dict) -> dict:
    return {
        name: {"shape": list(p.shape), "data": p.reshape(-1).tolist()}
        for name, p in params.items()
    }


def _load_tensors(payload: dict) -> dict:
    out = {}
    for name, rec in payload.items():
        arr = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
        out[name] = arr
    return out


# -- targets and batches -------------------------------------------------------


def episodes_to_batch(episodes: Sequence[dict]) -> dict:
    """Flatten stored episodes into one transition batch.

    The first step of an episode has no previous action; it is encoded as the
    stay-put action, matching what the collector feeds the policy.
    """
    fields: dict[str, list] = {
        "obs": [], "last_actions": [], "actions": [], "states": [],
        "rewards": [], "next_obs": [], "next_last_actions": [],
        "next_masks": [], "next_states": [], "done": [],
    }
    for ep in episodes:
        t, n = ep["actions"].shape
        last = np.vstack([np.full((1, n), N_ACTIONS - 1, dtype=np.int64),
                          ep["actions"][:-1]])
        fields["obs"].append(ep["obs"][:-1])
        fields["last_actions"].append(last)
        fields["actions"].append(ep["actions"])
        fields["states"].append(ep["state"][:-1])
        fields["rewards"].append(ep["rewards"])
        fields["next_obs"].append(ep["obs"][1:])
        fields["next_last_actions"].append(ep["actions"])
        fields["next_masks"].append(ep["masks"][1:])
        fields["next_states"].append(ep["state"][1:])
        done = np.zeros(t)
        done[-1] = 1.0
        fields["done"].append(done)
    return {k: np.concatenate(v, axis=0) for k, v in fields.items()}


def td_target(policy: QmixPolicy, batch: dict, gamma: float) -> np.ndarray:
    """Fixed regression targets under the double-estimator rule.

    The online utility network chooses the best next action under the mask;
    the target utility and target mixer score that choice. Terminal
    transitions keep the bare reward.
    """
    n_actions = policy.meta["n_actions"]
    inp = np.concatenate(
        [batch["next_obs"], one_hot(batch["next_last_actions"], n_actions)], axis=-1
    )
    q_online, _ = utility_forward(policy.params, inp)
    q_online = np.where(batch["next_masks"], q_online, -np.inf)
    a_star = q_online.argmax(axis=-1)
    q_target, _ = utility_forward(policy.target_params, inp)
    qs = np.take_along_axis(q_target, a_star[..., None], axis=-1)[..., 0]
    q_tot, _ = mixer_forward(policy.target_params, qs, batch["next_states"])
    return batch["rewards"] + gamma * (1.0 - batch["done"]) * q_tot


def train_step(
    policy: QmixPolicy, batch: dict, gamma: float, lr: float
) -> float:
    """One fixed-target regression step; returns the TD loss."""
    targets = td_target(policy, batch, gamma)
    loss, grads = loss_and_grads(
        policy.params,
        batch["obs"],
        batch["last_actions"],
        batch["actions"],
        batch["states"],
        targets,
    )
    sgd_step(policy.params, grads, lr)
    return loss


# -- rollouts -------------------------------------------------------------------


def collect_episode(
    env: RoutingEnv,
    policy: QmixPolicy,
    epsilon: float,
    rng: np.random.Generator | None,
) -> tuple[dict, dict]:
    """Run one full episode; returns (stored episode, terminal info)."""
    obs, state, masks = env.reset()
    obs_seq, state_seq, mask_seq = [obs], [state], [masks]
    action_seq, reward_seq = [], []
    last_actions = np.full(env.n_agents, N_ACTIONS - 1, dtype=np.int64)
    done, info = False, {}
    while not done:
        actions = policy.act(obs, last_actions, masks, epsilon, rng)
        obs, state, masks, reward, done, info = env.step(actions)
        obs_seq.append(obs)
        state_seq.append(state)
        mask_seq.append(masks)
        action_seq.append(actions)
        reward_seq.append(reward)
        last_actions = actions
    episode = {
        "obs": np.stack(obs_seq),
        "state": np.stack(state_seq),
        "masks": np.stack(mask_seq),
        "actions": np.stack(action_seq),
        "rewards": np.asarray(reward_seq, dtype=np.float64),
    }
    return episode, info


def evaluate_policy(env: RoutingEnv, policy: QmixPolicy) -> tuple[float, dict]:
    """Greedy (epsilon = 0) rollout; returns (episode reward, terminal info)."""
    episode, info = collect_episode(env, policy, 0.0, None)
    return float(np.sum(episode["rewards"])), info


@dataclass
class TrainResult:
    policy: QmixPolicy
    curves: dict
    buffer: ReplayBuffer
    train_steps: int
    best_epoch: int = -1
    best_eval_reward: float = float("nan")


def epsilon_schedule(config: TrainingConfig, episode_index: int) -> float:
    total = config.epochs * config.episodes_per_epoch
    horizon = max(1, int(total * config.eps_decay_fraction))
    frac = min(1.0, episode_index / horizon)
    return config.eps_start + (config.eps_end - config.eps_start) * frac


def train(
    env_sampler: Callable[[int, np.random.Generator], RoutingEnv],
    config: TrainingConfig,
    policy: QmixPolicy | None = None,
    eval_envs: Sequence[RoutingEnv] | None = None,
    progress: Callable[[int, dict], None] | None = None,
) -> TrainResult:
    """Full training run over sampled environments.

    ``env_sampler(episode_index, rng)`` supplies each episode's environment,
    which is how instance randomization enters. When ``eval_envs`` are given,
    the policy is greedily evaluated on them after every epoch and the
    best-scoring snapshot is the one returned (the final parameters can be
    worse than an earlier plateau on a fixed instance). Raises
    TrainingDiverged when the TD loss is non-finite or stays above the
    divergence threshold for a sustained window of train steps.
    """
    rng = np.random.default_rng(config.seed)
    probe = env_sampler(0, rng)
    if policy is None:
        policy = QmixPolicy.create(
            probe.obs_dim, probe.n_agents, probe.state_dim, config, rng
        )
    buffer = ReplayBuffer(config.buffer_episodes)
    curves: dict[str, list] = {
        "epoch": [], "mean_reward": [], "mean_loss": [], "epsilon": [],
        "delivered_frac": [], "mean_t_bar": [], "eval_reward": [],
    }
    episode_index = 0
    train_steps = 0
    over_threshold = 0
    best_snapshot: dict | None = None
    best_eval = -float("inf")
    best_epoch = -1
    for epoch in range(config.epochs):
        rewards, losses, delivered, t_bars = [], [], [], []
        eps_epoch = epsilon_schedule(config, episode_index)
        for _ in range(config.episodes_per_epoch):
            eps = epsilon_schedule(config, episode_index)
            env = env_sampler(episode_index, rng)
            episode, info = collect_episode(env, policy, eps, rng)
            buffer.add(episode)
            episode_index += 1
            rewards.append(float(np.sum(episode["rewards"])))
            statuses = info["statuses"]
            delivered.append(statuses.count("delivered") / len(statuses))
            t_bars.extend(info["t_bars"])
            if len(buffer) < config.min_buffer_episodes:
                continue
            for _ in range(config.train_steps_per_episode):
                batch = episodes_to_batch(buffer.sample(config.batch_episodes, rng))
                loss = train_step(policy, batch, config.gamma, config.lr)
                losses.append(loss)
                train_steps += 1
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"TD loss became non-finite at train step {train_steps}"
                    )
                if loss > config.divergence_threshold:
                    over_threshold += 1
                    if over_threshold >= config.divergence_window:
                        raise TrainingDiverged(
                            f"TD loss stayed above {config.divergence_threshold:g} "
                            f"for {over_threshold} consecutive steps"
                        )
                else:
                    over_threshold = 0
                if train_steps % config.target_update_interval == 0:
                    policy.update_targets()
        curves["epoch"].append(epoch)
        curves["mean_reward"].append(float(np.mean(rewards)))
        curves["mean_loss"].append(float(np.mean(losses)) if losses else float("nan"))
        curves["epsilon"].append(eps_epoch)
        curves["delivered_frac"].append(float(np.mean(delivered)))
        curves["mean_t_bar"].append(float(np.mean(t_bars)))
        if eval_envs:
            score = float(
                np.mean([evaluate_policy(e, policy)[0] for e in eval_envs])
            )
            curves["eval_reward"].append(score)
            if score > best_eval:
                best_eval = score
                best_epoch = epoch
                best_snapshot = {k: v.copy() for k, v in policy.params.items()}
        else:
            curves["eval_reward"].append(float("nan"))
        if progress is not None:
            progress(epoch, {k: v[-1] for k, v in curves.items()})
    if best_snapshot is not None:
        policy = QmixPolicy(best_snapshot)
    return TrainResult(
        policy=policy,
        curves={k: np.asarray(v) for k, v in curves.items()},
        buffer=buffer,
        train_steps=train_steps,
        best_epoch=best_epoch,
        best_eval_reward=best_eval if best_snapshot is not None else float("nan"),
    )
