"""Episode replay buffer with a lossless JSON serialization.

Episodes are stored whole (the terminal reward only makes sense with its
full trajectory) in a bounded FIFO; sampling is uniform. Serialization goes
through plain JSON floats, whose shortest-repr round trip restores float64
bit patterns exactly, so a saved and reloaded buffer replays identically.
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np

from ..errors import ConfigError

FORMAT = "leocollab-replay/v1"

EPISODE_KEYS = ("obs", "state", "masks", "actions", "rewards")


def validate_episode(episode: dict) -> None:
    missing = [k for k in EPISODE_KEYS if k not in episode]
    if missing:
        raise ConfigError(f"episode missing keys: {missing}")
    obs, state = episode["obs"], episode["state"]
    masks, actions, rewards = episode["masks"], episode["actions"], episode["rewards"]
    if obs.ndim != 3 or state.ndim != 2 or masks.ndim != 3 or actions.ndim != 2:
        raise ConfigError("episode arrays have wrong ranks")
    t = actions.shape[0]
    if t < 1:
        raise ConfigError("episode must contain at least one step")
    n = actions.shape[1]
    if obs.shape[0] != t + 1 or state.shape[0] != t + 1 or masks.shape[0] != t + 1:
        raise ConfigError("need one more observation than actions (post-terminal view)")
    if obs.shape[1] != n or masks.shape[1] != n:
        raise ConfigError("agent axes disagree across episode arrays")
    if rewards.shape != (t,):
        raise ConfigError("need one reward per step")


class ReplayBuffer:
    """Bounded FIFO of complete episodes with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("capacity must be positive")
        self.capacity = capacity
        self._episodes: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._episodes)

    @property
    def total_transitions(self) -> int:
        return sum(ep["actions"].shape[0] for ep in self._episodes)

    def add(self, episode: dict) -> None:
        episode = {
            "obs": np.asarray(episode["obs"], dtype=np.float64),
            "state": np.asarray(episode["state"], dtype=np.float64),
            "masks": np.asarray(episode["masks"], dtype=bool),
            "actions": np.asarray(episode["actions"], dtype=np.int64),
            "rewards": np.asarray(episode["rewards"], dtype=np.float64),
        }
        validate_episode(episode)
        self._episodes.append(episode)

    def sample(self, n_episodes: int, rng: np.random.Generator) -> list[dict]:
        """Uniform draw; without replacement when the buffer is big enough."""
        if len(self._episodes) == 0:
            raise ConfigError("cannot sample from an empty buffer")
        replace = n_episodes > len(self._episodes)
        idx = rng.choice(len(self._episodes), size=n_episodes, replace=replace)
        return [self._episodes[int(i)] for i in idx]

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "capacity": self.capacity,
            "episodes": [
                {
                    "obs": ep["obs"].tolist(),
                    "state": ep["state"].tolist(),
                    "masks": ep["masks"].tolist(),
                    "actions": ep["actions"].tolist(),
                    "rewards": ep["rewards"].tolist(),
                }
                for ep in self._episodes
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReplayBuffer":
        if payload.get("format") != FORMAT:
            raise ConfigError(f"unrecognized replay format {payload.get('format')!r}")
        buf = cls(payload["capacity"])
        for ep in payload["episodes"]:
            buf.add(ep)
        return buf

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBuffer":
        return cls.from_dict(json.loads(Path(path).read_text()))
