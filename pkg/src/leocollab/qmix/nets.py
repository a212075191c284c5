"""Value networks for cooperative routing, written directly in numpy.

Two pieces: a shared per-agent utility MLP scoring the five moves from an
agent's observation plus its previous action, and a monotone mixing network
that combines the chosen per-agent values into one joint value conditioned on
the global state. The mixer is linear in the agent values with non-negative
(absolute-valued) state-generated weights, so the joint value can never
decrease when an agent's own value increases, and collapsing the generated
weights to one recovers a plain sum. All gradients are hand-derived; no
autodiff framework is involved, which keeps every parameter reachable by the
finite-difference checks in the test suite.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

N_ACTIONS = 5


def one_hot(indices: np.ndarray, depth: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros(indices.shape + (depth,), dtype=np.float64)
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def init_params(
    obs_dim: int,
    n_agents: int,
    state_dim: int,
    rng: np.random.Generator,
    n_actions: int = N_ACTIONS,
    hidden: int = 64,
    embed: int = 32,
    mix_embed: int = 8,
) -> dict[str, np.ndarray]:
    """Uniform fan-in initialization of every utility and mixer tensor."""
    if min(obs_dim, n_agents, state_dim, n_actions, hidden, embed, mix_embed) < 1:
        raise ConfigError("all network dimensions must be positive")
    in_dim = obs_dim + n_actions  # observation plus last-action one-hot

    def u(fan_in, *shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return {
        "phi.W1": u(in_dim, in_dim, hidden),
        "phi.b1": np.zeros(hidden),
        "phi.W2": u(hidden, hidden, hidden),
        "phi.b2": np.zeros(hidden),
        "phi.W3": u(hidden, hidden, n_actions),
        "phi.b3": np.zeros(n_actions),
        "mix.hw": u(state_dim, state_dim, embed),
        "mix.hb": np.zeros(embed),
        # weight generators start near the additive identity (agent weights 1,
        # final stage 1/E): the joint value begins as roughly the mean of the
        # agent values, keeping useful gradient flowing into the utilities
        # before the state modulation has learned anything
        "mix.w1_w": u(embed, embed, n_agents * mix_embed),
        "mix.w1_b": np.ones(n_agents * mix_embed),
        "mix.b1_w": u(embed, embed, mix_embed),
        "mix.b1_b": np.zeros(mix_embed),
        "mix.w2_w": u(embed, embed, mix_embed),
        "mix.w2_b": np.full(mix_embed, 1.0 / mix_embed),
        "mix.v_w": u(embed, embed),
        "mix.v_b": np.zeros(()),
    }


def param_meta(params: dict[str, np.ndarray]) -> dict:
    """Recover the architecture sizes implied by a parameter dict."""
    in_dim, hidden = params["phi.W1"].shape
    n_actions = params["phi.W3"].shape[1]
    state_dim, embed = params["mix.hw"].shape
    mix_embed = params["mix.b1_b"].shape[0]
    n_agents = params["mix.w1_w"].shape[1] // mix_embed
    return {
        "obs_dim": in_dim - n_actions,
        "n_agents": n_agents,
        "state_dim": state_dim,
        "n_actions": n_actions,
        "hidden": hidden,
        "embed": embed,
        "mix_embed": mix_embed,
    }


# -- shared utility network --------------------------------------------------


def utility_forward(params: dict, inputs: np.ndarray):
    """Per-agent action values.

    ``inputs`` is (..., obs_dim + n_actions); leading axes are flattened for
    the matmuls and restored afterwards. Returns (q, cache).
    """
    lead = inputs.shape[:-1]
    u = inputs.reshape(-1, inputs.shape[-1])
    a1 = u @ params["phi.W1"] + params["phi.b1"]
    h1 = np.tanh(a1)
    a2 = h1 @ params["phi.W2"] + params["phi.b2"]
    h2 = np.tanh(a2)
    q = h2 @ params["phi.W3"] + params["phi.b3"]
    cache = (u, h1, h2)
    return q.reshape(*lead, -1), cache


def utility_backward(params: dict, cache, dq: np.ndarray) -> dict:
    """Gradients of the utility parameters given dLoss/dq."""
    u, h1, h2 = cache
    dq = dq.reshape(-1, dq.shape[-1])
    grads = {
        "phi.W3": h2.T @ dq,
        "phi.b3": dq.sum(axis=0),
    }
    dh2 = dq @ params["phi.W3"].T
    da2 = dh2 * (1.0 - h2 * h2)
    grads["phi.W2"] = h1.T @ da2
    grads["phi.b2"] = da2.sum(axis=0)
    dh1 = da2 @ params["phi.W2"].T
    da1 = dh1 * (1.0 - h1 * h1)
    grads["phi.W1"] = u.T @ da1
    grads["phi.b1"] = da1.sum(axis=0)
    return grads


# -- monotone mixer -----------------------------------------------------------


def mixer_forward(params: dict, qs: np.ndarray, states: np.ndarray):
    """Joint value from per-agent chosen values and the global state.

    ``qs`` is (B, N), ``states`` (B, state_dim). The state passes through a
    tanh embedding that generates the mixing weights; absolute values keep
    the map monotone in every agent's value. Returns (q_tot, cache).
    """
    b, n = qs.shape
    meta_e = params["mix.b1_b"].shape[0]
    z = np.tanh(states @ params["mix.hw"] + params["mix.hb"])
    pre_w1 = z @ params["mix.w1_w"] + params["mix.w1_b"]
    w1 = np.abs(pre_w1).reshape(b, n, meta_e)
    b1 = z @ params["mix.b1_w"] + params["mix.b1_b"]
    hid = np.einsum("bn,bne->be", qs, w1) + b1
    pre_w2 = z @ params["mix.w2_w"] + params["mix.w2_b"]
    w2 = np.abs(pre_w2)
    v = z @ params["mix.v_w"] + params["mix.v_b"]
    q_tot = np.einsum("be,be->b", hid, w2) + v
    cache = (qs, states, z, pre_w1, w1, hid, pre_w2, w2)
    return q_tot, cache


def mixer_backward(params: dict, cache, dq_tot: np.ndarray):
    """Gradients of the mixer parameters and of the agent values.

    Returns (grads, dqs) with dqs shaped like the forward ``qs``.
    """
    qs, states, z, pre_w1, w1, hid, pre_w2, w2 = cache
    b, n, meta_e = w1.shape
    grads = {}
    grads["mix.v_w"] = z.T @ dq_tot
    grads["mix.v_b"] = np.asarray(dq_tot.sum())
    dhid = dq_tot[:, None] * w2
    dw2 = dq_tot[:, None] * hid
    dpre_w2 = dw2 * np.sign(pre_w2)
    grads["mix.w2_w"] = z.T @ dpre_w2
    grads["mix.w2_b"] = dpre_w2.sum(axis=0)
    dqs = np.einsum("be,bne->bn", dhid, w1)
    dw1 = dhid[:, None, :] * qs[:, :, None]
    dpre_w1 = dw1.reshape(b, n * meta_e) * np.sign(pre_w1)
    grads["mix.w1_w"] = z.T @ dpre_w1
    grads["mix.w1_b"] = dpre_w1.sum(axis=0)
    grads["mix.b1_w"] = z.T @ dhid
    grads["mix.b1_b"] = dhid.sum(axis=0)
    dz = (
        dpre_w1 @ params["mix.w1_w"].T
        + dhid @ params["mix.b1_w"].T
        + dpre_w2 @ params["mix.w2_w"].T
        + dq_tot[:, None] * params["mix.v_w"][None, :]
    )
    dpre_z = dz * (1.0 - z * z)
    grads["mix.hw"] = states.T @ dpre_z
    grads["mix.hb"] = dpre_z.sum(axis=0)
    return grads, dqs


def mixer_value_gradient(params: dict, qs: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Analytic d(q_tot)/d(q_n), which must be non-negative everywhere."""
    _, cache = mixer_forward(params, qs, states)
    _, _, _, _, w1, _, _, w2 = cache
    return np.einsum("bne,be->bn", w1, w2)


def additive_mixer_params(params: dict) -> dict:
    """Copy of the parameters with the mixer pinned to an exact sum.

    The state-conditioned generators are zeroed and their biases fixed so the
    agent-value weights are all one, the final stage weight is one, and every
    bias term vanishes: q_tot == sum(qs) for any state.
    """
    meta = param_meta(params)
    if meta["mix_embed"] != 1:
        raise ConfigError("the additive special case needs mix_embed == 1")
    out = {k: v.copy() for k, v in params.items()}
    out["mix.w1_w"][:] = 0.0
    out["mix.w1_b"][:] = 1.0
    out["mix.b1_w"][:] = 0.0
    out["mix.b1_b"][:] = 0.0
    out["mix.w2_w"][:] = 0.0
    out["mix.w2_b"][:] = 1.0
    out["mix.v_w"][:] = 0.0
    out["mix.v_b"] = np.zeros(())
    return out


# -- joint objective -----------------------------------------------------------


def qmix_forward(params: dict, obs: np.ndarray, last_actions: np.ndarray,
                 actions: np.ndarray, states: np.ndarray):
    """Joint value of the submitted actions: utility gather then mixing.

    obs (B, N, obs_dim), last_actions/actions (B, N) ints, states (B, X).
    Returns (q_tot, cache).
    """
    n_actions = params["phi.W3"].shape[1]
    inp = np.concatenate([obs, one_hot(last_actions, n_actions)], axis=-1)
    q, u_cache = utility_forward(params, inp)
    qs = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
    q_tot, m_cache = mixer_forward(params, qs, states)
    return q_tot, (u_cache, m_cache, actions, q.shape)


def loss_and_grads(params: dict, obs, last_actions, actions, states,
                   targets: np.ndarray):
    """Mean squared TD error and its gradient for every parameter.

    ``targets`` is treated as a constant: it must be precomputed (from the
    target networks) before calling, so the returned gradients are exactly
    those of a fixed-target regression.
    """
    b = obs.shape[0]
    q_tot, (u_cache, m_cache, acts, q_shape) = qmix_forward(
        params, obs, last_actions, actions, states
    )
    err = q_tot - targets
    loss = float(np.mean(err * err))
    dq_tot = 2.0 * err / b
    m_grads, dqs = mixer_backward(params, m_cache, dq_tot)
    dq = np.zeros(q_shape, dtype=np.float64)
    np.put_along_axis(dq, acts[..., None], dqs[..., None], axis=-1)
    u_grads = utility_backward(params, u_cache, dq)
    grads = {**u_grads, **m_grads}
    return loss, grads


def sgd_step(params: dict, grads: dict, lr: float) -> None:
    """Plain in-place gradient descent over every tensor."""
    for name, g in grads.items():
        params[name] -= lr * g
