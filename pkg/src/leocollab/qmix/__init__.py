from .nets import (
    N_ACTIONS,
    additive_mixer_params,
    init_params,
    loss_and_grads,
    mixer_forward,
    mixer_value_gradient,
    one_hot,
    param_meta,
    qmix_forward,
    sgd_step,
    utility_forward,
)
from .replay import ReplayBuffer
from .training import (
    QmixPolicy,
    TrainingConfig,
    TrainResult,
    collect_episode,
    episodes_to_batch,
    epsilon_schedule,
    evaluate_policy,
    td_target,
    train,
    train_step,
)

__all__ = [
    "N_ACTIONS",
    "QmixPolicy",
    "ReplayBuffer",
    "TrainResult",
    "TrainingConfig",
    "additive_mixer_params",
    "collect_episode",
    "episodes_to_batch",
    "epsilon_schedule",
    "evaluate_policy",
    "init_params",
    "loss_and_grads",
    "mixer_forward",
    "mixer_value_gradient",
    "one_hot",
    "param_meta",
    "qmix_forward",
    "sgd_step",
    "td_target",
    "train",
    "train_step",
    "utility_forward",
]
