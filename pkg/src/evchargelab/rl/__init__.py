"""Actor-critic learning engine: networks, environments, training, persistence."""

from .env import AggregateEnv, ChargingEnv, EnvTransition, ReducedState, RlState
from .nets import (
    CriticParams,
    PolicyParams,
    critic_gradient,
    critic_value,
    init_critic,
    init_policy,
    log_policy_density,
    log_policy_gradient,
    policy_forward,
    policy_sample,
)
from .serialize import load_critic, load_policy, save_critic, save_policy
from .train import (
    ADVANTAGE_MODES,
    ADVANTAGE_RETURN,
    ADVANTAGE_TD,
    ADVANTAGE_TRACE,
    ConstantRate,
    ParameterStore,
    PolynomialRate,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    accumulate_return,
    actor_update,
    calc_aggregate_series,
    calc_schedule,
    check_robbins_monro,
    critic_update,
    replay_training,
    sca_schedule,
    td_error,
    train_calc_stage1,
    train_sca,
)
