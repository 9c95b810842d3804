"""Age-of-information simulation, sonar delay estimation and delay-aware RL."""

from .aoi_core import (
    AgeTracker,
    AoIProcess,
    DelayWaitTrace,
    instantaneous_aoi,
    numeric_integrate_aoi,
    time_avg_aoi,
    time_avg_aoi_geometric,
    time_avg_aoi_paper,
)
from .aoi_mdp import (
    AoIMDPEnv,
    AugmentedAction,
    AugmentedState,
    RewardVector,
    StandardMDPEnv,
    WorldConfig,
    total_reward,
)
from .delay_models import DelayModel, model_moments, sample_delay
from .errors import ConfigError, DomainError, StateError, UnsupportedOperation
from .learner import (
    QDiscreteAgent,
    ReplayBuffer,
    TrainSettings,
    Transition,
    evaluate,
    make_baseline_agent,
    train,
)

__version__ = "0.1.0"
