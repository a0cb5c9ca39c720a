"""Conditioned neural pulse synthesis for crosstalk-robust two-transmon CZ gates."""

import jax

# Everything downstream (trace checks, finite-difference gradients) assumes float64.
jax.config.update("jax_enable_x64", True)

from .quantum import DeviceModel, OperatorSet, build_operators, build_jump_operators  # noqa: E402
from .crosstalk import ConditionVector, CrosstalkParams  # noqa: E402
from .controller import ControllerConfig, ControllerParams, WaveformGrid  # noqa: E402
from .objectives import ObjectiveWeights, StateEnsemble, EvalReport, build_ensemble  # noqa: E402
from .gradients import Problem, loss_and_grad, finite_diff_grad  # noqa: E402
from .trainers import TrainConfig, GrapeParams, train_pgnc, train_grape  # noqa: E402

__all__ = [
    "DeviceModel",
    "OperatorSet",
    "build_operators",
    "build_jump_operators",
    "ConditionVector",
    "CrosstalkParams",
    "ControllerConfig",
    "ControllerParams",
    "WaveformGrid",
    "ObjectiveWeights",
    "StateEnsemble",
    "EvalReport",
    "build_ensemble",
    "Problem",
    "loss_and_grad",
    "finite_diff_grad",
    "TrainConfig",
    "GrapeParams",
    "train_pgnc",
    "train_grape",
]
