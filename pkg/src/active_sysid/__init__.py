"""Online Bayesian identification of linear-in-parameters recurrent systems
with information-maximizing control design."""
from .control import ControlDomain, StrategySpec, infomax_control, noise_optimal_control, select_control
from .dynamics import History, LinkFn, ModelSpec, build_regressor, random_model, stack_parameters, step
from .estimator import PosteriorState, batch_posterior, default_prior, init, update
from .harness import compare_strategies, run_experiment
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ControlDomain",
    "History",
    "LinkFn",
    "ModelSpec",
    "PosteriorState",
    "StrategySpec",
    "batch_posterior",
    "build_regressor",
    "compare_strategies",
    "default_prior",
    "infomax_control",
    "init",
    "noise_optimal_control",
    "random_model",
    "run_experiment",
    "select_control",
    "stack_parameters",
    "step",
    "update",
]
