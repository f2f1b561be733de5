"""Identify linear dynamics from true-system and auxiliary-system rollouts."""

from .bounds import (
    BoundInputs,
    BoundResult,
    aux_benefit_condition,
    corollary1_bound,
    proposition_terms,
    theorem1_bound,
    thresholds,
)
from .estimator import (
    Estimate,
    WeightSchedule,
    error_decomposition,
    error_metrics,
    select_weight_cv,
    wls,
)
from .exceptions import ConfigurationError, ShapeError, SingularGramError
from .experiments import ScenarioSpec, emit_csv, paper_models, run_scenario
from .simulate import BatchData, Rollout, RolloutSet, assemble_batch, simulate_rollouts
from .systems import (
    ModelDelta,
    SystemModel,
    delta_norms,
    gf_matrices,
    load_model,
    save_model,
    step_covariance,
    transition,
)

__version__ = "0.1.0"

__all__ = [
    "BatchData", "BoundInputs", "BoundResult", "ConfigurationError", "Estimate",
    "ModelDelta", "Rollout", "RolloutSet", "ScenarioSpec", "ShapeError",
    "SingularGramError", "SystemModel", "WeightSchedule", "assemble_batch",
    "aux_benefit_condition", "corollary1_bound", "delta_norms", "emit_csv",
    "error_decomposition", "error_metrics", "gf_matrices", "load_model",
    "paper_models", "proposition_terms", "run_scenario", "save_model",
    "select_weight_cv", "simulate_rollouts", "step_covariance", "theorem1_bound",
    "thresholds", "transition", "wls",
]
