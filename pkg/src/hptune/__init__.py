"""Hyperparameter tuning toolkit: a TPE sampler, an LLM-backed one-shot
recommender with a validation feedback loop, and RMSE/confidence-interval
reporting over a persistent trial ledger."""

from .ledger import GroupKey, Ledger, Task, TrialRecord, import_external, new_uid
from .llmclient import EndpointConfig, Recommendation, recommend_one_shot
from .prompt import (
    PromptTemplate,
    RelevanceClass,
    classify_relevance,
    parse_response,
    render_query,
    render_training_example,
)
from .runner import Budget, SubprocessObjective, SyntheticValley, evaluate, random_search, tune
from .space import (
    Categorical,
    ContinuousLinear,
    ContinuousLog,
    HyperparameterSet,
    SearchSpace,
    default_search_space,
    sample_uniform,
    validate,
)
from .stats import aggregate_report, confidence_interval, errors_from_accuracies, rmse, t_quantile
from .tpe import TpeConfig, suggest

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "Categorical",
    "ContinuousLinear",
    "ContinuousLog",
    "EndpointConfig",
    "GroupKey",
    "HyperparameterSet",
    "Ledger",
    "PromptTemplate",
    "Recommendation",
    "RelevanceClass",
    "SearchSpace",
    "SubprocessObjective",
    "SyntheticValley",
    "Task",
    "TpeConfig",
    "TrialRecord",
    "aggregate_report",
    "classify_relevance",
    "confidence_interval",
    "default_search_space",
    "errors_from_accuracies",
    "evaluate",
    "import_external",
    "new_uid",
    "parse_response",
    "random_search",
    "recommend_one_shot",
    "render_query",
    "render_training_example",
    "rmse",
    "sample_uniform",
    "suggest",
    "t_quantile",
    "tune",
    "validate",
]
