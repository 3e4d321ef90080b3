from ._core import (
    SingularityError,
    ValidationError,
    criterion_ids,
    describe_model,
    formulation_report,
    integrate_model,
    model_names,
    run_criterion,
    run_experiment,
    tau_star,
    validate_config,
)
from .snapshot import read_snapshot

__all__ = [
    "SingularityError",
    "ValidationError",
    "criterion_ids",
    "describe_model",
    "formulation_report",
    "integrate_model",
    "model_names",
    "read_snapshot",
    "run_criterion",
    "run_experiment",
    "tau_star",
    "validate_config",
]
