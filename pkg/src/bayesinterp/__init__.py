"""Exact consistency checks for Bayesian interpretations of finite machines."""

from __future__ import annotations

__version__ = "0.1.0"

from .finstoch import FinSpace, Kernel, UNIT, bayes_invert, compose, disintegrate, product, tensor
from .interpretation import (
    ConsistencyReport,
    FilteringModel,
    InferenceModel,
    Interpretation,
    check_conjugate_form,
    check_filtering,
    check_inference,
    propagate,
    to_filtering,
)
from .machine import Environment, Machine, simulate_coupled
from .filtering_verify import deterministic_equivalence_check, verify_filtering_conditional

__all__ = [
    "__version__",
    "FinSpace",
    "Kernel",
    "UNIT",
    "bayes_invert",
    "compose",
    "disintegrate",
    "product",
    "tensor",
    "ConsistencyReport",
    "FilteringModel",
    "InferenceModel",
    "Interpretation",
    "check_conjugate_form",
    "check_filtering",
    "check_inference",
    "propagate",
    "to_filtering",
    "Environment",
    "Machine",
    "simulate_coupled",
    "deterministic_equivalence_check",
    "verify_filtering_conditional",
]
