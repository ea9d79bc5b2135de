"""
Phase 3 agent package: perturbation-based black-box fidelity
"""

from .perturbation import (
    EMPTY_EXPLANATION,
    EMPTY_EXPLANATION_FEATURES,
    NO_VIOLABLE_BOUNDS,
    ZERO_OUTPUT,
    PerturbationMode,
    PerturbationSet,
    Phase3Params,
    Phase3Record,
    Phase3Report,
    build_perturbation_set,
    contrary_fidelity,
    perturb_contrary,
    perturb_supporting,
    relevant_intervals,
    run_phase3,
    select_intervals,
    summarize_phase3,
    supporting_fidelity,
)

__all__ = [
    "EMPTY_EXPLANATION",
    "EMPTY_EXPLANATION_FEATURES",
    "NO_VIOLABLE_BOUNDS",
    "ZERO_OUTPUT",
    "PerturbationMode",
    "PerturbationSet",
    "Phase3Params",
    "Phase3Record",
    "Phase3Report",
    "build_perturbation_set",
    "contrary_fidelity",
    "perturb_contrary",
    "perturb_supporting",
    "relevant_intervals",
    "run_phase3",
    "select_intervals",
    "summarize_phase3",
    "supporting_fidelity",
]
