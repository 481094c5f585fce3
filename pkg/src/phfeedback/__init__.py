"""Structure-preserving output feedback for port-Hamiltonian descriptor systems."""
from .linalg import DEFAULT_TOL, TolerancePolicy
from .model import (
    FeedbackSolution,
    GeneralPHDAE,
    Pencil,
    SimplifiedPHDAE,
    closed_loop,
    validate_general,
    validate_simplified,
)

__all__ = [
    "DEFAULT_TOL",
    "TolerancePolicy",
    "FeedbackSolution",
    "GeneralPHDAE",
    "Pencil",
    "SimplifiedPHDAE",
    "closed_loop",
    "validate_general",
    "validate_simplified",
]
