"""Byzantine-resilient aggregation for synchronous SGD.

Rules (mean, Krum, Multi-Krum, coordinate-wise trimmed mean, Phocas),
classic and dimensional attack injection, a parameter-server simulator, and
the resilience/convergence bounds with Monte-Carlo checks.
"""

from .aggregation import (
    AggregationOutput,
    AggregationRule,
    RuleKind,
    krum,
    mean,
    multi_krum,
    phocas,
    trimmed_mean,
)
from .attacks import AttackKind, AttackSpec, Placement, apply_attack, dimensional_diagonal
from .errors import ConstraintError, InvalidInputError, RoundError
from .selection import select_kth

__all__ = [
    "AggregationOutput", "AggregationRule", "RuleKind", "krum", "mean", "multi_krum", "phocas",
    "trimmed_mean", "AttackKind", "AttackSpec", "Placement", "apply_attack", "dimensional_diagonal",
    "ConstraintError", "InvalidInputError", "RoundError", "select_kth",
]
