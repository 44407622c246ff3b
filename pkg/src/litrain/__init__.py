"""Desk-scale training engine for late-interaction retrievers.

Pieces: token-level MaxSim scoring, bidirectional softplus margin losses,
offline hard-negative mining with positive-aware difficulty ratios, a
three-phase difficulty curriculum with a rule-based oracle and optional LLM
meta-controller, hard-negative query synthesis, multi-view image composites,
and a fully seeded synthetic training harness.
"""

from .curriculum import (
    ActionSpace,
    ControllerState,
    Decision,
    DifficultyInterval,
    Phase,
    PhaseConfig,
    StateReport,
    default_action_space,
    oracle_decide,
)
from .errors import DataError, NumericError, ParseError, UsageError
from .losses import LossBreakdown, LossConfig, margin_loss, total_loss
from .mining import CandidatePool, build_candidate_pool, select_negatives
from .scoring import l2_normalize, maxsim, maxsim_backward, ndcg_at_k
from .training import TrainConfig, TrainResult, run_training

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "CandidatePool",
    "ControllerState",
    "DataError",
    "Decision",
    "DifficultyInterval",
    "LossBreakdown",
    "LossConfig",
    "NumericError",
    "ParseError",
    "Phase",
    "PhaseConfig",
    "StateReport",
    "TrainConfig",
    "TrainResult",
    "UsageError",
    "build_candidate_pool",
    "default_action_space",
    "l2_normalize",
    "margin_loss",
    "maxsim",
    "maxsim_backward",
    "ndcg_at_k",
    "oracle_decide",
    "run_training",
    "select_negatives",
    "total_loss",
]
