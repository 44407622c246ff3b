"""Difficulty action space and the three-phase curriculum state machine.

The controller walks through three phases keyed on the training step count:
a short Exploration sweep with reviews every couple of steps, a long
Transition block trained on a single anchor action, and an open-ended LockIn
phase with sparse reviews. All decision rules live in oracle_decide, which is
a deterministic total function so that every LLM-made decision has an exact
rule-based reference.

Review bookkeeping is split into record_window (append history, advance the
step counter, roll the phase) and apply_decision (install the chosen action).
Decisions are made *between* the two halves, on the post-record state — the
just-finished window is part of the history a decision sees.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import UsageError


class Zone(enum.Enum):
    LOW_SIGNAL = "LowSignal"
    EFFECTIVE_LEARNING = "EffectiveLearning"
    HIGH_RISK = "HighRisk"


class Phase(enum.Enum):
    EXPLORATION = "Exploration"
    TRANSITION = "Transition"
    LOCK_IN = "LockIn"


@dataclass(frozen=True)
class DifficultyInterval:
    action_id: int
    low: float
    high: float
    zone: Zone

    def __post_init__(self):
        if not (0.0 <= self.low < self.high <= 1.0):
            raise UsageError(
                f"interval bounds must satisfy 0 <= low < high <= 1, got [{self.low}, {self.high}]"
            )


def action_letter(action_id: int) -> str:
    if not 0 <= action_id < 26:
        raise UsageError(f"action id {action_id} has no letter")
    return chr(ord("A") + action_id)


def action_from_letter(letter: str) -> int:
    s = letter.strip().upper()
    if len(s) != 1 or not "A" <= s <= "Z":
        raise UsageError(f"not an action letter: {letter!r}")
    return ord(s) - ord("A")


@dataclass(frozen=True)
class ActionSpace:
    intervals: tuple[DifficultyInterval, ...]

    def __post_init__(self):
        if len(self.intervals) == 0:
            raise UsageError("action space must hold at least one interval")
        for i, iv in enumerate(self.intervals):
            if iv.action_id != i:
                raise UsageError(f"interval {i} carries action_id {iv.action_id}")

    def __len__(self) -> int:
        return len(self.intervals)

    def bounds(self, action_id: int) -> tuple[float, float]:
        iv = self.intervals[action_id]
        return (iv.low, iv.high)


# Difficulty-ratio boundaries the zones were named after: interval midpoints
# below ~0.83 barely move the loss, above ~0.94 they risk false negatives.
_ZONE_MID_BOUNDS = (0.83, 0.94)


def zone_for(low: float, high: float) -> Zone:
    """Classify an interval by midpoint; used for custom (non-default) tables."""
    mid = 0.5 * (low + high)
    if mid < _ZONE_MID_BOUNDS[0]:
        return Zone.LOW_SIGNAL
    if mid < _ZONE_MID_BOUNDS[1]:
        return Zone.EFFECTIVE_LEARNING
    return Zone.HIGH_RISK


_DEFAULT_TABLE: tuple[tuple[float, float, Zone], ...] = (
    (0.70, 0.85, Zone.LOW_SIGNAL),
    (0.70, 0.90, Zone.LOW_SIGNAL),
    (0.70, 0.92, Zone.LOW_SIGNAL),
    (0.75, 0.90, Zone.LOW_SIGNAL),
    (0.75, 0.92, Zone.EFFECTIVE_LEARNING),
    (0.75, 0.94, Zone.EFFECTIVE_LEARNING),
    (0.80, 0.92, Zone.EFFECTIVE_LEARNING),
    (0.80, 0.94, Zone.EFFECTIVE_LEARNING),
    (0.80, 0.95, Zone.EFFECTIVE_LEARNING),
    (0.85, 0.96, Zone.EFFECTIVE_LEARNING),
    (0.85, 0.97, Zone.EFFECTIVE_LEARNING),
    (0.85, 0.98, Zone.EFFECTIVE_LEARNING),
    (0.90, 0.985, Zone.HIGH_RISK),
    (0.92, 0.985, Zone.HIGH_RISK),
    (0.95, 0.99, Zone.HIGH_RISK),
    (0.95, 0.995, Zone.HIGH_RISK),
)


def default_action_space() -> ActionSpace:
    """The 16-action table A..P with its published interval bounds."""
    return ActionSpace(
        intervals=tuple(
            DifficultyInterval(action_id=i, low=low, high=high, zone=zone)
            for i, (low, high, zone) in enumerate(_DEFAULT_TABLE)
        )
    )


def space_from_bounds(bounds: Sequence[tuple[float, float]]) -> ActionSpace:
    """Build a custom table from (low, high) pairs; zones are midpoint-derived."""
    return ActionSpace(
        intervals=tuple(
            DifficultyInterval(action_id=i, low=lo, high=hi, zone=zone_for(lo, hi))
            for i, (lo, hi) in enumerate(bounds)
        )
    )


@dataclass(frozen=True)
class PhaseConfig:
    exploration_steps: int = 60
    exploration_review_every: int = 2
    transition_steps: int = 200
    lockin_review_every: int = 200

    def __post_init__(self):
        for name in ("exploration_steps", "exploration_review_every",
                     "transition_steps", "lockin_review_every"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    action: int
    avg_loss: float


@dataclass(frozen=True)
class ControllerState:
    phase: Phase = Phase.EXPLORATION
    current_action: int = 0
    history: tuple[HistoryEntry, ...] = ()
    step: int = 0
    consecutive_low_loss_reviews: int = 0
    phase_config: PhaseConfig = field(default_factory=PhaseConfig)


@dataclass(frozen=True)
class StateReport:
    """Structured review summary; the sole input a controller decision sees.

    Carries the full history and the low-loss streak counter on top of the
    headline metrics: the anchor-selection rule scans all past windows and
    the plateau rule compares against the previous review, so a report must
    be self-sufficient for whoever makes the call.
    """

    phase: Phase
    current_action: int
    current_interval: tuple[float, float]
    hard_negative_loss_mean: float
    l_start: float
    l_end: float
    recent_actions: tuple[int, ...]  # newest first, at most 3
    recent_steps: tuple[int, ...]
    consecutive_low_loss_reviews: int
    history: tuple[HistoryEntry, ...]


@dataclass(frozen=True)
class Decision:
    next_action: int
    source: str  # "oracle" | "llm"
    rationale: str
    calibration_failure: bool = False


def phase_for(step: int, cfg: PhaseConfig) -> Phase:
    if step < cfg.exploration_steps:
        return Phase.EXPLORATION
    if step < cfg.exploration_steps + cfg.transition_steps:
        return Phase.TRANSITION
    return Phase.LOCK_IN


def review_cadence(phase: Phase, cfg: PhaseConfig) -> int:
    if phase is Phase.EXPLORATION:
        return cfg.exploration_review_every
    if phase is Phase.TRANSITION:
        return cfg.transition_steps
    return cfg.lockin_review_every


def compute_trend(losses: Sequence[float]) -> tuple[float, float]:
    """Mean of the first and last ceil(20%) of an ordered loss series."""
    n = len(losses)
    if n == 0:
        raise UsageError("cannot compute a trend over an empty loss series")
    w = (n + 4) // 5  # ceil(n/5) without float noise
    l_start = sum(losses[:w]) / w
    l_end = sum(losses[-w:]) / w
    return (l_start, l_end)


def record_window(state: ControllerState, window_losses: Sequence[float]) -> ControllerState:
    """Fold a finished review window into the state.

    Advances the step counter by the phase cadence, appends the window to
    history under the action that produced it, rolls the phase off the new
    step count, and updates the low-loss streak.
    """
    if len(window_losses) == 0:
        raise UsageError("review window has no losses")
    cadence = review_cadence(state.phase, state.phase_config)
    new_step = state.step + cadence
    mean = sum(window_losses) / len(window_losses)
    entry = HistoryEntry(step=new_step, action=state.current_action, avg_loss=mean)
    streak = state.consecutive_low_loss_reviews + 1 if mean < 0.05 else 0
    return replace(
        state,
        step=new_step,
        phase=phase_for(new_step, state.phase_config),
        history=state.history + (entry,),
        consecutive_low_loss_reviews=streak,
    )


def apply_decision(state: ControllerState, decision: Decision) -> ControllerState:
    if decision.next_action < 0:
        raise UsageError(f"decision carries negative action id {decision.next_action}")
    return replace(state, current_action=decision.next_action)


# -- decision rules ----------------------------------------------------------

# Exploration anomaly thresholds and step sizes.
_LOSS_HIGH = 1.2
_LOSS_LOW = 0.05
_BACKOFF = 2
_PLATEAU_JUMP = 3

# Transition anchor filter: windows whose loss sat in the productive band.
_ANCHOR_BAND = (0.3, 1.2)

# LockIn trend thresholds.
_MASTERY_ABS = 0.3
_MASTERY_REL = 0.5
_STRUGGLE_REL = 0.3


def _explore(state: ControllerState, report: StateReport, m: int) -> Decision:
    cur = state.current_action
    l = report.hard_negative_loss_mean
    if l > _LOSS_HIGH:
        nxt = max(cur - _BACKOFF, 0)
        return Decision(nxt, "oracle", f"window loss {l:.4f} > {_LOSS_HIGH}; backing off 2 intervals")
    if l < _LOSS_LOW and state.consecutive_low_loss_reviews >= 2:
        nxt = min(cur + _PLATEAU_JUMP, m - 1)
        return Decision(
            nxt, "oracle",
            f"two consecutive reviews below {_LOSS_LOW}; jumping ahead 3 intervals",
        )
    recent = set(report.recent_actions)
    for cand in range(cur + 1, m):
        if cand not in recent:
            return Decision(cand, "oracle", "default progression to the next untried interval")
    for cand in range(m):
        if cand not in recent:
            return Decision(cand, "oracle", "no higher interval untried; wrapping to the lowest unused")
    return Decision(cur, "oracle", "all intervals appear in the recent window; holding")


def _anchor(state: ControllerState, report: StateReport) -> Decision:
    lo, hi = _ANCHOR_BAND
    valid = [h for h in report.history if lo <= h.avg_loss <= hi]
    if not valid:
        return Decision(
            state.current_action, "oracle",
            "no explored window landed in the productive loss band; keeping current action",
            calibration_failure=True,
        )
    best = max(valid, key=lambda h: h.action)
    return Decision(
        best.action, "oracle",
        f"anchor = hardest interval with in-band loss ({action_letter(best.action)}, "
        f"loss {best.avg_loss:.4f})",
    )


def _lock_in(state: ControllerState, report: StateReport, m: int) -> Decision:
    cur = state.current_action
    ls, le = report.l_start, report.l_end
    mastered = le < _MASTERY_ABS
    reason = f"l_end {le:.4f} < {_MASTERY_ABS}"
    if not mastered and ls > 0:
        rel_drop = (ls - le) / ls
        if rel_drop >= _MASTERY_REL:
            mastered = True
            reason = f"loss fell {rel_drop:.0%} over the window"
    if mastered:
        return Decision(min(cur + 1, m - 1), "oracle", f"upgrade: {reason}")
    # l_start == 0 can only mean the window began already mastered; rising from
    # zero has no well-defined relative increase, so never treat it as struggle.
    if ls > 0 and (le - ls) / ls >= _STRUGGLE_REL:
        return Decision(max(cur - 1, 0), "oracle",
                        f"downgrade: loss rose {(le - ls) / ls:.0%} over the window")
    return Decision(cur, "oracle", "trend inside the hold band; maintaining")


def oracle_decide(state: ControllerState, report: StateReport, space: ActionSpace) -> Decision:
    """Deterministic rule-based decision; total over arbitrary inputs."""
    m = len(space)
    if report.phase is Phase.EXPLORATION:
        d = _explore(state, report, m)
    elif report.phase is Phase.TRANSITION:
        d = _anchor(state, report)
    else:
        d = _lock_in(state, report, m)
    return replace(d, next_action=min(max(d.next_action, 0), m - 1))


def advance(state: ControllerState, decision: Decision, window_losses: Sequence[float]) -> ControllerState:
    """record_window followed by apply_decision, as one review transition."""
    return apply_decision(record_window(state, window_losses), decision)
