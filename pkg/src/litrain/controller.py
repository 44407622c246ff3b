"""LLM meta-controller plumbing: report rendering, response parsing, fallback.

The controller is optional. Every review produces a StateReport; if an LLM
endpoint is configured the report is rendered into a prompt and the model
picks the next action, otherwise (or whenever the call fails) the rule-based
oracle decides. decide_with_fallback therefore never raises and always yields
an in-range action.

The wire format is a chat-completion POST: system message carries the decision
protocol, user message carries the rendered report. The API key is read from
an environment variable named in the endpoint config — never from the config
file itself.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import requests

from .curriculum import (
    ActionSpace,
    ControllerState,
    Decision,
    Phase,
    StateReport,
    action_letter,
    compute_trend,
    oracle_decide,
)
from .errors import ParseError, UsageError

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "EVO_LLM_API_KEY"


@dataclass(frozen=True)
class LlmEndpointConfig:
    url: str
    model_name: str
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise UsageError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise UsageError(f"max_retries must be >= 0, got {self.max_retries}")


def summarize_state(
    state: ControllerState, window_losses: Sequence[float], space: ActionSpace
) -> StateReport:
    """Aggregate a review window into the structured report a decision sees."""
    if len(window_losses) == 0:
        raise UsageError("cannot summarize an empty review window")
    mean = sum(window_losses) / len(window_losses)
    l_start, l_end = compute_trend(window_losses)
    recent = state.history[-3:][::-1]  # newest first
    return StateReport(
        phase=state.phase,
        current_action=state.current_action,
        current_interval=space.bounds(state.current_action),
        hard_negative_loss_mean=mean,
        l_start=l_start,
        l_end=l_end,
        recent_actions=tuple(h.action for h in recent),
        recent_steps=tuple(h.step for h in recent),
        consecutive_low_loss_reviews=state.consecutive_low_loss_reviews,
        history=state.history,
    )


PROTOCOL_TEXT = """\
You are the curriculum controller for a retrieval model trained on hard
negatives. Difficulty is a sampling interval over the negative-to-positive
similarity ratio; actions are lettered intervals, harder letters sample
negatives closer to the positive. Apply the phase rules below to the report
you are given, reason step by step, and then output exactly one final line of
the form <answer>X</answer> where X is a single action letter.

PHASE 1 - EXPLORATION. Check the rules in this order:
1. If hard_negative_loss_mean > 1.2, the difficulty is too high: reduce the
   action by 2 intervals (floor at the first action).
2. Else if hard_negative_loss_mean < 0.05 and the previous review was also
   below 0.05 (consecutive_low_loss_reviews >= 2), the difficulty is too low:
   increase the action by 3 intervals (cap at the last action).
3. Otherwise follow the default progression: pick the lowest-lettered action
   ABOVE the current one that does not appear among the last 3 reviewed
   actions. If every higher action appears there, wrap around and pick the
   lowest-lettered action overall that is not among the last 3. If all
   actions appear there, keep the current action.

PHASE 2 - TRANSITION (anchor selection). From the FULL review history, keep
only entries whose avg_loss lies in [0.3, 1.2], the ideal range for the loss.
Answer with the action of the kept entry that has the largest action letter.
If no entry qualifies, this is a curriculum calibration failure: answer with
the current action.

PHASE 3 - LOCK-IN. Compare the loss trend over the window:
- Upgrade by 1 interval if l_end < 0.3 (absolute mastery) or the relative
  loss reduction (l_start - l_end) / l_start is at least 50%.
- Downgrade by 1 interval if the relative loss increase
  (l_end - l_start) / l_start is at least 30%.
- Otherwise keep the current action. Never move more than one interval.
"""

_ANSWER_RE = re.compile(r"<answer>\s*([A-Za-z])\s*</answer>", re.IGNORECASE)


def render_report(report: StateReport, space: ActionSpace) -> str:
    """Deterministic plain-text body of the controller prompt."""
    lines = [
        f"Current phase: {report.phase.value.upper()}",
        f"Current action: {action_letter(report.current_action)}",
        f"Current interval: [{report.current_interval[0]!r}, {report.current_interval[1]!r}]",
        f"hard_negative_loss_mean = {report.hard_negative_loss_mean:.4f}",
        f"l_start = {report.l_start:.4f}",
        f"l_end = {report.l_end:.4f}",
        f"consecutive_low_loss_reviews = {report.consecutive_low_loss_reviews}",
        "Recent actions (newest first):",
    ]
    if report.recent_actions:
        for step, action in zip(report.recent_steps, report.recent_actions):
            lines.append(f"  Step {step}: {action_letter(action)}")
    else:
        lines.append("  (none yet)")
    lines.append("Full review history (oldest first):")
    if report.history:
        for h in report.history:
            lines.append(
                f"  step {h.step}  action {action_letter(h.action)}  avg_loss {h.avg_loss:.4f}"
            )
    else:
        lines.append("  (empty)")
    lines.append("Action table (letter: [low, high] zone):")
    for iv in space.intervals:
        lines.append(
            f"  {action_letter(iv.action_id)}: [{iv.low!r}, {iv.high!r}]  {iv.zone.value}"
        )
    lines.append(
        "Decide the next action per the protocol and finish with exactly one "
        "<answer>X</answer> line."
    )
    return "\n".join(lines)


def render_prompt(report: StateReport, space: ActionSpace, protocol_text: str = PROTOCOL_TEXT) -> str:
    """Full single-string prompt: protocol rules followed by the report body."""
    return protocol_text + "\n\n" + render_report(report, space)


def parse_decision(response: str, space: ActionSpace) -> int:
    """Extract the action letter from the LAST <answer> tag in a response.

    Chain-of-thought output may mention candidate tags along the way; only the
    final one is binding.
    """
    matches = _ANSWER_RE.findall(response)
    if not matches:
        raise ParseError("no <answer> tag in controller response")
    action = ord(matches[-1].upper()) - ord("A")
    if not 0 <= action < len(space):
        raise ParseError(f"answer letter {matches[-1]!r} outside the action table")
    return action


class HttpChatClient:
    """Minimal chat-completion caller. callable(system, user) -> assistant text."""

    def __init__(self, endpoint: LlmEndpointConfig):
        self.endpoint = endpoint
        key = os.environ.get(endpoint.api_key_env_var, "")
        if not key:
            raise UsageError(
                f"environment variable {endpoint.api_key_env_var} is empty; "
                "the controller API key must be provided via the environment"
            )
        self._key = key

    def __call__(self, system: str, user: str) -> str:
        body = {
            "model": self.endpoint.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0,
        }
        resp = requests.post(
            self.endpoint.url,
            json=body,
            headers={"Authorization": f"Bearer {self._key}"},
            timeout=self.endpoint.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        usage = payload.get("usage")
        if isinstance(usage, dict) and "total_tokens" in usage:
            log.info("controller call used %s tokens", usage["total_tokens"])
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ParseError("chat response missing choices[0].message.content") from None


class ScriptedClient:
    """Canned controller responses, consumed in order; for offline runs.

    Script files hold one response per block, blocks separated by a line that
    is exactly '---'.
    """

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self._next = 0

    @classmethod
    def from_file(cls, path: str) -> "ScriptedClient":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        blocks = [b.strip() for b in re.split(r"^---$", text, flags=re.MULTILINE)]
        return cls([b for b in blocks if b])

    def __call__(self, system: str, user: str) -> str:
        if self._next >= len(self._responses):
            raise ParseError("scripted controller ran out of responses")
        out = self._responses[self._next]
        self._next += 1
        return out


def decide_with_fallback(
    state: ControllerState,
    report: StateReport,
    space: ActionSpace,
    endpoint: LlmEndpointConfig | None = None,
    client: Callable[[str, str], str] | None = None,
) -> Decision:
    """Ask the configured controller for the next action; oracle on any failure.

    Total: transport errors, bad responses, and exhausted retries all degrade
    to oracle_decide rather than raising.
    """
    if client is None and endpoint is not None:
        try:
            client = HttpChatClient(endpoint)
        except Exception as exc:
            log.warning("controller endpoint unusable (%s); using oracle", exc)
            client = None
    if client is None:
        return oracle_decide(state, report, space)

    attempts = 1 + (endpoint.max_retries if endpoint is not None else 2)
    body = render_report(report, space)
    for attempt in range(attempts):
        try:
            text = client(PROTOCOL_TEXT, body)
            action = parse_decision(text, space)
            # Calibration failure is a property of the report, not of who
            # answered: in Transition with no in-band window there is no
            # defensible anchor no matter which action comes back.
            calib = report.phase is Phase.TRANSITION and not any(
                0.3 <= h.avg_loss <= 1.2 for h in report.history
            )
            return Decision(
                next_action=action,
                source="llm",
                rationale=text.strip(),
                calibration_failure=calib,
            )
        except Exception as exc:
            log.warning("controller attempt %d/%d failed: %s", attempt + 1, attempts, exc)
    fallback = oracle_decide(state, report, space)
    return Decision(
        next_action=fallback.next_action,
        source="oracle",
        rationale="controller unavailable; " + fallback.rationale,
        calibration_failure=fallback.calibration_failure,
    )
