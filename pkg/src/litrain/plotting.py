"""Trajectory plots as hand-assembled SVG.

SVG is generated from fixed templates with %.2f coordinates and no
timestamps, so a given log renders to identical bytes on every platform —
golden-file tests compare output verbatim. The action curve is drawn thick
and stepped; the per-step loss curve thin; phase changes get dashed markers.
"""

from __future__ import annotations

from .training import TrajectoryLog

_W, _H = 900.0, 420.0
_X0, _X1 = 60.0, 830.0
_Y0, _Y1 = 30.0, 370.0  # plot band, y down

_ACTION_COLOR = "#2a6fb0"
_LOSS_COLOR = "#c24040"
_AXIS_COLOR = "#222222"
_PHASE_COLOR = "#999999"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _x_scale(step: int, lo: int, hi: int) -> float:
    if hi == lo:
        return (_X0 + _X1) / 2.0
    return _X0 + (_X1 - _X0) * (step - lo) / (hi - lo)


def render_trajectory_svg(log: TrajectoryLog, m: int = 16) -> str:
    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_W)}" height="{int(_H)}" '
        f'viewBox="0 0 {int(_W)} {int(_H)}">'
    )
    parts.append(f'<rect x="0" y="0" width="{int(_W)}" height="{int(_H)}" fill="#ffffff"/>')
    parts.append(
        f'<g font-family="monospace" font-size="11" fill="{_AXIS_COLOR}">'
    )
    # axes
    parts.append(
        f'<line x1="{_f(_X0)}" y1="{_f(_Y1)}" x2="{_f(_X1)}" y2="{_f(_Y1)}" '
        f'stroke="{_AXIS_COLOR}" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_f(_X0)}" y1="{_f(_Y0)}" x2="{_f(_X0)}" y2="{_f(_Y1)}" '
        f'stroke="{_AXIS_COLOR}" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_f(_X1)}" y1="{_f(_Y0)}" x2="{_f(_X1)}" y2="{_f(_Y1)}" '
        f'stroke="{_AXIS_COLOR}" stroke-width="1"/>'
    )
    parts.append(f'<text x="{_f(_X0)}" y="{_f(_H - 8)}">step</text>')
    parts.append(f'<text x="6" y="{_f(_Y0 - 8)}">action</text>')
    parts.append(f'<text x="{_f(_X1 - 30)}" y="{_f(_Y0 - 8)}">loss</text>')

    steps = log.steps
    if steps:
        lo, hi = steps[0].step, steps[-1].step
        max_loss = max(max(s.loss.total for s in steps), 1e-9)

        def ay(action_id: int) -> float:
            return _Y1 - (_Y1 - _Y0) * (action_id / max(m - 1, 1))

        def ly(loss: float) -> float:
            return _Y1 - (_Y1 - _Y0) * (loss / max_loss)

        # x ticks: first, last, and up to 3 evenly spaced steps
        ticks = sorted({lo, hi, lo + (hi - lo) // 4, lo + (hi - lo) // 2, lo + 3 * (hi - lo) // 4})
        for t in ticks:
            x = _x_scale(t, lo, hi)
            parts.append(
                f'<line x1="{_f(x)}" y1="{_f(_Y1)}" x2="{_f(x)}" y2="{_f(_Y1 + 4)}" '
                f'stroke="{_AXIS_COLOR}" stroke-width="1"/>'
            )
            parts.append(f'<text x="{_f(x - 8)}" y="{_f(_Y1 + 16)}">{t}</text>')
        # left ticks: every 4th action letter
        for a in range(0, m, 4):
            y = ay(a)
            parts.append(f'<text x="{_f(_X0 - 18)}" y="{_f(y + 4)}">{chr(ord("A") + a)}</text>')
        # right ticks: loss 0 and max
        parts.append(f'<text x="{_f(_X1 + 6)}" y="{_f(_Y1 + 4)}">0.00</text>')
        parts.append(f'<text x="{_f(_X1 + 6)}" y="{_f(_Y0 + 4)}">{_f(max_loss)}</text>')

        # phase boundary markers
        for prev, cur in zip(steps, steps[1:]):
            if cur.phase != prev.phase:
                x = _x_scale(cur.step, lo, hi)
                parts.append(
                    f'<line x1="{_f(x)}" y1="{_f(_Y0)}" x2="{_f(x)}" y2="{_f(_Y1)}" '
                    f'stroke="{_PHASE_COLOR}" stroke-width="1" stroke-dasharray="4,3"/>'
                )
                parts.append(f'<text x="{_f(x + 3)}" y="{_f(_Y0 + 12)}" fill="{_PHASE_COLOR}">{cur.phase}</text>')

        # thin loss polyline
        pts = " ".join(f"{_f(_x_scale(s.step, lo, hi))},{_f(ly(s.loss.total))}" for s in steps)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{_LOSS_COLOR}" stroke-width="0.8"/>'
        )

        # thick stepped action path: hold the level until the next step
        d = [f"M {_f(_x_scale(steps[0].step, lo, hi))} {_f(ay(steps[0].action_id))}"]
        for prev, cur in zip(steps, steps[1:]):
            x = _x_scale(cur.step, lo, hi)
            d.append(f"L {_f(x)} {_f(ay(prev.action_id))}")
            if cur.action_id != prev.action_id:
                d.append(f"L {_f(x)} {_f(ay(cur.action_id))}")
        parts.append(
            f'<path d="{" ".join(d)}" fill="none" stroke="{_ACTION_COLOR}" '
            f'stroke-width="2.5" stroke-linejoin="round"/>'
        )

    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
