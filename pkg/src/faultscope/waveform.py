"""Self-contained SVG timing diagrams for executions.

One lane per signal in canonical (sorted name) order.  Values are drawn as a
stepped line with X at mid-level; intervals at X are shaded red, sensitivity
windows blue.  Output is deterministic for identical inputs.
"""

from __future__ import annotations

import math
from typing import Iterable

from .analysis import SensitivityWindow
from .prs import Value
from .sim import Execution

LANE_H = 26
WAVE_H = 14
LABEL_W = 110
PLOT_W = 880
MARGIN = 12
AXIS_H = 26

X_FILL = "#e63329"
WINDOW_FILL = "#4f81ff"
LINE = "#111111"
GRID = "#d8d8d8"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _tick_step(span: float) -> float:
    if span <= 0:
        return 1.0
    raw = span / 10.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _segments(trace, horizon: float):
    cur_t, cur_v = 0.0, trace.initial
    for t, v in trace.transitions:
        yield cur_t, t, cur_v
        cur_t, cur_v = t, v
    yield cur_t, horizon, cur_v


def render_waveform(
    execution: Execution,
    windows: Iterable[SensitivityWindow] = (),
    monitored: Iterable[str] = (),
) -> str:
    """Render the execution as an SVG document string."""
    names = sorted(execution.traces)
    horizon = execution.horizon if execution.horizon > 0 else 1.0
    monitored = frozenset(monitored)
    win_by_sig: dict[str, list[SensitivityWindow]] = {}
    for w in windows:
        win_by_sig.setdefault(w.signal, []).append(w)

    width = LABEL_W + PLOT_W + 2 * MARGIN
    height = 2 * MARGIN + LANE_H * len(names) + AXIS_H
    sx = PLOT_W / horizon

    def px(t: float) -> float:
        return LABEL_W + MARGIN + t * sx

    def level_y(top: float, value: Value) -> float:
        if value is Value.ONE:
            return top
        if value is Value.ZERO:
            return top + WAVE_H
        return top + WAVE_H / 2.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    # time grid and axis
    step = _tick_step(horizon)
    axis_y = MARGIN + LANE_H * len(names) + 14
    tick = 0.0
    while tick <= horizon + 1e-9:
        x = px(min(tick, horizon))
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{MARGIN}" x2="{_fmt(x)}" y2="{axis_y - 10}" stroke="{GRID}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{axis_y}" text-anchor="middle">{_fmt(tick)}</text>'
        )
        tick += step

    for lane, name in enumerate(names):
        top = MARGIN + lane * LANE_H + 4
        trace = execution.traces[name]
        label = name + (" *" if name in monitored else "")
        parts.append(
            f'<text x="{LABEL_W + MARGIN - 8}" y="{top + WAVE_H - 2}" text-anchor="end">{label}</text>'
        )
        # sensitivity windows under the wave
        for w in sorted(win_by_sig.get(name, ()), key=lambda w: w.start):
            x0, x1 = px(w.start), px(min(w.end, horizon))
            parts.append(
                f'<rect x="{_fmt(x0)}" y="{top - 2}" width="{_fmt(x1 - x0)}" '
                f'height="{WAVE_H + 4}" fill="{WINDOW_FILL}" fill-opacity="0.30"/>'
            )
        # X intervals shaded red
        for a, b, v in _segments(trace, horizon):
            if v is Value.X and b > a:
                x0, x1 = px(a), px(min(b, horizon))
                parts.append(
                    f'<rect x="{_fmt(x0)}" y="{top - 2}" width="{_fmt(x1 - x0)}" '
                    f'height="{WAVE_H + 4}" fill="{X_FILL}" fill-opacity="0.35"/>'
                )
        # stepped value line
        points = []
        prev_y = None
        for a, b, v in _segments(trace, horizon):
            y = level_y(top, v)
            if prev_y is None:
                points.append(f"{_fmt(px(a))},{_fmt(y)}")
            else:
                points.append(f"{_fmt(px(a))},{_fmt(prev_y)}")
                points.append(f"{_fmt(px(a))},{_fmt(y)}")
            points.append(f"{_fmt(px(min(b, horizon)))},{_fmt(y)}")
            prev_y = y
        parts.append(
            f'<polyline points="{" ".join(points)}" fill="none" stroke="{LINE}" stroke-width="1.3"/>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
