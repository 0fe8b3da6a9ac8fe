"""Standalone SVG charts for trajectories.

One panel per plotted column, stacked vertically and sharing the time
axis. Output is plain SVG text with no external references, and rendering
is deterministic: the same trajectory always yields byte-identical markup.
"""

from __future__ import annotations

from .engine import Trajectory

_PALETTE = ("#2563eb", "#dc2626", "#059669", "#7c3aed", "#d97706", "#0891b2")

_WIDTH = 900
_MARGIN_LEFT = 72
_MARGIN_RIGHT = 24
_PANEL_LABEL_H = 22
_PANEL_PLOT_H = 120
_PANEL_GAP = 18
_TOP_PAD = 16
_BOTTOM_PAD = 34
_TITLE_H = 30


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.6g}"


def render_chart(traj: Trajectory, columns: list[str] | tuple[str, ...],
                 title: str | None = None) -> str:
    """Render the chosen columns of a trajectory as stacked SVG panels."""
    if not columns:
        raise ValueError("at least one column is required")
    if len(traj.times) == 0:
        raise ValueError("trajectory has no recorded rows")
    for name in columns:
        traj.column(name)  # raise early on unknown names

    t0 = float(traj.times[0])
    t1 = float(traj.times[-1])
    span = t1 - t0 if t1 > t0 else 1.0
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT

    panel_h = _PANEL_LABEL_H + _PANEL_PLOT_H + _PANEL_GAP
    title_h = _TITLE_H if title else 0
    height = _TOP_PAD + title_h + len(columns) * panel_h + _BOTTOM_PAD

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}">'
    )
    out.append(
        "<style>text{font-family:Menlo,Consolas,monospace;font-size:12px;"
        "fill:#1f2937}.panel{fill:#f8fafc;stroke:#cbd5e1}.grid{stroke:#e2e8f0}"
        ".name{font-size:13px;font-weight:bold}</style>"
    )
    out.append(f'<rect x="0" y="0" width="{_WIDTH}" height="{height}" fill="#ffffff"/>')

    y_cursor = _TOP_PAD
    if title:
        out.append(
            f'<text class="name" x="{_MARGIN_LEFT}" y="{y_cursor + 14}">{_escape(title)}</text>'
        )
        y_cursor += _TITLE_H

    for idx, name in enumerate(columns):
        series = traj.column(name)
        lo = float(series.min())
        hi = float(series.max())
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        color = _PALETTE[idx % len(_PALETTE)]

        label_y = y_cursor + 14
        plot_y = y_cursor + _PANEL_LABEL_H
        out.append(f'<text class="name" x="{_MARGIN_LEFT}" y="{label_y}">{_escape(name)}</text>')
        out.append(
            f'<rect class="panel" x="{_MARGIN_LEFT}" y="{plot_y}" '
            f'width="{plot_w}" height="{_PANEL_PLOT_H}"/>'
        )
        mid_y = plot_y + _PANEL_PLOT_H / 2
        out.append(
            f'<line class="grid" x1="{_MARGIN_LEFT}" y1="{_fmt(mid_y)}" '
            f'x2="{_MARGIN_LEFT + plot_w}" y2="{_fmt(mid_y)}"/>'
        )

        points = []
        for i in range(len(traj.times)):
            x = _MARGIN_LEFT + (float(traj.times[i]) - t0) / span * plot_w
            y = plot_y + _PANEL_PLOT_H - (float(series[i]) - lo) / (hi - lo) * _PANEL_PLOT_H
            points.append(f"{_fmt(x)},{_fmt(y)}")
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{" ".join(points)}"/>'
        )

        out.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{plot_y + 12}" '
            f'text-anchor="end">{_label(hi)}</text>'
        )
        out.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{plot_y + _PANEL_PLOT_H}" '
            f'text-anchor="end">{_label(lo)}</text>'
        )
        y_cursor += panel_h

    axis_y = y_cursor - _PANEL_GAP + 18
    out.append(f'<text x="{_MARGIN_LEFT}" y="{axis_y}">t = {_label(t0)}</text>')
    out.append(
        f'<text x="{_MARGIN_LEFT + plot_w}" y="{axis_y}" '
        f'text-anchor="end">t = {_label(t1)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
