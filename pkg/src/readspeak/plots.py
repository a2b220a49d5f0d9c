"""Standalone SVG figures, built as strings with no plotting library.

Two kinds: the policy-path figure (attention heatmap with the unread
region greyed out and the READ/SPEAK staircase drawn on top) and the
latency/quality trade-off scatter.
"""

from __future__ import annotations

from pathlib import Path

from .core import Action, DomainError, EpisodeTrace

UNREAD_FILL = "#c8c8c8"
STAIR_COLOR = "#d62728"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _heat_fill(weight: float) -> str:
    """White at 0 to dark blue at 1."""
    w = min(max(weight, 0.0), 1.0)
    r = round(255 + (8 - 255) * w)
    g = round(255 + (48 - 255) * w)
    b = round(255 + (107 - 255) * w)
    return f"rgb({r},{g},{b})"


def _svg_document(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def render_path_svg(trace: EpisodeTrace, num_chars: int, cell: float = 18.0) -> str:
    """Heatmap of one cell per (emitted frame, symbol).

    Row ``s`` shows the attention used for frame ``s``; columns beyond
    the symbols readable at that moment are greyed.  Every cell carries
    ``data-s``/``data-i`` attributes (both 1-based) so the greyed set
    is machine-checkable.  The staircase overlays the read boundary.
    """
    speaks = [rec for rec in trace.records if rec.action is Action.SPEAK]
    if not speaks:
        raise DomainError("trace has no emitted frames to plot")
    if num_chars < 1:
        raise DomainError("symbol count must be positive")
    t_emitted = len(speaks)
    left, top = 40.0, 16.0
    width = left + num_chars * cell + 16.0
    height = top + t_emitted * cell + 40.0

    body = ['  <g stroke="none">']
    for s, rec in enumerate(speaks, start=1):
        r_before = rec.counters.chars_read
        y = top + (s - 1) * cell
        for i in range(1, num_chars + 1):
            x = left + (i - 1) * cell
            if i > r_before:
                attrs = f'fill="{UNREAD_FILL}" class="unread"'
            else:
                weight = rec.attention[i - 1] if i - 1 < len(rec.attention) else 0.0
                attrs = f'fill="{_heat_fill(weight)}"'
            body.append(
                f'    <rect x="{x:g}" y="{y:g}" width="{cell:g}" '
                f'height="{cell:g}" data-s="{s}" data-i="{i}" {attrs}/>')
    body.append("  </g>")

    points = []
    for s, rec in enumerate(speaks, start=1):
        x = left + rec.counters.chars_read * cell
        points.append(f"{x:g},{top + (s - 1) * cell:g}")
        points.append(f"{x:g},{top + s * cell:g}")
    body.append(
        f'  <polyline points="{" ".join(points)}" fill="none" '
        f'stroke="{STAIR_COLOR}" stroke-width="2"/>')

    mid_x = left + num_chars * cell / 2
    mid_y = top + t_emitted * cell
    body.append(
        f'  <text x="{mid_x:g}" y="{mid_y + 24:g}" font-size="11" '
        f'text-anchor="middle">{_escape("symbols read")}</text>')
    body.append(
        f'  <text x="12" y="{top + t_emitted * cell / 2:g}" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 12 '
        f'{top + t_emitted * cell / 2:g})">{_escape("frames emitted")}</text>')
    return _svg_document(width, height, body)


def render_tradeoff_svg(rows: list[list], width: float = 360.0,
                        height: float = 260.0) -> str:
    """Scatter of quality (mean squared error, y) against latency
    (normalized area, x), one labeled point per policy."""
    if not rows:
        raise DomainError("no policies to plot")
    left, right, top, bottom = 56.0, 16.0, 16.0, 44.0
    plot_w = width - left - right
    plot_h = height - top - bottom
    max_mse = max(max(float(r[2]) for r in rows), 1e-9) * 1.15

    def sx(d_t: float) -> float:
        return left + d_t * plot_w

    def sy(mse: float) -> float:
        return top + plot_h - (mse / max_mse) * plot_h

    body = [
        f'  <rect x="{left:g}" y="{top:g}" width="{plot_w:g}" '
        f'height="{plot_h:g}" fill="none" stroke="#888"/>'
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = sx(tick)
        body.append(
            f'  <line x1="{x:g}" y1="{top + plot_h:g}" x2="{x:g}" '
            f'y2="{top + plot_h + 4:g}" stroke="#888"/>')
        body.append(
            f'  <text x="{x:g}" y="{top + plot_h + 16:g}" font-size="10" '
            f'text-anchor="middle">{tick:g}</text>')
    for frac in (0.0, 0.5, 1.0):
        mse = frac * max_mse
        y = sy(mse)
        body.append(
            f'  <line x1="{left - 4:g}" y1="{y:g}" x2="{left:g}" y2="{y:g}" '
            f'stroke="#888"/>')
        body.append(
            f'  <text x="{left - 6:g}" y="{y + 3:g}" font-size="10" '
            f'text-anchor="end">{mse:.4g}</text>')
    for row in rows:
        name, d_t, mse = str(row[0]), float(row[1]), float(row[2])
        body.append(
            f'  <circle cx="{sx(d_t):g}" cy="{sy(mse):g}" r="4" '
            f'fill="#1f77b4" data-policy="{_escape(name)}"/>')
        body.append(
            f'  <text x="{sx(d_t):g}" y="{sy(mse) - 7:g}" font-size="10" '
            f'text-anchor="middle">{_escape(name)}</text>')
    body.append(
        f'  <text x="{left + plot_w / 2:g}" y="{height - 8:g}" font-size="11" '
        f'text-anchor="middle">{_escape("latency (area under path)")}</text>')
    body.append(
        f'  <text x="14" y="{top + plot_h / 2:g}" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 14 {top + plot_h / 2:g})">'
        f'{_escape("mean squared error")}</text>')
    return _svg_document(width, height, body)


def write_svg(svg: str, path: str | Path) -> None:
    Path(path).write_text(svg, encoding="utf-8")
