"""Minimal hand-emitted SVG line charts (no plotting dependency).

Output is fully deterministic: fixed canvas, fixed float formatting, no
timestamps or generator metadata.
"""

from __future__ import annotations

from typing import Sequence

WIDTH, HEIGHT = 640, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 40, 50

PALETTE = ("#d95f02", "#1f77b4", "#2ca02c", "#9467bd")


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _scale(v: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    if hi == lo:
        return 0.5 * (out_lo + out_hi)
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """Render labelled (x, y) series as an SVG string.

    Args:
        series: (label, xs, ys) triples; empty series are skipped.
        title: chart heading.
        x_label, y_label: axis captions.
    """
    drawn = [(label, list(xs), list(ys)) for label, xs, ys in series if len(xs) > 0]
    all_x = [v for _, xs, _ in drawn for v in xs] or [0.0, 1.0]
    all_y = [v for _, _, ys in drawn for v in ys] or [0.0, 1.0]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    px_lo, px_hi = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    py_lo, py_hi = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP  # y axis grows upward

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
        # axes
        f'<line x1="{px_lo}" y1="{py_lo}" x2="{px_hi}" y2="{py_lo}" stroke="black"/>',
        f'<line x1="{px_lo}" y1="{py_lo}" x2="{px_lo}" y2="{py_hi}" stroke="black"/>',
        f'<text x="{(px_lo + px_hi) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>',
        f'<text x="16" y="{(py_lo + py_hi) // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(py_lo + py_hi) // 2})">{y_label}</text>',
    ]
    n_ticks = 5
    for i in range(n_ticks):
        frac = i / (n_ticks - 1)
        xv = x_lo + frac * (x_hi - x_lo)
        xp = _scale(xv, x_lo, x_hi, px_lo, px_hi)
        parts.append(f'<line x1="{_fmt(xp)}" y1="{py_lo}" x2="{_fmt(xp)}" y2="{py_lo + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{_fmt(xp)}" y="{py_lo + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(xv)}</text>'
        )
        yv = y_lo + frac * (y_hi - y_lo)
        yp = _scale(yv, y_lo, y_hi, py_lo, py_hi)
        parts.append(f'<line x1="{px_lo - 5}" y1="{_fmt(yp)}" x2="{px_lo}" y2="{_fmt(yp)}" stroke="black"/>')
        parts.append(
            f'<text x="{px_lo - 8}" y="{_fmt(yp + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(yv)}</text>'
        )
    for k, (label, xs, ys) in enumerate(drawn):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(
            f"{_fmt(_scale(x, x_lo, x_hi, px_lo, px_hi))},{_fmt(_scale(y, y_lo, y_hi, py_lo, py_hi))}"
            for x, y in zip(xs, ys)
        )
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = MARGIN_TOP + 16 * k
        parts.append(
            f'<line x1="{px_hi - 130}" y1="{ly}" x2="{px_hi - 105}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{px_hi - 100}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
