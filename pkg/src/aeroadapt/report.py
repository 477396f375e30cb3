"""Report artifacts: deterministic SVG line charts of predicted vs actual
concentrations, plus metric and seasonal CSV files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

SVG_WIDTH = 900
SVG_HEIGHT = 300
MARGIN = 40


def _polyline(xs: np.ndarray, ys: np.ndarray, lo: float, hi: float,
              color: str) -> str:
    width = SVG_WIDTH - 2 * MARGIN
    height = SVG_HEIGHT - 2 * MARGIN
    span = (hi - lo) or 1.0
    points = []
    for i, y in enumerate(ys):
        px = MARGIN + width * (i / max(len(ys) - 1, 1))
        py = SVG_HEIGHT - MARGIN - height * ((y - lo) / span)
        points.append(f"{px:.2f},{py:.2f}")
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{" ".join(points)}"/>')


def prediction_chart_svg(actual: Sequence[float], predicted: Sequence[float],
                         title: str) -> str:
    """Actual (blue) vs predicted (red) series; no timestamps embedded, so
    output is byte-identical for identical inputs."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    lo = float(min(actual.min(), predicted.min()))
    hi = float(max(actual.max(), predicted.max()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN}" y="20" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
        f'<text x="{SVG_WIDTH - 220}" y="20" font-family="sans-serif" '
        f'font-size="12" fill="#1f77b4">actual</text>',
        f'<text x="{SVG_WIDTH - 160}" y="20" font-family="sans-serif" '
        f'font-size="12" fill="#d62728">predicted</text>',
        f'<line x1="{MARGIN}" y1="{SVG_HEIGHT - MARGIN}" x2="{SVG_WIDTH - MARGIN}" '
        f'y2="{SVG_HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{SVG_HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="5" y="{MARGIN}" font-family="sans-serif" font-size="10">'
        f'{hi:.1f}</text>',
        f'<text x="5" y="{SVG_HEIGHT - MARGIN}" font-family="sans-serif" '
        f'font-size="10">{lo:.1f}</text>',
        _polyline(None, actual, lo, hi, "#1f77b4"),
        _polyline(None, predicted, lo, hi, "#d62728"),
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def write_prediction_charts(out_dir: Path, per_target: dict[str, tuple],
                            horizon: int) -> list[Path]:
    """One SVG per target pollutant; per_target maps field name to
    (actual, predicted) arrays."""
    written = []
    for fname, (actual, predicted) in sorted(per_target.items()):
        path = out_dir / f"predictions_{fname}_h{horizon}.svg"
        path.write_text(prediction_chart_svg(
            actual, predicted, f"{fname} forecast, {horizon}h ahead"))
        written.append(path)
    return written
