"""Artifact rendering: self-describing CSV tables and plain-rect SVG heatmaps.

All writers format floats with repr-faithful precision and fixed row order, so
a rerun with the same inputs reproduces each artifact byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

_RAMP = (
    (0.267, 0.005, 0.329),
    (0.282, 0.141, 0.458),
    (0.253, 0.265, 0.530),
    (0.207, 0.372, 0.553),
    (0.164, 0.471, 0.558),
    (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518),
    (0.267, 0.749, 0.441),
    (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150),
    (0.993, 0.906, 0.144),
)


def config_hash(payload) -> str:
    """12-hex digest of the canonical JSON form; stamped on every artifact."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (np.floating,)):
        return format(float(value), ".17g")
    return str(value)


def write_grid_csv(path, columns, rows, hash_: str) -> None:
    """Write rows under a column-name header prefixed by the config hash."""
    lines = [f"# config_hash={hash_}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def grid_rows(axis1, axis2, values):
    """Flatten a sampled surface to (coord1, coord2, value) rows, row-major."""
    for i, v1 in enumerate(axis1):
        for j, v2 in enumerate(axis2):
            yield float(v1), float(v2), float(values[i, j])


def write_jsonl(path, records) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _ramp_color(t: float) -> str:
    pos = min(max(t, 0.0), 1.0) * (len(_RAMP) - 1)
    k = min(int(pos), len(_RAMP) - 2)
    frac = pos - k
    rgb = tuple((1.0 - frac) * _RAMP[k][i] + frac * _RAMP[k + 1][i] for i in range(3))
    return "#{:02x}{:02x}{:02x}".format(*(int(round(255.0 * c)) for c in rgb))


def heatmap_svg(
    path,
    values: np.ndarray,
    extent: tuple[float, float, float, float],
    clip: tuple[float, float],
    axis_labels: tuple[str, str] = ("sigma_1", "sigma_2"),
    title: str = "",
) -> None:
    """Render a log-scale heatmap as one SVG rect per grid cell.

    ``values`` is indexed ``[i, j]`` with axis 1 horizontal and axis 2
    vertical; the vertical axis is flipped so low values sit at the bottom.
    Values are clipped into ``clip`` before taking log10, matching the
    cropped presentation of the reference figures.
    """
    lo, hi = clip
    if not (lo > 0.0 and hi > lo):
        raise ValueError(f"clip range must satisfy 0 < lo < hi, got {clip}")
    n1, n2 = values.shape
    clipped = np.clip(values, lo, hi)
    log_vals = np.log10(clipped)
    span = math.log10(hi) - math.log10(lo)
    normalized = (log_vals - math.log10(lo)) / span

    plot = 600
    margin = 40
    cell_w = plot / n1
    cell_h = plot / n2
    width = plot + 2 * margin
    height = plot + 2 * margin
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="{margin / 2 + 5:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for i in range(n1):
        x = margin + i * cell_w
        for j in range(n2):
            y = margin + plot - (j + 1) * cell_h
            color = _ramp_color(float(normalized[i, j]))
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell_w + 0.05:.2f}" '
                f'height="{cell_h + 0.05:.2f}" fill="{color}"/>'
            )
    x0, x1, y0, y1 = extent
    labels = [
        (margin, height - 8, "start", f"{axis_labels[0]}={x0:g}"),
        (margin + plot, height - 8, "end", f"{axis_labels[0]}={x1:g}"),
        (margin - 4, margin + plot, "end", f"{axis_labels[1]}={y0:g}"),
        (margin - 4, margin + 12, "end", f"{axis_labels[1]}={y1:g}"),
    ]
    for x, y, anchor, text in labels:
        parts.append(
            f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="11">{text}</text>'
        )
    parts.append(
        f'<text x="{width - 6:.1f}" y="{height - 8:.1f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">log10 scale, clipped to [{lo:g}, {hi:g}]</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
