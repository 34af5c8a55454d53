"""Deterministic artifact writers: CSV, JSON, SVG line plots, manifests.

Floats are rendered with shortest round-trip repr and files use fixed
newline conventions, so identical inputs give byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Iterable, Sequence


def fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    return str(v)


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path | str, doc) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8", newline="\n")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path | str, command: str, config_text: str,
                   seed: int, threads: int, wall_time_s: float,
                   extra: dict | None = None) -> None:
    """Run manifest.  wall_time_s is the only volatile field; everything
    else is a pure function of the inputs."""
    import numpy
    import scipy

    from . import __version__

    doc = {
        "command": command,
        "config_sha256": sha256_text(config_text),
        "seed": seed,
        "threads": threads,
        "versions": {
            "freeloop": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(str(x) for x in sys.version_info[:3]),
        },
        "wall_time_s": wall_time_s,
    }
    if extra:
        doc["outputs"] = extra
    write_json(Path(out_dir) / "manifest.json", doc)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_line_plot(path: Path | str, series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
                  title: str = "", xlabel: str = "", ylabel: str = "",
                  width: int = 640, height: int = 420) -> None:
    """Self-contained SVG with axes, one polyline per series, and a legend."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 36, 48
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    iw = width - pad_l - pad_r
    ih = height - pad_t - pad_b

    def sx(x: float) -> str:
        return f"{pad_l + iw * (x - x0) / (x1 - x0):.2f}"

    def sy(y: float) -> str:
        return f"{pad_t + ih * (1.0 - (y - y0) / (y1 - y0)):.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="monospace">{title}</text>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{height - pad_b}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" '
        f'y2="{height - pad_b}" stroke="black" stroke-width="1"/>',
        f'<text x="{width // 2}" y="{height - 10}" text-anchor="middle" font-size="12" '
        f'font-family="monospace">{xlabel}</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="12" '
        f'font-family="monospace" transform="rotate(-90 14 {height // 2})">{ylabel}</text>',
    ]
    for tick in range(5):
        yv = y0 + (y1 - y0) * tick / 4
        xv = x0 + (x1 - x0) * tick / 4
        parts.append(f'<text x="{pad_l - 6}" y="{sy(yv)}" text-anchor="end" font-size="10" '
                     f'font-family="monospace">{yv:.3g}</text>')
        parts.append(f'<text x="{sx(xv)}" y="{height - pad_b + 14}" text-anchor="middle" '
                     f'font-size="10" font-family="monospace">{xv:.3g}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(x)},{sy(y)}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x)}" cy="{sy(y)}" r="2.5" fill="{color}"/>')
        ly = pad_t + 14 * i
        parts.append(f'<line x1="{width - pad_r - 110}" y1="{ly}" x2="{width - pad_r - 90}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad_r - 84}" y="{ly + 4}" font-size="11" '
                     f'font-family="monospace">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8", newline="\n")
