#!/usr/bin/env python3
"""
Report writers for experiment runs: incremental CSV tables, log-log SVG charts
and a JSON summary next to them.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

__VERSION__ = "v2025-10-01a"

logger = logging.getLogger(__name__)

# --------------------------
# Value formatting
# --------------------------
def format_value(v: Any) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)

# --------------------------
# CSV sink
# --------------------------
class CsvSink:
    """
    Writes one row at a time so an interrupted run leaves a valid prefix.
    First line is the header; LF line endings.
    """

    def __init__(self, path: Path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self.rows = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(self.path, index=False, lineterminator="\n")

    def write(self, row: Mapping[str, Any]) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise KeyError(f"row missing columns {missing} for {self.path.name}")
        frame = pd.DataFrame([[format_value(row[c]) for c in self.columns]], columns=self.columns)
        with self.path.open("a", encoding="utf-8", newline="") as f:
            frame.to_csv(f, header=False, index=False, lineterminator="\n")
            f.flush()
        self.rows += 1


def write_summary(path: Path, summary: Dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"version": __VERSION__, **summary}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o: Any):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)

# --------------------------
# SVG line charts
# --------------------------
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 50


def _axis(values: np.ndarray, log: bool) -> Tuple[float, float]:
    v = np.log10(values) if log else values
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _ticks(lo: float, hi: float, log: bool) -> List[float]:
    if log:
        return [float(e) for e in range(math.floor(lo), math.ceil(hi) + 1) if lo <= e <= hi] or [lo, hi]
    return list(np.linspace(lo, hi, 5))


def render_line_chart(
    path: Path,
    series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    log_x: bool = True,
    log_y: bool = True,
    x_label: str = "t",
    y_label: str = "",
) -> Optional[Path]:
    """Write an SVG chart; non-positive points are dropped on log axes. Returns None if nothing is drawable."""
    clean: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for name, (xs, ys) in series.items():
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_x:
            keep &= x > 0
        if log_y:
            keep &= y > 0
        if keep.sum() >= 2:
            clean[name] = (x[keep], y[keep])
    if not clean:
        logger.info(f"chart {Path(path).name}: nothing to draw")
        return None

    all_x = np.concatenate([x for x, _ in clean.values()])
    all_y = np.concatenate([y for _, y in clean.values()])
    x_lo, x_hi = _axis(all_x, log_x)
    y_lo, y_hi = _axis(all_y, log_y)
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(v: float) -> float:
        v = math.log10(v) if log_x else v
        return _LEFT + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v: float) -> float:
        v = math.log10(v) if log_y else v
        return _TOP + ph - (v - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{_esc(title)}</text>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for tick in _ticks(x_lo, x_hi, log_x):
        px = _LEFT + (tick - x_lo) / (x_hi - x_lo) * pw
        label = f"1e{int(tick)}" if log_x else f"{tick:.3g}"
        parts.append(f'<line x1="{px:.1f}" y1="{_TOP}" x2="{px:.1f}" y2="{_TOP + ph}" stroke="#ddd"/>')
        parts.append(f'<text x="{px:.1f}" y="{_TOP + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{label}</text>')
    for tick in _ticks(y_lo, y_hi, log_y):
        py = _TOP + ph - (tick - y_lo) / (y_hi - y_lo) * ph
        label = f"1e{int(tick)}" if log_y else f"{tick:.3g}"
        parts.append(f'<line x1="{_LEFT}" y1="{py:.1f}" x2="{_LEFT + pw}" y2="{py:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{_LEFT - 6}" y="{py + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>')
    parts.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{_esc(x_label)}</text>')
    if y_label:
        parts.append(
            f'<text x="16" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {_TOP + ph / 2:.1f})">{_esc(y_label)}</text>'
        )

    for i, (name, (x, y)) in enumerate(clean.items()):
        color = _PALETTE[i % len(_PALETTE)]
        dash = ' stroke-dasharray="6 4"' if name.startswith("ref") else ""
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{pts}"/>')
        ly = _TOP + 14 + 16 * i
        parts.append(f'<line x1="{_LEFT + pw - 150}" y1="{ly - 4}" x2="{_LEFT + pw - 130}" y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
        parts.append(f'<text x="{_LEFT + pw - 124}" y="{ly}" font-family="sans-serif" font-size="11">{_esc(name)}</text>')
    parts.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def reference_slope(times: Sequence[float], anchor: float, exponent: float) -> np.ndarray:
    """anchor * (t/t0)^exponent, for dashed guide lines."""
    t = np.asarray(times, dtype=float)
    return anchor * (t / t[0]) ** exponent


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
