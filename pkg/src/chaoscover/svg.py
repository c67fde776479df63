"""Deterministic SVG 1.1 scatter plots of point dumps in the unit square."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

_EDGE_TOL = 1e-9


class PointFileError(ValueError):
    pass


@dataclass(frozen=True)
class SvgStyle:
    size: int = 600
    radius: float = 0.6
    fill: str = "#1f3a5f"
    background: str = "#ffffff"
    comment: str | None = None


def read_points(csv_path: str | Path) -> list[tuple[float, float]]:
    """Read ``x, y`` columns (a ``step`` column is allowed); errors name the offending line."""
    pts = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return pts
        cols = [h.strip() for h in header]
        if "x" not in cols or "y" not in cols:
            raise PointFileError(f"{csv_path}:1: header must contain x and y columns, got {cols}")
        ix, iy = cols.index("x"), cols.index("y")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x, y = float(row[ix]), float(row[iy])
            except (IndexError, ValueError):
                raise PointFileError(f"{csv_path}:{lineno}: malformed row {row!r}") from None
            if not (-_EDGE_TOL <= x <= 1 + _EDGE_TOL and -_EDGE_TOL <= y <= 1 + _EDGE_TOL):
                raise PointFileError(f"{csv_path}:{lineno}: point ({x}, {y}) outside the unit square")
            pts.append((x, y))
    return pts


def render_svg(points, style: SvgStyle = SvgStyle()) -> str:
    s = style.size
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{s}" height="{s}" viewBox="0 0 {s} {s}">',
    ]
    if style.comment:
        out.append(f"<!-- {style.comment.replace('--', '- -')} -->")
    out.append(f'<rect width="{s}" height="{s}" fill="{style.background}"/>')
    out.append(f'<g fill="{style.fill}">')
    r = f"{style.radius:.3f}"
    for x, y in points:
        out.append(f'<circle cx="{x * s:.3f}" cy="{(1 - y) * s:.3f}" r="{r}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_points(csv_path: str | Path, svg_path: str | Path, style: SvgStyle = SvgStyle()) -> int:
    """Render a point CSV to SVG; returns the number of circles written."""
    pts = read_points(csv_path)
    Path(svg_path).write_text(render_svg(pts, style), encoding="utf-8")
    return len(pts)
