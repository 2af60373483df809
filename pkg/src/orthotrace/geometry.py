"""Small planar-geometry helpers shared across modules."""

from __future__ import annotations

import numpy as np

__all__ = ["polygon_area", "points_in_polygon"]


def polygon_area(poly) -> float:
    """Shoelace area of a simple polygon, independent of winding."""
    s = 0.0
    for (x1, y1), (x2, y2) in zip(poly, tuple(poly[1:]) + (poly[0],)):
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly) -> np.ndarray:
    """Even-odd containment test, vectorized over the points.

    The strict comparisons make the rule half-open on axis-aligned edges: a
    point exactly on a minimum-x or minimum-y edge counts as inside, one on
    a maximum edge does not, so edge-adjacent rectangles partition points
    between them with no double counting.
    """
    inside = np.zeros(np.shape(xs), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > ys) != (y2 > ys)
        x_at = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
        inside ^= crosses & (xs < x_at)
    return inside
