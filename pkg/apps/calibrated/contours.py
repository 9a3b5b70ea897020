"""
Marching squares on a rectilinear grid with linear edge interpolation.

Z is indexed Z[j, i] at (xs[i], ys[j]). Cells with a non-finite corner are
skipped. Saddle cells are resolved by the mean of the four corners.
"""

from collections import defaultdict
from typing import Dict, List, Tuple

import numpy as np

EdgeKey = Tuple[str, int, int]

# crossed-edge pairs for saddle cells, keyed by (case, centre above level)
_SADDLES = {
    (5, True): ((0, 1), (2, 3)),
    (5, False): ((3, 0), (1, 2)),
    (10, True): ((3, 0), (1, 2)),
    (10, False): ((0, 1), (2, 3)),
}


def _edge_keys(i: int, j: int) -> Tuple[EdgeKey, EdgeKey, EdgeKey, EdgeKey]:
    # bottom, right, top, left
    return ("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)


def _edge_point(
    key: EdgeKey, xs: np.ndarray, ys: np.ndarray, Z: np.ndarray, level: float
) -> Tuple[float, float]:
    kind, i, j = key
    if kind == "h":
        z0, z1 = Z[j, i], Z[j, i + 1]
        t = (level - z0) / (z1 - z0)
        return float(xs[i] + t * (xs[i + 1] - xs[i])), float(ys[j])
    z0, z1 = Z[j, i], Z[j + 1, i]
    t = (level - z0) / (z1 - z0)
    return float(xs[i]), float(ys[j] + t * (ys[j + 1] - ys[j]))


def _segments(Z: np.ndarray, level: float) -> List[Tuple[EdgeKey, EdgeKey]]:
    ny, nx = Z.shape
    finite = np.isfinite(Z)
    above = np.where(finite, Z, -np.inf) >= level
    segments: List[Tuple[EdgeKey, EdgeKey]] = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            if not (finite[j, i] and finite[j, i + 1] and finite[j + 1, i + 1] and finite[j + 1, i]):
                continue
            corners = (above[j, i], above[j, i + 1], above[j + 1, i + 1], above[j + 1, i])
            case = sum(int(flag) << bit for bit, flag in enumerate(corners))
            if case in (0, 15):
                continue
            edges = _edge_keys(i, j)
            if case in (5, 10):
                centre = 0.25 * (Z[j, i] + Z[j, i + 1] + Z[j + 1, i + 1] + Z[j + 1, i])
                for a, b in _SADDLES[(case, bool(centre >= level))]:
                    segments.append((edges[a], edges[b]))
                continue
            crossed = [edges[k] for k in range(4) if corners[k] != corners[(k + 1) % 4]]
            segments.append((crossed[0], crossed[1]))
    return segments


def _join(segments: List[Tuple[EdgeKey, EdgeKey]]) -> List[List[EdgeKey]]:
    neighbours: Dict[EdgeKey, List[EdgeKey]] = defaultdict(list)
    for a, b in segments:
        neighbours[a].append(b)
        neighbours[b].append(a)

    visited = set()
    chains: List[List[EdgeKey]] = []

    def walk(start: EdgeKey) -> List[EdgeKey]:
        chain = [start]
        visited.add(start)
        current = start
        while True:
            step = [n for n in neighbours[current] if n not in visited]
            if not step:
                return chain
            current = min(step)
            visited.add(current)
            chain.append(current)

    ends = sorted(key for key, adjacent in neighbours.items() if len(adjacent) == 1)
    for key in ends:
        if key not in visited:
            chains.append(walk(key))
    for key in sorted(neighbours):
        if key not in visited:
            chain = walk(key)
            chain.append(chain[0])
            chains.append(chain)
    return chains


def marching_squares(
    xs: np.ndarray, ys: np.ndarray, Z: np.ndarray, level: float
) -> List[np.ndarray]:
    """Polylines (k x 2 arrays) of the level set Z = level; closed ones repeat their first point"""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (ys.size, xs.size):
        raise ValueError(f"Grid shape {Z.shape} does not match axes ({ys.size}, {xs.size})")

    polylines = []
    for chain in _join(_segments(Z, level)):
        points = np.array([_edge_point(key, xs, ys, Z, level) for key in chain])
        if len(points) >= 2:
            polylines.append(points)
    return polylines
