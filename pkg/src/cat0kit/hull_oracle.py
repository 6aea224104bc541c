"""Exact convex-hull distance in R^d, used to validate threaded clouds."""

from __future__ import annotations

import numpy as np
from scipy.optimize import lsq_linear
from scipy.spatial import ConvexHull, QhullError

from .errors import UnsupportedSpaceError
from .geometry import Euclidean, Point

_SIMPLEX_WEIGHT = 1e4


def _require_euclidean(space) -> None:
    if not isinstance(space, Euclidean):
        raise UnsupportedSpaceError(f"hull membership is only available in euclidean spaces, not {space}")


def hull_distance_one(vertices: np.ndarray, z: np.ndarray) -> float:
    """l2 distance from z to the convex hull of the rows of ``vertices``.

    Solves the simplex-constrained least squares problem as a bounded least
    squares problem (BVLS) with the sum-to-one row weighted heavily, then renormalizes the weights so the
    returned distance is attained by a genuine convex combination.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[0] == 1:
        return float(np.linalg.norm(vertices[0] - z))
    a = np.vstack([vertices.T, _SIMPLEX_WEIGHT * np.ones(vertices.shape[0])])
    b = np.concatenate([z, [_SIMPLEX_WEIGHT]])
    w = lsq_linear(a, b, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    total = w.sum()
    if total <= 0:
        return float(np.min(np.linalg.norm(vertices - z, axis=1)))
    best = float(np.linalg.norm(vertices.T @ (w / total) - z))
    lam = _polish(vertices[w > 1e-12 * total], z)
    if lam is not None:
        support = vertices[w > 1e-12 * total]
        best = min(best, float(np.linalg.norm(support.T @ lam - z)))
    return best


def _polish(support: np.ndarray, z: np.ndarray) -> np.ndarray | None:
    # nearest point of the affine span of the support; the penalty solve only
    # gets the weights right to about 1e-12, this recovers full precision
    if support.shape[0] < 2:
        return None
    basis = (support[1:] - support[0]).T
    mu = np.linalg.lstsq(basis, z - support[0], rcond=None)[0]
    lam = np.concatenate([[1.0 - mu.sum()], mu])
    if lam.min() < -1e-12:
        return None
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def hull_distances(vertices: np.ndarray, queries: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Distances from each query row to co(vertices).

    When the hull is full-dimensional, facet inequalities settle clear cases
    (inside -> 0); values that are only needed up to ``tol`` are reported as
    the facet lower bound once that bound already exceeds ``tol``.
    """
    vertices = np.asarray(vertices, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.full(queries.shape[0], np.nan)
    d = vertices.shape[1]
    if vertices.shape[0] > d and d >= 2:
        try:
            hull = ConvexHull(vertices)
        except QhullError:
            hull = None
        if hull is not None:
            slack = queries @ hull.equations[:, :-1].T + hull.equations[:, -1]
            worst = slack.max(axis=1)
            out[worst <= 0] = 0.0
            if tol > 0:
                far = worst > tol
                out[far] = worst[far]
    for k in np.nonzero(np.isnan(out))[0]:
        out[k] = hull_distance_one(vertices, queries[k])
    return out


def euclidean_hull_membership(points: list[Point], z: Point, tol: float) -> bool:
    """True iff z lies within ``tol`` of the convex hull of ``points``."""
    if not points:
        return False
    space = points[0].space
    _require_euclidean(space)
    _require_euclidean(z.space)
    vertices = np.array([p.coords for p in points])
    return float(hull_distances(vertices, z.array[None, :])[0]) <= tol
