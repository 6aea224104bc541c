"""Finite point clouds and the metric primitives that run over them.

Neighbour searches are exact in the intrinsic metric.  A k-d tree over the raw
coordinates is used for pruning, which is sound because coordinate distance
never exceeds intrinsic distance in any shipped space.  Small problems fall
back to a dense scan, where ties resolve to the lowest index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloudError, InputError, SpaceMismatchError
from .geometry import Point, Space, space_from_json

DEFAULT_DEDUP_EPS = 1e-6
_DENSE_LIMIT = 2_000_000
_BLOCK = 1024

_workers = 1


def set_workers(n: int) -> None:
    """Cap the worker count used by k-d tree queries (results do not depend on it)."""
    global _workers
    _workers = max(1, int(n))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered, deduplicated finite subset of ``space``.

    Rows of ``array`` are coordinate vectors.  On construction points closer
    than ``dedup_eps`` to an earlier point are dropped, so insertion order
    decides which representative survives.
    """

    space: Space
    array: np.ndarray
    dedup_eps: float = DEFAULT_DEDUP_EPS
    _trusted: bool = field(default=False, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, self.space.width))
        arr = arr.reshape(-1, self.space.width)
        if not self._trusted:
            arr = self.space.check_array(arr)
            arr = arr[dedup_indices(self.space, arr, self.dedup_eps)]
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "_trusted", True)

    @classmethod
    def from_points(cls, space: Space, points: Iterable[Point],
                    dedup_eps: float = DEFAULT_DEDUP_EPS) -> "PointCloud":
        rows = []
        for p in points:
            if not isinstance(p, Point) or p.space != space:
                raise SpaceMismatchError(f"cloud over {space} received {p!r}")
            rows.append(p.coords)
        return cls(space, np.array(rows, dtype=float).reshape(-1, space.width), dedup_eps)

    @classmethod
    def trusted(cls, space: Space, array: np.ndarray, dedup_eps: float) -> "PointCloud":
        return cls(space, array, dedup_eps, True)

    def __len__(self) -> int:
        return self.array.shape[0]

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    @property
    def points(self) -> list[Point]:
        return [Point(self.space, tuple(row)) for row in self.array]

    def contains(self, p: Point, tol: float) -> bool:
        if len(self) == 0:
            return False
        return float(np.min(self.space.dist_array(self.array, p.array))) <= tol

    def to_json(self) -> dict:
        return {"space": self.space.to_json(),
                "points": [self.space.point_to_json(row) for row in self.array]}

    @classmethod
    def from_json(cls, obj: dict, dedup_eps: float = DEFAULT_DEDUP_EPS) -> "PointCloud":
        if not isinstance(obj, dict) or "space" not in obj or "points" not in obj:
            raise InputError("cloud JSON needs 'space' and 'points'")
        space = space_from_json(obj["space"])
        rows = [space.point_from_json(p) for p in obj["points"]]
        return cls(space, np.array(rows, dtype=float).reshape(-1, space.width), dedup_eps)


def load_cloud(path, dedup_eps: float = DEFAULT_DEDUP_EPS) -> PointCloud:
    with open(path) as fh:
        return PointCloud.from_json(json.load(fh), dedup_eps)


def save_cloud(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        json.dump(cloud.to_json(), fh)
        fh.write("\n")


def require_same_space(*clouds: PointCloud) -> Space:
    space = clouds[0].space
    for c in clouds[1:]:
        if c.space != space:
            raise SpaceMismatchError(f"clouds live in different spaces: {space} and {c.space}")
    return space


# -- dedup -------------------------------------------------------------------

def dedup_indices(space: Space, arr: np.ndarray, eps: float) -> np.ndarray:
    """Indices of a greedy, first-wins subset with no two points within ``eps``."""
    n = arr.shape[0]
    if n <= 1:
        return np.arange(n)
    # cells of diagonal eps merge safely; tags keep quadrants apart
    cell = eps / np.sqrt(space.width) if eps > 0 else 0.0
    if cell > 0:
        keys = np.floor(arr / cell).astype(np.int64)
    else:
        keys = np.ascontiguousarray(arr).view(np.int64).reshape(n, -1).copy()
    keys = np.concatenate([keys, space.tags_array(arr).astype(np.int64)], axis=1)
    _, first = np.unique(keys, axis=0, return_index=True)
    keep = np.sort(first)
    if eps <= 0 or keep.size <= 1:
        return keep
    sub = arr[keep]
    pairs = cKDTree(sub).query_pairs(eps, output_type="ndarray")
    if pairs.size == 0:
        return keep
    if not space.metric_is_coordinate:
        close = space.dist_array(sub[pairs[:, 0]], sub[pairs[:, 1]]) <= eps
        pairs = pairs[close]
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    removed = np.zeros(keep.size, dtype=bool)
    for i, j in pairs:
        if not removed[i]:
            removed[j] = True
    return keep[~removed]


# -- neighbours ----------------------------------------------------------------

def nearest(space: Space, queries: np.ndarray, refs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each query row, the distance to and index of the closest ``refs`` row."""
    queries = np.asarray(queries, dtype=float).reshape(-1, space.width)
    refs = np.asarray(refs, dtype=float).reshape(-1, space.width)
    if refs.shape[0] == 0:
        raise EmptyCloudError("nearest-neighbour search against an empty set")
    nq, nr = queries.shape[0], refs.shape[0]
    if nq == 0:
        return np.zeros(0), np.zeros(0, dtype=np.intp)
    if nq * nr <= _DENSE_LIMIT:
        return _nearest_dense(space, queries, refs)
    tree = cKDTree(refs)
    coord, idx = tree.query(queries, k=1, workers=_workers)
    d = space.dist_array(queries, refs[idx])
    if space.metric_is_coordinate:
        return d, idx
    loose = np.nonzero(d > coord * (1 + 1e-12) + 1e-15)[0]
    for q in loose:
        cand = np.asarray(tree.query_ball_point(queries[q], d[q] * (1 + 1e-12)), dtype=np.intp)
        dc = space.dist_array(refs[cand], queries[q])
        k = int(np.argmin(dc))
        if dc[k] < d[q]:
            d[q], idx[q] = dc[k], cand[k]
    return d, idx


def _nearest_dense(space, queries, refs):
    chunk = max(1, _DENSE_LIMIT // max(1, refs.shape[0]))
    dist = np.empty(queries.shape[0])
    idx = np.empty(queries.shape[0], dtype=np.intp)
    for s in range(0, queries.shape[0], chunk):
        block = space.dist_array(queries[s:s + chunk, None, :], refs[None, :, :])
        k = np.argmin(block, axis=1)
        idx[s:s + chunk] = k
        dist[s:s + chunk] = block[np.arange(block.shape[0]), k]
    return dist, idx


def directed_hausdorff(a: PointCloud, b: PointCloud) -> float:
    """sup over a of the distance to b."""
    require_same_space(a, b)
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloudError("Hausdorff distance needs nonempty clouds")
    return float(np.max(nearest(a.space, a.array, b.array)[0]))


def hausdorff(a: PointCloud, b: PointCloud) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def diameter(space: Space, arr: np.ndarray) -> float:
    arr = np.asarray(arr, dtype=float).reshape(-1, space.width)
    if arr.shape[0] <= 1:
        return 0.0
    best = 0.0
    chunk = max(1, _DENSE_LIMIT // arr.shape[0])
    for s in range(0, arr.shape[0], chunk):
        block = space.dist_array(arr[s:s + chunk, None, :], arr[None, :, :])
        best = max(best, float(block.max()))
    return best


# -- farthest-point subsampling -----------------------------------------------

class _BlockMax:
    """Argmax over an array that changes in small scattered patches."""

    def __init__(self, values: np.ndarray):
        n = values.shape[0]
        self.nb = -(-n // _BLOCK)
        self.buf = np.full(self.nb * _BLOCK, -np.inf)
        self.buf[:n] = values
        self.view = self.buf.reshape(self.nb, _BLOCK)
        self.bmax = self.view.max(axis=1)

    def refresh(self, idx: np.ndarray | None = None) -> None:
        if idx is None:
            self.bmax = self.view.max(axis=1)
        else:
            hit = np.zeros(self.nb, dtype=bool)
            hit[idx // _BLOCK] = True
            blocks = np.flatnonzero(hit)
            self.bmax[blocks] = self.view[blocks].max(axis=1)

    def argmax(self) -> int:
        b = int(np.argmax(self.bmax))
        return b * _BLOCK + int(np.argmax(self.view[b]))


def farthest_point_subsample(space: Space, arr: np.ndarray, k: int,
                             protected: Sequence[int] = (), seed: int = 0) -> np.ndarray:
    """Greedy farthest-point selection of ``k`` rows, returned as sorted indices.

    Protected rows are selected first and never dropped.  Without protected
    rows the start index is drawn from ``seed``.  Ties go to the lowest index.
    """
    m = arr.shape[0]
    protected = np.unique(np.asarray(protected, dtype=np.intp))
    if k >= m:
        return np.arange(m)
    if protected.size:
        mind = nearest(space, arr, arr[protected])[0]
        selected = list(protected)
    else:
        start = int(np.random.default_rng(seed).integers(m))
        mind = space.dist_array(arr, arr[start])
        selected = [start]
    if len(selected) >= k:
        return np.sort(np.asarray(selected, dtype=np.intp))

    heap = _BlockMax(mind)
    dense = m <= 20_000
    tree = None if dense else cKDTree(arr)
    while len(selected) < k:
        i = heap.argmax()
        r = heap.buf[i]
        if r <= 0:
            break
        selected.append(i)
        if dense or len(selected) < 64:
            np.minimum(heap.buf[:m], space.dist_array(arr, arr[i]), out=heap.buf[:m])
            heap.refresh()
        else:
            idx = np.asarray(tree.query_ball_point(arr[i], r, return_sorted=False), dtype=np.intp)
            heap.buf[idx] = np.minimum(heap.buf[idx], space.dist_array(arr[idx], arr[i]))
            heap.buf[i] = 0.0
            heap.refresh(idx)
    return np.sort(np.asarray(selected, dtype=np.intp))


def farthest_point_order(space: Space, arr: np.ndarray, seed: int = 0) -> np.ndarray:
    """Full farthest-point traversal of ``arr`` (a dense enumeration).

    A seeded random row serves only as an anchor: the traversal starts at the
    row farthest from it, so the first two rows of a segment sample are its
    endpoints.
    """
    m = arr.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.intp)
    anchor = int(np.random.default_rng(seed).integers(m))
    first = int(np.argmax(space.dist_array(arr, arr[anchor])))
    order = [first]
    mind = space.dist_array(arr, arr[first])
    mind[first] = -1.0
    for _ in range(m - 1):
        i = int(np.argmax(mind))
        order.append(i)
        np.minimum(mind, space.dist_array(arr, arr[i]), out=mind)
        mind[i] = -1.0
    return np.asarray(order, dtype=np.intp)
