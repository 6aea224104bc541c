"""Set-convergence experiments: increasing hulls and nondecreasing chains."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud, dedup_indices, directed_hausdorff, farthest_point_order, nearest
from .errors import ChainError, EmptyCloudError, ParameterRangeError
from .geometry import Space
from .threader import CAP, EPS, GRID_K, N_MAX, PAIR_BUDGET, convex_hull_cloud


def sampling_resolution(cloud: PointCloud) -> float:
    """Largest nearest-neighbour spacing in the cloud (0 for a single point)."""
    a = cloud.array
    if a.shape[0] < 2:
        return 0.0
    best = 0.0
    for i in range(a.shape[0]):
        d = cloud.space.dist_array(a, a[i])
        d[i] = np.inf
        best = max(best, float(d.min()))
    return best


def geometric_sizes(total: int, n_steps: int) -> list[int]:
    """About ``n_steps`` geometrically spaced subset sizes from 1 to ``total``."""
    if n_steps < 1:
        raise ParameterRangeError(f"n_steps must be positive, got {n_steps}")
    raw = np.geomspace(1, total, n_steps) if n_steps > 1 else np.array([total])
    sizes = sorted(set(int(round(v)) for v in raw) | {total})
    return [s for s in sizes if s >= 1]


@dataclass
class ConvergenceRecord:
    n: int
    gap: float
    hull_size: int
    stabilized: bool
    target_excess: float = 0.0
    hull_excess: float = 0.0


@dataclass
class ConvergenceReport:
    target_size: int
    resolution: float
    records: list[ConvergenceRecord] = field(default_factory=list)

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.records]

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap

    @property
    def reached(self) -> bool:
        return self.final_gap <= 2.0 * self.resolution

    @property
    def monotone_after_first(self) -> bool:
        g = self.gaps[1:]
        return all(b <= a for a, b in zip(g, g[1:]))

    def to_json(self) -> dict:
        return {
            "target_size": self.target_size,
            "resolution": self.resolution,
            "steps": [{"n": r.n, "gap": r.gap, "hull_size": r.hull_size, "stabilized": r.stabilized,
                       "target_excess": r.target_excess, "hull_excess": r.hull_excess}
                      for r in self.records],
            "final_gap": self.final_gap,
            "reached": self.reached,
            "monotone_after_first": self.monotone_after_first,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "gap", "target_excess", "hull_excess", "hull_size", "stabilized"])
        for r in self.records:
            w.writerow([r.n, repr(r.gap), repr(r.target_excess), repr(r.hull_excess), r.hull_size,
                        int(r.stabilized)])
        return buf.getvalue()


def dense_enumeration(target: PointCloud, seed: int = 0) -> PointCloud:
    """The target reordered by a farthest-point traversal."""
    order = farthest_point_order(target.space, target.array, seed)
    return PointCloud.trusted(target.space, target.array[order], target.dedup_eps)


def increasing_hull_convergence(target: PointCloud, n_steps: int = 10, eps: float = EPS, grid_k: int = GRID_K,
                                cap: int = CAP, n_max: int = N_MAX, seed: int = 0,
                                pair_budget: int = PAIR_BUDGET) -> ConvergenceReport:
    """d_H(hull cloud of S_n, target) for nested prefixes S_n of a dense enumeration.

    Both one-sided excesses are kept: ``target_excess`` (target to hull)
    shrinks as the hulls grow, while ``hull_excess`` (hull to target) is
    bounded below by the largest hole in the target sample.
    """
    if len(target) == 0:
        raise EmptyCloudError("target cloud is empty")
    ordered = dense_enumeration(target, seed)
    report = ConvergenceReport(target_size=len(target), resolution=sampling_resolution(target))
    for n in geometric_sizes(len(target), n_steps):
        s_n = PointCloud.trusted(target.space, ordered.array[:n], target.dedup_eps)
        hull, rep = convex_hull_cloud(s_n, eps, grid_k, cap, n_max, seed, pair_budget)
        into = directed_hausdorff(target, hull)
        out = directed_hausdorff(hull, target)
        report.records.append(ConvergenceRecord(n, max(into, out), len(hull), bool(rep.stabilized), into, out))
    return report


@dataclass
class ChainVerdict:
    ok: bool
    gaps: list[float]
    monotone: bool
    final_gap: float
    tol: float

    def to_json(self) -> dict:
        return {"ok": self.ok, "gaps": self.gaps, "monotone": self.monotone,
                "final_gap": self.final_gap, "tol": self.tol}


def chain_limit_check(chain: list[PointCloud], limit: PointCloud, tol: float,
                      nest_tol: float | None = None) -> ChainVerdict:
    """Check that d_H(union of the first n members, limit) is nonincreasing and ends within tol.

    Each member must lie within ``nest_tol`` (default ``tol``) of the next;
    otherwise :class:`ChainError` is raised.
    """
    if not chain:
        raise ChainError("empty chain")
    space: Space = limit.space
    nest_tol = tol if nest_tol is None else nest_tol
    for i, (a, b) in enumerate(zip(chain, chain[1:])):
        excess = directed_hausdorff(a, b)
        if excess > nest_tol:
            raise ChainError(f"chain is not nested at step {i}: excess {excess:.3g} > {nest_tol:.3g}")
    union = np.zeros((0, space.width))
    gaps = []
    for c in chain:
        if c.space != space:
            raise ChainError(f"chain member in {c.space}, limit in {space}")
        union = np.concatenate([union, c.array], axis=0)
        union = union[dedup_indices(space, union, limit.dedup_eps)]
        to_limit = float(np.max(nearest(space, union, limit.array)[0]))
        from_limit = float(np.max(nearest(space, limit.array, union)[0]))
        gaps.append(max(to_limit, from_limit))
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return ChainVerdict(ok=monotone and gaps[-1] <= tol, gaps=gaps, monotone=monotone,
                        final_gap=gaps[-1], tol=tol)
