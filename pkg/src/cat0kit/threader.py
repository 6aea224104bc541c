"""Threading of point clouds and everything built on it.

``thr S`` is the union of all geodesic segments with both endpoints in S.  On
a finite cloud it is discretized by a uniform grid of ``grid_k`` parameters per
segment (endpoints included).  Iterating gives the nested chain
S, thr S, thr^2 S, ... whose union is the convex hull.

Two controls keep the iteration bounded:

* ``cap``: when a threaded cloud exceeds it, farthest-point subsampling
  reduces it to ``cap`` points, never dropping the points of the original
  input;
* ``pair_budget``: when a cloud has more than this many unordered pairs, a
  seeded uniform sample of that many pairs is threaded instead of all of them.

Because a grid cannot resolve detail finer than its own spacing, chain
stabilization is tested against ``eps + resolution`` where the resolution is
``diam(S) / (grid_k - 1)``, the spacing of the coarsest segment grid.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cloud import (DEFAULT_DEDUP_EPS, PointCloud, dedup_indices, diameter, farthest_point_subsample,
                    hausdorff, nearest, require_same_space)
from .errors import EmptyCloudError, InputError, ParameterRangeError, SpaceMismatchError
from .geometry import Euclidean, Point, Product, Space
from .hull_oracle import hull_distances
from .isometry import Isometry

GRID_K = 33
CAP = 20_000
EPS = 1e-2
PAIR_BUDGET = 50_000
N_MAX = 5
MEMBER_TOL = 1e-9


# -- single threading step ----------------------------------------------------

@dataclass(frozen=True)
class StepInfo:
    candidates: int
    capped: bool
    sampled_pairs: bool


def _pairs(n: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, bool]:
    if n * (n - 1) // 2 <= budget:
        i, j = np.triu_indices(n, 1)
        return i, j, False
    i = rng.integers(0, n, size=budget)
    j = rng.integers(0, n - 1, size=budget)
    j = j + (j >= i)
    return i, j, True


def _step(cloud: PointCloud, grid_k: int, cap: int, rng_key, keep: np.ndarray,
          pair_budget: int) -> tuple[PointCloud, StepInfo]:
    space = cloud.space
    x = cloud.array
    n = x.shape[0]
    if n == 0:
        raise EmptyCloudError("cannot thread an empty cloud")
    if grid_k < 2:
        raise ParameterRangeError(f"grid_k must be at least 2, got {grid_k}")
    if cap < 1:
        raise ParameterRangeError(f"cap must be positive, got {cap}")
    rng = np.random.default_rng(rng_key)
    parts = [keep, x]
    sampled = False
    if n >= 2 and grid_k > 2:
        i, j, sampled = _pairs(n, pair_budget, rng)
        ts = np.arange(1, grid_k - 1) / (grid_k - 1)
        inner = space.geodesic_array(x[i][:, None, :], x[j][:, None, :], ts[None, :])
        parts.append(inner.reshape(-1, space.width))
    cand = np.concatenate(parts, axis=0)
    cand = cand[dedup_indices(space, cand, cloud.dedup_eps)]
    capped = cand.shape[0] > cap
    if capped:
        n_keep = keep.shape[0]
        sel = farthest_point_subsample(space, cand, cap, protected=np.arange(n_keep),
                                       seed=int(rng.integers(2**31)))
        cand = cand[sel]
    info = StepInfo(candidates=int(sum(p.shape[0] for p in parts)), capped=capped, sampled_pairs=sampled)
    return PointCloud.trusted(space, cand, cloud.dedup_eps), info


def thread_once(cloud: PointCloud, grid_k: int = GRID_K, cap: int = CAP, seed: int = 0, *,
                keep: PointCloud | None = None, pair_budget: int = PAIR_BUDGET) -> PointCloud:
    """One discretized threading step.

    The result always contains the points of ``keep`` (by default the input
    cloud itself), also when the cap forces subsampling.
    """
    keep_arr = cloud.array if keep is None else keep.array
    if keep is not None:
        require_same_space(cloud, keep)
    return _step(cloud, grid_k, cap, [seed], keep_arr, pair_budget)[0]


def member_thr1_array(space: Space, s: np.ndarray, z: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
    """Vectorized exact test of z in thr S for a finite S (see :func:`member_thr1`)."""
    s = np.asarray(s, dtype=float).reshape(-1, space.width)
    z = np.asarray(z, dtype=float).reshape(-1, space.width)
    m, q = s.shape[0], z.shape[0]
    if m == 0 or q == 0:
        return np.zeros(q, dtype=bool)
    dsz = space.dist_array(s[:, None, :], z[None, :, :])
    out = dsz.min(axis=0) <= tol
    if m < 2:
        return out
    i, j = np.triu_indices(m, 1)
    dxy = space.dist_array(s[i], s[j])
    live = dxy > 0
    i, j, dxy = i[live], j[live], dxy[live]
    chunk = max(1, 4_000_000 // max(1, i.size))
    for start in range(0, q, chunk):
        cols = np.arange(start, min(q, start + chunk))
        cols = cols[~out[cols]]
        if cols.size == 0:
            continue
        between = dsz[i][:, cols] + dsz[j][:, cols] <= dxy[:, None] + tol
        p, c = np.nonzero(between)
        if p.size == 0:
            continue
        qz = cols[c]
        t = np.clip(dsz[i[p], qz] / dxy[p], 0.0, 1.0)
        on = space.geodesic_array(s[i[p]], s[j[p]], t)
        hit = space.dist_array(on, z[qz]) <= tol
        out[qz[hit]] = True
    return out


def member_thr1(cloud: PointCloud, z: Point, tol: float = MEMBER_TOL) -> bool:
    """Exact membership of z in thr S: some pair x, y has z on [x, y] up to ``tol``.

    Metric betweenness is required together with closeness of z to the point
    of [x, y] at the matching arc length.  thr of the empty set is empty.
    """
    if z.space != cloud.space:
        raise SpaceMismatchError(f"point of {z.space} tested against a cloud in {cloud.space}")
    return bool(member_thr1_array(cloud.space, cloud.array, z.array[None, :], tol)[0])


# -- chains and reports ------------------------------------------------------

@dataclass
class IterationRecord:
    n: int
    size: int
    gap: float
    millis: float
    capped: bool = False
    sampled_pairs: bool = False


@dataclass
class ThreadingReport:
    grid_k: int
    dedup_eps: float
    cap: int
    seed: int
    pair_budget: int
    input_size: int
    records: list[IterationRecord] = field(default_factory=list)
    eps: float | None = None
    resolution: float | None = None
    stabilized: bool | None = None
    stabilized_at: int | None = None

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.records]

    @property
    def sizes(self) -> list[int]:
        return [r.size for r in self.records]

    @property
    def cap_hit(self) -> bool:
        return any(r.capped for r in self.records)

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "parameters": {"grid_k": self.grid_k, "dedup_eps": self.dedup_eps, "cap": self.cap,
                           "seed": self.seed, "pair_budget": self.pair_budget},
            "input_size": self.input_size,
            "iterations": [],
        }
        for r in self.records:
            rec = asdict(r)
            if not timings:
                rec.pop("millis")
            out["iterations"].append(rec)
        if self.eps is not None:
            out["eps"] = self.eps
            out["resolution"] = self.resolution
            out["stabilized"] = self.stabilized
            out["stabilized_at"] = self.stabilized_at
        out["cap_hit"] = self.cap_hit
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "size", "gap", "millis"])
        for r in self.records:
            writer.writerow([r.n, r.size, repr(r.gap), f"{r.millis:.3f}"])
        return buf.getvalue()

    def dumps(self, timings: bool = False) -> str:
        return json.dumps(self.to_json(timings), sort_keys=True)


def _new_report(cloud, grid_k, cap, seed, pair_budget) -> ThreadingReport:
    return ThreadingReport(grid_k=grid_k, dedup_eps=cloud.dedup_eps, cap=cap, seed=seed,
                           pair_budget=pair_budget, input_size=len(cloud))


def _advance(chain, report, keep, grid_k, cap, seed, pair_budget) -> float:
    n = len(chain)
    t0 = time.perf_counter()
    nxt, info = _step(chain[-1], grid_k, cap, [seed, n], keep, pair_budget)
    gap = hausdorff(nxt, chain[-1])
    millis = (time.perf_counter() - t0) * 1e3
    chain.append(nxt)
    report.records.append(IterationRecord(n, len(nxt), gap, millis, info.capped, info.sampled_pairs))
    return gap


def threading_chain(cloud: PointCloud, n_iters: int, grid_k: int = GRID_K, cap: int = CAP, seed: int = 0,
                    pair_budget: int = PAIR_BUDGET) -> tuple[list[PointCloud], ThreadingReport]:
    """[S, thr S, ..., thr^n S] together with the per-iteration report."""
    if n_iters < 0:
        raise ParameterRangeError(f"n_iters must be nonnegative, got {n_iters}")
    if len(cloud) == 0:
        raise EmptyCloudError("cannot thread an empty cloud")
    report = _new_report(cloud, grid_k, cap, seed, pair_budget)
    chain = [cloud]
    for _ in range(n_iters):
        _advance(chain, report, cloud.array, grid_k, cap, seed, pair_budget)
    return chain, report


def iterate_threading(cloud: PointCloud, n_iters: int, grid_k: int = GRID_K, cap: int = CAP, seed: int = 0,
                      pair_budget: int = PAIR_BUDGET) -> tuple[PointCloud, ThreadingReport]:
    chain, report = threading_chain(cloud, n_iters, grid_k, cap, seed, pair_budget)
    return chain[-1], report


def grid_resolution(cloud: PointCloud, grid_k: int = GRID_K) -> float:
    """Largest spacing of a segment grid between two points of the cloud."""
    return diameter(cloud.space, cloud.array) / (grid_k - 1)


def _stabilize(cloud, eps, grid_k, cap, n_max, seed, pair_budget):
    if eps <= 0:
        raise ParameterRangeError(f"eps must be positive, got {eps}")
    if n_max < 0:
        raise ParameterRangeError(f"n_max must be nonnegative, got {n_max}")
    if len(cloud) == 0:
        raise EmptyCloudError("cannot thread an empty cloud")
    report = _new_report(cloud, grid_k, cap, seed, pair_budget)
    report.eps = eps
    report.resolution = grid_resolution(cloud, grid_k)
    chain = [cloud]
    threshold = eps + report.resolution
    report.stabilized = False
    for n in range(n_max + 1):
        gap = _advance(chain, report, cloud.array, grid_k, cap, seed, pair_budget)
        if gap <= threshold:
            report.stabilized = True
            report.stabilized_at = n
            break
    return chain, report


def convex_hull_cloud(cloud: PointCloud, eps: float = EPS, grid_k: int = GRID_K, cap: int = CAP,
                      n_max: int = N_MAX, seed: int = 0,
                      pair_budget: int = PAIR_BUDGET) -> tuple[PointCloud, ThreadingReport]:
    """Thread until consecutive iterates agree to ``eps + resolution``.

    Returns the last iterate computed.  Running out of iterations is not an
    error; ``report.stabilized`` is then False.
    """
    chain, report = _stabilize(cloud, eps, grid_k, cap, n_max, seed, pair_budget)
    return chain[-1], report


@dataclass
class DegreeEstimate:
    degree: int | None
    gap: float
    eps: float
    resolution: float
    n_max: int
    gaps: list[float]
    sizes: list[int]
    cap_hit: bool
    hull_check: dict | None = None

    @property
    def stabilized(self) -> bool:
        return self.degree is not None

    def to_json(self) -> dict:
        out = asdict(self)
        out["degree"] = self.degree if self.stabilized else "not stabilized"
        return out


def hull_check(source: PointCloud, threaded: PointCloud, n_probe: int = 2000, seed: int = 0) -> dict:
    """Compare a threaded Euclidean cloud with the exact hull of its source.

    ``max_outside`` is the largest distance of a cloud point from co(source);
    ``coverage_gap`` is the largest distance from a random hull point to the
    cloud, which bounds how well the cloud fills the hull.
    """
    if not isinstance(source.space, Euclidean):
        raise InputError("hull_check needs a euclidean cloud")
    verts = source.array
    rng = np.random.default_rng(seed)
    d = source.space.dim
    k = min(len(source), d + 1)
    probes = np.empty((n_probe, d))
    for r in range(n_probe):
        pick = rng.choice(len(source), size=k, replace=False)
        probes[r] = rng.dirichlet(np.ones(k)) @ verts[pick]
    probes = np.vstack([probes, verts])
    coverage = float(np.max(nearest(source.space, probes, threaded.array)[0]))
    outside = hull_distances(verts, threaded.array)
    return {"max_outside": float(outside.max()), "coverage_gap": coverage, "n_probe": n_probe}


def estimate_degree(cloud: PointCloud, eps: float = EPS, grid_k: int = GRID_K, cap: int = CAP,
                    n_max: int = N_MAX, seed: int = 0, pair_budget: int = PAIR_BUDGET,
                    validate_hull: bool = True) -> DegreeEstimate:
    """Smallest n with d_H(thr^{n+1} S, thr^n S) <= eps + resolution.

    In euclidean spaces the final iterate is additionally compared with the
    exact hull of S (see :func:`hull_check`).
    """
    chain, report = _stabilize(cloud, eps, grid_k, cap, n_max, seed, pair_budget)
    check = None
    if validate_hull and isinstance(cloud.space, Euclidean):
        check = hull_check(cloud, chain[-1], seed=seed)
    return DegreeEstimate(
        degree=report.stabilized_at,
        gap=report.gaps[-1],
        eps=eps,
        resolution=report.resolution,
        n_max=n_max,
        gaps=report.gaps,
        sizes=[len(cloud)] + report.sizes,
        cap_hit=report.cap_hit,
        hull_check=check,
    )


# -- algebra of threading ----------------------------------------------------

@dataclass
class AlgebraVerdict:
    ok: bool
    nested: bool
    n_checked: int
    violations: list[dict] = field(default_factory=list)
    strict_intersection: list[Point] = field(default_factory=list)
    strict_union: list[Point] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "nested": self.nested,
            "n_checked": self.n_checked,
            "violations": self.violations,
            "strict_intersection": [p.to_json() for p in self.strict_intersection[:10]],
            "strict_union": [p.to_json() for p in self.strict_union[:10]],
        }


def segment_points(space: Space, s: np.ndarray, grid_k: int, n_samples: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Grid points on every segment of S plus random points on random segments."""
    m = s.shape[0]
    if m == 0:
        return np.zeros((0, space.width))
    rows = [s]
    if m >= 2:
        i, j = np.triu_indices(m, 1)
        ts = np.linspace(0.0, 1.0, grid_k)
        rows.append(space.geodesic_array(s[i][:, None, :], s[j][:, None, :], ts[None, :]).reshape(-1, space.width))
        if n_samples:
            a = rng.integers(0, m, n_samples)
            b = rng.integers(0, m, n_samples)
            rows.append(space.geodesic_array(s[a], s[b], rng.random(n_samples)))
    return np.concatenate(rows, axis=0)


def _subset_mask(space, a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    if a.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if b.shape[0] == 0:
        return np.zeros(a.shape[0], dtype=bool)
    return nearest(space, a, b)[0] <= tol


def thread_algebra_check(s1: PointCloud, s2: PointCloud, n_samples: int = 200, seed: int = 0,
                         tol: float = MEMBER_TOL, grid_k: int = GRID_K) -> AlgebraVerdict:
    """Check the intersection and union rules for thr on two finite sets.

    thr(S1 & S2) must lie in thr S1 & thr S2, and thr S1 | thr S2 in
    thr(S1 | S2).  When S1 is contained in S2 both inclusions must be
    equalities and thr S1 must lie in thr S2.  Points realizing a strict
    inclusion are collected as witnesses; they are not violations.
    """
    space = require_same_space(s1, s2)
    rng = np.random.default_rng(seed)
    a, b = s1.array, s2.array
    inter = a[_subset_mask(space, a, b, tol)]
    union = np.concatenate([a, b[~_subset_mask(space, b, a, tol)]], axis=0)
    nested = bool(np.all(_subset_mask(space, a, b, tol)))

    def member(s, z):
        return member_thr1_array(space, s, z, tol)

    thr_i = segment_points(space, inter, grid_k, n_samples, rng)
    thr_1 = segment_points(space, a, grid_k, n_samples, rng)
    thr_2 = segment_points(space, b, grid_k, n_samples, rng)
    thr_u = segment_points(space, union, grid_k, n_samples, rng)
    violations: list[dict] = []

    def record(rule: str, pts: np.ndarray, ok: np.ndarray) -> None:
        for row in pts[~ok][:5]:
            violations.append({"rule": rule, "point": space.point_to_json(row)})

    record("thr(S1&S2) in thr S1", thr_i, member(a, thr_i))
    record("thr(S1&S2) in thr S2", thr_i, member(b, thr_i))
    record("thr S1 in thr(S1|S2)", thr_1, member(union, thr_1))
    record("thr S2 in thr(S1|S2)", thr_2, member(union, thr_2))

    both_pool = np.concatenate([thr_1, thr_2], axis=0)
    in_both = member(a, both_pool) & member(b, both_pool)
    common = both_pool[in_both]
    outside_inter = ~member(inter, common)
    in_u = member(a, thr_u) | member(b, thr_u)
    n_checked = thr_i.shape[0] * 2 + thr_1.shape[0] + thr_2.shape[0]

    if nested:
        record("thr S1 in thr S2 (S1 in S2)", thr_1, member(b, thr_1))
        record("thr S1 & thr S2 in thr(S1&S2) (S1 in S2)", common, ~outside_inter)
        record("thr(S1|S2) in thr S1 | thr S2 (S1 in S2)", thr_u, in_u)
        n_checked += thr_1.shape[0] + common.shape[0] + thr_u.shape[0]

    strict_i = common[outside_inter]
    strict_u = thr_u[~in_u]
    strict_i = strict_i[dedup_indices(space, strict_i, DEFAULT_DEDUP_EPS)]
    strict_u = strict_u[dedup_indices(space, strict_u, DEFAULT_DEDUP_EPS)]
    return AlgebraVerdict(
        ok=not violations,
        nested=nested,
        n_checked=n_checked,
        violations=violations,
        strict_intersection=[Point(space, tuple(r)) for r in strict_i],
        strict_union=[Point(space, tuple(r)) for r in strict_u],
    )


# -- isometries ----------------------------------------------------------------

@dataclass
class EquivarianceVerdict:
    ok: bool
    gaps: list[float]
    tol: float
    worst_iteration: int

    def to_json(self) -> dict:
        return asdict(self)


def map_cloud(phi: Isometry, cloud: PointCloud) -> PointCloud:
    if phi.space != cloud.space:
        raise SpaceMismatchError(f"isometry of {phi.space} applied to a cloud in {cloud.space}")
    return PointCloud.trusted(cloud.space, phi.apply_array(cloud.array), cloud.dedup_eps)


def equivariance_check(cloud: PointCloud, phi: Isometry, n_iters: int = 2, grid_k: int = GRID_K,
                       cap: int = CAP, seed: int = 0, tol: float = 1e-9,
                       pair_budget: int = PAIR_BUDGET) -> EquivarianceVerdict:
    """Compare phi(thr^n S) with thr^n phi(S) for n = 0..n_iters."""
    direct, _ = threading_chain(cloud, n_iters, grid_k, cap, seed, pair_budget)
    moved, _ = threading_chain(map_cloud(phi, cloud), n_iters, grid_k, cap, seed, pair_budget)
    gaps = [hausdorff(map_cloud(phi, c), m) for c, m in zip(direct, moved)]
    worst = int(np.argmax(gaps))
    return EquivarianceVerdict(ok=max(gaps) <= tol, gaps=gaps, tol=tol, worst_iteration=worst)


# -- products ----------------------------------------------------------------

def product_cloud(s1: PointCloud, s2: PointCloud) -> PointCloud:
    space = Product(s1.space, s2.space)
    a = np.repeat(s1.array, len(s2), axis=0)
    b = np.tile(s2.array, (len(s1), 1))
    return PointCloud(space, space.join(a, b), min(s1.dedup_eps, s2.dedup_eps))


def _product_gap(space: Product, c: np.ndarray, b1: np.ndarray, b2: np.ndarray,
                 limit: int, rng: np.random.Generator) -> tuple[float, bool]:
    """d_H between a cloud in X1 x X2 and the product set B1 x B2."""
    cl, cr = space.split(c)
    d1 = nearest(space.left, cl, b1)[0]
    d2 = nearest(space.right, cr, b2)[0]
    forward = float(np.max(np.hypot(d1, d2)))
    n = b1.shape[0] * b2.shape[0]
    sampled = n > limit
    if sampled:
        flat = rng.choice(n, size=limit, replace=False)
    else:
        flat = np.arange(n)
    probes = space.join(b1[flat // b2.shape[0]], b2[flat % b2.shape[0]])
    backward = float(np.max(nearest(space, probes, c)[0]))
    return max(forward, backward), sampled


@dataclass
class ProductVerdict:
    degree: int | None
    factor_degrees: tuple[int | None, int | None]
    rule_holds: bool
    gaps: list[float]
    tol: float
    identity_holds: bool
    sampled: bool

    @property
    def ok(self) -> bool:
        return self.rule_holds and self.identity_holds

    def to_json(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        return out


def product_rule_check(s1: PointCloud, s2: PointCloud, eps: float = EPS, grid_k: int = GRID_K,
                       cap: int = CAP, n_max: int = N_MAX, seed: int = 0, tol: float | None = None,
                       pair_budget: int = PAIR_BUDGET, product_limit: int = 200_000) -> ProductVerdict:
    """Test deg(S1 x S2) = max(deg S1, deg S2) and thr^n(S1 x S2) = thr^n S1 x thr^n S2."""
    prod = product_cloud(s1, s2)
    space = prod.space
    e = estimate_degree(prod, eps, grid_k, cap, n_max, seed, pair_budget, validate_hull=False)
    e1 = estimate_degree(s1, eps, grid_k, cap, n_max, seed, pair_budget, validate_hull=False)
    e2 = estimate_degree(s2, eps, grid_k, cap, n_max, seed, pair_budget, validate_hull=False)
    rule = (e.degree is not None and e1.degree is not None and e2.degree is not None
            and e.degree == max(e1.degree, e2.degree))
    if tol is None:
        tol = 2 * grid_resolution(prod, grid_k)
    n_iters = (e.degree if e.degree is not None else n_max) + 1
    chain, _ = threading_chain(prod, n_iters, grid_k, cap, seed, pair_budget)
    chain1, _ = threading_chain(s1, n_iters, grid_k, cap, seed, pair_budget)
    chain2, _ = threading_chain(s2, n_iters, grid_k, cap, seed, pair_budget)
    rng = np.random.default_rng(seed)
    gaps, sampled = [], False
    for c, c1, c2 in zip(chain, chain1, chain2):
        g, smp = _product_gap(space, c.array, c1.array, c2.array, product_limit, rng)
        gaps.append(g)
        sampled = sampled or smp
    return ProductVerdict(
        degree=e.degree,
        factor_degrees=(e1.degree, e2.degree),
        rule_holds=rule,
        gaps=gaps,
        tol=tol,
        identity_holds=max(gaps) <= tol,
        sampled=sampled,
    )
