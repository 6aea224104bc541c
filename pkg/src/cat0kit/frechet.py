"""Weighted Fréchet means (p = 2) and medians (p = 1) of finite point sets.

F_p(x) = sum_i w_i d(x, x_i)^p with normalized weights.  Three solvers:

* ``euclidean_mean``: the closed form sum_i w_i x_i in R^d;
* ``inductive_mean``: the inductive (stochastic or cyclic) geodesic scheme,
  x_k = x_{k-1} moved a fraction t_k toward the next anchor;
* ``threading_search_mean``: argmin over a hull cloud followed by
  golden-section line searches along geodesics toward the anchors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud, nearest
from .errors import InputError, ParameterRangeError, SpaceMismatchError, UnsupportedSpaceError
from .geometry import Euclidean, Point, Space, space_from_json
from .threader import CAP, EPS, GRID_K, N_MAX, PAIR_BUDGET, ThreadingReport, convex_hull_cloud, grid_resolution

NEAR_TIE = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class FrechetProblem:
    """Points, nonnegative weights (normalized on construction) and p in {1, 2}."""

    space: Space
    array: np.ndarray
    weights: np.ndarray
    p: int = 2

    def __post_init__(self):
        arr = self.space.check_array(np.asarray(self.array, dtype=float).reshape(-1, self.space.width))
        if arr.shape[0] == 0:
            raise InputError("a Fréchet problem needs at least one point")
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape[0] != arr.shape[0]:
            raise InputError(f"{arr.shape[0]} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InputError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise InputError("at least one weight must be positive")
        if self.p not in (1, 2):
            raise ParameterRangeError(f"p must be 1 or 2, got {self.p!r}")
        arr.setflags(write=False)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points: list[Point], weights=None, p: int = 2) -> "FrechetProblem":
        if not points:
            raise InputError("a Fréchet problem needs at least one point")
        space = points[0].space
        for q in points:
            if q.space != space:
                raise SpaceMismatchError(f"mixed spaces in problem: {space} and {q.space}")
        if weights is None:
            weights = np.ones(len(points))
        return cls(space, np.array([q.coords for q in points]), weights, p)

    @classmethod
    def from_json(cls, obj: dict) -> "FrechetProblem":
        if not isinstance(obj, dict) or "space" not in obj or "points" not in obj:
            raise InputError("problem JSON needs 'space' and 'points'")
        space = space_from_json(obj["space"])
        rows = [space.point_from_json(q) for q in obj["points"]]
        weights = obj.get("weights")
        if weights is None:
            weights = np.ones(len(rows))
        return cls(space, np.array(rows, dtype=float).reshape(-1, space.width), weights, obj.get("p", 2))

    def to_json(self) -> dict:
        return {"space": self.space.to_json(),
                "points": [self.space.point_to_json(r) for r in self.array],
                "weights": [float(w) for w in self.weights], "p": self.p}

    def with_p(self, p: int) -> "FrechetProblem":
        return FrechetProblem(self.space, self.array, self.weights, p)

    @property
    def points(self) -> list[Point]:
        return [Point(self.space, tuple(r)) for r in self.array]

    @property
    def support(self) -> np.ndarray:
        """Points carrying positive weight."""
        return self.array[self.weights > 0]


def load_problem(path) -> FrechetProblem:
    with open(path) as fh:
        return FrechetProblem.from_json(json.load(fh))


def objective_array(problem: FrechetProblem, xs: np.ndarray) -> np.ndarray:
    """F_p at each row of ``xs``."""
    xs = np.asarray(xs, dtype=float).reshape(-1, problem.space.width)
    out = np.zeros(xs.shape[0])
    for xi, wi in zip(problem.array, problem.weights):
        if wi == 0:
            continue
        d = problem.space.dist_array(xs, xi)
        out += wi * (d * d if problem.p == 2 else d)
    return out


def objective(problem: FrechetProblem, x: Point) -> float:
    if not isinstance(x, Point) or x.space != problem.space:
        raise SpaceMismatchError(f"objective over {problem.space} evaluated at {x!r}")
    return float(objective_array(problem, x.array)[0])


def euclidean_mean(problem: FrechetProblem) -> Point:
    if not isinstance(problem.space, Euclidean):
        raise UnsupportedSpaceError(f"closed-form mean needs a euclidean space, not {problem.space}")
    if problem.p != 2:
        raise UnsupportedSpaceError("closed-form mean is only available for p = 2")
    return Point(problem.space, tuple(problem.weights @ problem.array))


@dataclass
class HullCertificate:
    distance: float
    tolerance: float
    passed: bool
    stabilized: bool

    def to_json(self) -> dict:
        return {"distance": self.distance, "tolerance": self.tolerance,
                "passed": self.passed, "stabilized": self.stabilized}


@dataclass
class SolverResult:
    minimizer: Point
    objective: float
    iterations: int
    method: str
    certificate: HullCertificate | None = None
    degraded: bool = False
    near_tie: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "minimizer": self.minimizer.to_json(),
            "objective": self.objective,
            "iterations": self.iterations,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "certificate_distance": None if self.certificate is None else self.certificate.distance,
            "degraded": self.degraded,
            "near_tie": self.near_tie,
        }
        out.update(self.extra)
        return out


def solver_result(problem, x: np.ndarray, iterations: int, method: str, **kw) -> SolverResult:
    pt = Point(problem.space, tuple(x))
    return SolverResult(pt, float(objective_array(problem, pt.array)[0]), iterations, method, **kw)


# -- inductive scheme ----------------------------------------------------------

def inductive_mean(problem: FrechetProblem, n_iters: int, seed: int = 0, order: str = "random") -> SolverResult:
    """Inductive geodesic mean.

    ``order="random"`` draws anchor i with probability w_i and moves a
    fraction 1/(k+1) toward it at step k.  ``order="cycle"`` visits the
    positively weighted points in index order, repeating; the step toward
    anchor i is w_i over the total weight visited so far, which is 1/(k+1)
    for equal weights.  In R^d one pass (n - 1 steps) lands exactly on the
    weighted average.
    """
    if problem.p != 2:
        raise UnsupportedSpaceError("the inductive scheme computes means (p = 2) only")
    if n_iters < 1:
        raise ParameterRangeError(f"n_iters must be at least 1, got {n_iters}")
    space = problem.space
    if order == "cycle":
        idx = np.flatnonzero(problem.weights > 0)
        w = problem.weights[idx]
        x = problem.array[idx[0]]
        total = w[0]
        for k in range(1, n_iters + 1):
            j = k % idx.size
            total += w[j]
            x = space.geodesic_array(x, problem.array[idx[j]], w[j] / total)
    elif order == "random":
        rng = np.random.default_rng(seed)
        anchors = rng.choice(problem.array.shape[0], size=n_iters + 1, p=problem.weights)
        x = problem.array[anchors[0]]
        for k in range(1, n_iters + 1):
            x = space.geodesic_array(x, problem.array[anchors[k]], 1.0 / (k + 1))
    else:
        raise InputError(f"order must be 'random' or 'cycle', got {order!r}")
    return solver_result(problem, x, n_iters, f"inductive-{order}")


# -- cloud search + geodesic refinement ------------------------------------------

def _golden(f, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-12, max_iter: int = 100) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def refine_along_geodesics(problem: FrechetProblem, x: np.ndarray, rounds: int) -> tuple[np.ndarray, float, int]:
    """Golden-section line searches from x toward each anchor, keeping improvements."""
    space = problem.space
    best = float(objective_array(problem, x)[0])
    anchors = problem.support
    steps = 0
    for _ in range(rounds):
        improved = False
        for a in anchors:
            def f(t, start=x, a=a):
                return float(objective_array(problem, space.geodesic_array(start, a, t))[0])
            t, val = _golden(f)
            steps += 1
            if val < best:
                x = space.geodesic_array(x, a, t)
                best = float(objective_array(problem, x)[0])
                improved = True
        if not improved:
            break
    return x, best, steps


def _hull_for(problem: FrechetProblem, eps, grid_k, cap, n_max, seed, pair_budget):
    base = PointCloud(problem.space, problem.support)
    return convex_hull_cloud(base, eps, grid_k, cap, n_max, seed, pair_budget)


def certify_in_hull(problem: FrechetProblem, x: Point, eps: float = EPS, grid_k: int = GRID_K, cap: int = CAP,
                    n_max: int = N_MAX, seed: int = 0, pair_budget: int = PAIR_BUDGET,
                    hull: tuple[PointCloud, ThreadingReport] | None = None) -> HullCertificate:
    """Distance from x to the hull cloud of the problem's points.

    Passes iff the distance is at most eps plus the grid resolution.  A hull
    cloud computed earlier with the same parameters may be passed in.
    """
    if not isinstance(x, Point) or x.space != problem.space:
        raise SpaceMismatchError(f"certificate over {problem.space} requested for {x!r}")
    cloud, report = hull if hull is not None else _hull_for(problem, eps, grid_k, cap, n_max, seed, pair_budget)
    d = float(nearest(problem.space, x.array[None, :], cloud.array)[0][0])
    tol = eps + report.resolution
    return HullCertificate(distance=d, tolerance=tol, passed=d <= tol, stabilized=bool(report.stabilized))


def threading_search_mean(problem: FrechetProblem, eps: float = EPS, grid_k: int = GRID_K, cap: int = CAP,
                          n_max: int = N_MAX, seed: int = 0, refine_steps: int = 50,
                          pair_budget: int = PAIR_BUDGET) -> SolverResult:
    """Minimize F_p over the hull cloud, then refine along geodesics toward the anchors.

    The returned point never scores worse than any cloud point.  An
    unstabilized hull only sets ``degraded``.  For p = 1 ``near_tie`` flags
    cloud points whose objective is within 1e-9 of the best one.
    """
    hull = _hull_for(problem, eps, grid_k, cap, n_max, seed, pair_budget)
    cloud, report = hull
    values = objective_array(problem, cloud.array)
    k = int(np.argmin(values))
    near_tie = problem.p == 1 and int(np.count_nonzero(values <= values[k] + NEAR_TIE)) > 1
    x, _, steps = refine_along_geodesics(problem, cloud.array[k], refine_steps)
    if float(objective_array(problem, x)[0]) > values[k]:
        x = cloud.array[k]
    res = solver_result(problem, x, len(report.records) + steps,
                  "search-median" if problem.p == 1 else "search-mean",
                  degraded=not report.stabilized, near_tie=near_tie)
    res.certificate = certify_in_hull(problem, res.minimizer, eps, grid_k, cap, n_max, seed, pair_budget, hull=hull)
    res.extra = {"cloud_size": len(cloud), "cloud_min": float(values[k])}
    return res


# -- projection inequality -------------------------------------------------------

@dataclass
class ProjectionVerdict:
    ok: bool
    worst_violation: float
    tol: float
    n_samples: int
    witness: dict | None = None

    def to_json(self) -> dict:
        return {"ok": self.ok, "worst_violation": self.worst_violation, "tol": self.tol,
                "n_samples": self.n_samples, "witness": self.witness}


def projection_inequality_check(space: Space, hull_cloud: PointCloud, n_samples: int = 1000, seed: int = 0,
                                tol: float | None = None, eps: float = EPS,
                                resolution: float | None = None) -> ProjectionVerdict:
    """d(x, Px)^2 + d(Px, y)^2 <= d(x, y)^2 + tol for random x and cloud points y.

    P is the nearest-cloud-point map.  x is drawn from a box twice the size of
    the cloud's extent, so most samples lie outside the hull.  The default tol
    is 10 * (resolution + eps), with resolution the grid spacing of the cloud.
    """
    if hull_cloud.space != space:
        raise SpaceMismatchError(f"cloud in {hull_cloud.space} checked in {space}")
    if resolution is None:
        resolution = grid_resolution(hull_cloud)
    if tol is None:
        tol = 10.0 * (resolution + eps)
    rng = np.random.default_rng(seed)
    c = hull_cloud.array
    box = 2.0 * float(np.max(np.abs(c))) + 1.0
    xs = space.sample_array(rng, n_samples, box)
    ys = c[rng.integers(0, c.shape[0], n_samples)]
    dxp, k = nearest(space, xs, c)
    px = c[k]
    lhs = dxp ** 2 + space.dist_array(px, ys) ** 2
    rhs = space.dist_array(xs, ys) ** 2
    excess = lhs - rhs
    worst = int(np.argmax(excess))
    ok = bool(excess[worst] <= tol)
    witness = None
    if not ok:
        witness = {"x": space.point_to_json(xs[worst]), "y": space.point_to_json(ys[worst]),
                   "px": space.point_to_json(px[worst]), "excess": float(excess[worst])}
    return ProjectionVerdict(ok=ok, worst_violation=float(excess[worst]), tol=tol,
                             n_samples=n_samples, witness=witness)
