"""End-to-end acceptance checks, one test per numbered criterion.

Every test prints a single PASS/FAIL line (visible even without ``-s``) and
then asserts the criterion at its stated tolerance.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import time
from pathlib import Path

import numpy as np

from cat0kit.cloud import PointCloud, load_cloud, nearest
from cat0kit.convergence import increasing_hull_convergence
from cat0kit.frechet import (FrechetProblem, euclidean_mean, inductive_mean, projection_inequality_check,
                             threading_search_mean)
from cat0kit.geometry import Biquadrant, Euclidean, Product, dist, is_flat_sample, minus, plus, point
from cat0kit.hull_oracle import euclidean_hull_membership
from cat0kit.isometry import random_isometry
from cat0kit.threader import (convex_hull_cloud, equivariance_check, estimate_degree, threading_chain,
                              member_thr1, product_rule_check, thread_algebra_check)

from oracles import in_convex_polygon, segment_distance

DATA = Path(__file__).resolve().parent.parent / "data"
E1, E2, E3, BQ = Euclidean(1), Euclidean(2), Euclidean(3), Biquadrant()
EPS, GRID, CAP = 1e-2, 33, 20_000
SQUARE = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
# spaces exercised where a criterion asks for "each space"
ALL_SPACES = [E1, E2, E3, BQ, Product(E1, E2), Product(E1, BQ)]


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title} -- {detail}")
    return ok


def simplex(d):
    return np.vstack([np.zeros(d), np.eye(d)])


def test_c01_euclidean_degree(capsys):
    rows, ok = [], True
    for d in (1, 2, 3):
        t0 = time.perf_counter()
        est = estimate_degree(PointCloud(Euclidean(d), simplex(d)), eps=EPS, grid_k=GRID, cap=CAP)
        secs = time.perf_counter() - t0
        good = est.degree == d and secs <= 60.0
        ok &= good
        rows.append(f"d={d}: degree {est.degree} in {secs:.1f}s")
    verdict(capsys, 1, "simplex corners have degree d", ok, "; ".join(rows))
    assert ok, rows


def test_c02_square_corners(capsys):
    sq = PointCloud(E2, np.array(SQUARE))
    est = estimate_degree(sq, eps=EPS, grid_k=GRID, cap=CAP)
    chain, _ = threading_chain(sq, 2, grid_k=GRID, cap=CAP)
    thr1, thr2 = chain[1], chain[2]
    z = np.array([0.5, 0.25])

    # independent check that z avoids every edge and diagonal but lies in the square
    seg_gap = min(segment_distance(z, a, b) for i, a in enumerate(SQUARE) for b in SQUARE[i + 1:])
    ccw = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
    inside = in_convex_polygon(z, ccw) and euclidean_hull_membership([point(E2, *c) for c in SQUARE],
                                                                     point(E2, *z), 1e-12)

    origin_in = float(nearest(E2, np.zeros((1, 2)), thr1.array)[0][0]) == 0.0
    origin_exact = member_thr1(sq, point(E2, 0, 0))
    d1 = float(nearest(E2, z[None, :], thr1.array)[0][0])
    d2 = float(nearest(E2, z[None, :], thr2.array)[0][0])
    ok = (est.degree == 2 and origin_in and origin_exact and seg_gap > EPS and inside
          and d1 > EPS and d2 <= EPS and not member_thr1(sq, point(E2, *z)))
    verdict(capsys, 2, "square corners", ok,
            f"degree {est.degree}, (0,0) in thr^1 {origin_in}, (0.5,0.25): segment gap {seg_gap:.4f}, "
            f"inside {inside}, d(thr^1) {d1:.4f}, d(thr^2) {d2:.4f}")
    assert ok


def mixed_biquadrant_set(seed, n=6):
    rng = np.random.default_rng(seed)
    signs = np.array([1.0] * (n // 2) + [-1.0] * (n - n // 2))
    return PointCloud(BQ, signs[:, None] * rng.uniform(0, 1, (n, 2)))


def test_c03_biquadrant_degree(capsys):
    degrees = []
    for seed in range(5):
        est = estimate_degree(mixed_biquadrant_set(seed), eps=EPS, grid_k=GRID, cap=CAP, seed=seed)
        degrees.append(est.degree)
    ok = all(d is not None and d <= 2 for d in degrees)
    verdict(capsys, 3, "biquadrant 6-point sets have degree <= 2", ok, f"degrees {degrees}")
    assert ok


def test_c04_threading_algebra(capsys):
    s02 = PointCloud(E1, np.array([[0.0], [2.0]]))
    v_int = thread_algebra_check(s02, PointCloud(E1, np.array([[1.0]])))
    int_strict = [p.coords for p in v_int.strict_intersection] == [(1.0,)]
    v_uni = thread_algebra_check(s02, PointCloud(E1, np.array([[3.0]])))
    union = PointCloud(E1, np.array([[0.0], [2.0], [3.0]]))
    uni_strict = (bool(v_uni.strict_union) and all(2 < p.coords[0] < 3 for p in v_uni.strict_union)
                  and all(member_thr1(union, p) for p in v_uni.strict_union))

    violations, pairs = 0, 0
    for k, space in enumerate(ALL_SPACES):
        rng = np.random.default_rng(100 + k)
        for i in range(100):
            n = int(rng.integers(2, 6))
            big = PointCloud(space, space.sample_array(rng, n, 2.0))
            small = PointCloud(space, big.array[rng.permutation(n)[:int(rng.integers(1, n + 1))]])
            v = thread_algebra_check(small, big, n_samples=50, seed=i)
            violations += len(v.violations) + (not v.nested)
            pairs += 1
    ok = int_strict and uni_strict and v_int.ok and v_uni.ok and violations == 0
    verdict(capsys, 4, "threading algebra", ok,
            f"intersection witness {int_strict}, union witness {uni_strict}, "
            f"{violations} violations over {pairs} nested pairs")
    assert ok


def test_c05_isometry_equivariance(capsys):
    worst, count = 0.0, 0
    for k, space in enumerate(ALL_SPACES):
        rng = np.random.default_rng(200 + k)
        for i in range(20):
            c = PointCloud(space, space.sample_array(rng, int(rng.integers(2, 5)), 2.0))
            v = equivariance_check(c, random_isometry(space, rng), n_iters=2, grid_k=5, cap=10**6, seed=i)
            worst = max(worst, max(v.gaps))
            count += 1
    ok = worst <= 1e-9
    verdict(capsys, 5, "isometry equivariance", ok, f"worst gap {worst:.3g} over {count} pairs")
    assert ok


def test_c06_cat0_certificate(capsys):
    rows, ok = [], True
    for k, space in enumerate(ALL_SPACES):
        v = is_flat_sample(space, 10_000, seed=300 + k, tol=1e-9)
        good = v.min_defect >= -1e-9
        if "biquadrant" in str(space):
            good &= (not v.flat) and v.witness_defect > 1e-6
        else:
            good &= v.flat
        ok &= good
        rows.append(f"{space}: min {v.min_defect:.2g} max|.| {v.max_abs_defect:.2g}")
    verdict(capsys, 6, "comparison defects", ok, "; ".join(rows))
    assert ok


def test_c07_product_rule(capsys):
    s1 = PointCloud(E1, np.array([[0.0], [2.0]]))
    s2 = PointCloud(E2, np.array(SQUARE))
    v = product_rule_check(s1, s2, eps=EPS, grid_k=GRID, cap=CAP)
    ok = v.degree == 2 and all(g <= v.tol for g in v.gaps)
    verdict(capsys, 7, "product of {0,2} and square corners", ok,
            f"degree {v.degree} (factors {v.factor_degrees}), gaps "
            f"{[round(g, 4) for g in v.gaps]} vs tol {v.tol:.4f}")
    assert ok


def test_c08_inductive_mean(capsys):
    rng = np.random.default_rng(400)
    worst_cycle = 0.0
    for space in (E1, E2):
        for n in range(1, 7):
            for _ in range(5):
                pr = FrechetProblem(space, space.sample_array(rng, n, 1.0), np.full(n, 1.0 / n))
                r = inductive_mean(pr, max(n - 1, 1), order="cycle")
                truth = pr.array.sum(axis=0) / n
                worst_cycle = max(worst_cycle, float(np.max(np.abs(r.minimizer.array - truth))))
    stochastic = []
    for space in (E1, E2):
        pr = FrechetProblem(space, space.sample_array(rng, 5, 1.0), np.full(5, 0.2))
        truth = euclidean_mean(pr)
        errs = [dist(space, inductive_mean(pr, 100_000, seed=s).minimizer, truth) for s in range(5)]
        stochastic.append(float(np.median(errs)))
    ok = worst_cycle <= 1e-12 and max(stochastic) <= 5e-2
    verdict(capsys, 8, "inductive mean", ok,
            f"cycle error {worst_cycle:.2g}, stochastic median errors {[f'{e:.2g}' for e in stochastic]}")
    assert ok


MEAN_SPACES = [E2, BQ, Product(E1, E1)]


def test_c09_mean_in_hull(capsys):
    failures, worst_ratio = [], 0.0
    for k, space in enumerate(MEAN_SPACES):
        rng = np.random.default_rng(500 + k)
        for i in range(20):
            n = int(rng.integers(2, 6))
            pr = FrechetProblem(space, space.sample_array(rng, n, 2.0), rng.uniform(0.1, 1.0, n))
            r = threading_search_mean(pr, eps=EPS, grid_k=GRID, cap=3000, seed=i)
            c = r.certificate
            worst_ratio = max(worst_ratio, c.distance / c.tolerance)
            if c.distance > c.tolerance:
                failures.append(f"{space}#{i}")
    ok = not failures
    verdict(capsys, 9, "search mean lies in the hull cloud", ok,
            f"{len(failures)} failures over {20 * len(MEAN_SPACES)} problems, worst distance/tol {worst_ratio:.3g}")
    assert ok, failures


def test_c10_symmetric_biquadrant_mean(capsys):
    pr = FrechetProblem.from_points([plus(1, 1), minus(-1, -1)])
    origin = plus(0, 0)
    d_search = dist(BQ, threading_search_mean(pr, eps=EPS, grid_k=GRID, cap=CAP).minimizer, origin)
    d_ind = dist(BQ, inductive_mean(pr, 100_000, seed=0).minimizer, origin)
    ok = d_search <= 5e-3 and d_ind <= 5e-2
    verdict(capsys, 10, "symmetric biquadrant mean at the origin", ok,
            f"search {d_search:.3g}, inductive {d_ind:.3g}")
    assert ok


def test_c11_hull_convergence(capsys):
    disk = load_cloud(DATA / "disk500.json")
    assert len(disk) == 500
    rep = increasing_hull_convergence(disk, n_steps=10, eps=EPS, grid_k=GRID, cap=CAP)
    ok = rep.reached and rep.monotone_after_first
    verdict(capsys, 11, "increasing hulls converge to the disk sample", ok,
            f"gaps {[round(g, 4) for g in rep.gaps]}, 2*res {2 * rep.resolution:.4f}, "
            f"reached {rep.reached}, nonincreasing {rep.monotone_after_first}")
    assert ok


def test_c12_projection_inequality(capsys):
    hulls = {
        "segment": PointCloud(E1, np.array([[0.0], [2.0]])),
        "square": PointCloud(E2, np.array(SQUARE)),
        "biquadrant": PointCloud.from_points(BQ, [plus(1, 0), minus(0, -1), minus(-1, -0.5)]),
        "product": PointCloud(Product(E1, BQ), np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.5, -1.0, -1.0]])),
    }
    rows, ok = [], True
    for k, (name, src) in enumerate(hulls.items()):
        hull, rep = convex_hull_cloud(src, eps=EPS, grid_k=GRID, cap=CAP)
        v = projection_inequality_check(src.space, hull, n_samples=1000, seed=600 + k, eps=EPS,
                                        resolution=rep.resolution)
        ok &= v.ok and bool(rep.stabilized)
        rows.append(f"{name}: worst {v.worst_violation:.3g} <= {v.tol:.3g}")
    verdict(capsys, 12, "projection inequality on hull clouds", ok, "; ".join(rows))
    assert ok
