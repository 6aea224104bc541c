"""Independent reference computations used to pin expected values.

Nothing here calls the library's distance or geodesic code.
"""

import itertools

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


class GluedPlaneGraph:
    """Grid graph on the two closed quadrants of [-r, r]^2 sharing the origin node.

    Edges join grid nodes of the same quadrant whose offset is a short
    primitive lattice vector, weighted by Euclidean length.  Shortest paths
    approximate the glued length metric from above.
    """

    def __init__(self, radius=2.0, h=0.05, reach=4):
        m = int(round(radius / h))
        ij = np.array([(i, j) for i in range(m + 1) for j in range(m + 1)])
        self.h, self.m = h, m
        # node ids: plus quadrant first, then minus quadrant without its origin
        self.plus_id = {tuple(p): k for k, p in enumerate(ij)}
        self.minus_id = {}
        nxt = len(ij)
        for p in ij:
            if p[0] == 0 and p[1] == 0:
                self.minus_id[(0, 0)] = self.plus_id[(0, 0)]
            else:
                self.minus_id[tuple(p)] = nxt
                nxt += 1
        self.n = nxt
        offsets = [(a, b) for a in range(-reach, reach + 1) for b in range(-reach, reach + 1)
                   if (a, b) != (0, 0) and np.gcd(abs(a), abs(b)) == 1]
        rows, cols, w = [], [], []
        for ids in (self.plus_id, self.minus_id):
            for (i, j), k in ids.items():
                for a, b in offsets:
                    q = (i + a, j + b)
                    if q in ids:
                        rows.append(k)
                        cols.append(ids[q])
                        w.append(h * np.hypot(a, b))
        self.graph = coo_matrix((w, (rows, cols)), shape=(self.n, self.n)).tocsr()

    def node(self, quadrant, xy):
        i, j = (int(round(abs(c) / self.h)) for c in xy)
        return (self.plus_id if quadrant == "plus" else self.minus_id)[(i, j)]

    def distances(self, pts):
        """All pairwise shortest-path lengths between (quadrant, xy) grid points."""
        nodes = [self.node(q, xy) for q, xy in pts]
        d = dijkstra(self.graph, indices=nodes)
        return d[:, nodes]


def glued_defect(graph, x, y, z, t, xt):
    """CAT(0) comparison defect computed from graph distances."""
    d = graph.distances([x, y, z, xt])
    return ((1 - t) * d[0, 2] ** 2 + t * d[1, 2] ** 2
            - t * (1 - t) * d[0, 1] ** 2 - d[3, 2] ** 2)


def biquadrant_distance(p, q):
    """Length metric on the glued quadrants, from the definition of the glued plane."""
    (sp, a), (sq, b) = p, q
    a, b = np.asarray(a, float), np.asarray(b, float)
    if sp == sq or not a.any() or not b.any():
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a) + np.linalg.norm(b))


def biquadrant_grid_minimum(anchors, weights, radius, h):
    """Brute-force minimum of sum_i w_i d(x, x_i)^2 over a grid on both quadrants."""
    g = np.arange(0.0, radius + h / 2, h)
    best = (np.inf, None)
    for sign, quadrant in ((1.0, "plus"), (-1.0, "minus")):
        a, b = np.meshgrid(g, g, indexing="ij")
        xy = sign * np.stack([a.ravel(), b.ravel()], axis=1)
        norm = np.hypot(xy[:, 0], xy[:, 1])
        f = np.zeros(xy.shape[0])
        for (q, c), w in zip(anchors, weights):
            c = np.asarray(c, float)
            same = np.hypot(xy[:, 0] - c[0], xy[:, 1] - c[1])
            d = same if q == quadrant else norm + np.hypot(*c)
            f += w * d * d
        k = int(np.argmin(f))
        if f[k] < best[0]:
            best = (float(f[k]), (quadrant, tuple(xy[k] + 0.0)))
    return best


def segment_distance(p, a, b):
    p, a, b = (np.asarray(v, float) for v in (p, a, b))
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def in_convex_polygon(p, verts):
    """Point in a counterclockwise convex polygon by edge cross products."""
    p = np.asarray(p, float)
    for a, b in zip(verts, verts[1:] + verts[:1]):
        a, b = np.asarray(a, float), np.asarray(b, float)
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0:
            return False
    return True


def simplex_hull_distance_lp(vertices, z):
    """Distance from z to co(vertices) by brute force over faces of a simplex.

    Valid when the vertices are affinely independent: the nearest point lies
    in the relative interior of exactly one face, found by projecting onto the
    affine span of every vertex subset.
    """
    v = np.asarray(vertices, float)
    z = np.asarray(z, float)
    best = np.inf
    for r in range(1, len(v) + 1):
        for face in itertools.combinations(range(len(v)), r):
            f = v[list(face)]
            base = f[0]
            basis = (f[1:] - base).T
            if basis.size:
                coef, *_ = np.linalg.lstsq(basis, z - base, rcond=None)
                bary = np.concatenate([[1 - coef.sum()], coef])
                if np.any(bary < -1e-12):
                    continue
                proj = base + basis @ coef
            else:
                proj = base
            best = min(best, float(np.linalg.norm(z - proj)))
    return best
