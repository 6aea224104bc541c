"""Model CAT(0) spaces, points and the basic geodesic operations.

Three kinds of space are shipped:

* ``Euclidean(d)``  -- the flat space R^d;
* ``Biquadrant()``  -- the closed quadrants {a, b >= 0} and {a, b <= 0} of the
  plane glued at the origin, with the induced length metric;
* ``Product(X1, X2)`` -- the l2 product, d = sqrt(d1^2 + d2^2).

Every space stores its points as flat float coordinate vectors.  For the
biquadrant the quadrant is recoverable from the signs of the coordinates, so
no separate tag is stored; the origin always reads as ``plus``.  For all
shipped spaces the Euclidean distance between coordinate vectors is a lower
bound for the intrinsic distance, which is what lets the neighbour searches
in :mod:`cat0kit.cloud` prune with a k-d tree.

Vectorized ``*_array`` methods work on arrays whose last axis holds the
coordinates; the module-level functions work on :class:`Point` values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, ClassVar, Union

import numpy as np

from .errors import InputError, ParameterRangeError, SpaceMismatchError

POINT_TOL = 1e-9
DEFAULT_BOX = 10.0


def _norm(diff: np.ndarray) -> np.ndarray:
    """l2 norm over the last axis, rescaled where squaring would underflow."""
    diff = np.asarray(diff, dtype=float)
    sq = np.einsum("...i,...i->...", diff, diff)
    out = np.sqrt(sq)
    if sq.size and sq.min() < 1e-250:
        tiny = sq < 1e-250
        d = diff[tiny]
        scale = np.abs(d).max(axis=-1)
        live = scale > 0
        r = d[live] / scale[live, None]
        fixed = np.zeros_like(scale)
        fixed[live] = scale[live] * np.sqrt(np.einsum("...i,...i->...", r, r))
        out = np.array(out, dtype=float)
        out[tiny] = fixed
        out = out[()]
    return out


def _as_float_array(values, width: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != width:
        raise InputError(f"expected coordinate vectors of length {width}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("coordinates must be finite")
    return arr


@dataclass(frozen=True)
class Euclidean:
    dim: int
    kind: ClassVar[str] = "euclidean"
    flat: ClassVar[bool] = True

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InputError(f"euclidean dimension must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def width(self) -> int:
        return self.dim

    @property
    def metric_is_coordinate(self) -> bool:
        return True

    def __str__(self) -> str:
        return f"euclidean:{self.dim}"

    def to_json(self) -> dict:
        return {"kind": "euclidean", "dim": self.dim}

    def check_array(self, arr) -> np.ndarray:
        return _as_float_array(arr, self.dim) + 0.0

    def dist_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return _norm(a - b)

    def geodesic_array(self, a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return (1.0 - t) * a + t * b

    def tags_array(self, arr: np.ndarray) -> np.ndarray:
        return np.zeros(arr.shape[:-1] + (0,), dtype=np.int8)

    def sample_array(self, rng: np.random.Generator, n: int, box: float = DEFAULT_BOX) -> np.ndarray:
        return rng.uniform(-box, box, size=(n, self.dim))

    def point_to_json(self, coords: np.ndarray) -> Any:
        return [float(c) for c in coords]

    def point_from_json(self, obj: Any) -> np.ndarray:
        if not isinstance(obj, (list, tuple)):
            raise InputError(f"euclidean point must be a list of {self.dim} numbers, got {obj!r}")
        return self.check_array(obj)


@dataclass(frozen=True)
class Biquadrant:
    kind: ClassVar[str] = "biquadrant"
    flat: ClassVar[bool] = False

    @property
    def width(self) -> int:
        return 2

    @property
    def metric_is_coordinate(self) -> bool:
        return False

    def __str__(self) -> str:
        return "biquadrant"

    def to_json(self) -> dict:
        return {"kind": "biquadrant"}

    @staticmethod
    def side_array(arr: np.ndarray) -> np.ndarray:
        """+1 for the plus quadrant, -1 for minus, 0 at the origin."""
        return np.sign(arr[..., 0] + arr[..., 1]).astype(np.int8)

    def check_array(self, arr) -> np.ndarray:
        arr = _as_float_array(arr, 2)
        mixed = (np.max(arr, axis=-1) > 0) & (np.min(arr, axis=-1) < 0)
        if np.any(mixed):
            bad = np.asarray(arr)[mixed].reshape(-1, 2)[0]
            raise InputError(f"({bad[0]}, {bad[1]}) lies in neither closed quadrant")
        return arr + 0.0

    def dist_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a, b = np.broadcast_arrays(a, b)
        na = np.hypot(a[..., 0], a[..., 1])
        nb = np.hypot(b[..., 0], b[..., 1])
        diff = a - b
        same = np.hypot(diff[..., 0], diff[..., 1])
        cross = (self.side_array(a) * self.side_array(b)) < 0
        return np.where(cross, na + nb, same)

    def geodesic_array(self, a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
        a, b, t = np.broadcast_arrays(a, b, np.asarray(t, dtype=float)[..., None])
        t = t[..., 0]
        straight = (1.0 - t)[..., None] * a + t[..., None] * b
        cross = (self.side_array(a) * self.side_array(b)) < 0
        if not np.any(cross):
            return straight + 0.0
        na = np.hypot(a[..., 0], a[..., 1])
        nb = np.hypot(b[..., 0], b[..., 1])
        s = t * (na + nb)
        with np.errstate(divide="ignore", invalid="ignore"):
            before = a * np.clip(1.0 - s / na, 0.0, 1.0)[..., None]
            after = b * np.clip((s - na) / nb, 0.0, 1.0)[..., None]
        broken = np.where((s <= na)[..., None], before, after)
        broken = np.where((t >= 1.0)[..., None], b, broken)
        return np.where(cross[..., None], broken, straight) + 0.0

    def tags_array(self, arr: np.ndarray) -> np.ndarray:
        return self.side_array(arr)[..., None]

    def sample_array(self, rng: np.random.Generator, n: int, box: float = DEFAULT_BOX) -> np.ndarray:
        sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return rng.uniform(0.0, box, size=(n, 2)) * sign[:, None] + 0.0

    def point_to_json(self, coords: np.ndarray) -> Any:
        side = self.side_array(coords)
        return {"quadrant": "minus" if side < 0 else "plus", "xy": [float(c) for c in coords]}

    def point_from_json(self, obj: Any) -> np.ndarray:
        if not isinstance(obj, dict) or "xy" not in obj:
            raise InputError(f"biquadrant point must look like {{'quadrant': ..., 'xy': [a, b]}}, got {obj!r}")
        return biquadrant_coords(obj.get("quadrant", None), obj["xy"])


@dataclass(frozen=True)
class Product:
    left: "Space"
    right: "Space"
    kind: ClassVar[str] = "product"

    def __post_init__(self):
        for part in (self.left, self.right):
            if not isinstance(part, (Euclidean, Biquadrant, Product)):
                raise InputError(f"product factors must be spaces, got {part!r}")

    @property
    def flat(self) -> bool:
        return self.left.flat and self.right.flat

    @property
    def width(self) -> int:
        return self.left.width + self.right.width

    @property
    def metric_is_coordinate(self) -> bool:
        return self.left.metric_is_coordinate and self.right.metric_is_coordinate

    def __str__(self) -> str:
        return f"product({self.left},{self.right})"

    def to_json(self) -> dict:
        return {"kind": "product", "left": self.left.to_json(), "right": self.right.to_json()}

    def split(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = self.left.width
        return arr[..., :k], arr[..., k:]

    def join(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        left, right = np.asarray(left, dtype=float), np.asarray(right, dtype=float)
        shape = np.broadcast_shapes(left.shape[:-1], right.shape[:-1])
        left = np.broadcast_to(left, shape + left.shape[-1:])
        right = np.broadcast_to(right, shape + right.shape[-1:])
        return np.concatenate([left, right], axis=-1)

    def check_array(self, arr) -> np.ndarray:
        arr = _as_float_array(arr, self.width)
        left, right = self.split(arr)
        return self.join(self.left.check_array(left), self.right.check_array(right))

    def dist_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        al, ar = self.split(a)
        bl, br = self.split(b)
        return np.hypot(self.left.dist_array(al, bl), self.right.dist_array(ar, br))

    def geodesic_array(self, a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
        al, ar = self.split(a)
        bl, br = self.split(b)
        return self.join(self.left.geodesic_array(al, bl, t), self.right.geodesic_array(ar, br, t))

    def tags_array(self, arr: np.ndarray) -> np.ndarray:
        left, right = self.split(arr)
        return np.concatenate([self.left.tags_array(left), self.right.tags_array(right)], axis=-1)

    def sample_array(self, rng: np.random.Generator, n: int, box: float = DEFAULT_BOX) -> np.ndarray:
        return self.join(self.left.sample_array(rng, n, box), self.right.sample_array(rng, n, box))

    def point_to_json(self, coords: np.ndarray) -> Any:
        left, right = self.split(coords)
        return [self.left.point_to_json(left), self.right.point_to_json(right)]

    def point_from_json(self, obj: Any) -> np.ndarray:
        if not isinstance(obj, (list, tuple)) or len(obj) != 2:
            raise InputError(f"product point must be a [left, right] pair, got {obj!r}")
        return self.join(self.left.point_from_json(obj[0]), self.right.point_from_json(obj[1]))


Space = Union[Euclidean, Biquadrant, Product]


def biquadrant_coords(quadrant: str | None, xy) -> np.ndarray:
    arr = Biquadrant().check_array(xy)
    if arr.shape != (2,):
        raise InputError(f"biquadrant point needs exactly two coordinates, got {xy!r}")
    if quadrant is None:
        return arr
    if quadrant == "plus" and np.any(arr < 0):
        raise InputError(f"plus point needs a >= 0 and b >= 0, got {tuple(arr)}")
    if quadrant == "minus" and np.any(arr > 0):
        raise InputError(f"minus point needs a <= 0 and b <= 0, got {tuple(arr)}")
    if quadrant not in ("plus", "minus"):
        raise InputError(f"quadrant must be 'plus' or 'minus', got {quadrant!r}")
    return arr


# -- space descriptors -------------------------------------------------------

def space_from_json(obj: Any) -> Space:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputError(f"space descriptor must be an object with a 'kind', got {obj!r}")
    kind = obj["kind"]
    if kind == "euclidean":
        return Euclidean(obj.get("dim"))
    if kind == "biquadrant":
        return Biquadrant()
    if kind == "product":
        return Product(space_from_json(obj.get("left")), space_from_json(obj.get("right")))
    raise InputError(f"unknown space kind {kind!r}")


_TOKEN = re.compile(r"\s*(euclidean:\d+|biquadrant|product\(|,|\))")


def parse_space(text: str) -> Space:
    """Parse ``euclidean:<d>`` | ``biquadrant`` | ``product(<space>,<space>)``."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise InputError(f"cannot parse space {text!r} at offset {pos}")
        tokens.append(m.group(1))
        pos = m.end()

    def parse(i: int) -> tuple[Space, int]:
        if i >= len(tokens):
            raise InputError(f"truncated space {text!r}")
        tok = tokens[i]
        if tok.startswith("euclidean:"):
            return Euclidean(int(tok.split(":")[1])), i + 1
        if tok == "biquadrant":
            return Biquadrant(), i + 1
        if tok == "product(":
            left, i = parse(i + 1)
            if i >= len(tokens) or tokens[i] != ",":
                raise InputError(f"expected ',' in {text!r}")
            right, i = parse(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise InputError(f"expected ')' in {text!r}")
            return Product(left, right), i + 1
        raise InputError(f"unexpected token {tok!r} in {text!r}")

    space, end = parse(0)
    if end != len(tokens):
        raise InputError(f"trailing input in space {text!r}")
    return space


# -- points ------------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    """A point of ``space``.  Equality is syntactic; use :meth:`isclose` for geometry."""

    space: Space
    coords: tuple[float, ...] = field(compare=True)

    def __post_init__(self):
        arr = self.space.check_array(self.coords)
        if arr.ndim != 1:
            raise InputError(f"a point needs a single coordinate vector, got shape {arr.shape}")
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    @property
    def quadrant(self) -> str:
        if not isinstance(self.space, Biquadrant):
            raise SpaceMismatchError("only biquadrant points carry a quadrant")
        return "minus" if self.coords[0] + self.coords[1] < 0 else "plus"

    @property
    def left(self) -> "Point":
        if not isinstance(self.space, Product):
            raise SpaceMismatchError("only product points have components")
        return Point(self.space.left, self.space.split(self.array)[0])

    @property
    def right(self) -> "Point":
        if not isinstance(self.space, Product):
            raise SpaceMismatchError("only product points have components")
        return Point(self.space.right, self.space.split(self.array)[1])

    def isclose(self, other: "Point", tol: float = POINT_TOL) -> bool:
        return dist(self.space, self, other) <= tol

    def to_json(self) -> Any:
        return self.space.point_to_json(self.array)

    def __repr__(self) -> str:
        if isinstance(self.space, Biquadrant):
            return f"{self.quadrant}{self.coords}"
        return f"Point({self.space}, {self.coords})"


def point(space: Space, *coords) -> Point:
    if len(coords) == 1 and np.ndim(coords[0]) > 0:
        coords = coords[0]
    return Point(space, tuple(np.asarray(coords, dtype=float).ravel()))


def plus(a: float, b: float) -> Point:
    return Point(Biquadrant(), tuple(biquadrant_coords("plus", (a, b))))


def minus(a: float, b: float) -> Point:
    return Point(Biquadrant(), tuple(biquadrant_coords("minus", (a, b))))


def pair(left: Point, right: Point) -> Point:
    space = Product(left.space, right.space)
    return Point(space, tuple(space.join(left.array, right.array)))


def point_from_json(space: Space, obj: Any) -> Point:
    return Point(space, tuple(space.point_from_json(obj)))


def _require(space: Space, *points: Point) -> None:
    for p in points:
        if not isinstance(p, Point):
            raise SpaceMismatchError(f"expected a Point, got {type(p).__name__}")
        if p.space != space:
            raise SpaceMismatchError(f"point of {p.space} used in {space}")


# -- geodesic operations -----------------------------------------------------

def dist(space: Space, x: Point, y: Point) -> float:
    _require(space, x, y)
    return float(space.dist_array(x.array, y.array))


def interpolate(space: Space, x: Point, y: Point, t: float) -> Point:
    """The point of [x, y] at distance t * d(x, y) from x."""
    _require(space, x, y)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ParameterRangeError(f"t must lie in [0, 1], got {t}")
    if x == y:
        return x
    return Point(space, tuple(space.geodesic_array(x.array, y.array, t)))


def cat0_defect_array(space: Space, x, y, z, t) -> np.ndarray:
    """Right side minus left side of the CAT(0) quadratic comparison inequality."""
    t = np.asarray(t, dtype=float)
    xt = space.geodesic_array(x, y, t)
    dxz = space.dist_array(x, z)
    dyz = space.dist_array(y, z)
    dxy = space.dist_array(x, y)
    dtz = space.dist_array(xt, z)
    return (1 - t) * dxz**2 + t * dyz**2 - t * (1 - t) * dxy**2 - dtz**2


def cat0_defect(space: Space, x: Point, y: Point, z: Point, t: float) -> float:
    _require(space, x, y, z)
    if not 0.0 <= t <= 1.0:
        raise ParameterRangeError(f"t must lie in [0, 1], got {t}")
    return float(cat0_defect_array(space, x.array, y.array, z.array, t))


@dataclass(frozen=True)
class FlatVerdict:
    flat: bool
    max_abs_defect: float
    min_defect: float
    n_samples: int
    witness: tuple[Point, Point, Point, float] | None = None
    witness_defect: float | None = None

    def to_json(self) -> dict:
        out = {
            "flat": self.flat,
            "max_abs_defect": self.max_abs_defect,
            "min_defect": self.min_defect,
            "n_samples": self.n_samples,
        }
        if self.witness is not None:
            x, y, z, t = self.witness
            out["witness"] = {"x": x.to_json(), "y": y.to_json(), "z": z.to_json(), "t": t,
                              "defect": self.witness_defect}
        return out


def sample_quadruples(space: Space, n: int, seed: int, box: float = DEFAULT_BOX):
    rng = np.random.default_rng(seed)
    x = space.sample_array(rng, n, box)
    y = space.sample_array(rng, n, box)
    z = space.sample_array(rng, n, box)
    t = rng.random(n)
    return x, y, z, t


def is_flat_sample(space: Space, n_samples: int, seed: int, tol: float,
                   box: float = DEFAULT_BOX) -> FlatVerdict:
    """Sample (x, y, z, t) and report whether the comparison inequality is tight."""
    if n_samples < 1:
        raise ParameterRangeError("n_samples must be at least 1")
    x, y, z, t = sample_quadruples(space, n_samples, seed, box)
    defect = cat0_defect_array(space, x, y, z, t)
    worst = int(np.argmax(np.abs(defect)))
    max_abs = float(np.abs(defect[worst]))
    if max_abs <= tol:
        return FlatVerdict(True, max_abs, float(defect.min()), n_samples)
    witness = (Point(space, tuple(x[worst])), Point(space, tuple(y[worst])),
               Point(space, tuple(z[worst])), float(t[worst]))
    return FlatVerdict(False, max_abs, float(defect.min()), n_samples, witness, float(defect[worst]))


def random_points(space: Space, n: int, seed: int, box: float = DEFAULT_BOX) -> list[Point]:
    rng = np.random.default_rng(seed)
    return [Point(space, tuple(row)) for row in space.sample_array(rng, n, box)]



def space_invariants(space: Space, n_samples: int, seed: int, tol: float = 1e-9,
                     box: float = DEFAULT_BOX) -> dict:
    """Sampled metric axioms, geodesic parameterization and comparison defects.

    ``ok`` is False when an axiom fails or some defect falls below ``-tol``.
    Flatness is reported but does not affect ``ok``.
    """
    if n_samples < 1:
        raise ParameterRangeError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    x, y, z = (space.sample_array(rng, n_samples, box) for _ in range(3))
    t1, t2 = rng.random(n_samples), rng.random(n_samples)
    dxy, dyx = space.dist_array(x, y), space.dist_array(y, x)
    dxz, dzy = space.dist_array(x, z), space.dist_array(z, y)
    self_d = space.dist_array(x, x)
    triangle = float(np.max(dxy - dxz - dzy))
    param = np.abs(space.dist_array(space.geodesic_array(x, y, t1), space.geodesic_array(x, y, t2))
                   - np.abs(t1 - t2) * dxy)
    reverse = space.dist_array(space.geodesic_array(x, y, t1), space.geodesic_array(y, x, 1.0 - t1))
    metric = {
        "min_distance": float(min(dxy.min(), self_d.min())),
        "max_self_distance": float(self_d.max()),
        "max_asymmetry": float(np.max(np.abs(dxy - dyx))),
        "max_triangle_excess": triangle,
        "max_parameterization_error": float(param.max()),
        "max_reversal_error": float(reverse.max()),
    }
    axioms_ok = (metric["min_distance"] >= 0 and metric["max_self_distance"] == 0
                 and metric["max_asymmetry"] <= 1e-12 and triangle <= tol
                 and metric["max_parameterization_error"] <= tol and metric["max_reversal_error"] <= tol)
    flat = is_flat_sample(space, n_samples, seed, tol, box)
    return {
        "space": str(space),
        "n_samples": n_samples,
        "seed": seed,
        "tol": tol,
        "metric": metric,
        "defect_min": flat.min_defect,
        "flatness": flat.to_json(),
        "ok": bool(axioms_ok and flat.min_defect >= -tol),
    }
