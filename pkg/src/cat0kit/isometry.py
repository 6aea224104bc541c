"""Distance-preserving maps of the shipped spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InputError, SpaceMismatchError
from .geometry import Biquadrant, Euclidean, Point, Product, Space

ORTHO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EuclideanRigid:
    """x -> Q x + v with Q orthogonal."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        v = np.array(self.v, dtype=float).ravel()
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] != v.shape[0]:
            raise InputError(f"rigid motion needs a square Q and matching v, got {q.shape} and {v.shape}")
        err = np.max(np.abs(q.T @ q - np.eye(q.shape[0])))
        if err > ORTHO_TOL:
            raise InputError(f"Q is not orthogonal (max |Q^T Q - I| = {err:.3g})")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)

    @property
    def space(self) -> Euclidean:
        return Euclidean(self.q.shape[0])

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        return arr @ self.q.T + self.v + 0.0

    def inverse(self) -> "EuclideanRigid":
        return EuclideanRigid(self.q.T, -(self.q.T @ self.v))


@dataclass(frozen=True)
class BiquadrantSwap:
    """Negation (the quadrant swap), optionally composed with (a, b) -> (b, a).

    ``BiquadrantSwap(negate=False)`` is the identity.
    """

    negate: bool = True
    transpose: bool = False

    @property
    def space(self) -> Biquadrant:
        return Biquadrant()

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        out = arr[..., ::-1] if self.transpose else arr
        return (-out if self.negate else out.copy()) + 0.0

    def inverse(self) -> "BiquadrantSwap":
        return self


@dataclass(frozen=True)
class ProductPair:
    left: "Isometry"
    right: "Isometry"

    @property
    def space(self) -> Product:
        return Product(self.left.space, self.right.space)

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        space = self.space
        a, b = space.split(arr)
        return space.join(self.left.apply_array(a), self.right.apply_array(b))

    def inverse(self) -> "ProductPair":
        return ProductPair(self.left.inverse(), self.right.inverse())


Isometry = Union[EuclideanRigid, BiquadrantSwap, ProductPair]


def identity(space: Space) -> Isometry:
    if isinstance(space, Euclidean):
        return EuclideanRigid(np.eye(space.dim), np.zeros(space.dim))
    if isinstance(space, Biquadrant):
        return BiquadrantSwap(negate=False)
    return ProductPair(identity(space.left), identity(space.right))


def isometry_apply(phi: Isometry, x: Point) -> Point:
    if not isinstance(x, Point) or x.space != phi.space:
        got = x.space if isinstance(x, Point) else type(x).__name__
        raise SpaceMismatchError(f"isometry of {phi.space} applied to a point of {got}")
    return Point(phi.space, tuple(phi.apply_array(x.array)))


def random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def random_isometry(space: Space, rng: np.random.Generator, box: float = 5.0) -> Isometry:
    if isinstance(space, Euclidean):
        return EuclideanRigid(random_orthogonal(rng, space.dim), rng.uniform(-box, box, space.dim))
    if isinstance(space, Biquadrant):
        negate, transpose = rng.random(2) < 0.5
        return BiquadrantSwap(bool(negate), bool(transpose))
    return ProductPair(random_isometry(space.left, rng, box), random_isometry(space.right, rng, box))
