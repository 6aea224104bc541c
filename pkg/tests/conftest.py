import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from cat0kit.geometry import Biquadrant, Euclidean, Point, Product

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SPACES = [Euclidean(1), Euclidean(2), Euclidean(3), Biquadrant(),
          Product(Euclidean(1), Euclidean(1)), Product(Euclidean(1), Biquadrant())]
SPACE_IDS = [str(s) for s in SPACES]

coord = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
nonneg = st.floats(min_value=0, max_value=10, allow_nan=False, allow_infinity=False)


def points_in(space):
    if isinstance(space, Euclidean):
        return st.lists(coord, min_size=space.dim, max_size=space.dim).map(lambda c: Point(space, tuple(c)))
    if isinstance(space, Biquadrant):
        return st.tuples(st.sampled_from([1.0, -1.0]), nonneg, nonneg).map(
            lambda s: Point(space, (s[0] * s[1] + 0.0, s[0] * s[2] + 0.0)))
    return st.tuples(points_in(space.left), points_in(space.right)).map(
        lambda lr: Point(space, lr[0].coords + lr[1].coords))


spaces = st.sampled_from(SPACES)


@pytest.fixture(params=SPACES, ids=SPACE_IDS)
def space(request):
    return request.param


def rng(seed=0):
    return np.random.default_rng(seed)
