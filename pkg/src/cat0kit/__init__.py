"""Geodesic toolkit for CAT(0) model spaces: threading, hull clouds and Fréchet means."""

from .cloud import PointCloud, hausdorff
from .errors import (Cat0Error, ChainError, EmptyCloudError, InputError, ParameterRangeError, SpaceMismatchError,
                     UnsupportedSpaceError)
from .frechet import (FrechetProblem, SolverResult, certify_in_hull, euclidean_mean, inductive_mean, objective,
                      projection_inequality_check, threading_search_mean)
from .geometry import (Biquadrant, Euclidean, Point, Product, cat0_defect, dist, interpolate, is_flat_sample,
                       minus, pair, parse_space, plus, point)
from .hull_oracle import euclidean_hull_membership
from .isometry import BiquadrantSwap, EuclideanRigid, ProductPair, identity, isometry_apply
from .threader import (DegreeEstimate, ThreadingReport, convex_hull_cloud, equivariance_check, estimate_degree,
                       iterate_threading, member_thr1, product_rule_check, thread_algebra_check, thread_once)
from .convergence import chain_limit_check, increasing_hull_convergence

__version__ = "0.1.0"
