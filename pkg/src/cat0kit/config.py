"""Numeric defaults shared by the library and the command line.

Each default may be overridden by an environment variable named ``CAT0_``
plus the upper-cased key, e.g. ``CAT0_GRID_K=17``.  Command-line flags win over
both.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .cloud import DEFAULT_DEDUP_EPS
from .errors import InputError
from .threader import CAP, EPS, GRID_K, N_MAX, PAIR_BUDGET

ENV_PREFIX = "CAT0_"


@dataclass(frozen=True)
class Defaults:
    grid_k: int = GRID_K
    cap: int = CAP
    eps: float = EPS
    dedup_eps: float = DEFAULT_DEDUP_EPS
    pair_budget: int = PAIR_BUDGET
    n_max: int = N_MAX
    seed: int = 0
    threads: int = 1


def load_defaults(environ=None) -> Defaults:
    environ = os.environ if environ is None else environ
    base = Defaults()
    changes = {}
    for f in fields(Defaults):
        raw = environ.get(ENV_PREFIX + f.name.upper())
        if raw is None:
            continue
        kind = type(getattr(base, f.name))
        try:
            changes[f.name] = kind(raw)
        except ValueError:
            raise InputError(f"{ENV_PREFIX}{f.name.upper()}={raw!r} is not a valid {kind.__name__}") from None
    return replace(base, **changes)
