"""Random network instances for property checks and gradient verification."""

from __future__ import annotations

import numpy as np

from .model import RnnParameters
from .solver import ConvergenceError, IllPosedNeuronError, solve_fixed_point


def random_network(rng: np.random.Generator, L: int, density: float = 0.7,
                   weight_scale: float = 1.0, max_departure: float = 0.5) -> RnnParameters:
    mask = rng.random((L, L)) < density
    wp = rng.uniform(0, weight_scale, (L, L)) * mask
    wm = rng.uniform(0, weight_scale, (L, L)) * (rng.random((L, L)) < density)
    d = rng.uniform(0, max_departure, L)
    Lam = rng.uniform(0, 1, L)
    lam = rng.uniform(0.05, 1, L)
    return RnnParameters.from_weights(wp, wm, Lam, lam, d)


def random_subcritical_network(rng: np.random.Generator, L: int, max_q: float = 0.98,
                               max_tries: int = 1000, **kwargs) -> RnnParameters:
    """Draw random networks until the fixed point has every ``q < max_q``."""
    for _ in range(max_tries):
        params = random_network(rng, L, **kwargs)
        try:
            q = solve_fixed_point(params).q
        except (ConvergenceError, IllPosedNeuronError):
            continue
        if np.all(q < max_q):
            return params
    raise RuntimeError(f"no subcritical network found in {max_tries} draws")
