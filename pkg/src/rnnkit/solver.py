"""Stationary excitation probabilities by fixed-point iteration.

The excitation probability of neuron ``i`` satisfies

    q[i] = min(1, Omega_plus[i] / (r[i] + Omega_minus[i]))

where the total arrival rates depend on ``q`` through the weights of the
spikes arriving *at* ``i``::

    Omega_plus[i]  = Lambda[i]  + sum_j q[j] * w_plus[j, i]
    Omega_minus[i] = lambda_[i] + sum_j q[j] * w_minus[j, i]

The system is solved with a synchronous (optionally damped) Picard
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RnnParameters


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IllPosedNeuronError(ValueError):
    """A neuron receives excitation but can neither fire nor be inhibited."""


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-12
    max_iterations: int = 10_000
    damping: float = 1.0
    retry_damping: float | None = 0.5
    # clamp neurons with r + Omega_minus == 0 < Omega_plus at q = 1 instead of raising
    allow_divergent: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SteadyState:
    q: np.ndarray
    Omega_plus: np.ndarray
    Omega_minus: np.ndarray
    residual: float
    iterations: int
    saturated: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "Omega_plus": self.Omega_plus.tolist(),
            "Omega_minus": self.Omega_minus.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "saturated": list(self.saturated),
        }


def arrival_rates(params: RnnParameters, q) -> tuple[np.ndarray, np.ndarray]:
    """Total excitatory and inhibitory arrival rates at each neuron."""
    q = np.asarray(q, dtype=float)
    return params.Lambda + q @ params.w_plus, params.lambda_ + q @ params.w_minus


def _ratio(num: np.ndarray, den: np.ndarray, allow_divergent: bool = False) -> np.ndarray:
    # 0/0 -> 0: a neuron that receives nothing is never excited
    bad = (den <= 0) & (num > 0)
    if np.any(bad) and not allow_divergent:
        raise IllPosedNeuronError(
            f"neurons {np.flatnonzero(bad).tolist()} are excited but have r + Omega_minus = 0")
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    out[bad] = np.inf
    return out


def initial_iterate(params: RnnParameters) -> np.ndarray:
    return np.minimum(1.0, _ratio(params.Lambda, params.r + params.lambda_, True))


def fixed_point_step(params: RnnParameters, q, allow_divergent: bool = False) -> np.ndarray:
    """One application of the (clamped) fixed-point map."""
    op, om = arrival_rates(params, q)
    return np.minimum(1.0, _ratio(op, params.r + om, allow_divergent))


def _iterate(params, q, tol, max_iterations, alpha, allow_divergent):
    wp, wm = params.w_plus, params.w_minus
    Lam, lam, r = params.Lambda, params.lambda_, params.r
    residual = np.inf
    for it in range(1, max_iterations + 1):
        q_new = np.minimum(1.0, _ratio(Lam + q @ wp, r + lam + q @ wm, allow_divergent))
        if alpha != 1.0:
            q_new = (1.0 - alpha) * q + alpha * q_new
        residual = float(np.max(np.abs(q_new - q))) if q.size else 0.0
        q = q_new
        if residual <= tol:
            return q, residual, it, True
    return q, residual, max_iterations, False


def solve_fixed_point(params: RnnParameters, options: SolverOptions | None = None,
                      q0=None) -> SteadyState:
    """Solve for the stationary excitation probabilities.

    Parameters
    ----------
    params : RnnParameters
    options : SolverOptions, optional
    q0 : array_like, optional
        Starting iterate.  Defaults to ``min(1, Lambda / (r + lambda_))``.

    Raises
    ------
    ConvergenceError
        If no fixed point is reached within ``max_iterations`` (also after the
        damped retry, when enabled).
    IllPosedNeuronError
        If some neuron has positive excitation but ``r + Omega_minus == 0``
        and ``options.allow_divergent`` is off.
    """
    options = options or SolverOptions()
    start = initial_iterate(params) if q0 is None else np.clip(np.asarray(q0, dtype=float), 0, 1)
    q, residual, iterations, ok = _iterate(
        params, start, options.tolerance, options.max_iterations, options.damping,
        options.allow_divergent)
    total = iterations
    if not ok and options.retry_damping is not None and options.retry_damping < options.damping:
        q, residual, iterations, ok = _iterate(
            params, start, options.tolerance, options.max_iterations, options.retry_damping,
            options.allow_divergent)
        total += iterations
    if not ok:
        raise ConvergenceError(
            f"fixed-point iteration did not converge after {total} iterations "
            f"(last residual {residual:.3e})", residual, total)
    return _steady_state(params, q, residual, total, options.allow_divergent)


def _steady_state(params, q, residual, iterations, allow_divergent=False) -> SteadyState:
    op, om = arrival_rates(params, q)
    ratio = _ratio(op, params.r + om, allow_divergent)
    saturated = tuple(int(i) for i in np.flatnonzero(ratio >= 1.0))
    return SteadyState(q, op, om, residual, iterations, saturated)
