"""Gradient training of recurrent random neural networks.

Each training pattern sets the exogenous excitatory rates of the input
neurons; exogenous inhibition is zero.  The network is solved for its
stationary excitation probabilities and the squared error of the output
neurons is reduced by per-pattern gradient steps on both weight matrices,
followed by projection onto nonnegative weights and re-derivation of the
firing rates.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .model import NeuronRoles, RnnParameters, derive_firing_rates
from .solver import (ConvergenceError, IllPosedNeuronError, SolverOptions, SteadyState,
                     fixed_point_step, solve_fixed_point)

log = logging.getLogger(__name__)

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite_difference"


class TrainingError(RuntimeError):
    def __init__(self, message, epoch: int, sample: int):
        super().__init__(message)
        self.epoch = epoch
        self.sample = sample


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    weight_init: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    hidden_count: int = 8
    target_high: float = 0.9
    target_low: float = 0.1
    gradient_mode: str = ANALYTIC
    # stop once the epoch-mean error drops below this value
    convergence_threshold: float | None = None
    departure: float = 0.0
    solver_tolerance: float = 1e-12

    def __post_init__(self):
        if isinstance(self.weight_init, list):
            object.__setattr__(self, "weight_init", tuple(self.weight_init))
        lo, hi = self.weight_init
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= lo < hi <= 1:
            raise ValueError("weight_init must satisfy 0 <= lo < hi <= 1")
        if not self.target_low < self.target_high <= 1:
            raise ValueError("need target_low < target_high <= 1")
        if self.gradient_mode not in (ANALYTIC, FINITE_DIFFERENCE):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.epochs < 0 or self.hidden_count < 0:
            raise ValueError("epochs and hidden_count must be nonnegative")
        if not 0 <= self.departure < 1:
            raise ValueError("departure must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainingConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["weight_init"] = list(self.weight_init)
        return out


@dataclass
class TrainedModel:
    params: RnnParameters
    roles: NeuronRoles
    history: list[float] = field(default_factory=list)
    config: TrainingConfig = field(default_factory=TrainingConfig)
    class_names: list[str] = field(default_factory=list)
    # per-attribute train-set min/max used to map features to input rates
    normalization: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        doc = self.params.to_dict(self.roles)
        doc["history"] = list(self.history)
        doc["config"] = self.config.to_dict()
        doc["class_names"] = list(self.class_names)
        doc["normalization"] = self.normalization
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "TrainedModel":
        if not doc.get("roles"):
            raise ValueError("model document has no neuron roles")
        return cls(
            params=RnnParameters.from_dict(doc),
            roles=NeuronRoles.from_dict(doc["roles"]),
            history=list(doc.get("history", [])),
            config=TrainingConfig.from_dict(doc.get("config", {})),
            class_names=list(doc.get("class_names", [])),
            normalization=doc.get("normalization"),
        )


def loss(q, targets, output_ids) -> float:
    """Squared error over the output neurons only."""
    q = np.asarray(q, dtype=float)
    diff = q[list(output_ids)] - np.asarray(targets, dtype=float)
    return float(diff @ diff)


def gradient(params: RnnParameters, steady: SteadyState, targets, roles: NeuronRoles,
             mode: str = ANALYTIC) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of the output error with respect to ``w_plus`` and ``w_minus``.

    Firing rates follow the weights (``r = row sum / (1 - d)``), so a weight
    change also changes the firing rate of the sending neuron.  The analytic
    route solves a single adjoint linear system; if that system is singular
    the finite-difference route is used instead.
    """
    if mode == FINITE_DIFFERENCE:
        return finite_difference_gradient(params, targets, roles.output_ids, q0=steady.q)
    try:
        return _analytic_gradient(params.w_plus, params.w_minus, params.d, params.r,
                                  steady.q, steady.Omega_minus, steady.saturated,
                                  targets, roles.output_ids)
    except np.linalg.LinAlgError:
        warnings.warn("singular adjoint system; falling back to finite differences",
                      RuntimeWarning, stacklevel=2)
        return finite_difference_gradient(params, targets, roles.output_ids, q0=steady.q)


def _analytic_gradient(wp, wm, d, r, q, omega_minus, saturated, targets, output_ids):
    L = q.size
    den = r + omega_minus
    # saturated neurons sit on the clamp, where dq/dw = 0
    live = np.ones(L)
    live[list(saturated)] = 0.0
    live[den <= 0] = 0.0
    inv = np.zeros(L)
    np.divide(live, den, out=inv, where=den > 0)

    err = np.zeros(L)
    err[list(output_ids)] = 2.0 * (q[list(output_ids)] - np.asarray(targets, dtype=float))

    A = (wp - wm * q[None, :]) * inv[None, :]
    z = np.linalg.solve(np.eye(L) - A, err)
    a = z * inv
    rate_coupling = np.zeros(L)
    np.divide(1.0, 1.0 - d, out=rate_coupling, where=d < 1)
    self_term = (q * a * rate_coupling)[:, None]
    g_plus = np.outer(q, a) - self_term
    g_minus = -self_term - np.outer(q, q * a)
    return g_plus, g_minus


def _solve_tight(params: RnnParameters, q0=None, max_iterations: int = 200_000) -> np.ndarray:
    # iterate until the update stalls at rounding level; finite differences of
    # the error need the fixed point to full precision
    q = solve_fixed_point(params, SolverOptions(tolerance=1e-13, max_iterations=max_iterations),
                          q0=q0).q
    best, stall = np.inf, 0
    for _ in range(max_iterations):
        q_new = fixed_point_step(params, q)
        res = float(np.max(np.abs(q_new - q)))
        q = q_new
        if res == 0.0:
            break
        if res < best:
            best, stall = res, 0
        else:
            stall += 1
            if stall >= 20:
                break
    return q


def _perturbed(params: RnnParameters, which: str, u: int, v: int, delta: float) -> RnnParameters:
    wp = np.array(params.w_plus)
    wm = np.array(params.w_minus)
    (wp if which == "plus" else wm)[u, v] += delta
    out = wp.sum(axis=1) + wm.sum(axis=1)
    r = np.array(params.r)
    movable = params.d < 1
    r[movable] = out[movable] / (1.0 - params.d[movable])
    # bypass validation: a probe may step slightly below a zero weight
    return RnnParameters(wp, wm, params.Lambda, params.lambda_, params.d, r)


def finite_difference_gradient(params: RnnParameters, targets, output_ids, q0=None,
                               rel_step: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of the output error, re-solving the network per probe.

    The step for weight ``w`` is ``rel_step * max(1, w)``.
    """
    L = params.L
    grads = {"plus": np.zeros((L, L)), "minus": np.zeros((L, L))}
    for which, w in (("plus", params.w_plus), ("minus", params.w_minus)):
        for u in range(L):
            for v in range(L):
                h = rel_step * max(1.0, w[u, v])
                e_hi = loss(_solve_tight(_perturbed(params, which, u, v, h), q0), targets,
                            output_ids)
                e_lo = loss(_solve_tight(_perturbed(params, which, u, v, -h), q0), targets,
                            output_ids)
                grads[which][u, v] = (e_hi - e_lo) / (2.0 * h)
    return grads["plus"], grads["minus"]


def gradient_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-9) -> float:
    """Largest elementwise relative error, ignoring entries within ``atol``."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.zeros_like(diff)
    np.divide(diff, scale, out=rel, where=scale > 0)
    rel[diff <= atol] = 0.0
    return float(rel.max()) if rel.size else 0.0


def gradcheck(seed: int, trials: int, max_size: int = 6,
              atol: float = 1e-9) -> dict[str, Any]:
    """Compare analytic and finite-difference gradients on random subcritical networks.

    Each trial draws ``L`` in ``[2, max_size]``, a random nonempty output set
    and targets in ``[0.1, 0.9]``.
    """
    from .generators import random_subcritical_network

    rng = np.random.default_rng(seed)
    errors, abs_errors = [], []
    for _ in range(trials):
        L = int(rng.integers(2, max_size + 1))
        params = random_subcritical_network(rng, L)
        n_out = int(rng.integers(1, L + 1))
        outputs = tuple(sorted(rng.choice(L, n_out, replace=False).tolist()))
        roles = NeuronRoles((), tuple(i for i in range(L) if i not in outputs), outputs)
        y = rng.uniform(0.1, 0.9, n_out)
        steady = solve_fixed_point(params)
        ga = gradient(params, steady, y, roles)
        gn = finite_difference_gradient(params, y, outputs, q0=steady.q)
        errors.append(max(gradient_error(ga[0], gn[0], atol), gradient_error(ga[1], gn[1], atol)))
        abs_errors.append(float(max(np.abs(ga[0] - gn[0]).max(), np.abs(ga[1] - gn[1]).max())))
    return {"seed": seed, "trials": trials, "max_size": max_size, "atol": atol,
            "max_relative_error": max(errors, default=0.0),
            "max_absolute_error": max(abs_errors, default=0.0), "errors": errors}


def init_network(n_inputs: int, n_outputs: int, config: TrainingConfig,
                 rng: np.random.Generator) -> tuple[RnnParameters, NeuronRoles]:
    """Fully recurrent network with uniform random weights and no self-loops."""
    roles = NeuronRoles.layered(n_inputs, config.hidden_count, n_outputs)
    L = n_inputs + config.hidden_count + n_outputs
    lo, hi = config.weight_init
    wp = rng.uniform(lo, hi, size=(L, L))
    wm = rng.uniform(lo, hi, size=(L, L))
    np.fill_diagonal(wp, 0.0)
    np.fill_diagonal(wm, 0.0)
    d = np.full(L, config.departure)
    return RnnParameters.from_weights(wp, wm, np.zeros(L), np.zeros(L), d), roles


def sgd_step(params: RnnParameters, x, y, roles: NeuronRoles, learning_rate: float,
             mode: str = ANALYTIC, solver: SolverOptions | None = None,
             q0=None) -> tuple[RnnParameters, float, np.ndarray]:
    """One projected gradient step on a single pattern.

    Returns the updated parameters (exogenous rates reset to zero), the error
    before the step and the solved ``q``.
    """
    L = params.L
    Lam = np.zeros(L)
    Lam[list(roles.input_ids)] = x
    net = params.with_inputs(Lam, np.zeros(L))
    steady = solve_fixed_point(net, solver, q0=q0)
    e = loss(steady.q, y, roles.output_ids)
    g_plus, g_minus = gradient(net, steady, y, roles, mode)
    wp = np.maximum(0.0, net.w_plus - learning_rate * g_plus)
    wm = np.maximum(0.0, net.w_minus - learning_rate * g_minus)
    np.fill_diagonal(wp, 0.0)
    np.fill_diagonal(wm, 0.0)
    updated = RnnParameters(wp, wm, np.zeros(L), np.zeros(L), params.d,
                            derive_firing_rates(wp, wm, params.d))
    return updated, e, steady.q


def train(inputs, targets, config: TrainingConfig | None = None,
          class_names=None, normalization=None) -> TrainedModel:
    """Train a classifier on rate-encoded inputs and encoded targets.

    Parameters
    ----------
    inputs : (K, A) array
        Exogenous excitatory rates of the input neurons, one row per pattern.
    targets : (K, C) array
        Desired output excitation probabilities.
    """
    config = config or TrainingConfig()
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    rng = np.random.default_rng(config.seed)
    params, roles = init_network(inputs.shape[1], targets.shape[1], config, rng)
    solver = SolverOptions(tolerance=config.solver_tolerance, allow_divergent=True)
    wp, wm = np.array(params.w_plus), np.array(params.w_minus)
    d = np.array(params.d)
    in_ids = np.array(roles.input_ids, dtype=np.int64)
    out_ids = np.array(roles.output_ids, dtype=np.int64)
    mask = ~np.eye(params.L, dtype=bool)
    r_fixed = np.zeros(params.L)
    history: list[float] = []
    q = np.zeros(params.L)
    for epoch in range(config.epochs):
        order = rng.permutation(len(inputs))
        total = 0.0
        for k in order:
            status = -1
            if config.gradient_mode == ANALYTIC:
                try:
                    e, q_new, status = _kernels.sgd_step(
                        wp, wm, d, r_fixed, mask, inputs[k], targets[k], in_ids, out_ids,
                        config.learning_rate, q, solver.tolerance, solver.max_iterations)
                except np.linalg.LinAlgError:
                    status = _kernels.SINGULAR
            if status == _kernels.OK:
                q = q_new
            else:
                # slow path: finite differences, or a precise error for the failure
                current = RnnParameters(wp, wm, np.zeros(params.L), np.zeros(params.L), d,
                                        derive_firing_rates(wp, wm, d))
                try:
                    current, e, q = sgd_step(current, inputs[k], targets[k], roles,
                                             config.learning_rate, config.gradient_mode,
                                             solver, q0=q)
                except (ConvergenceError, IllPosedNeuronError) as exc:
                    raise TrainingError(f"solver failed at epoch {epoch}, sample {k}: {exc}",
                                        epoch, int(k)) from exc
                wp, wm = np.array(current.w_plus), np.array(current.w_minus)
            total += e
        history.append(total / max(len(inputs), 1))
        log.debug("epoch %d mean error %.6f", epoch, history[-1])
        if config.convergence_threshold is not None and history[-1] < config.convergence_threshold:
            break
    final = RnnParameters(wp, wm, np.zeros(params.L), np.zeros(params.L), d,
                          derive_firing_rates(wp, wm, d))
    return TrainedModel(final, roles, history, config, list(class_names or []), normalization)
