"""Exact event-driven simulation of the spiking network.

The network state is the vector of integer potentials.  Exogenous
excitatory and inhibitory spikes arrive as Poisson streams, every excited
neuron fires at its rate ``r_i`` and each emitted spike is routed as
excitatory, inhibitory or out of the network.  The simulation samples the
next event from the aggregate rate (Gillespie) and accumulates time-weighted
statistics after a warm-up period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import RnnParameters, routing_probabilities, validate
from .solver import SteadyState

WARMUP_FRACTION = 0.05
DEFAULT_POTENTIAL_CAP = 10**6
JOINT_MAX_NEURONS = 4
_CHUNK = 1 << 16

_RUNNING, _DONE, _FROZEN, _CAPPED = 0, 1, 2, 3


class SimulationError(RuntimeError):
    pass


class FrozenChainError(SimulationError):
    """The aggregate event rate is zero, so the chain never moves again."""


class SupercriticalError(SimulationError):
    """Some potential exceeded the configured cap."""


@dataclass
class SimulationReport:
    horizon: float
    warmup: float
    event_count: int
    empirical_q: np.ndarray
    seed: int
    # time-weighted probabilities over {0..k_max}^L; mass outside is reported
    joint_histogram: np.ndarray | None = None
    truncation_mass: float = 0.0
    k_max: int | None = None

    @property
    def measured_time(self) -> float:
        return self.horizon - self.warmup

    def to_dict(self) -> dict:
        out = {"horizon": self.horizon, "warmup": self.warmup, "seed": self.seed,
               "event_count": self.event_count, "empirical_q": self.empirical_q.tolist()}
        if self.joint_histogram is not None:
            out["k_max"] = self.k_max
            out["truncation_mass"] = self.truncation_mass
            out["joint_histogram"] = self.joint_histogram.tolist()
        return out


@njit(cache=True)
def _run(k, t, horizon, warmup, Lam, lam, r, cum_route, u_time, u_event, u_route,
         busy_time, joint, k_max, use_joint, cap):
    """Advance the chain over one chunk of random numbers.

    ``cum_route[i]`` holds cumulative probabilities over 2L+1 outcomes:
    excite 0..L-1, inhibit 0..L-1, depart.  Returns ``(t, events, status,
    overflow_time)``.
    """
    L = k.size
    exo = 0.0
    for i in range(L):
        exo += Lam[i] + lam[i]
    firing = 0.0
    for i in range(L):
        if k[i] > 0:
            firing += r[i]
    events = 0
    overflow = 0.0
    for n in range(u_time.size):
        total = exo + firing
        if total <= 0.0:
            return t, events, _FROZEN, overflow
        dt = -np.log(1.0 - u_time[n]) / total
        # time-weighted statistics over [max(t, warmup), min(t + dt, horizon)]
        lo = t if t > warmup else warmup
        hi = t + dt if t + dt < horizon else horizon
        if hi > lo:
            w = hi - lo
            for i in range(L):
                if k[i] > 0:
                    busy_time[i] += w
            if use_joint:
                idx = 0
                inside = True
                for i in range(L):
                    if k[i] > k_max:
                        inside = False
                        break
                    idx = idx * (k_max + 1) + k[i]
                if inside:
                    joint[idx] += w
                else:
                    overflow += w
        if t + dt >= horizon:
            return horizon, events, _DONE, overflow
        t += dt
        events += 1
        # pick the event: exogenous excitation, exogenous inhibition, firing
        x = u_event[n] * total
        done = False
        for i in range(L):
            if x < Lam[i]:
                k[i] += 1
                if k[i] == 1:
                    firing += r[i]
                done = True
                break
            x -= Lam[i]
        if not done:
            for i in range(L):
                if x < lam[i]:
                    if k[i] > 0:
                        k[i] -= 1
                        if k[i] == 0:
                            firing -= r[i]
                    done = True
                    break
                x -= lam[i]
        if not done:
            src = -1
            last = -1
            for i in range(L):
                if k[i] > 0:
                    last = i
                    if x < r[i]:
                        src = i
                        break
                    x -= r[i]
            if src < 0:
                src = last  # rounding at the upper end
            k[src] -= 1
            if k[src] == 0:
                firing -= r[src]
            y = u_route[n]
            c = cum_route[src]
            j = 0
            while j < 2 * L and y >= c[j]:
                j += 1
            if j < L:
                k[j] += 1
                if k[j] == 1:
                    firing += r[j]
            elif j < 2 * L:
                j -= L
                if k[j] > 0:
                    k[j] -= 1
                    if k[j] == 0:
                        firing -= r[j]
        for i in range(L):
            if k[i] > cap:
                return t, events, _CAPPED, overflow
        # keep the running sum from drifting through repeated add/subtract
        if events % 4096 == 0:
            firing = 0.0
            for i in range(L):
                if k[i] > 0:
                    firing += r[i]
    return t, events, _RUNNING, overflow


def _routing_table(params: RnnParameters) -> np.ndarray:
    p_plus, p_minus, d = routing_probabilities(params)
    table = np.concatenate([p_plus, p_minus, d[:, None]], axis=1)
    cum = np.cumsum(table, axis=1)
    cum /= np.where(cum[:, -1:] > 0, cum[:, -1:], 1.0)
    cum[:, -1] = np.inf
    return cum


def simulate(params: RnnParameters, horizon: float, seed: int, collect_joint: bool = False,
             k_max: int = 10, potential_cap: int = DEFAULT_POTENTIAL_CAP,
             warmup_fraction: float = WARMUP_FRACTION) -> SimulationReport:
    """Simulate the network from ``k = 0`` up to time ``horizon``.

    Parameters
    ----------
    collect_joint : bool
        Also record the joint occupancy of states with every ``k_i <= k_max``.
        Only available for networks of at most four neurons.

    Raises
    ------
    FrozenChainError
        If no event can ever happen again.
    SupercriticalError
        If a potential exceeds ``potential_cap``.
    """
    problems = validate(params)
    if problems:
        raise ValueError("invalid parameters: " + "; ".join(problems))
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    L = params.L
    if collect_joint and L > JOINT_MAX_NEURONS:
        raise ValueError(f"joint histogram limited to L <= {JOINT_MAX_NEURONS}")
    rng = np.random.default_rng(seed)
    Lam = np.array(params.Lambda, dtype=float)
    lam = np.array(params.lambda_, dtype=float)
    r = np.array(params.r, dtype=float)
    cum = _routing_table(params)
    warmup = warmup_fraction * horizon
    k = np.zeros(L, dtype=np.int64)
    busy = np.zeros(L)
    joint = np.zeros((k_max + 1) ** L if collect_joint else 1)
    t, events, overflow = 0.0, 0, 0.0
    while True:
        u = rng.random((3, _CHUNK))
        t, n, status, over = _run(k, t, horizon, warmup, Lam, lam, r, cum, u[0], u[1], u[2],
                                  busy, joint, k_max, collect_joint, potential_cap)
        events += n
        overflow += over
        if status == _DONE:
            break
        if status == _FROZEN:
            raise FrozenChainError(f"aggregate event rate is zero at t={t:.6g}, k={k.tolist()}")
        if status == _CAPPED:
            raise SupercriticalError(
                f"potential {int(k.max())} of neuron {int(k.argmax())} exceeds the cap "
                f"{potential_cap} at t={t:.6g}; the network looks supercritical")
    measured = horizon - warmup
    report = SimulationReport(horizon, warmup, events, busy / measured, seed)
    if collect_joint:
        report.joint_histogram = (joint / measured).reshape((k_max + 1,) * L)
        report.truncation_mass = overflow / measured
        report.k_max = k_max
    return report


def replicate(params: RnnParameters, horizon: float, master_seed: int, count: int,
              **kwargs) -> list[SimulationReport]:
    """Independent replications with seeds ``master_seed ^ i``."""
    return [simulate(params, horizon, master_seed ^ i, **kwargs) for i in range(count)]


def product_form(q, k_max: int) -> np.ndarray:
    """Joint probabilities ``prod_i q_i**k_i (1 - q_i)`` on ``{0..k_max}^L``."""
    q = np.asarray(q, dtype=float)
    n = np.arange(k_max + 1)
    out = np.ones(())
    for qi in q:
        out = np.multiply.outer(out, qi ** n * (1.0 - qi))
    return out


@dataclass
class ProductFormComparison:
    marginal_gap: np.ndarray
    total_variation: float | None

    @property
    def max_marginal_gap(self) -> float:
        return float(self.marginal_gap.max())

    def to_dict(self) -> dict:
        return {"marginal_gap": self.marginal_gap.tolist(),
                "max_marginal_gap": self.max_marginal_gap,
                "total_variation": self.total_variation}


def compare_product_form(report: SimulationReport, steady: SteadyState,
                         k_max: int | None = None) -> ProductFormComparison:
    """Compare simulated statistics with the analytical stationary law.

    The total variation distance is taken over the truncated states plus one
    lumped state holding everything with some ``k_i > k_max``.
    """
    q = np.asarray(steady.q, dtype=float)
    if steady.saturated or np.any(q >= 1.0):
        raise ValueError("the product form holds only when every q_i < 1; "
                         f"saturated neurons: {np.flatnonzero(q >= 1.0).tolist()}")
    gap = np.abs(report.empirical_q - q)
    tv = None
    if report.joint_histogram is not None:
        k_max = report.k_max if k_max is None else k_max
        if k_max != report.k_max:
            raise ValueError(f"report was collected with k_max={report.k_max}")
        pf = product_form(q, k_max)
        tv = 0.5 * (float(np.abs(report.joint_histogram - pf).sum())
                    + abs(report.truncation_mass - (1.0 - float(pf.sum()))))
    return ProductFormComparison(gap, tv)
