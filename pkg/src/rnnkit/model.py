"""Parameterization of a random neural network.

A network of ``L`` neurons is described by two nonnegative weight matrices
(excitatory and inhibitory spike rates from neuron ``i`` to neuron ``j``),
exogenous Poisson arrival rates, per-neuron departure probabilities and
firing rates.  Firing rates are stored explicitly; the relation

    r[i] * (1 - d[i]) == sum_j (w_plus[i, j] + w_minus[i, j])

is treated as an invariant checked by :func:`validate` rather than being
recomputed on every access.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

CONSISTENCY_RTOL = 1e-12


class InconsistentParametersError(ValueError):
    """Raised when weights, departures and firing rates cannot agree."""


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NeuronRoles:
    """Disjoint index sets for input, hidden and output neurons."""

    input_ids: tuple[int, ...]
    hidden_ids: tuple[int, ...]
    output_ids: tuple[int, ...]

    def __post_init__(self):
        for name in ("input_ids", "hidden_ids", "output_ids"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        seen: set[int] = set()
        for ids in (self.input_ids, self.hidden_ids, self.output_ids):
            if seen.intersection(ids) or len(set(ids)) != len(ids):
                raise ValueError("neuron roles must be pairwise disjoint")
            seen.update(ids)

    @classmethod
    def layered(cls, n_inputs: int, n_hidden: int, n_outputs: int) -> "NeuronRoles":
        """Inputs first, then hidden neurons, then outputs."""
        a, h = n_inputs, n_inputs + n_hidden
        return cls(tuple(range(a)), tuple(range(a, h)), tuple(range(h, h + n_outputs)))

    def check(self, L: int, classifier: bool = True) -> None:
        for i in self.input_ids + self.hidden_ids + self.output_ids:
            if not 0 <= i < L:
                raise ValueError(f"neuron id {i} outside [0, {L})")
        if classifier and (not self.input_ids or not self.output_ids):
            raise ValueError("a classifier needs at least one input and one output neuron")

    def to_dict(self) -> dict[str, list[int]]:
        return {
            "input": list(self.input_ids),
            "hidden": list(self.hidden_ids),
            "output": list(self.output_ids),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NeuronRoles":
        return cls(d.get("input", ()), d.get("hidden", ()), d.get("output", ()))


@dataclass(frozen=True)
class RnnParameters:
    """Immutable network parameters.

    Attributes
    ----------
    w_plus, w_minus : (L, L) arrays
        Excitatory / inhibitory weights; entry ``[i, j]`` is the rate at
        which neuron ``i`` sends spikes of that sign to neuron ``j``.
    Lambda, lambda_ : (L,) arrays
        Exogenous excitatory / inhibitory Poisson rates.
    d : (L,) array
        Probability that an emitted spike leaves the network.
    r : (L,) array
        Firing rates.
    """

    w_plus: np.ndarray
    w_minus: np.ndarray
    Lambda: np.ndarray
    lambda_: np.ndarray
    d: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        for name, ndim in (("w_plus", 2), ("w_minus", 2), ("Lambda", 1),
                           ("lambda_", 1), ("d", 1), ("r", 1)):
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim, name))
        L = self.w_plus.shape[0]
        if L < 1:
            raise ValueError("a network needs at least one neuron")
        if self.w_plus.shape != (L, L) or self.w_minus.shape != (L, L):
            raise ValueError("weight matrices must both be L x L")
        for name in ("Lambda", "lambda_", "d", "r"):
            if getattr(self, name).shape != (L,):
                raise ValueError(f"{name} must have length {L}")

    @property
    def L(self) -> int:
        return self.w_plus.shape[0]

    @classmethod
    def from_weights(cls, w_plus, w_minus, Lambda=None, lambda_=None, d=None) -> "RnnParameters":
        """Build parameters with firing rates derived from the weights."""
        w_plus = np.asarray(w_plus, dtype=float)
        L = w_plus.shape[0]
        w_minus = np.zeros((L, L)) if w_minus is None else np.asarray(w_minus, dtype=float)
        d = np.zeros(L) if d is None else np.asarray(d, dtype=float)
        Lambda = np.zeros(L) if Lambda is None else Lambda
        lambda_ = np.zeros(L) if lambda_ is None else lambda_
        r = derive_firing_rates(w_plus, w_minus, d)
        return cls(w_plus, w_minus, Lambda, lambda_, d, r)

    def with_inputs(self, Lambda=None, lambda_=None) -> "RnnParameters":
        """Copy with new exogenous rates (weights untouched)."""
        return dataclasses.replace(
            self,
            Lambda=self.Lambda if Lambda is None else Lambda,
            lambda_=self.lambda_ if lambda_ is None else lambda_,
        )

    def to_dict(self, roles: NeuronRoles | None = None) -> dict[str, Any]:
        doc = {
            "L": self.L,
            "w_plus": self.w_plus.tolist(),
            "w_minus": self.w_minus.tolist(),
            "Lambda": self.Lambda.tolist(),
            "lambda": self.lambda_.tolist(),
            "d": self.d.tolist(),
            "r": self.r.tolist(),
            "roles": roles.to_dict() if roles is not None else None,
        }
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RnnParameters":
        params = cls(doc["w_plus"], doc["w_minus"], doc["Lambda"], doc["lambda"],
                     doc["d"], doc["r"])
        if int(doc["L"]) != params.L:
            raise ValueError(f"L={doc['L']} disagrees with weight shape {params.w_plus.shape}")
        return params


def derive_firing_rates(w_plus, w_minus, d) -> np.ndarray:
    """Firing rates implied by the weights: row sum divided by ``1 - d``.

    Neurons with ``d == 1`` and no outgoing weights get rate 0; with outgoing
    weights they raise :class:`InconsistentParametersError`.
    """
    w_plus = np.asarray(w_plus, dtype=float)
    w_minus = np.asarray(w_minus, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(w_plus < 0) or np.any(w_minus < 0):
        raise InconsistentParametersError("weights must be nonnegative")
    if np.any(d < 0) or np.any(d > 1):
        raise InconsistentParametersError("departure probabilities must lie in [0, 1]")
    out = w_plus.sum(axis=1) + w_minus.sum(axis=1)
    leaky = d >= 1.0
    if np.any(leaky & (out > 0)):
        bad = np.flatnonzero(leaky & (out > 0)).tolist()
        raise InconsistentParametersError(
            f"neurons {bad} have d=1 but nonzero outgoing weights")
    r = np.zeros_like(out)
    r[~leaky] = out[~leaky] / (1.0 - d[~leaky])
    return r


def routing_probabilities(params: RnnParameters) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Routing probabilities ``(p_plus, p_minus, d)`` of each neuron's spikes.

    Silent neurons (``r == 0``) get zero rows and a departure probability of 1.
    """
    r = params.r
    active = r > 0
    scale = np.zeros_like(r)
    scale[active] = 1.0 / r[active]
    p_plus = params.w_plus * scale[:, None]
    p_minus = params.w_minus * scale[:, None]
    d = np.where(active, params.d, 1.0)
    return p_plus, p_minus, d


def validate(params: RnnParameters) -> list[str]:
    """Return a list of violated invariants; an empty list means valid."""
    problems = []
    arrays = {
        "w_plus": params.w_plus, "w_minus": params.w_minus, "Lambda": params.Lambda,
        "lambda": params.lambda_, "d": params.d, "r": params.r,
    }
    finite = True
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            problems.append(f"{name}: non-finite entries")
            finite = False
        elif np.any(a < 0):
            idx = np.argwhere(a < 0)[0].tolist()
            problems.append(f"{name}: negative entry at {idx}")
    if np.any(params.d > 1):
        problems.append(f"d: entries above 1 at {np.flatnonzero(params.d > 1).tolist()}")
    if not finite:
        return problems
    out = params.w_plus.sum(axis=1) + params.w_minus.sum(axis=1)
    emitted = params.r * (1.0 - params.d)
    for i in range(params.L):
        if params.d[i] >= 1.0:
            if out[i] > 0:
                problems.append(f"neuron {i}: d=1 with nonzero outgoing weights")
            continue
        if abs(emitted[i] - out[i]) > CONSISTENCY_RTOL * max(abs(emitted[i]), abs(out[i])):
            problems.append(
                f"neuron {i}: r*(1-d)={emitted[i]!r} but outgoing weight sum={out[i]!r}")
    return problems


def save_model(path, params: RnnParameters, roles: NeuronRoles | None = None,
               **extra) -> None:
    doc = params.to_dict(roles)
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> tuple[RnnParameters, NeuronRoles | None, dict[str, Any]]:
    """Read a model document; returns the parameters, roles and the whole document."""
    doc = json.loads(Path(path).read_text())
    params = RnnParameters.from_dict(doc)
    roles = NeuronRoles.from_dict(doc["roles"]) if doc.get("roles") else None
    return params, roles, doc
