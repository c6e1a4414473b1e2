"""Information-selection policy: state features plus per-action cost regressors.

The selection problem is reduced to cost-sensitive multiclass
classification over n+1 actions (n parts plus STOP). Each action gets an
independent linear regressor of its cost; acting takes the argmin of the
predicted costs over the allowed actions, preferring STOP on exact ties
and the lowest part index after that.

Regressors train online with normalized least-mean-squares steps: the
plain squared-loss gradient scaled by 1/(1 + ||x||^2). The quadratic
feature expansion makes raw step sizes scale-sensitive; the normalized
step keeps a single learning rate stable for any feature magnitude while
still moving along the exact gradient direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import STOP, Action, PartialView, Prediction, smooth_probs

_FORMAT_VERSION = 1

_triu_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    if d not in _triu_cache:
        _triu_cache[d] = np.triu_indices(d)
    return _triu_cache[d]


def base_state_dim(k: int) -> int:
    # k scores + margin + kl + k argmax slots + steps + steps fraction
    return 2 * k + 4


def state_dim(k: int, quadratic: bool) -> int:
    d = base_state_dim(k)
    return d + d * (d + 1) // 2 if quadratic else d


@dataclass
class StateFeatures:
    """Featurized (partial input, intermediate prediction) state.

    vector is what the regressors consume: the base features, optionally
    followed by all pairwise products (including squares) of the base
    features when the quadratic expansion is on.
    """

    scores: np.ndarray  # negative log probabilities, k values
    margin: float  # best minus second-best probability
    kl_to_prior: float
    argmax_onehot: np.ndarray
    steps_taken: int
    steps_fraction: float
    vector: np.ndarray


def featurize_state(
    pred: Prediction,
    prior: np.ndarray,
    view: PartialView,
    quadratic: bool = True,
) -> StateFeatures:
    probs = pred.probs
    k = len(probs)
    top2 = np.partition(probs, k - 2)[k - 2 :]
    margin = float(top2[1] - top2[0])
    q = smooth_probs(np.asarray(prior, dtype=np.float64))
    kl = float(np.sum(probs * (np.log(probs) - np.log(q))))
    kl = max(kl, 0.0)
    onehot = np.zeros(k, dtype=np.float64)
    onehot[pred.argmax] = 1.0
    steps = len(view.observed)
    frac = steps / view.n
    base = np.concatenate([pred.scores, [margin, kl], onehot, [float(steps), frac]])
    if quadratic:
        iu, ju = _triu_indices(len(base))
        vector = np.concatenate([base, base[iu] * base[ju]])
    else:
        vector = base
    return StateFeatures(
        scores=pred.scores,
        margin=margin,
        kl_to_prior=kl,
        argmax_onehot=onehot,
        steps_taken=steps,
        steps_fraction=frac,
        vector=vector,
    )


@dataclass
class CostExample:
    """One cost-sensitive training unit: a state, its allowed actions and
    the normalized cost of each (min exactly 0, all non-negative)."""

    features: StateFeatures
    allowed: tuple[Action, ...]
    costs: np.ndarray

    def __post_init__(self) -> None:
        if len(self.allowed) == 0:
            raise ValueError("empty allowed action set")
        if len(self.allowed) != len(self.costs):
            raise ValueError("cost vector length must match allowed actions")
        if len(set(self.allowed)) != len(self.allowed):
            raise ValueError("duplicate action in allowed set")
        if np.any(self.costs < 0):
            raise ValueError("costs must be non-negative")
        if self.costs.min() != 0.0:
            raise ValueError("minimum cost must be exactly 0")


@dataclass
class Policy:
    """n+1 linear cost regressors (rows 0..n-1 for parts, row n for STOP)."""

    weights: np.ndarray  # (n + 1, dim)
    bias: np.ndarray  # (n + 1,)
    n: int
    k: int
    quadratic: bool
    update_count: int = 0

    def __post_init__(self) -> None:
        expected = (self.n + 1, state_dim(self.k, self.quadratic))
        if self.weights.shape != expected:
            raise ValueError(f"weights shape {self.weights.shape} != {expected}")
        if self.bias.shape != (self.n + 1,):
            raise ValueError(f"bias shape {self.bias.shape} != ({self.n + 1},)")

    @classmethod
    def zeros(cls, n: int, k: int, quadratic: bool = True) -> "Policy":
        return cls(
            weights=np.zeros((n + 1, state_dim(k, quadratic)), dtype=np.float64),
            bias=np.zeros(n + 1, dtype=np.float64),
            n=n,
            k=k,
            quadratic=quadratic,
        )

    def copy(self) -> "Policy":
        return Policy(
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            n=self.n,
            k=self.k,
            quadratic=self.quadratic,
            update_count=self.update_count,
        )

    def _row(self, action: Action) -> int:
        if action == STOP:
            return self.n
        if not 0 <= action < self.n:
            raise ValueError(f"action {action} out of range for n={self.n}")
        return action

    def predicted_costs(self, sf: StateFeatures, actions: Sequence[Action]) -> np.ndarray:
        rows = np.fromiter((self._row(a) for a in actions), dtype=np.int64, count=len(actions))
        return self.weights[rows] @ sf.vector + self.bias[rows]

    def act(self, sf: StateFeatures, allowed: Iterable[Action]) -> Action:
        """Argmin of predicted cost; exact ties prefer STOP, then the
        lowest part index (sorted order puts STOP=-1 first)."""
        ordered = sorted(allowed)
        if not ordered:
            raise ValueError("empty allowed action set")
        costs = self.predicted_costs(sf, ordered)
        return ordered[int(np.argmin(costs))]

    def update(self, example: CostExample, rate: float) -> None:
        """One normalized squared-loss gradient step per allowed action.

        Regressors of actions outside the allowed set are untouched.
        """
        if rate == 0.0:
            return
        x = example.features.vector
        rows = np.fromiter(
            (self._row(a) for a in example.allowed), dtype=np.int64, count=len(example.allowed)
        )
        resid = self.weights[rows] @ x + self.bias[rows] - example.costs
        step = rate / (1.0 + x @ x)
        self.weights[rows] -= step * np.outer(resid, x)
        self.bias[rows] -= step * resid
        self.update_count += 1


def regressor_loss_grad(
    w: np.ndarray, b: float, x: np.ndarray, target: float
) -> tuple[float, np.ndarray, float]:
    """Squared loss 0.5*(w.x + b - target)^2 and its exact gradient.

    The update step applies this gradient scaled by rate/(1 + ||x||^2).
    """
    resid = float(w @ x + b - target)
    return 0.5 * resid * resid, resid * x, resid


def average_policies(policies: Sequence[Policy]) -> Policy:
    """Arithmetic mean of the regressor weights of identically-shaped policies."""
    if not policies:
        raise ValueError("cannot average an empty list of policies")
    first = policies[0]
    for p in policies[1:]:
        if (
            p.weights.shape != first.weights.shape
            or p.n != first.n
            or p.k != first.k
            or p.quadratic != first.quadratic
        ):
            raise ValueError("policies have mismatched shapes")
    return Policy(
        weights=np.mean([p.weights for p in policies], axis=0),
        bias=np.mean([p.bias for p in policies], axis=0),
        n=first.n,
        k=first.k,
        quadratic=first.quadratic,
        update_count=round(sum(p.update_count for p in policies) / len(policies)),
    )


def save_policy(policy: Policy, path) -> None:
    meta = {
        "format_version": _FORMAT_VERSION,
        "kind": "policy",
        "n": policy.n,
        "k": policy.k,
        "quadratic": policy.quadratic,
        "update_count": policy.update_count,
    }
    np.savez(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        weights=policy.weights,
        bias=policy.bias,
    )


def load_policy(path) -> Policy:
    from .predictor import _load_meta

    with np.load(path, allow_pickle=False) as data:
        meta = _load_meta(data, "policy")
        return Policy(
            weights=data["weights"],
            bias=data["bias"],
            n=int(meta["n"]),
            k=int(meta["k"]),
            quadratic=bool(meta["quadratic"]),
            update_count=int(meta["update_count"]),
        )
