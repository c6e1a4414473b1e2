"""Greedy label-aware reference policy and its roll-outs.

At each state the reference evaluates every allowed action one step
ahead: STOP scores the current view as terminal, Acquire(i) scores the
view plus part i, both under the combined loss with the true label. The
argmin wins; exact ties prefer STOP, then the lowest part index.

Scores are linear in the acquired parts, so a context caches the per-part
score contributions once and every candidate evaluation is a single
vector add instead of a fresh featurization. Roll-outs are therefore
O(n^2) score arithmetic per trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    STOP,
    Action,
    LossConfig,
    PartedInstance,
    PartialView,
    Prediction,
    prediction_from_scores,
    task_loss_rows,
)
from .predictor import TaskPredictor


@dataclass
class ReferenceContext:
    """Frozen (instance, predictor snapshot, loss) triple for reference queries.

    The predictor snapshot is whatever the caller passes; during joint
    training that is the live predictor, which only changes between
    examples, so one context per example keeps the cache valid.
    """

    instance: PartedInstance
    predictor: TaskPredictor
    loss: LossConfig
    deltas: np.ndarray = field(init=False)
    base_scores: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if not 0 <= self.instance.label < self.predictor.k:
            raise ValueError(
                f"label {self.instance.label} out of range for {self.predictor.k} classes"
            )
        self.deltas = self.predictor.part_deltas(self.instance)
        self.base_scores = self.predictor.bias.copy()

    @property
    def n(self) -> int:
        return self.instance.n

    def scores_for(self, view: PartialView) -> np.ndarray:
        """Linear scores of a view, accumulated in acquisition order."""
        scores = self.base_scores.copy()
        for i in view.observed:
            scores += self.deltas[i]
        return scores

    def task_at(self, scores: np.ndarray) -> float:
        return float(task_loss_rows(scores[None, :], self.instance.label, self.loss.task_loss_kind)[0])

    def terminal_loss(self, scores: np.ndarray, n_observed: int) -> float:
        return self.task_at(scores) + self.loss.lam * n_observed / self.n

    def greedy_action(self, scores: np.ndarray, n_observed: int, remaining: np.ndarray) -> Action:
        """One-step-lookahead argmin over {STOP} and the remaining parts.

        remaining must be sorted ascending so that argmin's first-match
        tie handling lands on the lowest part index.
        """
        stop_loss = self.terminal_loss(scores, n_observed)
        if remaining.size == 0:
            return STOP
        rows = scores[None, :] + self.deltas[remaining]
        task = task_loss_rows(rows, self.instance.label, self.loss.task_loss_kind)
        best = int(np.argmin(task))
        acquire_loss = task[best] + self.loss.lam * (n_observed + 1) / self.n
        if stop_loss <= acquire_loss:
            return STOP
        return int(remaining[best])

    def rollout_loss(self, scores: np.ndarray, n_observed: int, remaining: np.ndarray) -> float:
        """Terminal combined loss of running the reference to its stop."""
        scores = scores.copy()
        remaining = remaining.copy()
        while True:
            action = self.greedy_action(scores, n_observed, remaining)
            if action == STOP:
                return self.terminal_loss(scores, n_observed)
            scores += self.deltas[action]
            n_observed += 1
            remaining = remaining[remaining != action]


def _remaining_array(view: PartialView) -> np.ndarray:
    mask = np.ones(view.n, dtype=bool)
    for i in view.observed:
        mask[i] = False
    return np.flatnonzero(mask)


def reference_action(ctx: ReferenceContext, view: PartialView) -> Action:
    """The immediate-loss-minimizing action at a view."""
    return ctx.greedy_action(ctx.scores_for(view), len(view.observed), _remaining_array(view))


def rollout_reference(ctx: ReferenceContext, view: PartialView) -> tuple[Prediction, PartialView]:
    """Run the reference from a view until STOP; at most n - |observed| + 1 steps.

    Returns the terminal prediction and terminal view.
    """
    scores = ctx.scores_for(view)
    remaining = _remaining_array(view)
    observed = list(view.observed)
    while True:
        action = ctx.greedy_action(scores, len(observed), remaining)
        if action == STOP:
            terminal = PartialView(view.instance, tuple(observed))
            return prediction_from_scores(scores), terminal
        scores += ctx.deltas[action]
        observed.append(action)
        remaining = remaining[remaining != action]
