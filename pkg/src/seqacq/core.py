"""Domain types for parted inputs, acquisition actions, and the combined loss.

An input is decomposed into n parts (sparse feature bags). The system
acquires parts one at a time; the quality/cost trade-off is scored by

    combined = task_loss(prediction, label) + lam * (#acquired / n)

All types here are immutable values and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Final

import numpy as np

# An action is either a part index (acquire that part) or STOP. Encoding
# STOP as -1 makes sorted(action_set) coincide with the tie-break order:
# stop first, then lowest part index.
Action = int
STOP: Final[Action] = -1

PROB_FLOOR: Final[float] = 1e-6

SparseBag = tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class PartedInstance:
    """One labeled input split into n sparse feature bags.

    parts[i] is the bag for part i: a tuple of (feature index, weight)
    pairs. Empty bags are allowed. difficulty is an optional "easy"/"hard"
    flag used only for reporting.
    """

    id: str
    label: int
    parts: tuple[SparseBag, ...]
    difficulty: str | None = None

    def __post_init__(self) -> None:
        if len(self.parts) < 1:
            raise ValueError("instance needs at least one part")
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")
        for bag in self.parts:
            for idx, _ in bag:
                if idx < 0:
                    raise ValueError(f"negative feature index {idx}")
        if self.difficulty not in (None, "easy", "hard"):
            raise ValueError(f"difficulty must be easy/hard, got {self.difficulty!r}")

    @property
    def n(self) -> int:
        return len(self.parts)

    @cached_property
    def part_arrays(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per-part (indices, weights) arrays, cached for repeated featurization."""
        out = []
        for bag in self.parts:
            idx = np.fromiter((i for i, _ in bag), dtype=np.int64, count=len(bag))
            wts = np.fromiter((w for _, w in bag), dtype=np.float64, count=len(bag))
            out.append((idx, wts))
        return tuple(out)


@dataclass(frozen=True)
class PartialView:
    """The set of parts acquired so far, in acquisition order."""

    instance: PartedInstance
    observed: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        n = self.instance.n
        if len(set(self.observed)) != len(self.observed):
            raise ValueError(f"duplicate part index in view {self.observed}")
        for i in self.observed:
            if not 0 <= i < n:
                raise ValueError(f"part index {i} out of range for n={n}")

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def observed_set(self) -> frozenset[int]:
        return frozenset(self.observed)

    def with_part(self, part: int) -> "PartialView":
        return PartialView(self.instance, self.observed + (part,))


@dataclass(frozen=True)
class LossConfig:
    """Trade-off weight lam >= 0 and the task-loss flavor."""

    lam: float = 1.0
    task_loss_kind: str = "zero_one"

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.task_loss_kind not in ("zero_one", "log_loss"):
            raise ValueError(f"unknown task loss kind {self.task_loss_kind!r}")


@dataclass
class Prediction:
    """Class probabilities (floored and renormalized), their negative logs,
    and the argmax label (ties resolved to the lowest class index)."""

    probs: np.ndarray
    scores: np.ndarray
    argmax: int

    @property
    def k(self) -> int:
        return len(self.probs)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; accepts 1-d or 2-d input."""
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def smooth_probs(probs: np.ndarray) -> np.ndarray:
    """Floor each class probability at PROB_FLOOR and renormalize.

    Keeps log-loss finite; a no-op whenever every class is already above
    the floor. Preserves the argmax (the maximum can never be a floored
    entry since probabilities sum to 1).
    """
    q = np.maximum(probs, PROB_FLOOR)
    return q / q.sum(axis=-1, keepdims=True)


def prediction_from_scores(scores: np.ndarray) -> Prediction:
    probs = smooth_probs(softmax(scores))
    return Prediction(probs=probs, scores=-np.log(probs), argmax=int(np.argmax(probs)))


def zero_one_rows(score_rows: np.ndarray, label: int) -> np.ndarray:
    """Zero-one task loss for each row of linear scores."""
    return (np.argmax(score_rows, axis=-1) != label).astype(np.float64)


def log_loss_rows(score_rows: np.ndarray, label: int) -> np.ndarray:
    """Smoothed log-loss for each row of linear scores.

    Uses the same softmax-and-floor arithmetic as prediction_from_scores,
    so a one-row call reproduces task_loss on the corresponding Prediction
    bit for bit.
    """
    probs = smooth_probs(softmax(score_rows))
    return -np.log(probs[..., label])


def task_loss_rows(score_rows: np.ndarray, label: int, kind: str) -> np.ndarray:
    if kind == "zero_one":
        return zero_one_rows(score_rows, label)
    if kind == "log_loss":
        return log_loss_rows(score_rows, label)
    raise ValueError(f"unknown task loss kind {kind!r}")


def action_set(view: PartialView) -> set[Action]:
    """Allowed actions: every unobserved part plus STOP."""
    return {i for i in range(view.n) if i not in view.observed_set} | {STOP}


def acquisition_cost(view: PartialView) -> float:
    """Fraction of parts acquired, in [0, 1]."""
    return len(view.observed) / view.n


def task_loss(pred: Prediction, label: int, kind: str) -> float:
    if not 0 <= label < pred.k:
        raise ValueError(f"label {label} out of range for {pred.k} classes")
    if kind == "zero_one":
        return float(pred.argmax != label)
    if kind == "log_loss":
        return float(-np.log(pred.probs[label]))
    raise ValueError(f"unknown task loss kind {kind!r}")


def combined_loss(pred: Prediction, label: int, view: PartialView, cfg: LossConfig) -> float:
    return task_loss(pred, label, cfg.task_loss_kind) + cfg.lam * acquisition_cost(view)
