"""Evaluation: macro-F1, accuracy, acquisition statistics, Pareto rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .core import LossConfig, PartialView, combined_loss
from .data import Dataset
from .engine import ModelBundle
from .predictor import TaskPredictor, featurize_partial


def macro_f1(y_true, y_pred, k: int) -> float:
    """Mean per-class F1 over all k classes; a class with no true or
    predicted examples contributes F1 = 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    scores = []
    for c in range(k):
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


@dataclass
class ParetoRow:
    """One operating point: a dynamic model at some lam or a static first-k reader."""

    kind: str  # "dynamic" or "static"
    param: float  # lam for dynamic rows, k for static rows
    avg_fraction_parts: float
    accuracy: float
    macro_f1: float
    mean_loss: float
    part_histogram: np.ndarray  # times each part was acquired over the test set
    per_class_avg_parts: np.ndarray  # by true label; 0 for absent classes
    avg_parts_easy: float | None = None
    avg_parts_hard: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("dynamic", "static"):
            raise ValueError(f"kind must be dynamic/static, got {self.kind!r}")
        if not 0.0 <= self.avg_fraction_parts <= 1.0:
            raise ValueError("avg_fraction_parts must be in [0, 1]")
        if np.any(self.part_histogram < 0):
            raise ValueError("histogram entries must be >= 0")


class _UsageTally:
    def __init__(self, n: int, k: int):
        self.hist = np.zeros(n, dtype=np.int64)
        self.class_parts = np.zeros(k, dtype=np.float64)
        self.class_counts = np.zeros(k, dtype=np.int64)
        self.difficulty_parts = {"easy": 0.0, "hard": 0.0}
        self.difficulty_counts = {"easy": 0, "hard": 0}
        self.total_parts = 0

    def add(self, inst, used: tuple[int, ...]) -> None:
        for i in used:
            self.hist[i] += 1
        self.total_parts += len(used)
        self.class_parts[inst.label] += len(used)
        self.class_counts[inst.label] += 1
        if inst.difficulty is not None:
            self.difficulty_parts[inst.difficulty] += len(used)
            self.difficulty_counts[inst.difficulty] += 1

    def per_class_avg(self) -> np.ndarray:
        counts = np.maximum(self.class_counts, 1)
        return self.class_parts / counts

    def difficulty_avg(self, flag: str) -> float | None:
        if self.difficulty_counts[flag] == 0:
            return None
        return self.difficulty_parts[flag] / self.difficulty_counts[flag]


def evaluate(bundle: ModelBundle, dataset: Dataset) -> ParetoRow:
    """Run the acquisition loop on every instance and aggregate."""
    n, k = bundle.predictor.n, bundle.predictor.k
    if dataset.n != n:
        raise ValueError(f"dataset has {dataset.n} parts, bundle expects {n}")
    tally = _UsageTally(n, k)
    y_true, y_pred, losses = [], [], []
    for inst in dataset.instances:
        trajectory = engine.predict(bundle, inst)
        used = trajectory.terminal_view.observed
        tally.add(inst, used)
        y_true.append(inst.label)
        y_pred.append(trajectory.terminal_prediction.argmax)
        losses.append(
            combined_loss(
                trajectory.terminal_prediction, inst.label, trajectory.terminal_view, bundle.loss
            )
        )
    y_true_arr = np.array(y_true)
    y_pred_arr = np.array(y_pred)
    return ParetoRow(
        kind="dynamic",
        param=bundle.loss.lam,
        avg_fraction_parts=tally.total_parts / (len(dataset.instances) * n),
        accuracy=float(np.mean(y_true_arr == y_pred_arr)),
        macro_f1=macro_f1(y_true_arr, y_pred_arr, k),
        mean_loss=float(np.mean(losses)),
        part_histogram=tally.hist,
        per_class_avg_parts=tally.per_class_avg(),
        avg_parts_easy=tally.difficulty_avg("easy"),
        avg_parts_hard=tally.difficulty_avg("hard"),
    )


def evaluate_static(
    predictor: TaskPredictor,
    dataset: Dataset,
    k_parts: int,
    loss: LossConfig | None = None,
) -> ParetoRow:
    """Score a forced first-k reader; avg_fraction_parts is exactly k/n."""
    loss = loss or LossConfig(lam=0.0)
    n, k = predictor.n, predictor.k
    if dataset.n != n:
        raise ValueError(f"dataset has {dataset.n} parts, predictor expects {n}")
    if not 1 <= k_parts <= n:
        raise ValueError(f"k={k_parts} out of range [1, {n}]")
    first_k = tuple(range(k_parts))
    tally = _UsageTally(n, k)
    y_true, y_pred, losses = [], [], []
    for inst in dataset.instances:
        view = PartialView(inst, first_k)
        pred = predictor.predict(featurize_partial(inst, view))
        tally.add(inst, first_k)
        y_true.append(inst.label)
        y_pred.append(pred.argmax)
        losses.append(combined_loss(pred, inst.label, view, loss))
    y_true_arr = np.array(y_true)
    y_pred_arr = np.array(y_pred)
    return ParetoRow(
        kind="static",
        param=float(k_parts),
        avg_fraction_parts=k_parts / n,
        accuracy=float(np.mean(y_true_arr == y_pred_arr)),
        macro_f1=macro_f1(y_true_arr, y_pred_arr, k),
        mean_loss=float(np.mean(losses)),
        part_histogram=tally.hist,
        per_class_avg_parts=tally.per_class_avg(),
        avg_parts_easy=tally.difficulty_avg("easy"),
        avg_parts_hard=tally.difficulty_avg("hard"),
    )
