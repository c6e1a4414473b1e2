"""Task predictor: a hashed linear multiclass model over partial inputs.

Content features live in a 2**hash_bits space; n extra slots carry the
per-part observed indicators, so the model can distinguish "part i was
seen and said nothing" from "part i is still hidden". Training is plain
online multiclass-logistic SGD at a fixed rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PartedInstance, PartialView, Prediction, prediction_from_scores

SubsetSampler = Callable[[np.random.Generator, int], Sequence[int]]

_FORMAT_VERSION = 1


@dataclass
class PartialFeatures:
    """Sparse union of the observed bags plus the indicator block.

    indices/weights hold the merged content features (duplicate indices
    summed, indices unique and ascending); indicators has n slots with
    slot i set to 1.0 iff part i is observed.
    """

    indices: np.ndarray
    weights: np.ndarray
    indicators: np.ndarray


def featurize_partial(instance: PartedInstance, view: PartialView) -> PartialFeatures:
    """Merge the observed bags; unobserved parts contribute nothing."""
    if view.instance is not instance and view.instance != instance:
        raise ValueError("view does not belong to this instance")
    arrays = instance.part_arrays
    picked = [arrays[i] for i in view.observed]
    if picked:
        idx = np.concatenate([a for a, _ in picked])
        wts = np.concatenate([w for _, w in picked])
        uniq, inverse = np.unique(idx, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.float64)
        np.add.at(summed, inverse, wts)
    else:
        uniq = np.empty(0, dtype=np.int64)
        summed = np.empty(0, dtype=np.float64)
    indicators = np.zeros(instance.n, dtype=np.float64)
    for i in view.observed:
        indicators[i] = 1.0
    return PartialFeatures(indices=uniq, weights=summed, indicators=indicators)


@dataclass
class TaskPredictor:
    """Per-class weight rows over [content hash space | indicator slots] plus biases.

    Mutable while training; treat as immutable once training is done
    (concurrent read-only prediction is then safe).
    """

    weights: np.ndarray  # (k, 2**hash_bits + n)
    bias: np.ndarray  # (k,)
    hash_bits: int
    k: int
    n: int
    learn_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"need at least 2 classes, got {self.k}")
        expected = (self.k, (1 << self.hash_bits) + self.n)
        if self.weights.shape != expected:
            raise ValueError(f"weights shape {self.weights.shape} != {expected}")
        if self.bias.shape != (self.k,):
            raise ValueError(f"bias shape {self.bias.shape} != ({self.k},)")
        if self.learn_rate < 0:
            raise ValueError("learn_rate must be >= 0")

    @classmethod
    def zeros(cls, k: int, n: int, hash_bits: int = 18, learn_rate: float = 0.5) -> "TaskPredictor":
        width = (1 << hash_bits) + n
        return cls(
            weights=np.zeros((k, width), dtype=np.float64),
            bias=np.zeros(k, dtype=np.float64),
            hash_bits=hash_bits,
            k=k,
            n=n,
            learn_rate=learn_rate,
        )

    @property
    def hash_size(self) -> int:
        return 1 << self.hash_bits

    def copy(self) -> "TaskPredictor":
        return TaskPredictor(
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            hash_bits=self.hash_bits,
            k=self.k,
            n=self.n,
            learn_rate=self.learn_rate,
        )

    def _check_indices(self, features: PartialFeatures) -> None:
        if len(features.indices) and int(features.indices[-1]) >= self.hash_size:
            raise ValueError(
                f"feature index {int(features.indices[-1])} >= hash space {self.hash_size}"
            )
        if len(features.indicators) != self.n:
            raise ValueError(
                f"indicator block has {len(features.indicators)} slots, expected {self.n}"
            )

    def raw_scores(self, features: PartialFeatures) -> np.ndarray:
        """Per-class linear scores for a featurized partial input."""
        self._check_indices(features)
        scores = self.bias.copy()
        if len(features.indices):
            scores += self.weights[:, features.indices] @ features.weights
        on = np.flatnonzero(features.indicators)
        if len(on):
            scores += self.weights[:, self.hash_size + on].sum(axis=1)
        return scores

    def predict(self, features: PartialFeatures) -> Prediction:
        return prediction_from_scores(self.raw_scores(features))

    def update(self, features: PartialFeatures, label: int, rate: float | None = None) -> None:
        """One multiclass-logistic gradient step toward label, in place."""
        if not 0 <= label < self.k:
            raise ValueError(f"label {label} out of range for {self.k} classes")
        step = self.learn_rate if rate is None else rate
        if step == 0.0:
            return
        grad = self.predict(features).probs.copy()
        grad[label] -= 1.0
        self.bias -= step * grad
        if len(features.indices):
            self.weights[:, features.indices] -= step * np.outer(grad, features.weights)
        on = np.flatnonzero(features.indicators)
        if len(on):
            self.weights[:, self.hash_size + on] -= step * grad[:, None]

    def part_deltas(self, instance: PartedInstance) -> np.ndarray:
        """(n, k) matrix of per-class score contributions of each part.

        Row i is what acquiring part i adds to the linear scores (content
        features plus its indicator weight). Scores are linear, so the
        score of any view is bias + sum of the rows of its parts.
        """
        if instance.n != self.n:
            raise ValueError(f"instance has {instance.n} parts, predictor expects {self.n}")
        deltas = np.empty((self.n, self.k), dtype=np.float64)
        for i, (idx, wts) in enumerate(instance.part_arrays):
            if len(idx):
                if int(idx.max()) >= self.hash_size:
                    raise ValueError(f"feature index {int(idx.max())} >= hash space")
                deltas[i] = self.weights[:, idx] @ wts
            else:
                deltas[i] = 0.0
            deltas[i] += self.weights[:, self.hash_size + i]
        return deltas


def neg_log_likelihood(predictor: TaskPredictor, features: PartialFeatures, label: int) -> float:
    """Loss whose gradient a single update step follows (for gradient checks)."""
    return float(-np.log(predictor.predict(features).probs[label]))


def uniform_subset_sampler(rng: np.random.Generator, n: int) -> Sequence[int]:
    """Uniform subset size m in {0..n}, then a uniform m-subset."""
    m = int(rng.integers(0, n + 1))
    return rng.choice(n, size=m, replace=False).tolist()


def pretrain(
    dataset,
    subset_sampler: SubsetSampler | None = None,
    passes: int = 2,
    seed: int = 0,
    *,
    hash_bits: int = 18,
    learn_rate: float = 0.5,
) -> TaskPredictor:
    """Train a fresh predictor on randomly sampled part subsets.

    Iterates the dataset in order for each pass; per example one subset is
    drawn by subset_sampler (uniform by default), featurized and used for
    a single update. Deterministic given the seed. passes=0 returns the
    zero-weight predictor untouched.
    """
    if not dataset.instances:
        raise ValueError("cannot pretrain on an empty dataset")
    sampler = subset_sampler or uniform_subset_sampler
    model = TaskPredictor.zeros(dataset.k, dataset.n, hash_bits=hash_bits, learn_rate=learn_rate)
    rng = np.random.default_rng(seed)
    for _ in range(passes):
        for inst in dataset.instances:
            subset = tuple(int(i) for i in sampler(rng, inst.n))
            view = PartialView(inst, subset)
            model.update(featurize_partial(inst, view), inst.label)
    return model


def save_predictor(predictor: TaskPredictor, path) -> None:
    meta = {
        "format_version": _FORMAT_VERSION,
        "kind": "predictor",
        "hash_bits": predictor.hash_bits,
        "k": predictor.k,
        "n": predictor.n,
        "learn_rate": predictor.learn_rate,
    }
    np.savez(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        weights=predictor.weights,
        bias=predictor.bias,
    )


def _load_meta(data, expected_kind: str) -> dict:
    meta = json.loads(str(data["meta"]))
    if meta.get("kind") != expected_kind:
        raise ValueError(f"file holds a {meta.get('kind')!r}, expected {expected_kind!r}")
    if meta.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported format version {meta.get('format_version')}")
    return meta


def load_predictor(path) -> TaskPredictor:
    with np.load(path, allow_pickle=False) as data:
        meta = _load_meta(data, "predictor")
        return TaskPredictor(
            weights=data["weights"],
            bias=data["bias"],
            hash_bits=int(meta["hash_bits"]),
            k=int(meta["k"]),
            n=int(meta["n"]),
            learn_rate=float(meta["learn_rate"]),
        )
