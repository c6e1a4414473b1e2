"""Datasets: synthetic generation, text featurization, and JSONL round-trips.

The synthetic generator is the desk-scale stand-in corpus: each instance
hides a few class-indicative bags at uniform-random part positions among
noise bags, so a fixed reading order cannot reliably hit the signal and
adaptive acquisition pays off. Hard instances carry a single weak signal
bag instead of several strong ones.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PartedInstance, SparseBag

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def stable_hash(token: str, hash_bits: int) -> int:
    """Process-independent token hash into [0, 2**hash_bits)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (1 << hash_bits)


@dataclass
class Dataset:
    instances: list[PartedInstance]
    k: int
    n: int
    prior: np.ndarray
    name: str = ""

    @classmethod
    def from_instances(cls, instances, k: int | None = None, name: str = "") -> "Dataset":
        instances = list(instances)
        if not instances:
            raise ValueError("dataset needs at least one instance")
        n = instances[0].n
        labels = []
        for inst in instances:
            if inst.n != n:
                raise ValueError(f"instance {inst.id} has {inst.n} parts, expected {n}")
            labels.append(inst.label)
        if k is None:
            k = max(labels) + 1
        if max(labels) >= k:
            raise ValueError(f"label {max(labels)} out of range for k={k}")
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        return cls(instances=instances, k=k, n=n, prior=counts / counts.sum(), name=name)


@dataclass(frozen=True)
class SyntheticConfig:
    classes: int = 5
    parts: int = 10
    train_size: int = 4000
    test_size: int = 1000
    easy_informative: int = 2
    hard_informative: int = 1
    hard_fraction: float = 0.2
    signal_tokens: int = 3
    signal_ambiguity: float = 0.45
    weak_weight: float = 0.7
    noise_tokens: int = 3
    noise_vocab: int = 2000
    hash_bits: int = 18
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_size < 1 or self.test_size < 1:
            raise ValueError("train_size and test_size must be >= 1")
        if self.classes < 2 or self.parts < 1:
            raise ValueError("need classes >= 2 and parts >= 1")
        if not 0 <= self.easy_informative <= self.parts:
            raise ValueError("easy_informative must be in [0, parts]")
        if not 0 <= self.hard_informative <= self.parts:
            raise ValueError("hard_informative must be in [0, parts]")
        if not 0.0 <= self.hard_fraction <= 1.0:
            raise ValueError("hard_fraction must be in [0, 1]")
        if not 0.0 <= self.signal_ambiguity < 1.0:
            raise ValueError("signal_ambiguity must be in [0, 1)")


def _instance(cfg: SyntheticConfig, rng: np.random.Generator, index: int) -> PartedInstance:
    label = int(rng.integers(cfg.classes))
    hard = bool(rng.random() < cfg.hard_fraction)
    count = cfg.hard_informative if hard else cfg.easy_informative
    positions = set(int(p) for p in rng.choice(cfg.parts, size=count, replace=False))
    weight = cfg.weak_weight if hard else 1.0
    parts: list[SparseBag] = []
    for p in range(cfg.parts):
        bag: list[tuple[int, float]] = []
        for _ in range(cfg.noise_tokens):
            tok = int(rng.integers(cfg.noise_vocab))
            bag.append((stable_hash(f"noise:{tok}", cfg.hash_bits), 1.0))
        if p in positions:
            # Position enters the hashed token, so the same class signal
            # lands on different indices at different positions: where the
            # signal sits is only discoverable by reading. A hard
            # instance's single weak part is down-weighted and each of its
            # tokens is swapped for a random other class's token with
            # probability signal_ambiguity, so hard evidence points the
            # right way only most of the time.
            for s in range(cfg.signal_tokens):
                voted = label
                if hard and rng.random() < cfg.signal_ambiguity:
                    voted = int((label + 1 + rng.integers(cfg.classes - 1)) % cfg.classes)
                bag.append((stable_hash(f"class{voted}:sig{s}:pos{p}", cfg.hash_bits), weight))
        parts.append(tuple(bag))
    return PartedInstance(
        id=f"syn-{cfg.seed}-{index}",
        label=label,
        parts=tuple(parts),
        difficulty="hard" if hard else "easy",
    )


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """All train_size + test_size instances as one dataset, deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    total = cfg.train_size + cfg.test_size
    instances = [_instance(cfg, rng, i) for i in range(total)]
    return Dataset.from_instances(instances, k=cfg.classes, name=f"synthetic-{cfg.seed}")


def generate_splits(cfg: SyntheticConfig) -> tuple[Dataset, Dataset]:
    """The same stream split into (train, test); priors are per split."""
    full = generate_synthetic(cfg)
    train = Dataset.from_instances(
        full.instances[: cfg.train_size], k=cfg.classes, name=full.name + "-train"
    )
    test = Dataset.from_instances(
        full.instances[cfg.train_size :], k=cfg.classes, name=full.name + "-test"
    )
    return train, test


def text_to_parts(sentences: list[str], hash_bits: int) -> tuple[SparseBag, ...]:
    """One part per sentence: hashed lowercase unigrams and bigrams, weight 1.

    Duplicate indices are left in the bag; featurization sums them.
    """
    if not sentences:
        raise ValueError("document has no sentences")
    parts = []
    for sentence in sentences:
        tokens = _TOKEN_RE.findall(sentence.lower())
        feats = [(stable_hash(tok, hash_bits), 1.0) for tok in tokens]
        feats += [
            (stable_hash(f"{a}_{b}", hash_bits), 1.0) for a, b in zip(tokens, tokens[1:])
        ]
        parts.append(tuple(feats))
    return tuple(parts)


def save_jsonl(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in dataset.instances:
            obj = {
                "id": inst.id,
                "label": inst.label,
                "parts": [[[int(i), float(w)] for i, w in bag] for bag in inst.parts],
            }
            if inst.difficulty is not None:
                obj["difficulty"] = inst.difficulty
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def load_jsonl(path, k: int | None = None) -> Dataset:
    path = Path(path)
    instances = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                parts = tuple(
                    tuple((int(i), float(w)) for i, w in bag) for bag in obj["parts"]
                )
                instances.append(
                    PartedInstance(
                        id=str(obj["id"]),
                        label=int(obj["label"]),
                        parts=parts,
                        difficulty=obj.get("difficulty"),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}: malformed line {lineno}: {exc}") from exc
    if not instances:
        raise ValueError(f"{path}: no instances found")
    return Dataset.from_instances(instances, k=k, name=path.stem)
