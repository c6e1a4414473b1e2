"""Experiment drivers: lam sweeps, static first-k baselines, CSV output."""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

from .core import LossConfig
from .data import Dataset
from .engine import TrainConfig, train
from .metrics import ParetoRow, evaluate, evaluate_static
from .oracle import RegretAuditReport
from .predictor import TaskPredictor, pretrain


def sweep_lambda(
    train_ds: Dataset,
    test_ds: Dataset,
    lambdas,
    cfg: TrainConfig,
    *,
    hash_bits: int = 18,
    pretrained: TaskPredictor | None = None,
    pretrain_passes: int | None = None,
) -> list[ParetoRow]:
    """Train one model per lam off a shared pretrained predictor.

    Rows come back in the given lam order. Each training copies the
    pretrained predictor, so sweep points are independent.
    """
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lam list must be non-empty")
    if pretrained is None:
        passes = cfg.passes if pretrain_passes is None else pretrain_passes
        pretrained = pretrain(
            train_ds,
            passes=passes,
            seed=cfg.seed,
            hash_bits=hash_bits,
            learn_rate=cfg.predictor_rate,
        )
    rows = []
    for lam in lambdas:
        point_cfg = replace(cfg, loss=replace(cfg.loss, lam=float(lam)))
        bundle = train(train_ds, pretrained, point_cfg)
        rows.append(evaluate(bundle, test_ds))
    return rows


def static_baseline(
    train_ds: Dataset,
    test_ds: Dataset,
    ks,
    *,
    passes: int = 2,
    hash_bits: int = 18,
    learn_rate: float = 0.5,
    seed: int = 0,
    loss: LossConfig | None = None,
) -> list[ParetoRow]:
    """Fixed first-k readers: per k, a fresh predictor trained on first-k
    views of all training examples, evaluated with forced first-k acquisition."""
    rows = []
    for k_parts in ks:
        if not 1 <= k_parts <= train_ds.n:
            raise ValueError(f"k={k_parts} out of range [1, {train_ds.n}]")
        sampler = _first_k_sampler(k_parts)
        predictor = pretrain(
            train_ds,
            subset_sampler=sampler,
            passes=passes,
            seed=seed,
            hash_bits=hash_bits,
            learn_rate=learn_rate,
        )
        rows.append(evaluate_static(predictor, test_ds, k_parts, loss))
    return rows


def _first_k_sampler(k_parts: int):
    def sampler(rng, n):
        return range(k_parts)

    return sampler


def pareto_csv_header(n: int, k: int) -> list[str]:
    return (
        ["kind", "param", "avg_fraction_parts", "accuracy", "macro_f1", "mean_loss"]
        + [f"hist_{i}" for i in range(n)]
        + [f"class_{c}_avg_parts" for c in range(k)]
    )


def write_pareto_csv(rows: list[ParetoRow], path, n: int, k: int) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(pareto_csv_header(n, k))
        for row in rows:
            writer.writerow(
                [
                    row.kind,
                    repr(float(row.param)),
                    repr(row.avg_fraction_parts),
                    repr(row.accuracy),
                    repr(row.macro_f1),
                    repr(row.mean_loss),
                ]
                + [int(v) for v in row.part_histogram]
                + [repr(float(v)) for v in row.per_class_avg_parts]
            )


def write_audit_csv(report: RegretAuditReport, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(RegretAuditReport.FIELDS))
        writer.writerow(
            [
                repr(v) if isinstance(v, float) else v
                for v in report.csv_values()
            ]
        )
