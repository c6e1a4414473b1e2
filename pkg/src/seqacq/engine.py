"""Test-time acquisition loop and joint training of predictor and policy.

Training processes one example at a time: roll in with the current
learned policy; at every visited state evaluate each allowed action by
executing it and rolling out the reference to termination; the terminal
losses minus their minimum become a cost-sensitive example that updates
the policy immediately. When the roll-in stops (and fine-tuning is
active for the pass), the predictor takes one gradient step on the
terminal partial view toward the true label. A running mean of the
policy weights after each example is returned as the final policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import (
    STOP,
    Action,
    LossConfig,
    PartedInstance,
    PartialView,
    Prediction,
    prediction_from_scores,
)
from .predictor import TaskPredictor, featurize_partial
from .reference import ReferenceContext
from .selector import CostExample, Policy, StateFeatures, featurize_state, state_dim

_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Joint-training settings.

    fine_tune_start_pass is 1-based: predictor fine-tuning is active
    during pass p iff p >= fine_tune_start_pass, so the default (2 passes,
    start at 2) fine-tunes only in the second pass.
    """

    loss: LossConfig = field(default_factory=LossConfig)
    passes: int = 2
    fine_tune_start_pass: int = 2
    predictor_rate: float = 0.5
    policy_rate: float = 0.5
    quadratic: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if not 1 <= self.fine_tune_start_pass <= self.passes:
            raise ValueError("fine_tune_start_pass must be in [1, passes]")


@dataclass
class ModelBundle:
    """Trained predictor + averaged policy + the prior and configs they assume."""

    predictor: TaskPredictor
    policy: Policy
    prior: np.ndarray
    loss: LossConfig
    train_config: TrainConfig

    def __post_init__(self) -> None:
        if self.policy.n != self.predictor.n or self.policy.k != self.predictor.k:
            raise ValueError("predictor and policy disagree on k or n")
        if len(self.prior) != self.predictor.k:
            raise ValueError("prior length must equal the class count")


@dataclass
class TrajectoryStep:
    observed_before: tuple[int, ...]
    prediction: Prediction
    features: StateFeatures
    action: Action


@dataclass
class Trajectory:
    steps: list[TrajectoryStep]
    terminal_prediction: Prediction
    terminal_view: PartialView


def _policy_action(policy, view: PartialView, sf: StateFeatures, allowed) -> Action:
    # Audit adapters that need the raw view (e.g. a wrapped reference
    # policy) expose act_on_view; ordinary policies only see features.
    if hasattr(policy, "act_on_view"):
        return policy.act_on_view(view, sf, allowed)
    return policy.act(sf, allowed)


def predict(bundle: ModelBundle, instance: PartedInstance, policy=None) -> Trajectory:
    """Acquire parts with the policy until it stops; never exceeds n+1 steps.

    When every part has been acquired the action set collapses to {STOP},
    so the loop ends on the full-view prediction at the latest.
    """
    if instance.n != bundle.predictor.n:
        raise ValueError(
            f"instance has {instance.n} parts, bundle expects {bundle.predictor.n}"
        )
    pol = bundle.policy if policy is None else policy
    deltas = bundle.predictor.part_deltas(instance)
    scores = bundle.predictor.bias.copy()
    observed: list[int] = []
    remaining = list(range(instance.n))
    steps: list[TrajectoryStep] = []
    while True:
        assert len(steps) <= instance.n, "trajectory exceeded the n+1 step bound"
        view = PartialView(instance, tuple(observed))
        pred = prediction_from_scores(scores)
        sf = featurize_state(pred, bundle.prior, view, bundle.train_config.quadratic)
        allowed = (STOP, *remaining)
        action = _policy_action(pol, view, sf, allowed)
        steps.append(TrajectoryStep(tuple(observed), pred, sf, action))
        if action == STOP:
            return Trajectory(steps=steps, terminal_prediction=pred, terminal_view=view)
        assert action in remaining, f"policy chose unavailable action {action}"
        remaining.remove(action)
        observed.append(action)
        scores += deltas[action]


def collect_deviation_costs(
    ctx: ReferenceContext, view: PartialView, features: StateFeatures
) -> CostExample:
    """Cost vector over the allowed actions at a state.

    Each action is executed and the reference rolled out to termination;
    the terminal combined losses have their minimum subtracted, so the
    best action costs exactly 0.
    """
    scores = ctx.scores_for(view)
    remaining = np.flatnonzero(
        ~np.isin(np.arange(ctx.n), np.fromiter(view.observed, dtype=np.int64, count=len(view.observed)))
    )
    allowed: tuple[Action, ...] = (STOP, *(int(i) for i in remaining))
    raw = np.empty(len(allowed), dtype=np.float64)
    raw[0] = ctx.terminal_loss(scores, len(view.observed))
    for j, i in enumerate(remaining):
        raw[j + 1] = ctx.rollout_loss(
            scores + ctx.deltas[i], len(view.observed) + 1, remaining[remaining != i]
        )
    return CostExample(features=features, allowed=allowed, costs=raw - raw.min())


def finetune_step(
    predictor: TaskPredictor, view: PartialView, label: int, rate: float | None = None
) -> None:
    """One predictor update on the terminal partial view toward the true label."""
    predictor.update(featurize_partial(view.instance, view), label, rate)


def train(
    dataset,
    predictor: TaskPredictor,
    cfg: TrainConfig,
    *,
    on_cost_example: Callable[[CostExample], None] | None = None,
    on_example_end: Callable[[int, TaskPredictor, Policy], None] | None = None,
) -> ModelBundle:
    """Joint training over the dataset; returns the bundle with the averaged policy.

    The input predictor is copied, not mutated. Deterministic: identical
    dataset, predictor and config produce a bit-identical bundle. The
    optional hooks observe every collected cost example and the live
    (predictor, policy) after each example, for verification.
    """
    if not dataset.instances:
        raise ValueError("cannot train on an empty dataset")
    if dataset.n != predictor.n or dataset.k != predictor.k:
        raise ValueError("dataset and predictor disagree on k or n")
    pred = predictor.copy()
    policy = Policy.zeros(pred.n, pred.k, cfg.quadratic)
    avg_weights = np.zeros_like(policy.weights)
    avg_bias = np.zeros_like(policy.bias)
    examples_done = 0
    prior = dataset.prior
    for pass_idx in range(1, cfg.passes + 1):
        fine_tune = pass_idx >= cfg.fine_tune_start_pass
        for inst in dataset.instances:
            ctx = ReferenceContext(inst, pred, cfg.loss)
            scores = ctx.base_scores.copy()
            observed: list[int] = []
            remaining = list(range(inst.n))
            while True:
                view = PartialView(inst, tuple(observed))
                prediction = prediction_from_scores(scores)
                sf = featurize_state(prediction, prior, view, cfg.quadratic)
                example = collect_deviation_costs(ctx, view, sf)
                if on_cost_example is not None:
                    on_cost_example(example)
                # Act before updating: the roll-in must not see this
                # state's own label-derived costs, or the visited-state
                # distribution drifts away from test-time behavior.
                action = policy.act(sf, example.allowed)
                policy.update(example, cfg.policy_rate)
                if action == STOP:
                    if fine_tune:
                        finetune_step(pred, view, inst.label, cfg.predictor_rate)
                    break
                observed.append(action)
                remaining.remove(action)
                scores += ctx.deltas[action]
            examples_done += 1
            avg_weights += (policy.weights - avg_weights) / examples_done
            avg_bias += (policy.bias - avg_bias) / examples_done
            if on_example_end is not None:
                on_example_end(examples_done, pred, policy)
    averaged = Policy(
        weights=avg_weights,
        bias=avg_bias,
        n=policy.n,
        k=policy.k,
        quadratic=policy.quadratic,
        update_count=policy.update_count,
    )
    return ModelBundle(
        predictor=pred, policy=averaged, prior=prior.copy(), loss=cfg.loss, train_config=cfg
    )


def save_bundle(bundle: ModelBundle, path) -> None:
    cfg = bundle.train_config
    meta = {
        "format_version": _FORMAT_VERSION,
        "kind": "bundle",
        "predictor": {
            "hash_bits": bundle.predictor.hash_bits,
            "k": bundle.predictor.k,
            "n": bundle.predictor.n,
            "learn_rate": bundle.predictor.learn_rate,
        },
        "policy": {
            "n": bundle.policy.n,
            "k": bundle.policy.k,
            "quadratic": bundle.policy.quadratic,
            "update_count": bundle.policy.update_count,
        },
        "loss": {"lam": bundle.loss.lam, "task_loss_kind": bundle.loss.task_loss_kind},
        "train": {
            "loss": {"lam": cfg.loss.lam, "task_loss_kind": cfg.loss.task_loss_kind},
            "passes": cfg.passes,
            "fine_tune_start_pass": cfg.fine_tune_start_pass,
            "predictor_rate": cfg.predictor_rate,
            "policy_rate": cfg.policy_rate,
            "quadratic": cfg.quadratic,
            "seed": cfg.seed,
        },
    }
    np.savez(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        predictor_weights=bundle.predictor.weights,
        predictor_bias=bundle.predictor.bias,
        policy_weights=bundle.policy.weights,
        policy_bias=bundle.policy.bias,
        prior=bundle.prior,
    )


def load_bundle(path) -> ModelBundle:
    from .predictor import _load_meta

    with np.load(path, allow_pickle=False) as data:
        meta = _load_meta(data, "bundle")
        pmeta, polmeta = meta["predictor"], meta["policy"]
        tmeta = meta["train"]
        predictor = TaskPredictor(
            weights=data["predictor_weights"],
            bias=data["predictor_bias"],
            hash_bits=int(pmeta["hash_bits"]),
            k=int(pmeta["k"]),
            n=int(pmeta["n"]),
            learn_rate=float(pmeta["learn_rate"]),
        )
        policy = Policy(
            weights=data["policy_weights"],
            bias=data["policy_bias"],
            n=int(polmeta["n"]),
            k=int(polmeta["k"]),
            quadratic=bool(polmeta["quadratic"]),
            update_count=int(polmeta["update_count"]),
        )
        loss = LossConfig(lam=float(meta["loss"]["lam"]), task_loss_kind=meta["loss"]["task_loss_kind"])
        train_cfg = TrainConfig(
            loss=LossConfig(
                lam=float(tmeta["loss"]["lam"]), task_loss_kind=tmeta["loss"]["task_loss_kind"]
            ),
            passes=int(tmeta["passes"]),
            fine_tune_start_pass=int(tmeta["fine_tune_start_pass"]),
            predictor_rate=float(tmeta["predictor_rate"]),
            policy_rate=float(tmeta["policy_rate"]),
            quadratic=bool(tmeta["quadratic"]),
            seed=int(tmeta["seed"]),
        )
        return ModelBundle(
            predictor=predictor, policy=policy, prior=data["prior"], loss=loss, train_config=train_cfg
        )


def bundle_for(
    predictor: TaskPredictor,
    policy: Policy,
    prior: np.ndarray,
    loss: LossConfig,
    quadratic: bool = True,
) -> ModelBundle:
    """Assemble a bundle around externally built parts (tests, baselines)."""
    cfg = TrainConfig(loss=loss, quadratic=quadratic)
    return ModelBundle(
        predictor=predictor, policy=policy, prior=np.asarray(prior, dtype=np.float64), loss=loss, train_config=cfg
    )
