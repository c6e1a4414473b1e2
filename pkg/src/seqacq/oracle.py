"""Brute-force enumeration and an empirical audit of the imitation regret bound.

The audit measures, on a sample of small instances, the quantities that
bound the learned policy's regret to the reference: the disagreement
rate epsilon_c on the policy's own roll-in states, the reference's
suboptimality ratio alpha (against exhaustive subset enumeration), the
largest single-part task-loss swing, and the largest reference
cost-to-go. These are estimates over the sampled states, not suprema;
the report is a mechanical sanity check, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .core import LossConfig, PartedInstance, PartialView, combined_loss, task_loss_rows
from .engine import ModelBundle
from .predictor import TaskPredictor
from .reference import ReferenceContext, reference_action, rollout_reference

DEFAULT_MAX_N = 12


def _check_guard(n: int, max_n: int) -> None:
    if n > max_n:
        raise ValueError(f"instance has {n} parts, enumeration guard is {max_n}")


def _subset_losses(
    ctx: ReferenceContext, start: PartialView
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Combined loss of every superset of the start view.

    Returns (free part ids, per-mask combined losses, per-mask sizes);
    mask bit b corresponds to free[b]. Terminal loss depends only on the
    final set (scores are linear, transitions deterministic), so order-free
    subset enumeration covers every reachable terminal state.
    """
    observed = set(start.observed)
    free = np.array([i for i in range(ctx.n) if i not in observed], dtype=np.int64)
    base = ctx.scores_for(start)
    f = len(free)
    table = np.empty((1 << f, ctx.predictor.k), dtype=np.float64)
    table[0] = base
    for mask in range(1, 1 << f):
        low = (mask & -mask).bit_length() - 1
        table[mask] = table[mask & (mask - 1)] + ctx.deltas[free[low]]
    task = task_loss_rows(table, ctx.instance.label, ctx.loss.task_loss_kind)
    sizes = np.array([bin(m).count("1") for m in range(1 << f)], dtype=np.int64)
    combined = task + ctx.loss.lam * (len(observed) + sizes) / ctx.n
    return free, combined, sizes


def brute_force_optimal(
    instance: PartedInstance,
    predictor: TaskPredictor,
    loss: LossConfig,
    start: PartialView | None = None,
    max_n: int = DEFAULT_MAX_N,
) -> tuple[float, tuple[int, ...]]:
    """Exhaustive best terminal set reachable from the start view.

    Returns the minimal combined loss and the terminal part set (ascending
    order). Ties go to the smaller set, then lexicographic order.
    """
    _check_guard(instance.n, max_n)
    view = start if start is not None else PartialView(instance)
    ctx = ReferenceContext(instance, predictor, loss)
    free, losses, sizes = _subset_losses(ctx, view)
    best_loss = losses.min()
    candidates = np.flatnonzero(losses == best_loss)
    best_key = None
    best_set: tuple[int, ...] = ()
    for mask in candidates:
        parts = tuple(sorted(set(view.observed) | {int(free[b]) for b in range(len(free)) if mask >> b & 1}))
        key = (int(sizes[mask]), parts)
        if best_key is None or key < best_key:
            best_key = key
            best_set = parts
    return float(best_loss), best_set


def measure_alpha(
    instances,
    predictor: TaskPredictor,
    loss: LossConfig,
    max_n: int = DEFAULT_MAX_N,
) -> float:
    """Worst reference-vs-optimal terminal loss ratio over reference trajectories.

    Every prefix state of each instance's reference roll-out (empty view
    through terminal) is scored: the reference's terminal loss over the
    enumerated optimum from that state. Both come from the same
    enumeration table, so the ratio is >= 1 by construction; 0/0 counts
    as 1 and a positive loss over a zero optimum as infinity.
    """
    worst = 1.0
    for inst in instances:
        _check_guard(inst.n, max_n)
        ctx = ReferenceContext(inst, predictor, loss)
        _, terminal_view = rollout_reference(ctx, PartialView(inst))
        path = terminal_view.observed
        for depth in range(len(path) + 1):
            prefix = PartialView(inst, path[:depth])
            free, losses, _ = _subset_losses(ctx, prefix)
            position = {int(p): b for b, p in enumerate(free)}
            ref_mask = 0
            for p in path[depth:]:
                ref_mask |= 1 << position[p]
            ref_loss = float(losses[ref_mask])
            opt_loss = float(losses.min())
            if opt_loss == 0.0:
                ratio = 1.0 if ref_loss == 0.0 else float("inf")
            else:
                ratio = ref_loss / opt_loss
            worst = max(worst, ratio)
    return worst


@dataclass
class RegretAuditReport:
    """Measured bound ingredients and the resulting check.

    delta_hat = epsilon_c * (delta_max_hat + per_part_cost + (1 - 1/alpha_hat) * q_star_max_hat)
    and the check is empirical_regret <= t_horizon * delta_hat + slack.
    per_part_cost is lam/n: the trade-off weight times the cost of one
    acquisition. All *_hat values are maxima or rates over the sampled
    states only.
    """

    t_horizon: int
    epsilon_c: float
    alpha_hat: float
    delta_max_hat: float
    q_star_max_hat: float
    per_part_cost: float
    delta_hat: float
    j_policy: float
    j_reference: float
    empirical_regret: float
    bound_value: float
    slack: float
    bound_satisfied: bool
    sample_size: int
    states_visited: int

    def __post_init__(self) -> None:
        if self.alpha_hat < 1.0:
            raise ValueError(f"alpha_hat must be >= 1, got {self.alpha_hat}")
        if not 0.0 <= self.epsilon_c <= 1.0:
            raise ValueError(f"epsilon_c must be in [0, 1], got {self.epsilon_c}")
        for name in ("delta_max_hat", "q_star_max_hat", "per_part_cost", "delta_hat"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    FIELDS = (
        "t_horizon",
        "epsilon_c",
        "alpha_hat",
        "delta_max_hat",
        "q_star_max_hat",
        "per_part_cost",
        "delta_hat",
        "j_policy",
        "j_reference",
        "empirical_regret",
        "bound_value",
        "slack",
        "bound_satisfied",
        "sample_size",
        "states_visited",
    )

    def to_text(self) -> str:
        lines = []
        for name in self.FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{name} {value!r}" if isinstance(value, str) else f"{name} {value}")
        return "\n".join(lines)

    def csv_values(self) -> list:
        return [getattr(self, name) for name in self.FIELDS]


def regret_audit(
    instances,
    bundle: ModelBundle,
    slack: float = 0.01,
    max_n: int = DEFAULT_MAX_N,
    policy=None,
) -> RegretAuditReport:
    """Measure the bound ingredients on a sample with a frozen bundle.

    policy overrides the bundle's policy for roll-ins (used to audit a
    wrapped reference policy against itself).
    """
    instances = list(instances)
    if not instances:
        raise ValueError("audit needs a non-empty sample")
    loss_cfg = bundle.loss
    disagreements = 0
    states = 0
    j_pi = 0.0
    j_ref = 0.0
    delta_max = 0.0
    q_max = 0.0
    n = bundle.predictor.n
    for inst in instances:
        _check_guard(inst.n, max_n)
        ctx = ReferenceContext(inst, bundle.predictor, loss_cfg)
        trajectory = engine.predict(bundle, inst, policy=policy)
        j_pi += combined_loss(
            trajectory.terminal_prediction, inst.label, trajectory.terminal_view, loss_cfg
        )
        ref_pred, ref_view = rollout_reference(ctx, PartialView(inst))
        j_ref += combined_loss(ref_pred, inst.label, ref_view, loss_cfg)
        for step in trajectory.steps:
            view = PartialView(inst, step.observed_before)
            states += 1
            if step.action != reference_action(ctx, view):
                disagreements += 1
            scores = ctx.scores_for(view)
            observed = np.fromiter(view.observed, dtype=np.int64, count=len(view.observed))
            remaining = np.setdiff1d(np.arange(inst.n), observed)
            q_max = max(q_max, ctx.rollout_loss(scores, len(observed), remaining))
            delta_max = max(delta_max, _max_edit_swing(ctx, scores, observed, remaining))
    epsilon_c = disagreements / states
    alpha_hat = measure_alpha(instances, bundle.predictor, loss_cfg, max_n)
    per_part_cost = loss_cfg.lam / n
    delta_hat = epsilon_c * (delta_max + per_part_cost + (1.0 - 1.0 / alpha_hat) * q_max)
    t_horizon = n + 1
    j_pi /= len(instances)
    j_ref /= len(instances)
    regret = j_pi - j_ref
    bound_value = t_horizon * delta_hat
    return RegretAuditReport(
        t_horizon=t_horizon,
        epsilon_c=epsilon_c,
        alpha_hat=alpha_hat,
        delta_max_hat=delta_max,
        q_star_max_hat=q_max,
        per_part_cost=per_part_cost,
        delta_hat=delta_hat,
        j_policy=j_pi,
        j_reference=j_ref,
        empirical_regret=regret,
        bound_value=bound_value,
        slack=slack,
        bound_satisfied=bool(regret <= bound_value + slack),
        sample_size=len(instances),
        states_visited=states,
    )


def _max_edit_swing(
    ctx: ReferenceContext, scores: np.ndarray, observed: np.ndarray, remaining: np.ndarray
) -> float:
    """Largest |task-loss change| over single-part insert/delete/substitute edits."""
    label = ctx.instance.label
    kind = ctx.loss.task_loss_kind
    base = ctx.task_at(scores)
    rows = []
    if remaining.size:
        rows.append(scores[None, :] + ctx.deltas[remaining])
    if observed.size:
        removed = scores[None, :] - ctx.deltas[observed]
        rows.append(removed)
        if remaining.size:
            for r in removed:
                rows.append(r[None, :] + ctx.deltas[remaining])
    if not rows:
        return 0.0
    edited = np.vstack(rows)
    return float(np.max(np.abs(task_loss_rows(edited, label, kind) - base)))


class ReferenceMimicPolicy:
    """Adapter that answers roll-in queries with the reference's action.

    Label-aware, so only meaningful inside the audit where true labels
    are available; engine.predict detects act_on_view and routes the raw
    view here instead of the featurized state.
    """

    def __init__(self, predictor: TaskPredictor, loss: LossConfig):
        self.predictor = predictor
        self.loss = loss
        self._ctx: ReferenceContext | None = None

    def act_on_view(self, view: PartialView, sf, allowed):
        if self._ctx is None or self._ctx.instance is not view.instance:
            self._ctx = ReferenceContext(view.instance, self.predictor, self.loss)
        return reference_action(self._ctx, view)
