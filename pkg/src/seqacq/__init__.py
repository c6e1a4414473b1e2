"""seqacq: budgeted sequential information acquisition.

A task predictor consumes partial inputs (observed parts plus per-part
indicators); a learned selection policy decides which part to read next
or when to stop, trading prediction quality against acquisition cost.
"""

from .core import (
    STOP,
    Action,
    LossConfig,
    PartedInstance,
    PartialView,
    Prediction,
    acquisition_cost,
    action_set,
    combined_loss,
    prediction_from_scores,
    task_loss,
)
from .data import (
    Dataset,
    SyntheticConfig,
    generate_splits,
    generate_synthetic,
    load_jsonl,
    save_jsonl,
    stable_hash,
    text_to_parts,
)
from .engine import (
    ModelBundle,
    TrainConfig,
    Trajectory,
    collect_deviation_costs,
    finetune_step,
    load_bundle,
    predict,
    save_bundle,
    train,
)
from .metrics import ParetoRow, evaluate, evaluate_static, macro_f1
from .oracle import (
    RegretAuditReport,
    ReferenceMimicPolicy,
    brute_force_optimal,
    measure_alpha,
    regret_audit,
)
from .predictor import (
    PartialFeatures,
    TaskPredictor,
    featurize_partial,
    load_predictor,
    pretrain,
    save_predictor,
)
from .reference import ReferenceContext, reference_action, rollout_reference
from .selector import (
    CostExample,
    Policy,
    StateFeatures,
    average_policies,
    featurize_state,
    load_policy,
    save_policy,
    state_dim,
)
from .sweep import static_baseline, sweep_lambda, write_audit_csv, write_pareto_csv

__version__ = "0.1.0"
