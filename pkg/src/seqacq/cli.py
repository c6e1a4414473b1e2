"""Command-line front end: gen, pretrain, train, eval, sweep, baseline, audit."""

from __future__ import annotations

import argparse
import sys

from .core import LossConfig
from .data import SyntheticConfig, generate_splits, load_jsonl, save_jsonl
from .engine import TrainConfig, load_bundle, save_bundle, train
from .metrics import evaluate
from .oracle import regret_audit
from .predictor import load_predictor, pretrain, save_predictor
from .sweep import static_baseline, sweep_lambda, write_audit_csv, write_pareto_csv

_LOSS_KINDS = {"zero-one": "zero_one", "log-loss": "log_loss"}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--hash-bits", type=int, default=18)


def _add_train_opts(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--passes", type=int, default=2)
    parser.add_argument("--fine-tune-start-pass", type=int, default=None)
    parser.add_argument("--quadratic", choices=["on", "off"], default="on")
    parser.add_argument("--loss", choices=sorted(_LOSS_KINDS), default="zero-one")
    parser.add_argument("--predictor-rate", type=float, default=0.5)
    parser.add_argument("--policy-rate", type=float, default=0.5)


def _train_config(args, lam: float) -> TrainConfig:
    start = args.fine_tune_start_pass
    if start is None:
        start = max(args.passes, 1) if args.passes < 2 else 2
    return TrainConfig(
        loss=LossConfig(lam=lam, task_loss_kind=_LOSS_KINDS[args.loss]),
        passes=args.passes,
        fine_tune_start_pass=start,
        predictor_rate=args.predictor_rate,
        policy_rate=args.policy_rate,
        quadratic=args.quadratic == "on",
        seed=args.seed,
    )


def _cmd_gen(args) -> int:
    cfg = SyntheticConfig(
        classes=args.classes,
        parts=args.parts,
        train_size=args.train_size,
        test_size=args.test_size,
        hard_fraction=args.hard_fraction,
        noise_tokens=args.noise_tokens,
        hash_bits=args.hash_bits,
        seed=args.seed,
    )
    train_ds, test_ds = generate_splits(cfg)
    save_jsonl(train_ds, args.train_out)
    save_jsonl(test_ds, args.test_out)
    print(f"wrote {len(train_ds.instances)} train -> {args.train_out}")
    print(f"wrote {len(test_ds.instances)} test -> {args.test_out}")
    return 0


def _cmd_pretrain(args) -> int:
    dataset = load_jsonl(args.data)
    model = pretrain(
        dataset,
        passes=args.passes,
        seed=args.seed,
        hash_bits=args.hash_bits,
        learn_rate=args.learn_rate,
    )
    save_predictor(model, args.model)
    print(f"pretrained predictor (k={model.k}, n={model.n}) -> {args.model}")
    return 0


def _cmd_train(args) -> int:
    if not args.lam:
        raise ValueError("train needs exactly one --lambda")
    if len(args.lam) != 1:
        raise ValueError("train takes a single --lambda; use sweep for several")
    dataset = load_jsonl(args.data)
    if args.pretrained:
        predictor = load_predictor(args.pretrained)
    else:
        predictor = pretrain(
            dataset,
            passes=args.pretrain_passes or args.passes,
            seed=args.seed,
            hash_bits=args.hash_bits,
            learn_rate=args.predictor_rate,
        )
    cfg = _train_config(args, args.lam[0])
    bundle = train(dataset, predictor, cfg)
    save_bundle(bundle, args.model)
    print(f"trained bundle (lam={cfg.loss.lam}) -> {args.model}")
    return 0


def _cmd_eval(args) -> int:
    bundle = load_bundle(args.model)
    dataset = load_jsonl(args.test, k=bundle.predictor.k)
    row = evaluate(bundle, dataset)
    write_pareto_csv([row], args.out, bundle.predictor.n, bundle.predictor.k)
    print(
        f"lam={row.param} fraction={row.avg_fraction_parts:.3f} "
        f"acc={row.accuracy:.3f} macro_f1={row.macro_f1:.3f} -> {args.out}"
    )
    return 0


def _cmd_sweep(args) -> int:
    if not args.lam:
        raise ValueError("sweep needs at least one --lambda")
    train_ds = load_jsonl(args.data)
    test_ds = load_jsonl(args.test, k=train_ds.k)
    cfg = _train_config(args, args.lam[0])
    rows = sweep_lambda(train_ds, test_ds, args.lam, cfg, hash_bits=args.hash_bits)
    write_pareto_csv(rows, args.out, train_ds.n, train_ds.k)
    print(f"{len(rows)} sweep rows -> {args.out}")
    return 0


def _cmd_baseline(args) -> int:
    if not args.k:
        raise ValueError("baseline needs at least one --k")
    train_ds = load_jsonl(args.data)
    test_ds = load_jsonl(args.test, k=train_ds.k)
    rows = static_baseline(
        train_ds,
        test_ds,
        args.k,
        passes=args.passes,
        hash_bits=args.hash_bits,
        learn_rate=args.learn_rate,
        seed=args.seed,
    )
    write_pareto_csv(rows, args.out, train_ds.n, train_ds.k)
    print(f"{len(rows)} baseline rows -> {args.out}")
    return 0


def _cmd_audit(args) -> int:
    bundle = load_bundle(args.model)
    dataset = load_jsonl(args.test, k=bundle.predictor.k)
    report = regret_audit(dataset.instances, bundle, slack=args.slack, max_n=args.max_n)
    print(report.to_text())
    if args.out:
        write_audit_csv(report, args.out)
        print(f"audit row -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqacq",
        description="Budgeted sequential information acquisition: train, evaluate, audit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset as JSONL")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--parts", type=int, default=10)
    p.add_argument("--train-size", type=int, default=4000)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--hard-fraction", type=float, default=0.2)
    p.add_argument("--noise-tokens", type=int, default=3)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("pretrain", help="pretrain a task predictor on random subsets")
    p.add_argument("--data", required=True)
    p.add_argument("--passes", type=int, default=2)
    p.add_argument("--learn-rate", type=float, default=0.5)
    p.add_argument("--model", required=True, help="output predictor path (.npz)")
    _add_common(p)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("train", help="jointly train predictor and policy at one lambda")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, action="append")
    p.add_argument("--pretrained", help="predictor path; pretrains in place when omitted")
    p.add_argument("--pretrain-passes", type=int, default=None)
    p.add_argument("--model", required=True, help="output bundle path (.npz)")
    _add_train_opts(p)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained bundle on a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="train and evaluate a row per lambda")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--lambda", dest="lam", type=float, action="append")
    p.add_argument("--out", required=True)
    _add_train_opts(p)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("baseline", help="static first-k baselines")
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=int, action="append")
    p.add_argument("--passes", type=int, default=2)
    p.add_argument("--learn-rate", type=float, default=0.5)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("audit", help="regret-bound audit of a bundle on small instances")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--slack", type=float, default=0.01)
    p.add_argument("--max-n", type=int, default=12)
    p.add_argument("--out", help="optional audit CSV path")
    p.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
