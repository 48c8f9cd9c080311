"""Command-line surface: one executable, seven subcommands.

    jw gen-data            write a rotated two-moons dataset CSV
    jw train               fit a model on a dataset CSV, save checkpoint
    jw eval-wdist          metrics record for a checkpoint on a dataset
    jw verify-bounds       run the inequality certification suite
    jw explain             per-feature relevance for one input row
    jw export-embeddings   learned representation as CSV
    jw fine-tune           one labeled-only epoch with domain reweighting

Every run writes a `<output>.config.json` sidecar holding the fully
resolved configuration, so results stay reproducible from their
artifacts alone. Exit codes: 0 success, 1 rejected input (contract or
file errors), 2 internal failure. The env var JW_THREADS caps BLAS
thread pools for the duration of the command.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import replace

from .bounds import BoundSuiteConfig, run_bound_suite
from .distributions import DatasetSplit, gen_two_moons_domains, load_csv, \
    write_dataset_csv
from .errors import ContractError
from .explain import default_gamma_schedule, lrp_gamma
from .trainer import (
    EVAL_MAX_POINTS,
    TrainConfig,
    evaluate,
    export_embeddings,
    fine_tune,
    load_checkpoint,
    save_checkpoint,
    train,
)

METRICS_SCHEMA = ("epoch", "loss_c_P", "loss_c_Q", "loss_d", "acc_P",
                  "acc_Q", "w_dist")


# ---------------------------------------------------------------------------
# plumbing


def _thread_cap():
    """Context manager honoring JW_THREADS, a no-op when unset."""
    raw = os.environ.get("JW_THREADS")
    if raw is None:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ContractError(f"JW_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ContractError(f"JW_THREADS must be >= 1, got {n}")
    try:
        import threadpoolctl
    except ImportError:
        # still export the conventional knobs for any child processes
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        return contextlib.nullcontext()
    return threadpoolctl.threadpool_limits(limits=n)


def _write_sidecar(out_path, command: str, resolved: dict,
                   extra: dict | None = None):
    payload = {"command": command, **(extra or {}), "resolved": resolved}
    side = f"{out_path}.config.json"
    with open(side, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolved_args(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _load_pair(path, n_classes: int) -> tuple[DatasetSplit, DatasetSplit]:
    return (load_csv(path, n_classes, domain="P"),
            load_csv(path, n_classes, domain="Q"))


def _train_config(args) -> TrainConfig:
    config = TrainConfig.from_file(args.config) if args.config \
        else TrainConfig()
    overrides = {}
    for flag, key in (("critic", "critic_kind"), ("epochs", "epochs"),
                      ("seed", "seed"), ("w_critic", "w_critic"),
                      ("batch_size", "batch_size"), ("lr", "lr"),
                      ("label_scale", "label_scale")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return replace(config, **overrides) if overrides else config


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args) -> int:
    if args.kind != "two-moons":
        raise ContractError(f"unknown dataset kind {args.kind!r}")
    beta = args.beta if args.beta is not None else args.alpha
    p, q = gen_two_moons_domains(args.n, args.rotation, args.noise,
                                 args.alpha, beta, args.seed)
    write_dataset_csv(args.out, [p, q])
    _write_sidecar(args.out, "gen-data", {**_resolved_args(args),
                                          "beta": beta})
    print(f"wrote {p.n + q.n} rows ({p.n} per domain) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _train_config(args)
    data_p, data_q = _load_pair(args.data, config.n_classes)
    model, critic, log = train(config, data_p, data_q)
    save_checkpoint(model, critic, args.out)
    log.to_jsonl(args.log)
    _write_sidecar(args.out, "train",
                   {**_resolved_args(args), "train_config": config.to_dict()})
    final = log.last
    print(f"trained {config.epochs} epochs: "
          f"w_dist={final.w_dist:.6f} acc_P={final.acc_P} "
          f"acc_Q={final.acc_Q}")
    print(f"checkpoint: {args.out}  metrics: {args.log}")
    return 0


def _cmd_eval_wdist(args) -> int:
    model, critic = load_checkpoint(args.model)
    data_p, data_q = _load_pair(args.data, model.n_classes)
    metrics = evaluate(model, critic, data_p, data_q,
                       label_scale=args.label_scale,
                       max_points=args.max_points)
    record = {"epoch": -1, "loss_c_P": None, "loss_c_Q": None,
              "loss_d": None, "acc_P": metrics.acc_P,
              "acc_Q": metrics.acc_Q, "w_dist": metrics.w_dist}
    assert tuple(record) == METRICS_SCHEMA
    with open(args.out, "w") as fh:
        json.dump(record, fh)
        fh.write("\n")
    _write_sidecar(args.out, "eval-wdist", _resolved_args(args))
    print(json.dumps(record))
    return 0


def _cmd_verify_bounds(args) -> int:
    config = BoundSuiteConfig(count=args.count, seed=args.seed)
    reports, summary = run_bound_suite(config)
    with open(args.out, "w") as fh:
        json.dump([r.to_json_dict() for r in reports], fh, indent=2)
        fh.write("\n")
    _write_sidecar(args.out, "verify-bounds", _resolved_args(args))

    print(f"{'bound':<14}{'n':>6}{'pass rate':>12}{'min slack':>14}")
    for bound_id, row in summary["bounds"].items():
        rate = "-" if row["pass_rate"] is None else f"{row['pass_rate']:.3f}"
        slack = "-" if row["min_slack"] is None \
            else f"{row['min_slack']:.3e}"
        print(f"{bound_id:<14}{row['instances']:>6}{rate:>12}{slack:>14}")
    verdict = "all bounds passed" if summary["all_pass"] \
        else "FAILURES PRESENT"
    print(f"{verdict} ({summary['total_instances']} instances) "
          f"-> {args.out}")
    return 0


def _cmd_explain(args) -> int:
    model, _ = load_checkpoint(args.model)
    data = load_csv(args.data, model.n_classes, domain=args.domain)
    if not 0 <= args.row < data.n:
        raise ContractError(
            f"row {args.row} outside dataset of {data.n} rows")
    x = data.features[args.row]
    if args.target is not None:
        target = args.target
    else:
        target = int(model.predict_labels(x.reshape(1, -1))[0])
    n_layers = len(model.feature_net.layers) \
        + len(model.classifier_net.layers)
    if args.gamma is not None:
        schedule = [args.gamma] * n_layers
    else:
        schedule = list(default_gamma_schedule(n_layers))
    rmap = lrp_gamma(model, x, target, gamma=schedule)
    with open(args.out, "w") as fh:
        fh.write("feature_index,relevance\n")
        for i, r in enumerate(rmap.input_relevance):
            fh.write(f"{i},{float(r)!r}\n")
    _write_sidecar(args.out, "explain", _resolved_args(args),
                   extra={"gamma_schedule": schedule,
                          "target_class": target})
    print(f"relevance for row {args.row} (class {target}) -> {args.out}")
    return 0


def _cmd_export_embeddings(args) -> int:
    model, _ = load_checkpoint(args.model)
    splits = []
    for domain in ("P", "Q"):
        try:
            splits.append(load_csv(args.data, model.n_classes,
                                   domain=domain))
        except ContractError:
            continue
    if not splits:
        raise ContractError(
            f"{args.data}: no P or Q domain rows to embed")
    export_embeddings(model, splits, args.out)
    n = sum(s.n for s in splits)
    _write_sidecar(args.out, "export-embeddings", _resolved_args(args))
    print(f"wrote {n} embeddings ({model.d_z} dims) to {args.out}")
    return 0


def _cmd_fine_tune(args) -> int:
    model, critic = load_checkpoint(args.model)
    config = _train_config(args)
    data_p, data_q = _load_pair(args.data, model.n_classes)
    weights = None
    if args.weights is not None:
        parts = args.weights.split(",")
        if len(parts) != 2:
            raise ContractError(
                f"--weights takes 'wP,wQ', got {args.weights!r}")
        weights = (float(parts[0]), float(parts[1]))
    tuned = fine_tune(model, config, data_p, data_q, domain_weights=weights)
    # the critic is untouched by label-only tuning; carried through as-is
    save_checkpoint(tuned, critic, args.out)
    _write_sidecar(args.out, "fine-tune",
                   {**_resolved_args(args), "train_config": config.to_dict()})
    print(f"fine-tuned checkpoint -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jw",
        description="Domain-invariant representation learning with an "
                    "exact transport oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    p.add_argument("--kind", default="two-moons",
                   help="dataset family (two-moons)")
    p.add_argument("--rotation", type=float, default=35.0,
                   help="domain Q rotation in degrees")
    p.add_argument("--n", type=int, default=2000,
                   help="points per domain")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="labeled fraction for domain P")
    p.add_argument("--beta", type=float, default=None,
                   help="labeled fraction for domain Q (default: alpha)")
    p.add_argument("--noise", type=float, default=0.1,
                   help="gaussian noise stdev")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="two_moons.csv")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train on a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV with P and Q")
    p.add_argument("--config", default=None,
                   help="TrainConfig JSON or TOML file")
    p.add_argument("--critic",
                   choices=["class_dependent", "joint", "marginal", "none"],
                   default=None, help="domain critic kind (ablation switch)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--w-critic", dest="w_critic", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--label-scale", dest="label_scale", type=float,
                   default=None)
    p.add_argument("--out", default="model.json", help="checkpoint path")
    p.add_argument("--log", default="metrics.jsonl",
                   help="per-epoch metrics JSONL path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval-wdist",
                       help="metrics record for a checkpoint on a dataset")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True)
    p.add_argument("--label-scale", dest="label_scale", type=float,
                   default=1.0)
    p.add_argument("--max-points", dest="max_points", type=int,
                   default=EVAL_MAX_POINTS,
                   help="per-domain subsample cap for the exact distance")
    p.add_argument("--out", default="metrics.json")
    p.set_defaults(func=_cmd_eval_wdist)

    p = sub.add_parser("verify-bounds",
                       help="certify every proved inequality on random "
                            "instances")
    p.add_argument("--count", type=int, default=500,
                   help="instances per bound (theorem families capped "
                        "at 200)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bound_reports.json")
    p.set_defaults(func=_cmd_verify_bounds)

    p = sub.add_parser("explain",
                       help="per-feature relevance for one dataset row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--domain", choices=["P", "Q"], default="P")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--target", type=int, default=None,
                   help="class to attribute (default: model's prediction)")
    p.add_argument("--gamma", type=float, default=None,
                   help="uniform gamma (default: 0.25 on the early half "
                        "of the layers, 0 after)")
    p.add_argument("--out", default="relevance.csv")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("export-embeddings",
                       help="learned representation for every row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="embeddings.csv")
    p.set_defaults(func=_cmd_export_embeddings)

    p = sub.add_parser("fine-tune",
                       help="one labeled-only epoch, reweighted toward "
                            "the weaker domain")
    p.add_argument("--model", required=True, help="checkpoint to start from")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--weights", default=None,
                   help="explicit 'wP,wQ' domain weights (default: 0.75 "
                        "on the worse domain)")
    p.add_argument("--out", default="finetuned.json")
    p.set_defaults(func=_cmd_fine_tune)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors; bad flags are
        # rejected input, not internal failure
        return 0 if exc.code == 0 else 1
    try:
        with _thread_cap():
            return args.func(args)
    except (ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the contract demands a code
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
