"""Command-line entry point.

Verbs: run (the case x model x fold protocol), sweep-tau, long-run, and
inspect-model. Flags mirror the config-file keys and override them; the
PERTURBNET_OUT environment variable overrides the output directory.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import build_config, parse_config_file
from .errors import ConfigError, DataError, NumericError
from .experiments import long_run_trend, run_experiment, sweep_tau
from .store import inspect_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--manifest", help="dataset manifest CSV")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--datasets", help="comma-separated dataset names (default: all in manifest)")
    parser.add_argument("--models", help="comma-separated model kinds")
    parser.add_argument("--cases", help="comma-separated experimental cases")
    parser.add_argument("--tau", type=float, help="prune threshold percent (default 5)")
    parser.add_argument("--interval-epochs", dest="interval_epochs", type=int, help="epochs between events (default 30)")
    parser.add_argument("--epochs-pretrain", dest="epochs_pretrain", type=int)
    parser.add_argument("--epochs-finetune", dest="epochs_finetune", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--dropout-rate", dest="dropout_rate", type=float)
    parser.add_argument("--reg", dest="reg_kind", choices=["none", "L1", "L2"], help="regularizer for the baseline-case training")
    parser.add_argument("--reg-lambda", dest="reg_lambda", type=float)
    parser.add_argument("--perturb-enabled", dest="perturb_enabled", choices=["true", "false"])
    parser.add_argument("--cumulative", choices=["true", "false"], help="cumulative mask accumulation (default true)")
    parser.add_argument("--combine-dropout-perturb", dest="combine_dropout_perturb", choices=["true", "false"])
    parser.add_argument("--folds", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--baseline-scores", dest="baseline_scores", help="external reference scores CSV (dataset,f1_mean,f1_std)")


def _config_from_args(args) -> "ExperimentConfig":
    file_values = parse_config_file(args.config) if args.config else {}
    override_keys = (
        "manifest", "out_dir", "datasets", "models", "cases", "tau", "interval_epochs",
        "epochs_pretrain", "epochs_finetune", "batch_size", "learning_rate", "dropout_rate",
        "reg_kind", "reg_lambda", "perturb_enabled", "cumulative", "combine_dropout_perturb",
        "folds", "seed", "baseline_scores",
    )
    overrides = {k: getattr(args, k) for k in override_keys if getattr(args, k, None) is not None}
    return build_config(file_values, overrides)


def _cmd_run(args) -> int:
    result = run_experiment(_config_from_args(args))
    print(result.summary)
    print(f"results written to {result.out_dir}")
    if result.failures:
        for name, msg in result.failures.items():
            print(f"warning: dataset {name} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def _cmd_sweep_tau(args) -> int:
    cfg = _config_from_args(args)
    taus = [float(t) for t in args.taus.split(",") if t.strip()]
    rows = sweep_tau(cfg, taus)
    for row in rows:
        print(
            f"{row['dataset']} {row['model']} tau={row['tau']:g}: "
            f"pruned {row['pruned_pct_mean']:.2f}% (std {row['pruned_pct_std']:.2f}), "
            f"F1 {100 * row['f1_mean']:.2f} ({100 * row['f1_std']:.1f})"
        )
    print(f"sweep tables written to {cfg.out_dir}")
    return EXIT_OK


def _cmd_long_run(args) -> int:
    cfg = _config_from_args(args)
    rows = long_run_trend(cfg, total_epochs=args.total_epochs)
    events = {}
    for dataset, model, block, fold, epoch, pct in rows:
        events.setdefault((dataset, model), 0)
        events[(dataset, model)] += 1
    for (dataset, model), count in sorted(events.items()):
        print(f"{dataset} {model}: {count} event rows")
    print(f"trend written to {cfg.out_dir}/long_run_sparsity.csv")
    return EXIT_OK


def _cmd_inspect_model(args) -> int:
    header = inspect_model(args.path)
    print(f"model file: {args.path}")
    for key in ("version", "kind", "task", "layer_count", "encoder_len", "seed", "file_bytes"):
        print(f"  {key}: {header[key]}")
    print(f"  sparsity_pct (stored): {header['sparsity_pct']:.4f}")
    print(f"  sparsity_pct (recomputed): {header['current_sparsity_pct']:.4f}")
    for i, (out_dim, in_dim, act) in enumerate(header["layer_dims"]):
        print(f"  layer {i}: {out_dim}x{in_dim} {act}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perturbnet", description="Prune-and-regrow pretraining experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the case x model x fold protocol")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep-tau", help="ablation over the prune threshold")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--taus", required=True, help="comma-separated tau values")
    p_sweep.set_defaults(func=_cmd_sweep_tau)

    p_long = sub.add_parser("long-run", help="long pretraining run emitting the pruning trend")
    _add_config_flags(p_long)
    p_long.add_argument("--total-epochs", dest="total_epochs", type=int, default=1000)
    p_long.set_defaults(func=_cmd_long_run)

    p_inspect = sub.add_parser("inspect-model", help="print a model file's header and sparsity")
    p_inspect.add_argument("path")
    p_inspect.set_defaults(func=_cmd_inspect_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
