"""Experiment harness: the case x model x fold protocol, tau sweeps, and
the long pruning-trend run.

One run executes, per dataset and model, up to three training regimes per
fold (plain, perturbed, dropout), selects the per-case checkpoints from
those records, finetunes autoencoder encoders (the basic DNN's cases are
evaluated directly from its supervised record), scores the held-out fold,
and writes results JSON, curve CSVs, and the best pretrained model.

All randomness derives from the config seed: fold f uses seed+f, and each
(model, phase, purpose) gets its own stream, so reruns are byte-identical
and a case's result never depends on which other cases were requested.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation, store
from .data import (
    ManifestEntry,
    TabularDataset,
    apply_standardizer,
    fit_standardizer,
    load_dataset,
    load_manifest,
    stratified_kfold,
)
from .errors import ConfigError, DataError, NumericError
from .models import (
    CASES,
    MODEL_KINDS,
    ModelSpec,
    Network,
    TrainConfig,
    build_model,
    encoder_of,
    finetune,
    predict,
    pretrain,
    pretrain_stacked,
    select_checkpoint,
    stack_encoders,
    train_network,
)
from .nn import AdamConfig
from .perturb import PerturbConfig, mask_zero_fraction, sparsity

_MODEL_CODE = {kind: i for i, kind in enumerate(MODEL_KINDS)}
_PHASE_PRETRAIN, _PHASE_FINETUNE = 0, 1
_INIT, _SHUFFLE, _DROPOUT = 0, 1, 2

PERTURB_CASES = ("lowest_loss", "at_perturbation", "after_perturbation")


@dataclass
class ExperimentConfig:
    manifest: Path
    out_dir: Path
    datasets: list = field(default_factory=list)  # empty -> every manifest entry
    models: list = field(default_factory=lambda: list(MODEL_KINDS))
    cases: list = field(default_factory=lambda: list(CASES))
    tau: float = 5.0
    interval_epochs: int = 30
    epochs_pretrain: int = 100
    epochs_finetune: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    dropout_rate: float = 0.2
    reg_kind: str = "none"  # applies to the plain (baseline-case) training
    reg_lambda: float = 0.0
    perturb_enabled: bool = True
    cumulative: bool = True
    combine_dropout_perturb: bool = False
    folds: int = 5
    seed: int = 0
    baseline_scores: Path | None = None

    def validate(self):
        if not self.models:
            raise ConfigError("no models requested")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {kind!r}; choices: {', '.join(MODEL_KINDS)}")
        if not self.cases:
            raise ConfigError("no cases requested")
        for case in self.cases:
            if case not in CASES:
                raise ConfigError(f"unknown case {case!r}; choices: {', '.join(CASES)}")
        if not 0 <= self.tau < 50:
            raise ConfigError(f"tau must be in [0, 50), got {self.tau}")
        if self.interval_epochs <= 10:
            raise ConfigError(f"interval_epochs must be > 10, got {self.interval_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs_pretrain < 0 or self.epochs_finetune < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.folds < 2:
            raise ConfigError(f"need at least 2 folds, got {self.folds}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.reg_kind not in ("none", "L1", "L2"):
            raise ConfigError(f"unknown regularizer {self.reg_kind!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        for case in ("at_perturbation", "after_perturbation"):
            if case in self.cases and not self.perturb_enabled:
                raise ConfigError(f"case {case!r} requires perturbation to be enabled")
        if "at_perturbation" in self.cases and self.epochs_pretrain < 2 * self.interval_epochs:
            raise ConfigError(
                "at_perturbation needs two events: "
                f"epochs_pretrain={self.epochs_pretrain} < 2*interval={2 * self.interval_epochs}"
            )
        if "dropout_only" in self.cases and self.dropout_rate == 0:
            raise ConfigError("dropout_only case requires dropout_rate > 0")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["manifest"] = str(self.manifest)
        d["out_dir"] = str(self.out_dir)
        d["baseline_scores"] = None if self.baseline_scores is None else str(self.baseline_scores)
        return d


def _rng(cfg: ExperimentConfig, fold: int, model_kind: str, *codes) -> np.random.Generator:
    return np.random.default_rng([cfg.seed + fold, _MODEL_CODE[model_kind], *codes])


def _train_cfg(cfg: ExperimentConfig, *, dropout: float, perturb_on: bool, reg: bool = False) -> TrainConfig:
    return TrainConfig(
        epochs_pretrain=cfg.epochs_pretrain,
        epochs_finetune=cfg.epochs_finetune,
        batch_size=cfg.batch_size,
        adam=AdamConfig(learning_rate=cfg.learning_rate),
        dropout_rate=dropout,
        reg_kind=cfg.reg_kind if reg else "none",
        reg_lambda=cfg.reg_lambda if reg else 0.0,
        perturb=PerturbConfig(
            tau=cfg.tau,
            interval_epochs=cfg.interval_epochs,
            enabled=perturb_on,
            cumulative=cfg.cumulative,
        ),
        seed=cfg.seed,
    )


def _regimes_needed(cfg: ExperimentConfig) -> set:
    needed = set()
    if "baseline" in cfg.cases:
        needed.add("plain")
    if any(c in cfg.cases for c in PERTURB_CASES):
        needed.add("perturb" if cfg.perturb_enabled else "plain")
    if "dropout_only" in cfg.cases:
        needed.add("dropout")
    return needed


def _case_regime(cfg: ExperimentConfig, case: str) -> str:
    if case == "baseline":
        return "plain"
    if case == "dropout_only":
        return "dropout"
    return "perturb" if cfg.perturb_enabled else "plain"


def _targets_for(y: np.ndarray, num_classes: int) -> np.ndarray:
    if num_classes == 2:
        return y.astype(np.float64).reshape(-1, 1)
    T = np.zeros((y.size, num_classes))
    T[np.arange(y.size), y] = 1.0
    return T


class _FoldOutcome:
    def __init__(self):
        self.case_f1 = {}
        self.case_sparsity = {}
        self.case_snapshot = {}  # full pretrained/trained model per case
        self.pretrain_losses = {}  # (regime, block) -> losses
        self.events = {}  # (regime, block) -> list of PerturbEvent
        self.finetune_losses = {}  # case -> losses
        self.final_event_pct = None


def _run_fold(cfg: ExperimentConfig, ds: TabularDataset, entry: ManifestEntry, split, fold: int, model_kind: str) -> _FoldOutcome:
    out = _FoldOutcome()
    train_idx = split.train_indices(fold)
    test_idx = split.test_indices[fold]
    stats = fit_standardizer(ds.X, train_idx)
    Xtr = apply_standardizer(stats, ds.X[train_idx])
    Xte = apply_standardizer(stats, ds.X[test_idx])
    ytr, yte = ds.y[train_idx], ds.y[test_idx]
    spec = ModelSpec(kind=model_kind, input_dim=ds.X.shape[1], num_classes=ds.num_classes)
    average = "binary_pos1" if entry.task == "binary" else "macro"

    regime_records = {}
    for regime in sorted(_regimes_needed(cfg)):
        dropout = cfg.dropout_rate if (regime == "dropout" or (regime == "perturb" and cfg.combine_dropout_perturb)) else 0.0
        tcfg = _train_cfg(cfg, dropout=dropout, perturb_on=(regime == "perturb"), reg=(regime == "plain"))
        init_rng = _rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _INIT)
        model = build_model(spec, init_rng)
        if model_kind == "basic_dnn":
            record = train_network(
                model, Xtr, _targets_for(ytr, ds.num_classes),
                "bce" if ds.num_classes == 2 else "ce", tcfg,
                epochs=cfg.epochs_pretrain,
                shuffle_rng=_rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _SHUFFLE),
                dropout_rng=_rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _DROPOUT),
            )
            regime_records[regime] = record
            out.pretrain_losses[(regime, 0)] = record.losses
            if record.events:
                out.events[(regime, 0)] = record.events
        elif model_kind == "basic_dae":
            record = pretrain(
                model, Xtr, tcfg,
                shuffle_rng=_rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _SHUFFLE),
                dropout_rng=_rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _DROPOUT),
            )
            regime_records[regime] = record
            out.pretrain_losses[(regime, 0)] = record.losses
            if record.events:
                out.events[(regime, 0)] = record.events
        else:  # stacked_dae
            records = pretrain_stacked(
                model, Xtr, tcfg,
                rng_factory=lambda block, purpose: _rng(
                    cfg, fold, model_kind, _PHASE_PRETRAIN, block,
                    _SHUFFLE if purpose == "shuffle" else _DROPOUT,
                ),
            )
            regime_records[regime] = records
            for bi, rec in enumerate(records):
                out.pretrain_losses[(regime, bi)] = rec.losses
                if rec.events:
                    out.events[(regime, bi)] = rec.events

    if "perturb" in regime_records:
        recs = regime_records["perturb"]
        if model_kind == "stacked_dae":
            finals = [rec.checkpoints["final"] for rec in recs]
            out.final_event_pct = 100.0 * mask_zero_fraction([l for s in finals for l in s.layers])
        elif recs.events:
            out.final_event_pct = 100.0 * recs.events[-1].cumulative_zero_fraction

    for case in cfg.cases:
        record = regime_records[_case_regime(cfg, case)]
        if model_kind == "stacked_dae":
            snaps = [select_checkpoint(rec, case) for rec in record]
            full = _flatten_stacked(snaps)
            encoder = stack_encoders(snaps)
        else:
            full = select_checkpoint(record, case)
            encoder = encoder_of(full)
        out.case_sparsity[case] = sparsity(full.layers)
        out.case_snapshot[case] = full
        if model_kind == "basic_dnn":
            clf = full  # trained end-to-end; no finetuning phase
        else:
            clf, ft_record = finetune(
                encoder, Xtr, ytr, ds.num_classes,
                _train_cfg(cfg, dropout=0.0, perturb_on=False),
                head_rng=_rng(cfg, fold, model_kind, _PHASE_FINETUNE, _INIT),
                shuffle_rng=_rng(cfg, fold, model_kind, _PHASE_FINETUNE, _SHUFFLE),
            )
            out.finetune_losses[case] = ft_record.losses
        y_pred, _ = predict(clf, Xte)
        out.case_f1[case] = evaluation.f1_score(yte, y_pred, average=average, num_classes=ds.num_classes)
    return out


def _flatten_stacked(block_snaps) -> Network:
    """Canonical stacked layout for storage/accounting: the three encoder
    layers first (finetune-ready), then each block's decoder in order."""
    encoders = [s.layers[0].copy() for s in block_snaps]
    decoders = [s.layers[1].copy() for s in block_snaps]
    return Network(kind="stacked_dae", layers=encoders + decoders, encoder_len=3, dropout_layers=(0, 1, 2))


@dataclass
class RunResult:
    rows: list
    saved_models: dict
    failures: dict
    out_dir: Path
    summary: str


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    cfg.validate()
    entries = _select_entries(cfg)
    external = _load_baseline_scores(cfg.baseline_scores) if cfg.baseline_scores else None
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    saved_models = {}
    failures = {}
    timings = {}
    curve_pretrain, curve_band, curve_finetune, curve_events, curve_sparsity = [], [], [], [], []

    for entry in entries:
        t0 = time.perf_counter()
        try:
            ds = _load_entry(entry)
            split = stratified_kfold(ds.y, cfg.folds, cfg.seed)
            ds_rows = []
            best_fold_snapshot = {}  # (model, case) -> (fold, snapshot)
            for model_kind in cfg.models:
                outcomes = [_run_fold(cfg, ds, entry, split, fold, model_kind) for fold in range(cfg.folds)]
                for case in cfg.cases:
                    f1s = [o.case_f1[case] for o in outcomes]
                    scores = evaluation.aggregate_folds(f1s)
                    spars = [o.case_sparsity[case] for o in outcomes]
                    final_pcts = [o.final_event_pct for o in outcomes if o.final_event_pct is not None]
                    ds_rows.append({
                        "dataset": entry.name,
                        "model": model_kind,
                        "case": case,
                        "tau": cfg.tau,
                        "interval": cfg.interval_epochs,
                        "seed": cfg.seed,
                        "n_folds": cfg.folds,
                        "f1_average": "binary_pos1" if entry.task == "binary" else "macro",
                        "per_fold_f1": scores.per_fold,
                        "mean_f1": scores.mean,
                        "std_f1": scores.std,
                        "per_fold_checkpoint_sparsity_pct": [float(s) for s in spars],
                        "sparsity_at_best": float(np.mean(spars)),
                        "final_event_pruned_pct_mean": float(np.mean(final_pcts)) if final_pcts else None,
                        "final_event_pruned_pct_std": float(np.std(final_pcts)) if final_pcts else None,
                    })
                    best_fold = int(np.argmax(f1s))
                    best_fold_snapshot[(model_kind, case)] = (best_fold, outcomes[best_fold].case_snapshot[case])
                for fold, o in enumerate(outcomes):
                    _collect_curves(entry.name, model_kind, fold, o, curve_pretrain, curve_finetune, curve_events, curve_sparsity)
                _collect_bands(entry.name, model_kind, outcomes, curve_band)
            rows.extend(ds_rows)
            # best pretraining scenario: highest mean F1, autoencoders preferred
            # (the basic DNN has no pretrained model to save), deterministic
            # tie-break on the configured model/case order
            candidates = [r for r in ds_rows if r["model"] != "basic_dnn"] or ds_rows
            best = max(
                candidates,
                key=lambda r: (r["mean_f1"], -cfg.models.index(r["model"]), -cfg.cases.index(r["case"])),
            )
            best_fold, snapshot = best_fold_snapshot[(best["model"], best["case"])]
            model_path = out_dir / "models" / f"{entry.name}.ptrb"
            info = store.save_model(snapshot, model_path, task=entry.task, seed=cfg.seed + best_fold)
            saved_models[entry.name] = {
                "path": str(model_path.relative_to(out_dir)),
                "model": best["model"],
                "case": best["case"],
                "fold": best_fold,
                "sparsity_pct": sparsity(snapshot.layers),
                "file_bytes": info.num_bytes,
            }
        except (DataError, NumericError) as exc:
            failures[entry.name] = f"{type(exc).__name__}: {exc}"
            print(f"dataset {entry.name} failed: {failures[entry.name]}", file=sys.stderr)
        timings[entry.name] = time.perf_counter() - t0

    payload = {
        "config": cfg.to_dict(),
        "external_baseline": external,
        "results": rows,
        "saved_models": saved_models,
        "failures": failures,
    }
    evaluation.write_results_json(out_dir / "results.json", payload)
    evaluation.write_results_json(out_dir / "timings.json", {"wall_time_s": {k: round(v, 3) for k, v in timings.items()}})
    _write_curves(out_dir, curve_pretrain, curve_band, curve_finetune, curve_events, curve_sparsity)
    summary = evaluation.summary_table(rows, cfg.models, saved_models, external)
    (out_dir / "summary.txt").write_text(summary + "\n")

    if failures and not rows:
        raise DataError("all datasets failed: " + "; ".join(f"{k}: {v}" for k, v in failures.items()))
    return RunResult(rows=rows, saved_models=saved_models, failures=failures, out_dir=out_dir, summary=summary)


def _select_entries(cfg: ExperimentConfig):
    entries = load_manifest(cfg.manifest)
    if not cfg.datasets:
        return entries
    by_name = {e.name: e for e in entries}
    missing = [n for n in cfg.datasets if n not in by_name]
    if missing:
        raise ConfigError(f"datasets not in manifest: {', '.join(missing)}")
    return [by_name[n] for n in cfg.datasets]


def _load_entry(entry: ManifestEntry) -> TabularDataset:
    ds = load_dataset(entry.path, entry.name, entry.label_column)
    if entry.task == "binary" and ds.num_classes != 2:
        raise DataError(f"{entry.name}: manifest says binary but {ds.num_classes} classes found")
    if entry.task == "multiclass" and ds.num_classes < 3:
        raise DataError(f"{entry.name}: manifest says multiclass but {ds.num_classes} classes found")
    return ds


def _load_baseline_scores(path) -> dict:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read baseline scores {path}: {exc}") from exc
    header = [t.strip() for t in lines[0].split(",")]
    if header != ["dataset", "f1_mean", "f1_std"]:
        raise DataError(f"{path}: expected header dataset,f1_mean,f1_std")
    scores = {}
    for ln in lines[1:]:
        name, mean, std = [t.strip() for t in ln.split(",")]
        scores[name] = (float(mean), float(std))
    return {"name": path.stem, "scores": scores}


def _collect_curves(dataset, model, fold, o: _FoldOutcome, pretrain_rows, finetune_rows, event_rows, sparsity_rows):
    for (regime, block), losses in sorted(o.pretrain_losses.items()):
        for epoch, loss in enumerate(losses, start=1):
            pretrain_rows.append((dataset, model, regime, block, fold, epoch, float(loss)))
    for case, losses in sorted(o.finetune_losses.items()):
        for epoch, loss in enumerate(losses, start=1):
            finetune_rows.append((dataset, model, case, fold, epoch, float(loss)))
    for (regime, block), events in sorted(o.events.items()):
        for ev in events:
            for li, pruned in enumerate(ev.pruned_per_layer):
                event_rows.append((dataset, model, regime, block, fold, ev.epoch, li, pruned, ev.cumulative_zero_fraction))
            sparsity_rows.append((dataset, model, regime, block, fold, ev.epoch, 100.0 * ev.cumulative_zero_fraction))


def _collect_bands(dataset, model, outcomes, band_rows):
    keys = set()
    for o in outcomes:
        keys.update(o.pretrain_losses)
    for key in sorted(keys):
        losses_by_fold = {f: o.pretrain_losses[key] for f, o in enumerate(outcomes) if key in o.pretrain_losses}
        _, band = evaluation.pretrain_curve_rows(losses_by_fold)
        regime, block = key
        for epoch, mean, std in band:
            band_rows.append((dataset, model, regime, block, epoch, mean, std))


def _write_curves(out_dir: Path, pretrain_rows, band_rows, finetune_rows, event_rows, sparsity_rows):
    curves = out_dir / "curves"
    evaluation.write_csv(
        curves / "pretrain_loss.csv",
        ("dataset", "model", "regime", "block", "fold", "epoch", "loss"), pretrain_rows)
    evaluation.write_csv(
        curves / "pretrain_loss_band.csv",
        ("dataset", "model", "regime", "block", "epoch", "mean", "std"), band_rows)
    evaluation.write_csv(
        curves / "finetune_loss.csv",
        ("dataset", "model", "case", "fold", "epoch", "loss"), finetune_rows)
    evaluation.write_csv(
        curves / "perturb_events.csv",
        ("dataset", "model", "regime", "block", "fold", "epoch", "layer_index", "pruned_this_event", "cumulative_zero_fraction"),
        event_rows)
    evaluation.write_csv(
        curves / "sparsity_curve.csv",
        ("dataset", "model", "regime", "block", "fold", "event_epoch", "cumulative_pruned_pct"), sparsity_rows)


def sweep_tau(cfg: ExperimentConfig, tau_list) -> list:
    """Per tau: lowest-loss-case F1 and the final cumulative pruned percent.

    Writes sweep_tau_<dataset>.csv with columns tau, pruned_pct_mean,
    pruned_pct_std, f1_mean, f1_std. tau=0 runs with events enabled but
    prunes nothing, matching a perturbation-disabled run bit for bit.
    """
    if not tau_list:
        raise ConfigError("tau list is empty")
    for tau in tau_list:
        if not 0 <= tau < 50:
            raise ConfigError(f"tau must be in [0, 50), got {tau}")
    out_dir = Path(cfg.out_dir)
    rows = []
    for tau in tau_list:
        sub = replace(
            cfg, tau=float(tau), cases=["lowest_loss"], perturb_enabled=True,
            out_dir=out_dir / f"tau_{_tau_tag(tau)}",
        )
        result = run_experiment(sub)
        for row in result.rows:
            rows.append({
                "dataset": row["dataset"],
                "model": row["model"],
                "tau": float(tau),
                "pruned_pct_mean": row["final_event_pruned_pct_mean"],
                "pruned_pct_std": row["final_event_pruned_pct_std"],
                "f1_mean": row["mean_f1"],
                "f1_std": row["std_f1"],
            })
    for dataset in sorted({r["dataset"] for r in rows}):
        for model in sorted({r["model"] for r in rows}):
            subset = [r for r in rows if r["dataset"] == dataset and r["model"] == model]
            if not subset:
                continue
            evaluation.write_csv(
                out_dir / f"sweep_tau_{dataset}_{model}.csv",
                ("tau", "pruned_pct_mean", "pruned_pct_std", "f1_mean", "f1_std"),
                [(r["tau"], r["pruned_pct_mean"], r["pruned_pct_std"], r["f1_mean"], r["f1_std"]) for r in subset],
            )
    return rows


def _tau_tag(tau: float) -> str:
    return f"{float(tau):g}".replace(".", "p")


def long_run_trend(cfg: ExperimentConfig, total_epochs: int = 1000) -> list:
    """Pretraining-only long run emitting the cumulative pruning curve per
    dataset/model/fold; no finetuning. Skips basic_dnn (no pretraining)."""
    cfg.validate()
    if not cfg.perturb_enabled:
        raise ConfigError("long-run trend requires perturbation enabled")
    if total_epochs < cfg.interval_epochs:
        raise ConfigError(f"total_epochs={total_epochs} yields no events at interval {cfg.interval_epochs}")
    models = [m for m in cfg.models if m != "basic_dnn"]
    if not models:
        raise ConfigError("long-run trend needs an autoencoder model")
    sub = replace(
        cfg, models=models, cases=["after_perturbation"],
        epochs_pretrain=total_epochs, epochs_finetune=0,
    )
    out_dir = Path(cfg.out_dir)
    entries = _select_entries(sub)
    rows = []
    for entry in entries:
        ds = _load_entry(entry)
        split = stratified_kfold(ds.y, sub.folds, sub.seed)
        for model_kind in models:
            for fold in range(sub.folds):
                o = _run_fold_pretrain_only(sub, ds, split, fold, model_kind)
                for (regime, block), events in sorted(o.events.items()):
                    for ev in events:
                        rows.append((entry.name, model_kind, block, fold, ev.epoch, 100.0 * ev.cumulative_zero_fraction))
    evaluation.write_csv(
        out_dir / "long_run_sparsity.csv",
        ("dataset", "model", "block", "fold", "event_epoch", "cumulative_pruned_pct"), rows)
    return rows


def _run_fold_pretrain_only(cfg: ExperimentConfig, ds: TabularDataset, split, fold: int, model_kind: str) -> _FoldOutcome:
    out = _FoldOutcome()
    train_idx = split.train_indices(fold)
    stats = fit_standardizer(ds.X, train_idx)
    Xtr = apply_standardizer(stats, ds.X[train_idx])
    spec = ModelSpec(kind=model_kind, input_dim=ds.X.shape[1], num_classes=ds.num_classes)
    tcfg = _train_cfg(cfg, dropout=0.0, perturb_on=True)
    init_rng = _rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _INIT)
    model = build_model(spec, init_rng)
    if model_kind == "basic_dae":
        record = pretrain(model, Xtr, tcfg, shuffle_rng=_rng(cfg, fold, model_kind, _PHASE_PRETRAIN, _SHUFFLE))
        out.events[("perturb", 0)] = record.events
    else:
        records = pretrain_stacked(
            model, Xtr, tcfg,
            rng_factory=lambda block, purpose: _rng(
                cfg, fold, model_kind, _PHASE_PRETRAIN, block,
                _SHUFFLE if purpose == "shuffle" else _DROPOUT,
            ),
        )
        for bi, rec in enumerate(records):
            out.events[("perturb", bi)] = rec.events
    return out
