"""F1 scoring, per-fold aggregation, and result/curve file writers.

Binary scores use class 1 as positive; multiclass uses unweighted macro
averaging (recorded in every results file). Reports are on the percent
scale, mean to two decimals with the population std in parentheses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def confusion_counts(y_true, y_pred, num_classes: int) -> np.ndarray:
    """C x C count matrix, rows = true class, columns = predicted."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch {y_true.shape} vs {y_pred.shape}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return counts


def f1_score(y_true, y_pred, average: str = "binary_pos1", num_classes=None) -> float:
    """F1 = 2PR/(P+R); a class with P+R = 0 contributes 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch {y_true.shape} vs {y_pred.shape}")
    if num_classes is None:
        num_classes = int(max(y_true.max(), y_pred.max())) + 1
    counts = confusion_counts(y_true, y_pred, num_classes)
    if average == "binary_pos1":
        return _class_f1(counts, 1)
    if average == "macro":
        return float(np.mean([_class_f1(counts, c) for c in range(num_classes)]))
    raise ValueError(f"unknown average {average!r}")


def _class_f1(counts: np.ndarray, cls: int) -> float:
    tp = counts[cls, cls]
    fp = counts[:, cls].sum() - tp
    fn = counts[cls, :].sum() - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


@dataclass
class FoldScores:
    per_fold: list
    mean: float
    std: float  # population


def aggregate_folds(per_fold) -> FoldScores:
    if len(per_fold) == 0:
        raise ValueError("need at least one fold score")
    arr = np.asarray(per_fold, dtype=np.float64)
    return FoldScores(per_fold=[float(v) for v in arr], mean=float(arr.mean()), std=float(arr.std()))


def format_score(mean: float, std: float) -> str:
    """Percent scale, e.g. 0.5790 +- 0.117 -> '57.90 (11.7)'."""
    return f"{100 * mean:.2f} ({100 * std:.1f})"


def write_results_json(path, payload: dict) -> Path:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline.

    Timing data is deliberately kept out of this file so identical configs
    produce byte-identical results; wall times go to timings.json.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def pretrain_curve_rows(losses_by_fold):
    """(a) per-epoch loss rows (fold, epoch, loss) and (b) cross-fold
    mean/std band rows (epoch, mean, std)."""
    rows = []
    for fold, losses in sorted(losses_by_fold.items()):
        for epoch, loss in enumerate(losses, start=1):
            rows.append((fold, epoch, float(loss)))
    band = []
    if losses_by_fold:
        lengths = {len(l) for l in losses_by_fold.values()}
        for epoch in range(1, min(lengths) + 1):
            vals = np.array([losses_by_fold[f][epoch - 1] for f in sorted(losses_by_fold)])
            band.append((epoch, float(vals.mean()), float(vals.std())))
    return rows, band


def summary_table(rows, model_kinds, saved_models=None, external_baseline=None) -> str:
    """Text table shaped like the published comparison: one row per case,
    one column per model, optional external-baseline column, and the
    saved best pretrained model's pruned percentage per dataset."""
    by_dataset = {}
    for r in rows:
        by_dataset.setdefault(r["dataset"], {}).setdefault(r["case"], {})[r["model"]] = r
    lines = []
    ext_name = (external_baseline or {}).get("name", "external")
    header = ["dataset", "case"] + list(model_kinds) + ([ext_name] if external_baseline else []) + ["% weights pruned"]
    lines.append(" | ".join(f"{h:>20}" for h in header))
    lines.append("-" * len(lines[0]))
    for dataset in sorted(by_dataset):
        cases = by_dataset[dataset]
        saved = (saved_models or {}).get(dataset)
        for case in sorted(cases, key=_case_order):
            cells = [dataset, case]
            for kind in model_kinds:
                r = cases[case].get(kind)
                cells.append(format_score(r["mean_f1"], r["std_f1"]) if r else "-")
            if external_baseline:
                score = external_baseline.get("scores", {}).get(dataset)
                cells.append(f"{score[0]:.2f} ({score[1]:.1f})" if score else "-")
            cells.append(f"{saved['sparsity_pct']:.2f}" if saved else "-")
            lines.append(" | ".join(f"{c:>20}" for c in cells))
    return "\n".join(lines)


_CASE_ORDER = {c: i for i, c in enumerate(
    ("baseline", "lowest_loss", "at_perturbation", "after_perturbation", "dropout_only"))}


def _case_order(case: str) -> int:
    return _CASE_ORDER.get(case, 99)
