"""CSV ingestion, label encoding, fold-wise standardization, stratified
5-fold splits, and the dataset manifest.

Standardization statistics are always fit on training-fold rows only, so
nothing about a test fold leaks into the transform applied to it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass
class TabularDataset:
    name: str
    X: np.ndarray  # (n, d) float64
    y: np.ndarray  # (n,) int64 labels 0..C-1
    label_names: list  # index -> original label string
    feature_names: list

    @property
    def num_classes(self) -> int:
        return len(self.label_names)


@dataclass
class StandardizerStats:
    mean: np.ndarray
    std: np.ndarray  # population std; constant features replaced by 1


@dataclass
class FoldSplit:
    fold_count: int
    test_indices: list  # per-fold sorted index arrays
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        test = set(self.test_indices[fold].tolist())
        n = sum(len(t) for t in self.test_indices)
        return np.array([i for i in range(n) if i not in test], dtype=np.int64)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _split_line(line: str, delimiter: str):
    if delimiter == ",":
        return [t.strip() for t in line.split(",")]
    return line.split()


def load_csv(path, label_column=None) -> tuple:
    """Parse a delimited text file into (X, raw_labels, feature_names).

    Delimiter is auto-detected (comma vs whitespace); a header is assumed
    iff every token of the first line is non-numeric. label_column is a
    header name, or None for the last column.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    delimiter = "," if "," in lines[0] else "whitespace"
    first = _split_line(lines[0], delimiter)
    has_header = all(not _is_number(tok) for tok in first)
    if label_column is not None and not has_header:
        raise DataError(f"{path}: label column {label_column!r} named but file has no header")
    header = first if has_header else [f"f{i}" for i in range(len(first) - 1)] + ["label"]
    rows = lines[1:] if has_header else lines
    if not rows:
        raise DataError(f"{path}: header but no data rows")
    ncol = len(first)
    if label_column is None:
        label_idx = ncol - 1
    else:
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_idx]

    X = np.empty((len(rows), ncol - 1), dtype=np.float64)
    labels = []
    for r, line in enumerate(rows):
        toks = _split_line(line, delimiter)
        if len(toks) != ncol:
            raise DataError(f"{path}: row {r} has {len(toks)} cells, expected {ncol}")
        if any(t == "" for t in toks):
            raise DataError(f"{path}: row {r} has a missing cell")
        c = 0
        for i, tok in enumerate(toks):
            if i == label_idx:
                labels.append(tok)
                continue
            try:
                X[r, c] = float(tok)
            except ValueError:
                raise DataError(f"{path}: row {r}, column {header[i]!r}: non-numeric cell {tok!r}") from None
            c += 1
    if not np.isfinite(X).all():
        bad = int(np.argwhere(~np.isfinite(X))[0, 0])
        raise DataError(f"{path}: row {bad} has a non-finite feature value")
    return X, labels, feature_names


def encode_labels(raw_labels):
    """Distinct labels sorted lexicographically -> 0..C-1."""
    names = sorted(set(raw_labels))
    if len(names) < 2:
        raise DataError(f"need at least 2 classes, found {len(names)}")
    mapping = {name: i for i, name in enumerate(names)}
    y = np.array([mapping[l] for l in raw_labels], dtype=np.int64)
    return y, mapping


def load_dataset(path, name: str, label_column=None) -> TabularDataset:
    X, raw, feature_names = load_csv(path, label_column)
    y, mapping = encode_labels(raw)
    label_names = sorted(mapping, key=mapping.get)
    return TabularDataset(name=name, X=X, y=y, label_names=label_names, feature_names=feature_names)


def fit_standardizer(X: np.ndarray, train_indices) -> StandardizerStats:
    if len(train_indices) == 0:
        raise ValueError("train_indices must be nonempty")
    rows = X[np.asarray(train_indices)]
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population (ddof=0)
    std = np.where(std < 1e-12, 1.0, std)
    return StandardizerStats(mean=mean, std=std)


def apply_standardizer(stats: StandardizerStats, X: np.ndarray) -> np.ndarray:
    return (X - stats.mean) / stats.std


def stratified_kfold(y: np.ndarray, k: int = 5, seed: int = 0) -> FoldSplit:
    """Within each class, shuffle with the seed then deal round-robin, so
    per-fold class counts differ from n_c/k by less than one."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise DataError(f"class {cls} has {idx.size} samples, fewer than {k} folds")
        perm = rng.permutation(idx)
        for pos, sample in enumerate(perm):
            folds[pos % k].append(int(sample))
    test_indices = [np.array(sorted(f), dtype=np.int64) for f in folds]
    return FoldSplit(fold_count=k, test_indices=test_indices, seed=seed)


@dataclass
class ManifestEntry:
    name: str
    path: Path
    label_column: str | None
    task: str  # binary | multiclass


def load_manifest(path) -> list:
    """CSV manifest with header name,path,label_column,task; relative data
    paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    required = {"name", "path", "label_column", "task"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise DataError(f"manifest {path} must have columns {sorted(required)}")
    entries = []
    for row in reader:
        task = row["task"].strip()
        if task not in ("binary", "multiclass"):
            raise DataError(f"manifest {path}: unknown task {task!r} for {row['name']}")
        data_path = Path(row["path"].strip())
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        entries.append(
            ManifestEntry(
                name=row["name"].strip(),
                path=data_path,
                label_column=row["label_column"].strip() or None,
                task=task,
            )
        )
    if not entries:
        raise DataError(f"manifest {path} lists no datasets")
    return entries
