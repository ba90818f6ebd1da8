"""Shared fixtures: toy datasets, CSV scratch files, and the generated
benchmark stand-ins used by the acceptance suite."""

import numpy as np
import pytest

from perturbnet.synthetic import make_madelon_like, make_parkinsons_like, write_dataset_csv


def make_lowrank(n=80, d=12, rank=3, seed=0):
    """Linearly reconstructible matrix (exactly low rank, standardized)."""
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(n, rank))
    V = rng.normal(size=(rank, d))
    X = U @ V
    X = (X - X.mean(axis=0)) / np.where(X.std(axis=0) < 1e-12, 1.0, X.std(axis=0))
    return X


def make_separable_binary(n=60, d=8, seed=0, gap=4.0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([
        rng.normal(-gap / 2, 1.0, size=(half, d)),
        rng.normal(+gap / 2, 1.0, size=(n - half, d)),
    ])
    y = np.array([0] * half + [1] * (n - half), dtype=np.int64)
    perm = rng.permutation(n)
    return X[perm], y[perm]


def make_blobs_multi(n_per=20, d=6, classes=5, seed=0, gap=6.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, d)) * gap
    X = np.vstack([rng.normal(centers[c], 1.0, size=(n_per, d)) for c in range(classes)])
    y = np.repeat(np.arange(classes, dtype=np.int64), n_per)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory):
    """A manifest with one small, learnable binary dataset."""
    root = tmp_path_factory.mktemp("toy")
    X, y = make_separable_binary(n=60, d=8, seed=1)
    write_dataset_csv(root / "toy.csv", X, y)
    (root / "manifest.csv").write_text(
        "name,path,label_column,task\ntoy,toy.csv,label,binary\n")
    return root


@pytest.fixture(scope="session")
def benchmark_workspace(tmp_path_factory):
    """The madelon- and parkinsons-shaped stand-ins used by acceptance runs."""
    root = tmp_path_factory.mktemp("bench")
    Xm, ym = make_madelon_like(seed=0)
    write_dataset_csv(root / "madelon_like.csv", Xm, ym)
    Xp, yp = make_parkinsons_like(seed=0)
    write_dataset_csv(root / "parkinsons_like.csv", Xp, yp)
    (root / "manifest.csv").write_text(
        "name,path,label_column,task\n"
        "madelon_like,madelon_like.csv,label,binary\n"
        "parkinsons_like,parkinsons_like.csv,label,binary\n")
    return root
