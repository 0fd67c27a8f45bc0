"""Spectrum estimation and a binary-classification harness for matrix data.

Mirrors the binarized image protocol (flattened inputs, {0, 1} labels,
label flips, MNI fit, threshold at 0.5) on whatever matrices the caller
supplies.  Train and test covariances need not share an eigenbasis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from shiftlab.errors import InvalidParameterError
from shiftlab.interpolator import DEFAULT_TOL, SVDFactor
from shiftlab.risk import MCSummary, summarize
from shiftlab.sampling import SUBSAMPLE, SeedSpec, flip_labels, sample_design
from shiftlab.spectra import Spectrum


@dataclass(frozen=True)
class MatrixDataset:
    X: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise InvalidParameterError(f"{self.name or 'dataset'}: X must be 2-d")
        if not np.all(np.isfinite(X)):
            raise InvalidParameterError(f"{self.name or 'dataset'}: non-finite entries")
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            y = np.asarray(self.labels).reshape(-1)
            if y.shape[0] != X.shape[0]:
                raise InvalidParameterError(f"{self.name}: {y.shape[0]} labels for {X.shape[0]} rows")
            if not np.all((y == 0) | (y == 1)):
                raise InvalidParameterError(f"{self.name}: labels must be 0/1")
            object.__setattr__(self, "labels", y.astype(int))

    @classmethod
    def load(cls, x_path, labels_path=None, name: str | None = None) -> "MatrixDataset":
        x_path = Path(x_path)
        X = np.loadtxt(x_path, delimiter=",", ndmin=2)
        labels = None
        if labels_path is not None:
            labels = np.loadtxt(labels_path, delimiter=",", ndmin=1).astype(int)
        return cls(X, labels, name or x_path.stem)


def covariance_spectrum(X) -> Spectrum:
    """Eigenvalues of ``X^T X / n`` in descending order (no centering)."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2:
        raise InvalidParameterError("need at least 2 rows to estimate a spectrum")
    s = np.linalg.svd(X, compute_uv=False)
    values = np.zeros(p)
    values[: s.size] = s**2 / n
    return Spectrum(values)


def synthetic_binary(spectrum: Spectrum, m: int, direction, seed: SeedSpec, name: str = "") -> MatrixDataset:
    """Gaussian rows with covariance diag(spectrum), labelled ``1{x . direction > 0}``."""
    X = sample_design(m, spectrum, seed)
    return MatrixDataset(X, (X @ np.asarray(direction, dtype=float) > 0).astype(int), name)


@dataclass(frozen=True)
class ClassificationRow:
    test_name: str
    flip_prob: float
    mean_excess_error: float
    stderr: float
    trials: int

    def as_list(self) -> list:
        return [self.test_name, self.flip_prob, self.mean_excess_error, self.stderr, self.trials]


CLASSIFY_COLUMNS = ["test_name", "flip_prob", "mean_excess_error", "stderr", "trials"]


def _balanced_subsample(labels: np.ndarray, n_train: int, seed: SeedSpec) -> np.ndarray:
    rng = seed.generator(SUBSAMPLE)
    per_class = n_train // 2
    idx = []
    for cls_ in (0, 1):
        pool = np.flatnonzero(labels == cls_)
        if pool.size < per_class:
            raise InvalidParameterError(f"only {pool.size} rows of class {cls_}, need {per_class}")
        idx.append(rng.choice(pool, per_class, replace=False))
    return np.sort(np.concatenate(idx))


def _error(theta: np.ndarray, test: MatrixDataset, shift: np.ndarray | None) -> float:
    X = test.X if shift is None else test.X - shift
    pred = (X @ theta > 0.5).astype(int)
    return float(np.mean(pred != test.labels))


def binary_experiment(
    train: MatrixDataset,
    tests: Sequence[MatrixDataset],
    flip_prob,
    trials: int,
    seed: SeedSpec,
    n_train: int | None = None,
    center: bool = False,
    tol: float = DEFAULT_TOL,
) -> list[ClassificationRow]:
    """Excess test error of the label-noise-trained MNI over the clean-trained one.

    Each trial draws a class-balanced subsample of ``n_train`` rows (all
    rows when None), flips its labels with ``flip_prob`` and fits the MNI
    to both the noisy and the clean labels on that same subsample.
    ``flip_prob`` may be a single probability or a sequence.
    """
    if train.labels is None:
        raise InvalidParameterError("training set has no labels")
    for t in tests:
        if t.labels is None:
            raise InvalidParameterError(f"test set {t.name!r} has no labels")
        if t.X.shape[1] != train.X.shape[1]:
            raise InvalidParameterError(f"test set {t.name!r} has the wrong width")
    probs = [float(flip_prob)] if np.isscalar(flip_prob) else [float(q) for q in flip_prob]
    for q in probs:
        if not 0.0 <= q <= 1.0:
            raise InvalidParameterError("flip probability must lie in [0, 1]")
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")

    mean_shift = train.X.mean(axis=0) if center else None
    Xtr_all = train.X if mean_shift is None else train.X - mean_shift

    excess = {(q, t.name): [] for q in probs for t in tests}
    for trial in range(trials):
        s = seed.child(trial)
        idx = (
            np.arange(train.X.shape[0])
            if n_train is None
            else _balanced_subsample(train.labels, n_train, s)
        )
        Xtr, ytr = Xtr_all[idx], train.labels[idx]
        f = SVDFactor.of(Xtr, tol)
        clean = f.solve(ytr.astype(float))
        clean_err = {t.name: _error(clean, t, mean_shift) for t in tests}
        for qi, q in enumerate(probs):
            noisy_labels = flip_labels(ytr, q, s.child(qi))
            noisy = f.solve(noisy_labels.astype(float))
            for t in tests:
                excess[(q, t.name)].append(_error(noisy, t, mean_shift) - clean_err[t.name])

    rows = []
    for q in probs:
        for t in tests:
            summ: MCSummary = summarize(excess[(q, t.name)])
            rows.append(ClassificationRow(t.name, q, summ.mean, summ.stderr, summ.trials))
    return rows


def write_classification_csv(rows: Sequence[ClassificationRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CLASSIFY_COLUMNS)
        for r in rows:
            w.writerow([r.test_name, repr(r.flip_prob), f"{r.mean_excess_error:.17g}", f"{r.stderr:.17g}", r.trials])
