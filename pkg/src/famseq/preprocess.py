"""Missingness filtering, median imputation, log-transform, train-only z-scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .schema import Dataset

STD_EPS = 1e-8
DEFAULT_MAX_MISSING_FRAC = 0.5
DEFAULT_SKEW_THRESHOLD = 2.0


class PreprocessError(ValueError):
    pass


def filter_missingness(ds: Dataset, max_frac: float = DEFAULT_MAX_MISSING_FRAC) -> Dataset:
    """Drop rows whose missing fraction exceeds max_frac; order preserved."""
    frac = ds.missing.mean(axis=1) if ds.n_cells else np.zeros(0)
    keep = np.flatnonzero(frac <= max_frac)
    if len(keep) == ds.n_cells:
        return ds
    return ds.take(keep)


def impute_median(ds: Dataset) -> Dataset:
    """Replace missing entries by the per-column median of observed values."""
    if not ds.missing.any():
        return ds
    X = ds.X.copy()
    cols = ds.schema.column_names()
    for j in range(X.shape[1]):
        m = ds.missing[:, j]
        if not m.any():
            continue
        observed = X[~m, j]
        if observed.size == 0:
            raise PreprocessError(f"column {cols[j]!r} is fully missing; drop it upstream")
        X[m, j] = np.median(observed)
    return ds.replace(X=X, missing=np.zeros_like(ds.missing))


def sample_skewness(x: np.ndarray) -> float:
    """Adjusted Fisher-Pearson sample skewness (g1 with small-sample correction)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        return 0.0
    m = x.mean()
    d = x - m
    s2 = np.mean(d * d)
    if s2 == 0:
        return 0.0
    g1 = np.mean(d ** 3) / s2 ** 1.5
    return float(g1 * np.sqrt(n * (n - 1)) / (n - 2))


@dataclass(frozen=True)
class Scaler:
    """Column transform fitted on training rows only: optional log, then z-score."""

    means: np.ndarray
    stds: np.ndarray
    log_mask: np.ndarray
    fitted_on: str = "train"

    def to_json(self) -> dict:
        return {
            "fitted_on": self.fitted_on,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "log_mask": self.log_mask.astype(bool).tolist(),
        }

    @staticmethod
    def from_json(d: dict) -> "Scaler":
        return Scaler(
            means=np.asarray(d["means"], dtype=np.float64),
            stds=np.asarray(d["stds"], dtype=np.float64),
            log_mask=np.asarray(d["log_mask"], dtype=bool),
            fitted_on=d.get("fitted_on", "train"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def fit_scaler(ds: Dataset, train_rows, skew_threshold: float = DEFAULT_SKEW_THRESHOLD) -> Scaler:
    """Fit the per-column transform from the given training rows only."""
    train_rows = np.asarray(train_rows)
    if train_rows.size == 0:
        raise PreprocessError("train_rows is empty")
    if ds.missing[train_rows].any():
        raise PreprocessError("fit_scaler requires an imputed (mask-free) dataset")
    Xt = ds.X[train_rows]
    w = Xt.shape[1]
    log_mask = np.zeros(w, dtype=bool)
    means = np.empty(w)
    stds = np.empty(w)
    for j in range(w):
        col = Xt[:, j]
        if (col > 0).all() and sample_skewness(col) > skew_threshold:
            log_mask[j] = True
            col = np.log(col)
        means[j] = col.mean()
        stds[j] = col.std()  # population std; constant columns stay exactly 0
    return Scaler(means=means, stds=stds, log_mask=log_mask)


def apply_scaler(s: Scaler, ds: Dataset) -> Dataset:
    """x' = (f(x) - mean) / max(std, eps), f = log on log-masked columns."""
    if ds.X.shape[1] != s.means.size:
        raise PreprocessError(
            f"column count mismatch: dataset has {ds.X.shape[1]}, scaler has {s.means.size}"
        )
    X = ds.X.copy()
    if s.log_mask.any():
        block = X[:, s.log_mask]
        if (block <= 0).any():
            j = int(np.flatnonzero(s.log_mask)[np.argwhere((block <= 0).any(axis=0))[0, 0]])
            raise PreprocessError(
                f"non-positive value in log-transformed column {ds.schema.column_names()[j]!r}; "
                "train/eval distribution violation"
            )
        X[:, s.log_mask] = np.log(block)
    X = (X - s.means) / np.maximum(s.stds, STD_EPS)
    return ds.replace(X=X)
