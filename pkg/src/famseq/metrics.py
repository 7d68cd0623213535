"""Classification metrics, multi-run aggregation, attention summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schema import N_FAMILIES


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    balanced_accuracy: float
    precision: np.ndarray   # (K,)
    recall: np.ndarray      # (K,)
    f1: np.ndarray          # (K,)
    support: np.ndarray     # (K,) true-class counts
    confusion: np.ndarray   # (K, K), rows = true class

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "balanced_accuracy": self.balanced_accuracy,
            "per_class": {
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
                "support": self.support.tolist(),
            },
            "confusion": self.confusion.tolist(),
        }


def compute_metrics(y_true, y_pred, n_classes: int) -> MetricsReport:
    """Accuracy, macro-F1, balanced accuracy, per-class P/R/F1, confusion matrix.

    Zero-division convention: precision/recall are 0 when their denominator
    is 0. Classes with zero support contribute F1=0 to the macro mean only
    if they were predicted; otherwise they are excluded from it.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise MetricsError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size and (max(y_true.max(), y_pred.max()) >= n_classes
                        or min(y_true.min(), y_pred.min()) < 0):
        raise MetricsError(f"label index out of range for K={n_classes}")
    K = n_classes
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    tp = np.diag(confusion).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros(K), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(K), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(K), where=denom > 0)
    in_macro = (support > 0) | (predicted > 0)
    macro_f1 = float(f1[in_macro].mean()) if in_macro.any() else 0.0
    present = support > 0
    balanced = float(recall[present].mean()) if present.any() else 0.0
    total = confusion.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    return MetricsReport(
        accuracy=accuracy, macro_f1=macro_f1, balanced_accuracy=balanced,
        precision=precision, recall=recall, f1=f1,
        support=support, confusion=confusion,
    )


@dataclass(frozen=True)
class RunAggregate:
    reports: tuple
    mean: dict
    std: dict

    @property
    def n_runs(self) -> int:
        return len(self.reports)

    def formatted(self, metric: str) -> str:
        return f"{self.mean[metric]:.4f} ± {self.std[metric]:.4f}"

    def to_json(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "mean": self.mean,
            "std": self.std,
            "formatted": {m: self.formatted(m) for m in self.mean},
            "runs": [r.to_json() for r in self.reports],
        }


_SCALARS = ("accuracy", "macro_f1", "balanced_accuracy")


def aggregate_runs(reports) -> RunAggregate:
    """Mean and sample (n-1) std of the scalar metrics across runs."""
    reports = tuple(reports)
    if not reports:
        raise MetricsError("need at least one report")
    mean, std = {}, {}
    for m in _SCALARS:
        vals = np.array([getattr(r, m) for r in reports])
        mean[m] = float(vals.mean())
        std[m] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return RunAggregate(reports=reports, mean=mean, std=std)


@dataclass(frozen=True)
class AttentionSummary:
    class_names: tuple
    mean_weights: np.ndarray   # (K, 12); rows of absent classes are NaN
    counts: np.ndarray         # (K,) contributing sample counts over all runs
    n_runs: int

    def present(self, c: int) -> bool:
        return self.counts[c] > 0


def summarize_attention(run_tables, class_names) -> AttentionSummary:
    """Aggregate per-run attention tables into per-class mean family weights.

    Each run table is (weights: (n, 12), labels: (n,)). Run class means are
    combined across runs weighted by each run's per-class sample count.
    """
    run_tables = list(run_tables)
    if not run_tables:
        raise MetricsError("need at least one run table")
    K = len(class_names)
    acc = np.zeros((K, N_FAMILIES))
    counts = np.zeros(K, dtype=np.int64)
    for weights, labels in run_tables:
        weights = np.asarray(weights, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if weights.ndim != 2 or weights.shape[1] != N_FAMILIES:
            raise MetricsError(f"attention table must have {N_FAMILIES} columns")
        for c in range(K):
            m = labels == c
            n_c = int(m.sum())
            if n_c:
                acc[c] += n_c * weights[m].mean(axis=0)
                counts[c] += n_c
    mean_weights = np.full((K, N_FAMILIES), np.nan)
    for c in range(K):
        if counts[c]:
            row = acc[c] / counts[c]
            s = row.sum()
            if abs(s - 1.0) > 1e-9 and s > 0:
                row = row / s
            mean_weights[c] = row
    return AttentionSummary(
        class_names=tuple(class_names), mean_weights=mean_weights,
        counts=counts, n_runs=len(run_tables),
    )
