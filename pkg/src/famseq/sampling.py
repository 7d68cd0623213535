"""Stratified hold-out / k-fold splits and train-only SMOTE oversampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAIN, VAL, TEST = "train", "val", "test"
HOLDOUT_PARTS = (TRAIN, VAL, TEST)
DEFAULT_RATIOS = (0.6, 0.2, 0.2)


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    kind: str                  # "Holdout" or "KFold"
    assignments: tuple         # per-cell partition tag (str) or fold id (int)
    seed: int
    ratios: tuple | None = None
    k: int | None = None

    def indices(self, part) -> np.ndarray:
        return np.flatnonzero(np.array([a == part for a in self.assignments]))

    def to_json(self, cell_ids=None) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.ratios is not None:
            d["ratios"] = list(self.ratios)
        if self.k is not None:
            d["k"] = self.k
        if cell_ids is not None:
            d["assignments"] = {cid: a for cid, a in zip(cell_ids, self.assignments)}
        else:
            d["assignments"] = list(self.assignments)
        return d

    def save(self, path, cell_ids=None) -> None:
        Path(path).write_text(json.dumps(self.to_json(cell_ids), indent=2) + "\n")


def _largest_remainder(n: int, ratios) -> list[int]:
    """Integer allocation of n by the given ratios, remainders largest-first."""
    exact = [n * r for r in ratios]
    base = [int(np.floor(e)) for e in exact]
    rem = n - sum(base)
    # ties broken by partition order (train first)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rem]:
        base[i] += 1
    return base


def stratified_holdout(y, ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitPlan:
    """Per-class largest-remainder split into train/val/test, seeded shuffle within class."""
    y = np.asarray(y)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be 3 values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(y), dtype=object)
    n_parts_needed = sum(1 for r in ratios if r > 0)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < n_parts_needed:
            raise SplitError(f"class {c} has only {len(idx)} members (< {n_parts_needed})")
        rng.shuffle(idx)
        counts = _largest_remainder(len(idx), ratios)
        pos = 0
        for part, cnt in zip(HOLDOUT_PARTS, counts):
            assignments[idx[pos:pos + cnt]] = part
            pos += cnt
    return SplitPlan("Holdout", tuple(assignments), seed, ratios=tuple(ratios))


def stratified_kfold(y, k: int = 5, seed: int = 0) -> SplitPlan:
    """Per-class round allocation into k folds; per-class fold counts differ by <=1."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(y), dtype=object)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise SplitError(f"class {c} has only {len(idx)} members (< k={k})")
        rng.shuffle(idx)
        # rotate the starting fold per class so extras don't all land in fold 0
        start = rng.integers(k)
        for pos, i in enumerate(idx):
            assignments[i] = int((start + pos) % k)
    return SplitPlan("KFold", tuple(assignments), seed, k=k)


def smote_oversample(X_train, y_train, k_neighbors: int = 5, seed: int = 0):
    """Balance every class up to the majority count by SMOTE interpolation.

    Each synthetic sample is x + u*(x_nn - x) with u ~ U[0,1], x a minority
    sample, x_nn one of its k nearest same-class neighbors (Euclidean,
    k capped at class_size - 1). Originals are preserved verbatim and come
    first in the output.
    """
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train)
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    rng = np.random.default_rng(seed)
    X_new, y_new = [X], [y]
    for c, cnt in zip(classes, counts):
        deficit = int(target - cnt)
        if deficit == 0:
            continue
        if cnt < 2:
            raise SplitError(f"class {c} has a single sample; SMOTE cannot interpolate")
        idx = np.flatnonzero(y == c)
        Xc = X[idx]
        k = min(k_neighbors, cnt - 1)
        # exhaustive within-class distances; desk-scale class sizes
        d2 = ((Xc[:, None, :] - Xc[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        base = rng.integers(cnt, size=deficit)
        pick = rng.integers(k, size=deficit)
        u = rng.uniform(size=deficit)
        xb = Xc[base]
        xn = Xc[nn[base, pick]]
        X_new.append(xb + u[:, None] * (xn - xb))
        y_new.append(np.full(deficit, c, dtype=y.dtype))
    return np.concatenate(X_new, axis=0), np.concatenate(y_new, axis=0)
