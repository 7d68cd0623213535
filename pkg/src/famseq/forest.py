"""Random forest classifier with balanced_subsample class weighting, from scratch."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 600
    min_samples_leaf: int = 2
    min_samples_split: int = 2
    max_depth: int | None = None
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "min_samples_leaf": self.min_samples_leaf,
            "min_samples_split": self.min_samples_split,
            "max_depth": self.max_depth,
            "class_weight": "balanced_subsample",
            "seed": self.seed,
        }


def balanced_subsample_weights(y_boot: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-class weights w_c = n_boot / (K * count_c) for one bootstrap."""
    counts = np.bincount(y_boot, minlength=n_classes).astype(np.float64)
    w = np.zeros(n_classes)
    present = counts > 0
    w[present] = len(y_boot) / (n_classes * counts[present])
    return w


def _best_split(X, yw, counts_unweighted, feature_order, min_samples_leaf):
    """Best (feature, threshold) by weighted Gini over midpoint thresholds.

    yw is the (n, K) matrix of per-sample class weights (one-hot * weight).
    Scans features in `feature_order`; once any candidate among the first
    ceil(sqrt(C)) features yields a valid split, the remaining features are
    not examined (mtry behavior with fallback past mtry when none split).
    """
    n, K = yw.shape
    mtry = int(np.ceil(np.sqrt(X.shape[1])))
    best = None  # (score, feature, threshold)
    for rank, f in enumerate(feature_order):
        if rank >= mtry and best is not None:
            break
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        boundaries = np.flatnonzero(vs[:-1] < vs[1:])
        if boundaries.size == 0:
            continue
        left_n = boundaries + 1
        ok = (left_n >= min_samples_leaf) & (n - left_n >= min_samples_leaf)
        boundaries = boundaries[ok]
        if boundaries.size == 0:
            continue
        cw = np.cumsum(yw[order], axis=0)
        total = cw[-1]
        L = cw[boundaries]
        R = total - L
        lsum = L.sum(axis=1)
        rsum = R.sum(axis=1)
        # maximize sum_c L_c^2/lsum + R_c^2/rsum  <=>  minimize weighted Gini
        gain = (L ** 2).sum(axis=1) / lsum + (R ** 2).sum(axis=1) / rsum
        i = int(np.argmax(gain))
        score = float(gain[i])
        if best is None or score > best[0] + 1e-12:
            thr = 0.5 * (vs[boundaries[i]] + vs[boundaries[i] + 1])
            best = (score, int(f), float(thr))
    return best


def _grow(X, y, weights, n_classes, rng, cfg: RFConfig, depth: int):
    counts = np.zeros(n_classes)
    np.add.at(counts, y, weights)
    node_counts = counts.tolist()
    n = len(y)
    pure = np.count_nonzero(np.bincount(y, minlength=n_classes)) <= 1
    if (pure or n < cfg.min_samples_split
            or (cfg.max_depth is not None and depth >= cfg.max_depth)):
        return {"leaf": node_counts}
    yw = np.zeros((n, n_classes))
    yw[np.arange(n), y] = weights
    feature_order = rng.permutation(X.shape[1])
    best = _best_split(X, yw, None, feature_order, cfg.min_samples_leaf)
    if best is None:
        return {"leaf": node_counts}
    _, f, thr = best
    mask = X[:, f] <= thr
    return {
        "feature": f,
        "threshold": thr,
        "left": _grow(X[mask], y[mask], weights[mask], n_classes, rng, cfg, depth + 1),
        "right": _grow(X[~mask], y[~mask], weights[~mask], n_classes, rng, cfg, depth + 1),
    }


@dataclass(frozen=True)
class ForestModel:
    trees: tuple          # nested dict trees
    n_classes: int
    n_features: int
    config: RFConfig

    def to_json(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "config": self.config.to_json(),
            "trees": list(self.trees),
        }

    @staticmethod
    def from_json(d: dict) -> "ForestModel":
        c = d["config"]
        cfg = RFConfig(n_trees=c["n_trees"], min_samples_leaf=c["min_samples_leaf"],
                       min_samples_split=c["min_samples_split"],
                       max_depth=c["max_depth"], seed=c["seed"])
        return ForestModel(trees=tuple(d["trees"]), n_classes=d["n_classes"],
                           n_features=d["n_features"], config=cfg)


def rf_fit(X, y, config: RFConfig = RFConfig()) -> ForestModel:
    """Fit a bootstrap forest with balanced_subsample weighting and sqrt(C) mtry."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, C = X.shape
    n_classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise ForestError("need at least 2 classes to fit a forest")
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(config.seed + t)
        boot = rng.integers(n, size=n)
        Xb, yb = X[boot], y[boot]
        w_class = balanced_subsample_weights(yb, n_classes)
        trees.append(_grow(Xb, yb, w_class[yb], n_classes, rng, config, 0))
    return ForestModel(trees=tuple(trees), n_classes=n_classes, n_features=C,
                       config=config)


def _tree_proba(node, X, idx, out):
    if "leaf" in node:
        counts = np.asarray(node["leaf"], dtype=np.float64)
        out[idx] = counts / counts.sum()
        return
    mask = X[idx, node["feature"]] <= node["threshold"]
    _tree_proba(node["left"], X, idx[mask], out)
    _tree_proba(node["right"], X, idx[~mask], out)


def rf_predict(model: ForestModel, X):
    """Labels and class probabilities (mean of normalized leaf frequencies)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ForestError(
            f"feature width {X.shape[1]} != fitted width {model.n_features}"
        )
    proba = np.zeros((len(X), model.n_classes))
    buf = np.zeros_like(proba)
    idx = np.arange(len(X))
    for tree in model.trees:
        _tree_proba(tree, X, idx, buf)
        proba += buf
    proba /= len(model.trees)
    labels = np.argmax(proba, axis=1)  # argmax ties resolve to lowest class index
    return labels, proba
