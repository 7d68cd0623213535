"""Shared-encoder two-head joint mouse+human training and human fine-tuning."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .metrics import MetricsReport, aggregate_runs, compute_metrics
from .preprocess import apply_scaler, fit_scaler
from .sampling import stratified_holdout, stratified_kfold, smote_oversample
from .schema import ALIGNED4, Dataset, harmonize_dataset, sequence_tensor
from .seqnet import (
    ModelConfig,
    TrainConfig,
    SeqNetError,
    adam_step,
    batch_loss_and_grads,
    class_weights_for,
    init_adam_state,
    init_head,
    init_params,
    predict,
    train,
)

ENCODER_PREFIXES = ("fwd.", "bwd.", "attn.")
DEFAULT_ALPHA = 0.3
FINETUNE_LR_FACTOR = 0.1


class TransferError(ValueError):
    pass


def is_encoder_key(k: str) -> bool:
    return k.startswith(ENCODER_PREFIXES)


@dataclass
class DualModel:
    """Shared encoder plus species heads: 'head.*' = human, 'aux_head.*' = mouse."""

    params: dict
    cfg: ModelConfig          # human-side config (n_classes = human K)
    aux_n_classes: int
    alpha: float

    def encoder_params(self) -> dict:
        return {k: v for k, v in self.params.items() if is_encoder_key(k)}

    def human_params(self) -> dict:
        return {k: v for k, v in self.params.items()
                if is_encoder_key(k) or k.startswith("head")}


def init_dual_params(cfg: ModelConfig, aux_n_classes: int, seed: int = 0) -> dict:
    """Encoder + human head drawn exactly as init_params, mouse head after."""
    params = init_params(cfg, seed=seed)
    rng = np.random.default_rng([seed, 0xA0C])
    params.update(init_head(cfg, rng, prefix="aux_head", n_classes=aux_n_classes))
    return params


def joint_train(mouse_X, mouse_y, human_X, human_y, human_Xval, human_yval,
                cfg: ModelConfig, tcfg: TrainConfig, alpha: float = DEFAULT_ALPHA,
                aux_n_classes: int | None = None,
                mouse_class_counts=None, human_class_counts=None) -> DualModel:
    """Mixed-batch joint training: L = L_human + alpha * L_mouse.

    Each epoch interleaves the two species' mini-batches by a seeded schedule
    proportional to the remaining batch counts. Mouse batches update encoder
    + mouse head only; human batches update encoder + human head only. Early
    stopping monitors human validation macro-F1. With no mouse batches the
    loop is bit-identical to seqnet.train on the human data.
    """
    human_X = np.asarray(human_X, dtype=np.float64)
    human_y = np.asarray(human_y, dtype=np.int64)
    mouse_X = np.asarray(mouse_X, dtype=np.float64)
    mouse_y = np.asarray(mouse_y, dtype=np.int64)
    if len(human_y) == 0 or len(np.asarray(human_yval)) == 0:
        raise TransferError("human train/val partitions must be nonempty")
    if mouse_X.size and mouse_X.shape[2] != human_X.shape[2]:
        raise TransferError("mouse and human feature widths differ (schema mismatch)")
    if aux_n_classes is None:
        aux_n_classes = int(mouse_y.max()) + 1 if len(mouse_y) else cfg.n_classes

    w_human = class_weights_for(
        tcfg.loss,
        np.bincount(human_y, minlength=cfg.n_classes)
        if human_class_counts is None else human_class_counts, tcfg)
    w_mouse = class_weights_for(
        tcfg.loss,
        np.bincount(mouse_y, minlength=aux_n_classes)
        if mouse_class_counts is None else mouse_class_counts, tcfg)

    params = init_dual_params(cfg, aux_n_classes, seed=tcfg.seed)
    state = init_adam_state(params)
    rng = np.random.default_rng(tcfg.seed)
    aux_cfg = replace(cfg, n_classes=aux_n_classes)

    def val_f1(p):
        y_hat = predict(p, cfg, human_Xval)
        return compute_metrics(human_yval, y_hat, cfg.n_classes).macro_f1

    best_f1 = -np.inf
    best = {k: v.copy() for k, v in params.items()}
    stall = 0
    n_h, n_m = len(human_y), len(mouse_y)
    history = []
    for epoch in range(1, tcfg.max_epochs + 1):
        perm_h = rng.permutation(n_h)
        h_batches = [perm_h[s:s + tcfg.batch] for s in range(0, n_h, tcfg.batch)]
        m_batches = []
        if n_m:
            perm_m = rng.permutation(n_m)
            m_batches = [perm_m[s:s + tcfg.batch] for s in range(0, n_m, tcfg.batch)]
        hi = mi = 0
        losses = []
        while hi < len(h_batches) or mi < len(m_batches):
            rem_h = len(h_batches) - hi
            rem_m = len(m_batches) - mi
            if rem_m == 0:
                take_human = True
            elif rem_h == 0:
                take_human = False
            else:
                take_human = rng.uniform() < rem_h / (rem_h + rem_m)
            if take_human:
                b = h_batches[hi]; hi += 1
                L, grads = batch_loss_and_grads(params, cfg, human_X[b], human_y[b],
                                                tcfg, w_human, head_prefix="head")
                losses.append(L)
            else:
                b = m_batches[mi]; mi += 1
                L, grads = batch_loss_and_grads(params, aux_cfg, mouse_X[b], mouse_y[b],
                                                tcfg, w_mouse, head_prefix="aux_head")
                grads = {k: alpha * g for k, g in grads.items()}
                losses.append(alpha * L)
            adam_step(params, grads, state, tcfg)
        f1 = val_f1(params)
        history.append((epoch, float(np.mean(losses)), f1))
        if f1 > best_f1:
            best_f1 = f1
            best = {k: v.copy() for k, v in params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= tcfg.patience:
                break
    return DualModel(params=best, cfg=cfg, aux_n_classes=aux_n_classes, alpha=alpha)


def finetune_human(dual: DualModel, human_X, human_y, human_Xval, human_yval,
                   tcfg: TrainConfig, lr_factor: float = FINETUNE_LR_FACTOR,
                   human_class_counts=None):
    """Copy encoder + human head from the joint model, continue on human only.

    Uses a reduced learning rate and keeps the best snapshot including the
    copied initialization itself (epoch-0 evaluation).
    """
    init = dual.human_params()
    ft_cfg = replace(tcfg, lr=tcfg.lr * lr_factor)
    best, history = train(human_X, human_y, human_Xval, human_yval, dual.cfg,
                          ft_cfg, params=init, class_counts=human_class_counts,
                          eval_initial=True)
    return best, history


def _inner_split(y, seed, val_frac=0.25):
    """Stratified train/val split inside the 4 training folds."""
    plan = stratified_holdout(y, ratios=(1.0 - val_frac, val_frac, 0.0), seed=seed)
    return plan.indices("train"), plan.indices("val")


def transfer_protocol(mouse_ds: Dataset, human_ds: Dataset, cfg: ModelConfig,
                      tcfg: TrainConfig, k: int = 5, n_seeds: int = 1,
                      alpha: float = DEFAULT_ALPHA, smote: bool | None = None):
    """Paired comparison: human-only baseline vs joint train + fine-tune.

    Both arms share identical fold partitions and seeds. Mouse labels are
    harmonized to Aligned4. Returns (rows, per_run) where rows mirror the
    two-arm comparison table with mean +/- std of macro-F1 and accuracy.
    """
    mouse_ds = harmonize_dataset(mouse_ds)
    if human_ds.label_space != ALIGNED4:
        raise TransferError("human dataset must use the Aligned4 label space")
    use_smote = tcfg.smote if smote is None else smote
    # mouse rows are all auxiliary training data: within-species whole-set scaler
    mouse_scaler = fit_scaler(mouse_ds, np.arange(mouse_ds.n_cells))
    Xm = sequence_tensor(apply_scaler(mouse_scaler, mouse_ds))
    yh = human_ds.y
    baseline_reports, transfer_reports = [], []
    per_run = []
    for seed_i in range(n_seeds):
        seed = tcfg.seed + seed_i
        folds = stratified_kfold(yh, k=k, seed=seed)
        for fold in range(k):
            test_idx = folds.indices(fold)
            pool_idx = np.setdiff1d(np.arange(len(yh)), test_idx)
            tr_rel, va_rel = _inner_split(yh[pool_idx], seed=seed)
            tr_idx, va_idx = pool_idx[tr_rel], pool_idx[va_rel]
            run_tcfg = replace(tcfg, seed=seed)
            # human normalization statistics come from this fold's train rows only
            scaler = fit_scaler(human_ds, tr_idx)
            Xh = sequence_tensor(apply_scaler(scaler, human_ds))
            Xtr, ytr = Xh[tr_idx], yh[tr_idx]
            counts = np.bincount(ytr, minlength=cfg.n_classes)
            if use_smote:
                flat = Xtr.sum(axis=1)  # family blocks are disjoint
                flat_aug, ytr_aug = smote_oversample(flat, ytr, seed=seed)
                Xtr_use = expand_blocks(flat_aug, human_ds.schema)
                ytr_use = ytr_aug
            else:
                Xtr_use, ytr_use = Xtr, ytr

            base_params, _ = train(Xtr_use, ytr_use, Xh[va_idx], yh[va_idx],
                                   cfg, run_tcfg, class_counts=counts)
            yb = predict(base_params, cfg, Xh[test_idx])
            rb = compute_metrics(yh[test_idx], yb, cfg.n_classes)
            baseline_reports.append(rb)

            dual = joint_train(Xm, mouse_ds.y, Xtr_use, ytr_use,
                               Xh[va_idx], yh[va_idx], cfg, run_tcfg, alpha=alpha,
                               human_class_counts=counts)
            ft_params, _ = finetune_human(dual, Xtr_use, ytr_use,
                                          Xh[va_idx], yh[va_idx], run_tcfg,
                                          human_class_counts=counts)
            yt = predict(ft_params, cfg, Xh[test_idx])
            rt = compute_metrics(yh[test_idx], yt, cfg.n_classes)
            transfer_reports.append(rt)
            per_run.append({"seed": seed, "fold": fold,
                            "baseline_macro_f1": rb.macro_f1,
                            "transfer_macro_f1": rt.macro_f1,
                            "baseline_accuracy": rb.accuracy,
                            "transfer_accuracy": rt.accuracy})
    agg_b = aggregate_runs(baseline_reports)
    agg_t = aggregate_runs(transfer_reports)
    rows = [
        {"model": "Baseline BiLSTM",
         "macro_f1": agg_b.formatted("macro_f1"), "accuracy": agg_b.formatted("accuracy"),
         "macro_f1_mean": agg_b.mean["macro_f1"], "accuracy_mean": agg_b.mean["accuracy"],
         "macro_f1_std": agg_b.std["macro_f1"], "accuracy_std": agg_b.std["accuracy"]},
        {"model": "Dual pretrained transfer learning",
         "macro_f1": agg_t.formatted("macro_f1"), "accuracy": agg_t.formatted("accuracy"),
         "macro_f1_mean": agg_t.mean["macro_f1"], "accuracy_mean": agg_t.mean["accuracy"],
         "macro_f1_std": agg_t.std["macro_f1"], "accuracy_std": agg_t.std["accuracy"]},
    ]
    return rows, per_run


def expand_blocks(X_flat, schema):
    """Expand flat (N, W) features into (N, 12, W) block-masked sequences."""
    X_flat = np.asarray(X_flat, dtype=np.float64)
    n, w = X_flat.shape
    out = np.zeros((n, len(schema.families), w))
    for t in range(len(schema.families)):
        sl = schema.block_slice(t)
        out[:, t, sl] = X_flat[:, sl]
    return out
