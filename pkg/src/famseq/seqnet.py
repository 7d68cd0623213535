"""BiLSTM encoder over the 12 family steps, additive attention pooling,
softmax/ArcFace heads, imbalance-aware losses, Adam, early stopping.

All math is plain numpy float64 with hand-written reverse-mode gradients,
verified against central finite differences in the test suite.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import compute_metrics
from .schema import Dataset, N_FAMILIES, sequence_tensor

N_STEPS = N_FAMILIES
COS_CLIP = 1e-7

LOSSES = ("ce", "weighted_ce", "focal", "class_balanced_ce")
HEADS = ("softmax", "arcface")


class SeqNetError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    n_classes: int
    hidden: int = 128
    use_attention: bool = True
    attention_dim: int = 64
    head: str = "softmax"
    embed_dim: int = 128
    arcface_s: float = 30.0
    arcface_m: float = 0.2

    def __post_init__(self):
        if self.head not in HEADS:
            raise SeqNetError(f"unknown head {self.head!r}")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch: int = 64
    max_epochs: int = 50
    patience: int = 7
    loss: str = "ce"
    focal_gamma: float = 2.0
    cb_beta: float = 0.999
    smote: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise SeqNetError(f"unknown loss {self.loss!r}")
        if self.lr <= 0 or self.batch <= 0:
            raise SeqNetError("lr and batch must be positive")
        if self.patience > self.max_epochs and self.max_epochs > 0:
            raise SeqNetError("patience must not exceed max_epochs")


def _uniform(rng, fan_in, shape):
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, seed: int = 0, head_prefix: str = "head") -> dict:
    """Uniform(-1/sqrt(fan_in)) init; forget-gate bias +1, other biases 0."""
    rng = np.random.default_rng(seed)
    D, H = cfg.input_dim, cfg.hidden
    p = {}
    for d in ("fwd", "bwd"):
        p[f"{d}.W"] = _uniform(rng, D, (D, 4 * H))
        p[f"{d}.U"] = _uniform(rng, H, (H, 4 * H))
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        p[f"{d}.b"] = b
    if cfg.use_attention:
        A = cfg.attention_dim
        p["attn.W"] = _uniform(rng, 2 * H, (2 * H, A))
        p["attn.b"] = np.zeros(A)
        p["attn.v"] = _uniform(rng, A, (A,))
    p.update(init_head(cfg, rng, head_prefix))
    return p


def init_head(cfg: ModelConfig, rng, prefix: str = "head", n_classes=None) -> dict:
    K = cfg.n_classes if n_classes is None else n_classes
    H2 = 2 * cfg.hidden
    p = {}
    if cfg.head == "softmax":
        p[f"{prefix}.W"] = _uniform(rng, H2, (H2, K))
        p[f"{prefix}.b"] = np.zeros(K)
    else:
        E = cfg.embed_dim
        p[f"{prefix}_emb.W"] = _uniform(rng, H2, (H2, E))
        p[f"{prefix}_emb.b"] = np.zeros(E)
        W = rng.standard_normal((E, K))
        p[f"{prefix}_cls.W"] = W / np.linalg.norm(W, axis=0, keepdims=True)
    return p


# ---------------------------------------------------------------------------
# forward


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lstm_direction(X, W, U, b, reverse: bool):
    """Run one LSTM direction over (B, T, D); returns hidden states + caches."""
    B, T, _ = X.shape
    H = U.shape[0]
    order = range(T - 1, -1, -1) if reverse else range(T)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.zeros((B, T, H))
    cache = {}
    for t in order:
        z = X[:, t] @ W + h @ U + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache[t] = (i, f, g, o, c, tc, h)  # c, h are the previous states
        h, c = h_new, c_new
        hs[:, t] = h
    return hs, cache


def _lstm_direction_backward(X, W, U, b, hs, cache, g_hs, reverse: bool):
    """BPTT for one direction; returns grads for W, U, b."""
    B, T, D = X.shape
    H = U.shape[0]
    gW = np.zeros_like(W)
    gU = np.zeros_like(U)
    gb = np.zeros_like(b)
    dh_rec = np.zeros((B, H))
    dc = np.zeros((B, H))
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        i, f, g, o, c_prev, tc, h_prev = cache[t]
        dh = g_hs[:, t] + dh_rec
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        gW += X[:, t].T @ dz
        gU += h_prev.T @ dz
        gb += dz.sum(axis=0)
        dh_rec = dz @ U.T
        dc = dc * f
    return gW, gU, gb


def encode(params: dict, cfg: ModelConfig, X):
    """Encoder forward: BiLSTM + (attention or uniform) pooling.

    Returns (context (B,2H), attention weights (B,T), cache for backward).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1] != N_STEPS or X.shape[2] != cfg.input_dim:
        raise SeqNetError(f"expected (B, {N_STEPS}, {cfg.input_dim}), got {X.shape}")
    hs_f, cache_f = _lstm_direction(X, params["fwd.W"], params["fwd.U"], params["fwd.b"], False)
    hs_b, cache_b = _lstm_direction(X, params["bwd.W"], params["bwd.U"], params["bwd.b"], True)
    Hseq = np.concatenate([hs_f, hs_b], axis=2)     # (B, T, 2H)
    B, T, _ = Hseq.shape
    if cfg.use_attention:
        u = np.tanh(Hseq @ params["attn.W"] + params["attn.b"])
        e = u @ params["attn.v"]                    # (B, T)
        e_shift = e - e.max(axis=1, keepdims=True)
        ex = np.exp(e_shift)
        a = ex / ex.sum(axis=1, keepdims=True)
    else:
        u = None
        e = np.zeros((B, T))
        a = np.full((B, T), 1.0 / T)
    ctx = np.einsum("bt,bth->bh", a, Hseq)
    if not np.isfinite(ctx).all():
        bad = np.argwhere(~np.isfinite(Hseq))
        step = int(bad[0, 1]) if bad.size else -1
        raise SeqNetError(f"non-finite encoder state at step {step}")
    cache = {"X": X, "hs_f": hs_f, "hs_b": hs_b, "cache_f": cache_f,
             "cache_b": cache_b, "Hseq": Hseq, "u": u, "a": a, "ctx": ctx, "e": e}
    return ctx, a, cache


def encode_backward(params: dict, cfg: ModelConfig, cache, g_ctx) -> dict:
    """Backward from d(loss)/d(context) to all encoder parameter grads."""
    Hseq, a = cache["Hseq"], cache["a"]
    B, T, _ = Hseq.shape
    grads = {}
    g_H = a[:, :, None] * g_ctx[:, None, :]
    if cfg.use_attention:
        g_a = np.einsum("bh,bth->bt", g_ctx, Hseq)
        g_e = a * (g_a - (a * g_a).sum(axis=1, keepdims=True))
        u = cache["u"]
        g_u = g_e[:, :, None] * params["attn.v"]
        grads["attn.v"] = np.einsum("bta,bt->a", u, g_e)
        g_pre = g_u * (1.0 - u * u)
        grads["attn.W"] = np.einsum("bth,bta->ha", Hseq, g_pre)
        grads["attn.b"] = g_pre.sum(axis=(0, 1))
        g_H = g_H + g_pre @ params["attn.W"].T
    H = cfg.hidden
    gWf, gUf, gbf = _lstm_direction_backward(
        cache["X"], params["fwd.W"], params["fwd.U"], params["fwd.b"],
        cache["hs_f"], cache["cache_f"], g_H[:, :, :H], False)
    gWb, gUb, gbb = _lstm_direction_backward(
        cache["X"], params["bwd.W"], params["bwd.U"], params["bwd.b"],
        cache["hs_b"], cache["cache_b"], g_H[:, :, H:], True)
    grads.update({"fwd.W": gWf, "fwd.U": gUf, "fwd.b": gbf,
                  "bwd.W": gWb, "bwd.U": gUb, "bwd.b": gbb})
    return grads


def head_forward(params: dict, cfg: ModelConfig, ctx, y=None, prefix: str = "head"):
    """Head logits. For ArcFace with y given, applies the angular margin to
    the target logit (training path); without y returns s*cos (prediction)."""
    if cfg.head == "softmax":
        logits = ctx @ params[f"{prefix}.W"] + params[f"{prefix}.b"]
        return logits, {"ctx": ctx}
    emb = ctx @ params[f"{prefix}_emb.W"] + params[f"{prefix}_emb.b"]
    r = np.linalg.norm(emb, axis=1, keepdims=True)
    r = np.maximum(r, 1e-12)
    eh = emb / r
    cos = eh @ params[f"{prefix}_cls.W"]
    cache = {"ctx": ctx, "emb": emb, "r": r, "eh": eh, "cos": cos, "y": y}
    if y is None:
        return cfg.arcface_s * cos, cache
    cosc = np.clip(cos, -1.0 + COS_CLIP, 1.0 - COS_CLIP)
    idx = np.arange(len(y))
    cos_y = cosc[idx, y]
    theta_y = np.arccos(cos_y)
    logits = cfg.arcface_s * cos.copy()
    logits[idx, y] = cfg.arcface_s * np.cos(theta_y + cfg.arcface_m)
    cache["cosc"] = cosc
    return logits, cache


def head_backward(params: dict, cfg: ModelConfig, cache, g_logits, prefix: str = "head"):
    """Backward through the head; returns (param grads, g_ctx)."""
    grads = {}
    if cfg.head == "softmax":
        ctx = cache["ctx"]
        grads[f"{prefix}.W"] = ctx.T @ g_logits
        grads[f"{prefix}.b"] = g_logits.sum(axis=0)
        return grads, g_logits @ params[f"{prefix}.W"].T
    s, m = cfg.arcface_s, cfg.arcface_m
    g_cos = s * g_logits
    y = cache["y"]
    if y is not None:
        idx = np.arange(len(y))
        cos_y = cache["cosc"][idx, y]
        sin_y = np.sqrt(1.0 - cos_y ** 2)
        theta_y = np.arccos(cos_y)
        # d/dcos(theta) of cos(theta + m) = sin(theta + m) / sin(theta)
        g_cos[idx, y] = s * g_logits[idx, y] * np.sin(theta_y + m) / sin_y
    eh, r = cache["eh"], cache["r"]
    W = params[f"{prefix}_cls.W"]
    grads[f"{prefix}_cls.W"] = eh.T @ g_cos
    g_eh = g_cos @ W.T
    g_emb = (g_eh - eh * (eh * g_eh).sum(axis=1, keepdims=True)) / r
    ctx = cache["ctx"]
    grads[f"{prefix}_emb.W"] = ctx.T @ g_emb
    grads[f"{prefix}_emb.b"] = g_emb.sum(axis=0)
    return grads, g_emb @ params[f"{prefix}_emb.W"].T


# ---------------------------------------------------------------------------
# losses


def class_weights_for(loss: str, train_counts, cfg: TrainConfig) -> np.ndarray | None:
    """Per-class loss weights derived from training counts."""
    counts = np.asarray(train_counts, dtype=np.float64)
    K = len(counts)
    if loss in ("weighted_ce", "focal"):
        w = np.zeros(K)
        present = counts > 0
        w[present] = counts.sum() / (K * counts[present])
        return w
    if loss == "class_balanced_ce":
        beta = cfg.cb_beta
        w = np.zeros(K)
        present = counts > 0
        w[present] = (1.0 - beta) / (1.0 - beta ** counts[present])
        w = w * (K / w.sum())  # effective-number weights normalized to sum K
        return w
    return None


def loss_and_grad(logits, y, loss: str, class_weights=None, focal_gamma: float = 2.0):
    """Mean batch loss and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise SeqNetError("non-finite logits")
    y = np.asarray(y, dtype=np.int64)
    B, K = logits.shape
    zmax = logits.max(axis=1, keepdims=True)
    ez = np.exp(logits - zmax)
    p = ez / ez.sum(axis=1, keepdims=True)
    idx = np.arange(B)
    logp_y = (logits - zmax)[idx, y] - np.log(ez.sum(axis=1))
    w = np.ones(B) if class_weights is None else np.asarray(class_weights)[y]
    onehot = np.zeros_like(p)
    onehot[idx, y] = 1.0
    if loss in ("ce", "weighted_ce", "class_balanced_ce"):
        L = float(np.mean(-w * logp_y))
        g = (w[:, None] / B) * (p - onehot)
        return L, g
    if loss == "focal":
        q = p[idx, y]
        focal = (1.0 - q) ** focal_gamma
        L = float(np.mean(-w * focal * logp_y))
        # dL_i/dq, then chain through softmax: dq/dz_k = q (1[k=y] - p_k)
        dq = np.zeros_like(q)
        pos = q < 1.0
        dq[pos] = w[pos] * (focal_gamma * (1.0 - q[pos]) ** (focal_gamma - 1.0)
                            * logp_y[pos] - focal[pos] / q[pos])
        g = (dq * q / B)[:, None] * (onehot - p)
        return L, g
    raise SeqNetError(f"unknown loss {loss!r}")


# ---------------------------------------------------------------------------
# full passes


@dataclass(frozen=True)
class ForwardTrace:
    """Per-cell forward record: gates/states, attention, context, logits."""

    gates_fwd: dict
    gates_bwd: dict
    hidden: np.ndarray       # (T, 2H)
    scores: np.ndarray       # (T,) attention scores e
    weights: np.ndarray      # (T,) softmax attention weights
    context: np.ndarray      # (2H,)
    logits: np.ndarray       # (K,)


def forward(params: dict, cfg: ModelConfig, seq) -> ForwardTrace:
    """Forward pass for a single (12, input_dim) sequence."""
    steps = np.asarray(getattr(seq, "steps", seq), dtype=np.float64)
    ctx, a, cache = encode(params, cfg, steps[None])
    logits, _ = head_forward(params, cfg, ctx)
    gf = {t: {"i": v[0][0], "f": v[1][0], "g": v[2][0], "o": v[3][0]}
          for t, v in cache["cache_f"].items()}
    gb = {t: {"i": v[0][0], "f": v[1][0], "g": v[2][0], "o": v[3][0]}
          for t, v in cache["cache_b"].items()}
    return ForwardTrace(
        gates_fwd=gf, gates_bwd=gb, hidden=cache["Hseq"][0],
        scores=cache["e"][0], weights=a[0], context=ctx[0], logits=logits[0],
    )


def batch_loss_and_grads(params: dict, cfg: ModelConfig, X, y, tcfg: TrainConfig,
                         class_weights=None, head_prefix: str = "head"):
    """Mean loss over the batch and exact gradients for every active parameter."""
    ctx, _, cache = encode(params, cfg, X)
    train_y = y if cfg.head == "arcface" else None
    logits, hcache = head_forward(params, cfg, ctx, y=train_y, prefix=head_prefix)
    L, g_logits = loss_and_grad(logits, y, tcfg.loss, class_weights, tcfg.focal_gamma)
    grads, g_ctx = head_backward(params, cfg, hcache, g_logits, prefix=head_prefix)
    grads.update(encode_backward(params, cfg, cache, g_ctx))
    return L, grads


def predict_logits(params: dict, cfg: ModelConfig, X, head_prefix: str = "head"):
    ctx, a, _ = encode(params, cfg, X)
    logits, _ = head_forward(params, cfg, ctx, prefix=head_prefix)
    return logits, a


def predict(params: dict, cfg: ModelConfig, X, head_prefix: str = "head"):
    logits, _ = predict_logits(params, cfg, X, head_prefix)
    return np.argmax(logits, axis=1)


# ---------------------------------------------------------------------------
# Adam


def init_adam_state(params: dict) -> dict:
    return {k: {"m": np.zeros_like(v), "v": np.zeros_like(v), "t": 0}
            for k, v in params.items()}


def adam_step(params: dict, grads: dict, state: dict, tcfg: TrainConfig,
              cfg: ModelConfig | None = None) -> None:
    """Bias-corrected Adam update in place, only for keys present in grads.

    ArcFace class vectors are re-normalized to unit norm after the step.
    """
    for k, g in grads.items():
        st = state[k]
        st["t"] += 1
        st["m"] = tcfg.beta1 * st["m"] + (1 - tcfg.beta1) * g
        st["v"] = tcfg.beta2 * st["v"] + (1 - tcfg.beta2) * g * g
        mhat = st["m"] / (1 - tcfg.beta1 ** st["t"])
        vhat = st["v"] / (1 - tcfg.beta2 ** st["t"])
        params[k] = params[k] - tcfg.lr * mhat / (np.sqrt(vhat) + tcfg.eps_adam)
        if k.endswith("_cls.W"):
            params[k] = params[k] / np.linalg.norm(params[k], axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f1: float


def train(X_train, y_train, X_val, y_val, cfg: ModelConfig, tcfg: TrainConfig,
          params: dict | None = None, class_counts=None, eval_initial: bool = False):
    """Train with seeded shuffling and early stopping on validation macro-F1.

    Returns (best params snapshot, history). The snapshot is the best
    validation epoch, never a later one. class_counts (pre-SMOTE train
    counts) feed the weighted loss variants; defaults to counts of y_train.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(y_train) == 0 or len(np.asarray(y_val)) == 0:
        raise SeqNetError("train and val partitions must be nonempty")
    if class_counts is None:
        class_counts = np.bincount(y_train, minlength=cfg.n_classes)
    weights = class_weights_for(tcfg.loss, class_counts, tcfg)
    if params is None:
        params = init_params(cfg, seed=tcfg.seed)
    else:
        params = {k: v.copy() for k, v in params.items()}
    state = init_adam_state(params)
    rng = np.random.default_rng(tcfg.seed)
    history: list[EpochRecord] = []

    def val_f1(p):
        y_hat = predict(p, cfg, X_val)
        return compute_metrics(y_val, y_hat, cfg.n_classes).macro_f1

    best_f1 = -np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    if eval_initial:
        best_f1 = val_f1(params)
        history.append(EpochRecord(0, float("nan"), best_f1))
    stall = 0
    n = len(y_train)
    for epoch in range(1, tcfg.max_epochs + 1):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, tcfg.batch):
            b = perm[start:start + tcfg.batch]
            L, grads = batch_loss_and_grads(params, cfg, X_train[b], y_train[b],
                                            tcfg, weights)
            adam_step(params, grads, state, tcfg)
            losses.append(L)
        f1 = val_f1(params)
        history.append(EpochRecord(epoch, float(np.mean(losses)), f1))
        if f1 > best_f1:
            best_f1 = f1
            best_params = {k: v.copy() for k, v in params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= tcfg.patience:
                break
    return best_params, history


def extract_attention(params: dict, cfg: ModelConfig, ds_or_X, y=None):
    """Per-cell attention weights (N, 12) with true class tags."""
    if isinstance(ds_or_X, Dataset):
        X = sequence_tensor(ds_or_X)
        y = ds_or_X.y
    else:
        X = np.asarray(ds_or_X, dtype=np.float64)
        if y is None:
            raise SeqNetError("labels required when passing a raw tensor")
    _, a = predict_logits(params, cfg, X)
    return a, np.asarray(y, dtype=np.int64)


def history_to_csv(history) -> str:
    lines = ["epoch,train_loss,val_macro_f1"]
    for rec in history:
        lines.append(f"{rec.epoch},{rec.train_loss!r},{rec.val_macro_f1!r}")
    return "\n".join(lines) + "\n"


def save_params(params: dict, path) -> None:
    np.savez(path, **params)


def load_params(path) -> dict:
    with np.load(path) as z:
        return {k: z[k] for k in z.files}
