"""Config-driven experiment runner binding preprocessing, splits, models, reports."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import report as report_mod
from .forest import RFConfig, rf_fit, rf_predict
from .io import load_dataset
from .metrics import aggregate_runs, compute_metrics, summarize_attention
from .preprocess import (
    DEFAULT_MAX_MISSING_FRAC,
    DEFAULT_SKEW_THRESHOLD,
    apply_scaler,
    filter_missingness,
    fit_scaler,
    impute_median,
)
from .sampling import smote_oversample, stratified_holdout, stratified_kfold
from .schema import ALIGNED4, Dataset, LABEL_SPACES, harmonize_dataset, sequence_tensor
from .seqnet import ModelConfig, TrainConfig, extract_attention, predict, train
from .spca import DEFAULT_L1_GRID, DEFAULT_L2, spca_fit_dataset, spca_transform
from .synthgen import (
    GenSpec,
    HUMAN_COUNTS,
    MOUSE_COUNTS,
    generate,
    human_counts,
    make_class_means,
    _scaled_counts,
)
from .schema import FamilySchema, MOUSE5
from .transfer import DEFAULT_ALPHA, expand_blocks, transfer_protocol

PRESETS = (
    "rf_baseline",
    "bilstm",
    "bilstm_attn",
    "bilstm_attn_smote",
    "arcface_bilstm_attn_smote",
    "transfer_dual",
)
PROTOCOLS = ("holdout_10x", "kfold5")

NEURAL_PRESETS = {
    # preset -> (use_attention, head, loss, smote)
    "bilstm": (False, "softmax", "weighted_ce", False),
    "bilstm_attn": (True, "softmax", "weighted_ce", False),
    "bilstm_attn_smote": (True, "softmax", "ce", True),
    "arcface_bilstm_attn_smote": (True, "arcface", "ce", True),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    protocol: str
    out_dir: str
    dataset: dict | None = None          # {"path": ...} or {"genspec": {...}}
    mouse_dataset: dict | None = None    # transfer_dual only
    human_dataset: dict | None = None
    n_seeds: int = 10
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def config_from_json(d: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**d)


def genspec_from_json(d: dict) -> GenSpec:
    schema = FamilySchema.from_widths(d["schema_widths"])
    label_space = LABEL_SPACES[d.get("label_space", "Mouse5")]
    if "class_means" in d:
        means = np.asarray(d["class_means"], dtype=np.float64)
    else:
        means = make_class_means(
            schema, label_space, separation=float(d.get("separation", 4.0)),
            seed=int(d.get("means_seed", d.get("seed", 0))),
            informative_families=d.get("informative_families"),
        )
    if "class_counts" in d:
        counts = tuple(int(c) for c in d["class_counts"])
    else:
        table = MOUSE_COUNTS if d.get("proportions", "mouse") == "mouse" else HUMAN_COUNTS
        counts = _scaled_counts(table, label_space, d.get("n_total"))
    return GenSpec(
        schema=schema, label_space=label_space, class_means=means,
        sigma=float(d.get("sigma", 1.0)), class_counts=counts,
        missing_rate=float(d.get("missing_rate", 0.0)),
        seed=int(d.get("seed", 0)), species=d.get("species", "Mouse"),
    )


def _resolve_dataset(spec: dict) -> Dataset:
    if "path" in spec:
        return load_dataset(spec["path"])
    if "genspec" in spec:
        return generate(genspec_from_json(spec["genspec"]))
    raise ConfigError("dataset must provide 'path' or 'genspec'")


def validate(cfg: ExperimentConfig) -> list[str]:
    """All configuration errors, without running anything."""
    diags = []
    if cfg.preset not in PRESETS:
        diags.append(f"unknown preset {cfg.preset!r}")
    if cfg.protocol not in PROTOCOLS:
        diags.append(f"unknown protocol {cfg.protocol!r}")
    if cfg.n_seeds < 1:
        diags.append("n_seeds must be >= 1")
    if cfg.preset == "transfer_dual":
        if cfg.protocol != "kfold5":
            diags.append("transfer_dual requires protocol kfold5")
        for name, spec in (("mouse_dataset", cfg.mouse_dataset),
                           ("human_dataset", cfg.human_dataset)):
            if spec is None:
                diags.append(f"transfer_dual requires {name}")
            elif "path" in spec and not Path(spec["path"]).exists():
                diags.append(f"{name} path not found: {spec['path']}")
    else:
        if cfg.dataset is None:
            diags.append("dataset is required")
        else:
            if "path" in cfg.dataset and not Path(cfg.dataset["path"]).exists():
                diags.append(f"dataset path not found: {cfg.dataset['path']}")
            species = _dataset_species(cfg.dataset)
            if species == "Human" and cfg.protocol != "kfold5":
                diags.append("human datasets require protocol kfold5")
    for section in cfg.overrides:
        if section not in ("preprocess", "sampling", "spca", "rf", "model",
                           "train", "transfer"):
            diags.append(f"unknown overrides section {section!r}")
    return diags


def _dataset_species(spec: dict) -> str | None:
    try:
        if "genspec" in spec:
            return spec["genspec"].get("species", "Mouse")
        if "path" in spec and Path(spec["path"]).exists():
            p = Path(spec["path"])
            if p.is_dir():
                p = p / "manifest.json"
            return json.loads(p.read_text()).get("species")
    except Exception:
        return None
    return None


def resolve_defaults(cfg: ExperimentConfig) -> dict:
    """Fully materialized config (every default explicit) for the echo file."""
    ov = cfg.overrides
    resolved = cfg.to_json()
    resolved["overrides"] = {
        "preprocess": {
            "max_missing_frac": DEFAULT_MAX_MISSING_FRAC,
            "skew_threshold": DEFAULT_SKEW_THRESHOLD,
            **ov.get("preprocess", {}),
        },
        "sampling": {"k_neighbors": 5, **ov.get("sampling", {})},
        "spca": {"l1_grid": list(DEFAULT_L1_GRID), "penalty_l2": DEFAULT_L2,
                 "max_components": None, **ov.get("spca", {})},
        "rf": {**RFConfig().to_json(), **ov.get("rf", {})},
        "model": {"hidden": 128, "attention_dim": 64, "embed_dim": 128,
                  "arcface_s": 30.0, "arcface_m": 0.2, **ov.get("model", {})},
        "train": {"lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps_adam": 1e-8,
                  "batch": 64, "max_epochs": 50, "patience": 7,
                  "focal_gamma": 2.0, "cb_beta": 0.999,
                  **ov.get("train", {})},
        "transfer": {"alpha": DEFAULT_ALPHA, "finetune_lr_factor": 0.1,
                     "val_frac": 0.25, **ov.get("transfer", {})},
    }
    return resolved


def _preprocess(ds: Dataset, pcfg: dict) -> Dataset:
    ds = filter_missingness(ds, pcfg["max_missing_frac"])
    return impute_median(ds)


def _model_config(resolved: dict, input_dim: int, n_classes: int,
                  use_attention: bool, head: str) -> ModelConfig:
    m = resolved["overrides"]["model"]
    return ModelConfig(
        input_dim=input_dim, n_classes=n_classes,
        hidden=int(m["hidden"]), use_attention=use_attention,
        attention_dim=int(m["attention_dim"]), head=head,
        embed_dim=int(m["embed_dim"]), arcface_s=float(m["arcface_s"]),
        arcface_m=float(m["arcface_m"]),
    )


def _train_config(resolved: dict, loss: str, smote: bool, seed: int) -> TrainConfig:
    t = resolved["overrides"]["train"]
    return TrainConfig(
        lr=float(t["lr"]), beta1=float(t["beta1"]), beta2=float(t["beta2"]),
        eps_adam=float(t["eps_adam"]), batch=int(t["batch"]),
        max_epochs=int(t["max_epochs"]), patience=int(t["patience"]),
        loss=t.get("loss", loss), focal_gamma=float(t["focal_gamma"]),
        cb_beta=float(t["cb_beta"]), smote=smote, seed=seed,
    )


def _rf_config(resolved: dict, seed: int) -> RFConfig:
    r = resolved["overrides"]["rf"]
    return RFConfig(n_trees=int(r["n_trees"]),
                    min_samples_leaf=int(r["min_samples_leaf"]),
                    min_samples_split=int(r["min_samples_split"]),
                    max_depth=r["max_depth"], seed=seed)


def _splits_for_run(ds, protocol: str, seed: int, rf: bool):
    """Yield (train_idx, val_idx, test_idx) partitions for one seed."""
    y = ds.y
    if protocol == "holdout_10x":
        ratios = (0.8, 0.0, 0.2) if rf else (0.6, 0.2, 0.2)
        plan = stratified_holdout(y, ratios=ratios, seed=seed)
        yield plan.indices("train"), plan.indices("val"), plan.indices("test"), plan
    else:
        plan = stratified_kfold(y, k=5, seed=seed)
        for fold in range(5):
            test_idx = plan.indices(fold)
            pool = np.setdiff1d(np.arange(len(y)), test_idx)
            if rf:
                yield pool, np.array([], dtype=int), test_idx, plan
            else:
                inner = stratified_holdout(y[pool], ratios=(0.75, 0.25, 0.0), seed=seed)
                yield (pool[inner.indices("train")], pool[inner.indices("val")],
                       test_idx, plan)


def run_rf_baseline(ds: Dataset, resolved: dict):
    reports = []
    split_audit = []
    for r in range(resolved["n_seeds"]):
        seed = resolved["seed"] + r
        for tr, _va, te, plan in _splits_for_run(ds, resolved["protocol"], seed, rf=True):
            scaler = fit_scaler(ds, tr, resolved["overrides"]["preprocess"]["skew_threshold"])
            scaled = apply_scaler(scaler, ds)
            sp = resolved["overrides"]["spca"]
            model = spca_fit_dataset(scaled.take(tr), l1_grid=tuple(sp["l1_grid"]),
                                     penalty_l2=sp["penalty_l2"],
                                     max_components=sp["max_components"])
            Ztr = spca_transform(model, scaled.take(tr))
            Zte = spca_transform(model, scaled.take(te))
            forest = rf_fit(Ztr, ds.y[tr], _rf_config(resolved, seed))
            y_hat, _ = rf_predict(forest, Zte)
            reports.append(compute_metrics(ds.y[te], y_hat, ds.label_space.n_classes))
            split_audit.append({"seed": seed, **plan.to_json(ds.cell_ids)})
    return aggregate_runs(reports), None, split_audit


def run_neural(ds: Dataset, resolved: dict):
    use_attention, head, loss, smote = NEURAL_PRESETS[resolved["preset"]]
    reports = []
    attn_tables = []
    split_audit = []
    k_nn = int(resolved["overrides"]["sampling"]["k_neighbors"])
    for r in range(resolved["n_seeds"]):
        seed = resolved["seed"] + r
        for tr, va, te, plan in _splits_for_run(ds, resolved["protocol"], seed, rf=False):
            scaler = fit_scaler(ds, tr, resolved["overrides"]["preprocess"]["skew_threshold"])
            scaled = apply_scaler(scaler, ds)
            ytr = ds.y[tr]
            counts = np.bincount(ytr, minlength=ds.label_space.n_classes)
            Xflat_tr = scaled.X[tr]
            if smote:
                Xflat_tr, ytr = smote_oversample(Xflat_tr, ytr, k_neighbors=k_nn,
                                                 seed=seed)
            Xtr = expand_blocks(Xflat_tr, ds.schema)
            Xva = expand_blocks(scaled.X[va], ds.schema)
            Xte = expand_blocks(scaled.X[te], ds.schema)
            mcfg = _model_config(resolved, ds.schema.total_width,
                                 ds.label_space.n_classes, use_attention, head)
            tcfg = _train_config(resolved, loss, smote, seed)
            params, _hist = train(Xtr, ytr, Xva, ds.y[va], mcfg, tcfg,
                                  class_counts=counts)
            y_hat = predict(params, mcfg, Xte)
            reports.append(compute_metrics(ds.y[te], y_hat, ds.label_space.n_classes))
            if use_attention:
                weights, labels = extract_attention(params, mcfg, Xte, ds.y[te])
                attn_tables.append((weights, labels))
            split_audit.append({"seed": seed, **plan.to_json(ds.cell_ids)})
    summary = (summarize_attention(attn_tables, ds.label_space.classes)
               if attn_tables else None)
    return aggregate_runs(reports), summary, split_audit


def run_transfer(mouse_ds: Dataset, human_ds: Dataset, resolved: dict):
    mouse_ds = harmonize_dataset(mouse_ds)
    t = resolved["overrides"]["transfer"]
    mcfg = _model_config(resolved, mouse_ds.schema.total_width,
                         ALIGNED4.n_classes, use_attention=True, head="softmax")
    tcfg = _train_config(resolved, "weighted_ce", smote=False,
                         seed=resolved["seed"])
    rows, per_run = transfer_protocol(
        mouse_ds, human_ds, mcfg, tcfg, k=5, n_seeds=resolved["n_seeds"],
        alpha=float(t["alpha"]),
    )
    return rows, per_run


def run(cfg: ExperimentConfig) -> Path:
    """Execute the preset end-to-end and write all report files."""
    diags = validate(cfg)
    if diags:
        raise ConfigError("; ".join(diags))
    resolved = resolve_defaults(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    if cfg.preset == "transfer_dual":
        pp = resolved["overrides"]["preprocess"]
        mouse = _preprocess(_resolve_dataset(cfg.mouse_dataset), pp)
        human = _preprocess(_resolve_dataset(cfg.human_dataset), pp)
        rows, per_run = run_transfer(mouse, human, resolved)
        (out / "comparison.csv").write_text(report_mod.comparison_csv(rows))
        payload = {"rows": rows, "per_run": per_run}
        (out / "comparison.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return out

    ds = _preprocess(_resolve_dataset(cfg.dataset), resolved["overrides"]["preprocess"])
    if cfg.preset == "rf_baseline":
        aggregate, summary, split_audit = run_rf_baseline(ds, resolved)
    else:
        aggregate, summary, split_audit = run_neural(ds, resolved)
    report_mod.render_reports(aggregate, ds.label_space.classes, out,
                              attention_summary=summary,
                              extra={"preset": cfg.preset, "protocol": cfg.protocol})
    (out / "splits.json").write_text(
        json.dumps(split_audit, indent=2, sort_keys=True) + "\n")
    return out
