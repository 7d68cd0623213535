#!/usr/bin/env python3
"""Run the model variant ladder on a synthetic imbalanced mouse-like set.

Each preset is trained over the same paired seeds so per-seed differences
are directly comparable. Reports land under --out/<preset>/.
"""

import argparse
import json
from pathlib import Path

from famseq.pipeline import ExperimentConfig, run

PRESETS = ("rf_baseline", "bilstm", "bilstm_attn", "bilstm_attn_smote",
           "arcface_bilstm_attn_smote")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/variant_ladder")
    ap.add_argument("--n-total", type=int, default=1000)
    ap.add_argument("--separation", type=float, default=4.0)
    ap.add_argument("--n-seeds", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=8)
    args = ap.parse_args()

    genspec = {"schema_widths": [2] * 12, "label_space": "Mouse5",
               "separation": args.separation, "sigma": 1.0,
               "n_total": args.n_total, "seed": 21}
    overrides = {
        "model": {"hidden": 16, "attention_dim": 8, "embed_dim": 16},
        "train": {"lr": 3e-3, "batch": 32, "max_epochs": args.epochs,
                  "patience": min(5, args.epochs)},
    }
    print(f"{'preset':<28} {'macro_f1':<18} {'accuracy':<18}")
    for preset in PRESETS:
        cfg = ExperimentConfig(
            preset=preset, protocol="holdout_10x",
            out_dir=str(Path(args.out) / preset),
            dataset={"genspec": genspec},
            n_seeds=args.n_seeds, seed=args.seed, overrides=overrides)
        out = run(cfg)
        m = json.loads((out / "metrics.json").read_text())
        print(f"{preset:<28} {m['formatted']['macro_f1']:<18} "
              f"{m['formatted']['accuracy']:<18}")


if __name__ == "__main__":
    main()
