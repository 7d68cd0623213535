import json

import numpy as np
import pytest

from famseq.pipeline import (
    ConfigError,
    ExperimentConfig,
    config_from_json,
    genspec_from_json,
    resolve_defaults,
    run,
    validate,
)

WIDTHS = [1] * 12

FAST_OVERRIDES = {
    "rf": {"n_trees": 5},
    "model": {"hidden": 4, "attention_dim": 2, "embed_dim": 4},
    "train": {"lr": 3e-3, "batch": 16, "max_epochs": 2, "patience": 2},
}


def mouse_genspec(n_total=80, seed=1, **kw):
    d = {"schema_widths": WIDTHS, "label_space": "Mouse5",
         "separation": 4.0, "n_total": n_total, "seed": seed}
    d.update(kw)
    return d


def base_config(tmp_path, preset="rf_baseline", protocol="holdout_10x", **kw):
    d = dict(preset=preset, protocol=protocol, out_dir=str(tmp_path / "out"),
             dataset={"genspec": mouse_genspec()}, n_seeds=1, seed=0,
             overrides=FAST_OVERRIDES)
    d.update(kw)
    return ExperimentConfig(**d)


class TestConfigParsing:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_json({"preset": "rf_baseline", "protocol": "kfold5",
                              "out_dir": "x", "bogus": 1})

    def test_round_trip(self, tmp_path):
        cfg = base_config(tmp_path)
        back = config_from_json(cfg.to_json())
        assert back == cfg


class TestGenspecParsing:
    def test_mouse_proportions_default(self):
        spec = genspec_from_json(mouse_genspec(n_total=None))
        assert spec.class_counts == (402, 745, 198, 1663, 691)

    def test_human_proportions(self):
        spec = genspec_from_json({
            "schema_widths": WIDTHS, "label_space": "Aligned4",
            "proportions": "human", "species": "Human"})
        assert spec.class_counts == (50, 293, 96, 67)

    def test_explicit_counts_win(self):
        spec = genspec_from_json(mouse_genspec(class_counts=[5, 5, 5, 5, 5]))
        assert spec.class_counts == (5, 5, 5, 5, 5)

    def test_explicit_means_win(self):
        means = np.zeros((5, 12)).tolist()
        spec = genspec_from_json(mouse_genspec(class_means=means))
        np.testing.assert_array_equal(spec.class_means, 0.0)

    def test_informative_families_forwarded(self):
        spec = genspec_from_json(mouse_genspec(informative_families=[2]))
        spread = spec.class_means.max(axis=0) - spec.class_means.min(axis=0)
        assert spread[2] > 0
        assert (np.delete(spread, 2) == 0).all()


class TestValidate:
    def test_clean_config(self, tmp_path):
        assert validate(base_config(tmp_path)) == []

    def test_unknown_preset_and_protocol(self, tmp_path):
        diags = validate(base_config(tmp_path, preset="xgb", protocol="loocv"))
        assert any("preset" in d for d in diags)
        assert any("protocol" in d for d in diags)

    def test_missing_dataset(self, tmp_path):
        diags = validate(base_config(tmp_path, dataset=None))
        assert any("dataset is required" in d for d in diags)

    def test_dataset_path_not_found(self, tmp_path):
        diags = validate(base_config(tmp_path,
                                     dataset={"path": str(tmp_path / "no")}))
        assert any("not found" in d for d in diags)

    def test_human_requires_kfold5(self, tmp_path):
        gs = {"schema_widths": WIDTHS, "label_space": "Aligned4",
              "proportions": "human", "species": "Human"}
        diags = validate(base_config(tmp_path, preset="bilstm_attn",
                                     dataset={"genspec": gs}))
        assert any("kfold5" in d for d in diags)

    def test_transfer_requires_both_datasets_and_kfold5(self, tmp_path):
        cfg = ExperimentConfig(preset="transfer_dual", protocol="holdout_10x",
                               out_dir=str(tmp_path / "o"))
        diags = validate(cfg)
        assert any("kfold5" in d for d in diags)
        assert any("mouse_dataset" in d for d in diags)
        assert any("human_dataset" in d for d in diags)

    def test_unknown_overrides_section(self, tmp_path):
        diags = validate(base_config(tmp_path, overrides={"optimizer": {}}))
        assert any("overrides section" in d for d in diags)

    def test_run_refuses_invalid_config(self, tmp_path):
        with pytest.raises(ConfigError):
            run(base_config(tmp_path, preset="xgb"))


class TestResolveDefaults:
    def test_every_section_materialized(self, tmp_path):
        resolved = resolve_defaults(base_config(tmp_path, overrides={}))
        ov = resolved["overrides"]
        assert ov["preprocess"]["max_missing_frac"] == 0.5
        assert ov["preprocess"]["skew_threshold"] == 2.0
        assert ov["sampling"]["k_neighbors"] == 5
        assert ov["spca"]["l1_grid"] == [0.01, 0.1, 1.0]
        assert ov["rf"]["n_trees"] == 600
        assert ov["rf"]["class_weight"] == "balanced_subsample"
        assert ov["train"]["patience"] == 7
        assert ov["transfer"]["alpha"] == 0.3

    def test_overrides_survive(self, tmp_path):
        resolved = resolve_defaults(base_config(tmp_path))
        assert resolved["overrides"]["rf"]["n_trees"] == 5
        assert resolved["overrides"]["train"]["max_epochs"] == 2


class TestRunPresets:
    def test_rf_baseline_outputs(self, tmp_path):
        out = run(base_config(tmp_path))
        for name in ("resolved_config.json", "metrics.json", "confusion.csv",
                     "confusion.svg", "splits.json"):
            assert (out / name).exists(), name
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["n_runs"] == 1
        assert payload["preset"] == "rf_baseline"
        # RF protocol has no validation partition
        splits = json.loads((out / "splits.json").read_text())
        parts = set(splits[0]["assignments"].values())
        assert parts == {"train", "test"}

    def test_neural_attention_outputs(self, tmp_path):
        out = run(base_config(tmp_path, preset="bilstm_attn"))
        assert (out / "attention.csv").exists()
        assert (out / "attention.svg").exists()
        splits = json.loads((out / "splits.json").read_text())
        assert set(splits[0]["assignments"].values()) == {"train", "val", "test"}

    def test_plain_bilstm_has_no_attention_files(self, tmp_path):
        out = run(base_config(tmp_path, preset="bilstm"))
        assert not (out / "attention.csv").exists()

    def test_smote_preset_runs(self, tmp_path):
        out = run(base_config(tmp_path, preset="bilstm_attn_smote"))
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["n_runs"] == 1

    def test_kfold_produces_five_runs(self, tmp_path):
        cfg = base_config(tmp_path, protocol="kfold5",
                          dataset={"genspec": mouse_genspec(n_total=120)})
        out = run(cfg)
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["n_runs"] == 5

    def test_deterministic_report_bytes(self, tmp_path):
        cfg_a = base_config(tmp_path, preset="bilstm_attn")
        out_a = run(cfg_a)
        cfg_b = ExperimentConfig(**{**cfg_a.to_json(),
                                    "out_dir": str(tmp_path / "out2")})
        out_b = run(cfg_b)
        for name in ("metrics.json", "confusion.csv", "confusion.svg",
                     "attention.csv", "attention.svg", "splits.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_transfer_dual_outputs(self, tmp_path):
        human_gs = {"schema_widths": WIDTHS, "label_space": "Aligned4",
                    "proportions": "human", "n_total": 150, "separation": 4.0,
                    "seed": 2, "species": "Human"}
        cfg = ExperimentConfig(
            preset="transfer_dual", protocol="kfold5",
            out_dir=str(tmp_path / "tr"),
            mouse_dataset={"genspec": mouse_genspec(n_total=100)},
            human_dataset={"genspec": human_gs},
            n_seeds=1, seed=0, overrides=FAST_OVERRIDES)
        out = run(cfg)
        assert (out / "comparison.csv").exists()
        payload = json.loads((out / "comparison.json").read_text())
        assert [r["model"] for r in payload["rows"]] == [
            "Baseline BiLSTM", "Dual pretrained transfer learning"]
        assert len(payload["per_run"]) == 5

    def test_resolved_config_echo_reruns_identically(self, tmp_path):
        out_a = run(base_config(tmp_path))
        echoed = json.loads((out_a / "resolved_config.json").read_text())
        echoed["out_dir"] = str(tmp_path / "echo")
        out_b = run(config_from_json(echoed))
        assert (out_a / "metrics.json").read_bytes() == \
            (out_b / "metrics.json").read_bytes()
