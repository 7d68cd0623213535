import json

import numpy as np

from famseq.metrics import aggregate_runs, compute_metrics, summarize_attention
from famseq.report import (
    _heat_color,
    attention_csv,
    attention_svg,
    comparison_csv,
    confusion_csv,
    confusion_svg,
    render_reports,
)

CLASSES = ["Lamp5", "Pvalb", "Sst", "Vip"]


def sample_report(seed=0):
    rng = np.random.default_rng(seed)
    y_true = rng.integers(0, 4, size=80)
    y_pred = rng.integers(0, 4, size=80)
    return compute_metrics(y_true, y_pred, 4)


def sample_attention(seed=0):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(12), size=40)
    y = rng.integers(0, 4, size=40)
    return summarize_attention([(w, y)], CLASSES)


class TestHeatColor:
    def test_endpoints(self):
        assert _heat_color(0.0) == "rgb(255,255,255)"
        assert _heat_color(1.0) == "rgb(33,102,172)"

    def test_clipped(self):
        assert _heat_color(-5.0) == _heat_color(0.0)
        assert _heat_color(7.0) == _heat_color(1.0)


class TestConfusionOutputs:
    def test_csv_layout(self):
        r = compute_metrics([0, 0, 1, 1], [0, 1, 1, 1], 2)
        csv = confusion_csv(r, ["a", "b"])
        lines = csv.splitlines()
        assert lines[0] == "true\\pred,a,b"
        assert lines[1] == "a,1,1"
        assert lines[2] == "b,0,2"

    def test_identity_confusion_diagonal_cells_dark(self):
        r = compute_metrics([0, 1, 2, 3], [0, 1, 2, 3], 4)
        svg = confusion_svg(r, CLASSES)
        # diagonal cells saturate the color ramp, off-diagonal stay white
        assert svg.count('fill="rgb(33,102,172)"') == 4
        assert svg.count('fill="rgb(255,255,255)"') == 12

    def test_svg_cell_count(self):
        svg = confusion_svg(sample_report(), CLASSES)
        assert svg.count("<rect") == 16
        assert svg.startswith("<svg ")
        assert svg.rstrip().endswith("</svg>")


class TestAttentionOutputs:
    def test_csv_has_family_header_and_counts(self):
        s = sample_attention()
        csv = attention_csv(s)
        header = csv.splitlines()[0]
        assert header.startswith("class,count,")
        assert "first_ap_v" in header and "psth" in header
        assert len(csv.splitlines()) == 5

    def test_absent_class_row_empty(self):
        w = np.full((6, 12), 1 / 12)
        s = summarize_attention([(w, np.zeros(6, dtype=int))], ["a", "b"])
        lines = attention_csv(s).splitlines()
        assert lines[2].startswith("b,0,")
        assert lines[2] == "b,0," + "," * 11

    def test_svg_grid_dimensions(self):
        svg = attention_svg(sample_attention())
        assert svg.count("<rect") == 4 * 12


class TestRenderReports:
    def render(self, out):
        agg = aggregate_runs([sample_report(s) for s in range(3)])
        return render_reports(agg, CLASSES, out,
                              attention_summary=sample_attention())

    def test_all_files_written(self, tmp_path):
        written = self.render(tmp_path / "r")
        assert written == ["metrics.json", "confusion.csv", "confusion.svg",
                           "attention.csv", "attention.svg"]
        for name in written:
            assert (tmp_path / "r" / name).exists()

    def test_byte_deterministic(self, tmp_path):
        self.render(tmp_path / "a")
        self.render(tmp_path / "b")
        for name in ("metrics.json", "confusion.csv", "confusion.svg",
                     "attention.csv", "attention.svg"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_metrics_json_contents(self, tmp_path):
        self.render(tmp_path / "r")
        payload = json.loads((tmp_path / "r" / "metrics.json").read_text())
        assert payload["n_runs"] == 3
        assert payload["class_names"] == CLASSES
        assert "macro_f1" in payload["mean"]
        assert "±" in payload["formatted"]["macro_f1"]

    def test_pooled_confusion_sums_runs(self, tmp_path):
        self.render(tmp_path / "r")
        csv = (tmp_path / "r" / "confusion.csv").read_text()
        total = sum(int(v) for line in csv.splitlines()[1:]
                    for v in line.split(",")[1:])
        assert total == 3 * 80


def test_comparison_csv_layout():
    rows = [
        {"model": "Baseline BiLSTM", "macro_f1": "0.5000 ± 0.0100",
         "accuracy": "0.6000 ± 0.0200"},
        {"model": "Dual pretrained transfer learning",
         "macro_f1": "0.5500 ± 0.0100", "accuracy": "0.6400 ± 0.0100"},
    ]
    csv = comparison_csv(rows)
    lines = csv.splitlines()
    assert lines[0] == "model,macro_f1,accuracy"
    assert lines[1].startswith("Baseline BiLSTM,")
    assert len(lines) == 3
