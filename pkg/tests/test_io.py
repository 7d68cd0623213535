import csv
import json
from pathlib import Path

import numpy as np
import pytest

from famseq.io import DatasetIOError, dataset_checksum, load_dataset, save_dataset
from famseq.schema import ALIGNED4, FamilySchema
from famseq.synthgen import mouse_like_spec, generate
from conftest import make_dataset


def assert_datasets_equal(a, b):
    assert a.cell_ids == b.cell_ids
    assert a.species == b.species
    assert a.label_space == b.label_space
    assert a.schema.widths == b.schema.widths
    np.testing.assert_array_equal(a.missing, b.missing)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(
        np.where(a.missing, 0.0, a.X), np.where(b.missing, 0.0, b.X))


def test_round_trip_three_cells(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds")
    assert_datasets_equal(three_cell_dataset, back)


def test_round_trip_preserves_missing_positions(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds" / "manifest.json")
    np.testing.assert_array_equal(back.missing, three_cell_dataset.missing)


def test_round_trip_500_cell_checksum(tmp_path):
    ds = generate(mouse_like_spec(FamilySchema.uniform(2), n_total=500, seed=3,
                                  missing_rate=0.05))
    save_dataset(ds, tmp_path / "a")
    checksum = dataset_checksum(tmp_path / "a")
    back = load_dataset(tmp_path / "a")
    save_dataset(back, tmp_path / "b")
    assert dataset_checksum(tmp_path / "b") == checksum
    assert_datasets_equal(ds, back)


def test_column_order_irrelevant(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    feat = tmp_path / "ds" / "features.csv"
    with open(feat, newline="") as f:
        rows = list(csv.reader(f))
    # swap two feature columns in the file; loader must restore schema order
    header = rows[0]
    header[1], header[5] = header[5], header[1]
    for r in rows[1:]:
        r[1], r[5] = r[5], r[1]
    with open(feat, "w", newline="") as f:
        csv.writer(f).writerows(rows)
    # checksum no longer matches the manifest, so recompute n/a: loader checks cols
    back = load_dataset(tmp_path / "ds")
    assert_datasets_equal(three_cell_dataset, back)


def test_missing_column_rejected(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    feat = tmp_path / "ds" / "features.csv"
    with open(feat, newline="") as f:
        rows = list(csv.reader(f))
    rows = [r[:-1] for r in rows]
    with open(feat, "w", newline="") as f:
        csv.writer(f).writerows(rows)
    with pytest.raises(DatasetIOError, match="columns do not match"):
        load_dataset(tmp_path / "ds")


def test_duplicate_cell_id_rejected(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    feat = tmp_path / "ds" / "features.csv"
    with open(feat, newline="") as f:
        rows = list(csv.reader(f))
    rows[2][0] = rows[1][0]
    with open(feat, "w", newline="") as f:
        csv.writer(f).writerows(rows)
    with pytest.raises(DatasetIOError, match="duplicate cell_id"):
        load_dataset(tmp_path / "ds")


def test_label_outside_space_rejected(three_cell_dataset, tmp_path):
    save_dataset(three_cell_dataset, tmp_path / "ds")
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    manifest["label_space"] = "Aligned4"
    (tmp_path / "ds" / "manifest.json").write_text(json.dumps(manifest))
    # the fixture contains an Sncg label, invalid under Aligned4
    with pytest.raises(DatasetIOError, match="outside declared label space"):
        load_dataset(tmp_path / "ds")


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetIOError, match="manifest not found"):
        load_dataset(tmp_path / "nope")
