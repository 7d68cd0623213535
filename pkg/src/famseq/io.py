"""Interchange format: manifest JSON + features/labels CSV, bit-exact round-trip."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .schema import (
    FORMAT_VERSION,
    Dataset,
    FamilySchema,
    LABEL_SPACES,
    SchemaError,
)


class DatasetIOError(ValueError):
    pass


def _fmt(x: float) -> str:
    # repr of a python float is the shortest string that round-trips exactly
    return repr(float(x))


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_dataset(ds: Dataset, path) -> None:
    """Write manifest.json + features.csv + labels.csv under `path` (a directory)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    cols = ds.schema.column_names()

    features_path = out / "features.csv"
    with open(features_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["cell_id"] + cols)
        for i, cid in enumerate(ds.cell_ids):
            row = [cid]
            for j in range(ds.schema.total_width):
                row.append("" if ds.missing[i, j] else _fmt(ds.X[i, j]))
            w.writerow(row)

    labels_path = out / "labels.csv"
    with open(labels_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["cell_id", "label"])
        for i, cid in enumerate(ds.cell_ids):
            w.writerow([cid, ds.label_space.classes[ds.y[i]]])

    manifest = {
        "format_version": FORMAT_VERSION,
        "species": ds.species,
        "label_space": ds.label_space.name,
        "schema": {"families": [{"name": n, "width": w} for n, w in ds.schema.families]},
        "n_cells": ds.n_cells,
        "files": {"features": "features.csv", "labels": "labels.csv"},
        "checksums": {
            "features": _file_sha256(features_path),
            "labels": _file_sha256(labels_path),
        },
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_dataset(manifest_path) -> Dataset:
    """Load a dataset from a manifest.json path or its containing directory."""
    p = Path(manifest_path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.exists():
        raise DatasetIOError(f"manifest not found: {p}")
    with open(p, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetIOError(
            f"unsupported format version {manifest.get('format_version')!r}"
        )
    try:
        schema = FamilySchema(
            tuple((fam["name"], int(fam["width"])) for fam in manifest["schema"]["families"])
        )
    except SchemaError as e:
        raise DatasetIOError(f"bad schema in manifest: {e}") from e
    try:
        label_space = LABEL_SPACES[manifest["label_space"]]
    except KeyError:
        raise DatasetIOError(f"unknown label space {manifest['label_space']!r}") from None

    base = p.parent
    features_path = base / manifest["files"]["features"]
    labels_path = base / manifest["files"]["labels"]

    want_cols = schema.column_names()
    cell_ids, rows, masks = [], [], []
    with open(features_path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r)
        if header[0] != "cell_id":
            raise DatasetIOError("features.csv must start with a cell_id column")
        have = header[1:]
        if sorted(have) != sorted(want_cols):
            missing_cols = sorted(set(want_cols) - set(have))
            extra = sorted(set(have) - set(want_cols))
            raise DatasetIOError(
                f"feature columns do not match schema width "
                f"(missing {missing_cols[:5]}, unexpected {extra[:5]})"
            )
        # schema order is enforced regardless of file column order
        order = [have.index(c) for c in want_cols]
        for rec in r:
            if len(rec) != len(header):
                raise DatasetIOError(f"malformed features row for {rec[0]!r}")
            cell_ids.append(rec[0])
            vals = rec[1:]
            row = np.empty(len(want_cols))
            mask = np.zeros(len(want_cols), dtype=bool)
            for k, src in enumerate(order):
                cell = vals[src]
                if cell == "":
                    row[k], mask[k] = 0.0, True
                else:
                    row[k] = float(cell)
            rows.append(row)
            masks.append(mask)
    if len(set(cell_ids)) != len(cell_ids):
        dup = next(c for c in cell_ids if cell_ids.count(c) > 1)
        raise DatasetIOError(f"duplicate cell_id {dup!r}")

    labels = {}
    with open(labels_path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r)
        if header != ["cell_id", "label"]:
            raise DatasetIOError("labels.csv must have header cell_id,label")
        for rec in r:
            if rec[0] in labels:
                raise DatasetIOError(f"duplicate cell_id {rec[0]!r} in labels.csv")
            labels[rec[0]] = rec[1]

    y = np.empty(len(cell_ids), dtype=np.int64)
    for i, cid in enumerate(cell_ids):
        if cid not in labels:
            raise DatasetIOError(f"cell {cid!r} has no label")
        lab = labels[cid]
        if lab not in label_space.classes:
            raise DatasetIOError(
                f"label {lab!r} outside declared label space {label_space.name}"
            )
        y[i] = label_space.index(lab)

    n_cells = manifest.get("n_cells")
    if n_cells is not None and n_cells != len(cell_ids):
        raise DatasetIOError(f"manifest n_cells={n_cells} but found {len(cell_ids)} rows")

    X = np.vstack(rows) if rows else np.zeros((0, schema.total_width))
    missing = np.vstack(masks) if masks else np.zeros((0, schema.total_width), dtype=bool)
    return Dataset(
        schema=schema,
        species=manifest["species"],
        label_space=label_space,
        cell_ids=tuple(cell_ids),
        X=X,
        missing=missing,
        y=y,
    )


def dataset_checksum(path) -> dict:
    """Checksums of the on-disk features/labels files, for golden tests."""
    base = Path(path)
    return {
        "features": _file_sha256(base / "features.csv"),
        "labels": _file_sha256(base / "labels.csv"),
    }
