"""Core data model: feature-family schema, label spaces, datasets, sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FORMAT_VERSION = "famseq-v1"

# Canonical family ordering. Every dataset in the interchange format uses
# exactly these 12 families, in this order; only the widths vary.
CANONICAL_FAMILIES = (
    "first_ap_v",
    "first_ap_dv",
    "isi_shape",
    "inst_freq",
    "spiking_threshold_v",
    "spiking_peak_v",
    "spiking_width",
    "spiking_fast_trough_v",
    "spiking_upstroke_downstroke_ratio",
    "step_subthresh",
    "subthresh_norm",
    "psth",
)

N_FAMILIES = len(CANONICAL_FAMILIES)


class SchemaError(ValueError):
    """Violation of the data-model invariants."""


@dataclass(frozen=True)
class FamilySchema:
    """Ordered feature families with per-family widths.

    families: tuple of (name, width). Names must be the canonical 12
    in canonical order; widths are dataset-dependent.
    """

    families: tuple[tuple[str, int], ...]
    version: str = FORMAT_VERSION

    def __post_init__(self):
        names = tuple(n for n, _ in self.families)
        if names != CANONICAL_FAMILIES:
            raise SchemaError(
                f"families must be the canonical 12 in canonical order, got {names}"
            )
        for name, width in self.families:
            if not (isinstance(width, int) and width >= 1):
                raise SchemaError(f"family {name!r} has invalid width {width!r}")

    @property
    def total_width(self) -> int:
        return sum(w for _, w in self.families)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w for _, w in self.families)

    def offsets(self) -> tuple[int, ...]:
        """Start column of each family block."""
        out, acc = [], 0
        for _, w in self.families:
            out.append(acc)
            acc += w
        return tuple(out)

    def block_slice(self, family_index: int) -> slice:
        start = self.offsets()[family_index]
        return slice(start, start + self.families[family_index][1])

    def column_names(self) -> list[str]:
        return [f"{name}.{i}" for name, w in self.families for i in range(w)]

    @staticmethod
    def uniform(width_per_family: int) -> "FamilySchema":
        return FamilySchema(tuple((n, width_per_family) for n in CANONICAL_FAMILIES))

    @staticmethod
    def from_widths(widths: Sequence[int]) -> "FamilySchema":
        if len(widths) != N_FAMILIES:
            raise SchemaError(f"need {N_FAMILIES} widths, got {len(widths)}")
        return FamilySchema(tuple(zip(CANONICAL_FAMILIES, (int(w) for w in widths))))


@dataclass(frozen=True)
class LabelSpace:
    name: str
    classes: tuple[str, ...]

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise SchemaError(f"label {label!r} not in label space {self.name}") from None

    @property
    def n_classes(self) -> int:
        return len(self.classes)


MOUSE5 = LabelSpace("Mouse5", ("Lamp5", "Pvalb", "Sncg", "Sst", "Vip"))
ALIGNED4 = LabelSpace("Aligned4", ("Lamp5", "Pvalb", "Sst", "Vip"))

LABEL_SPACES = {ls.name: ls for ls in (MOUSE5, ALIGNED4)}


@dataclass(frozen=True)
class Dataset:
    """Cell x feature matrix with missing-mask, labels, species tag, cell IDs.

    Immutable after construction; arrays are set non-writeable so instances
    can be shared freely.
    """

    schema: FamilySchema
    species: str  # "Mouse" or "Human"
    label_space: LabelSpace
    cell_ids: tuple[str, ...]
    X: np.ndarray        # (N, total_width) float64
    missing: np.ndarray  # (N, total_width) bool
    y: np.ndarray        # (N,) int class indices

    def __post_init__(self):
        if self.species not in ("Mouse", "Human"):
            raise SchemaError(f"unknown species {self.species!r}")
        n = len(self.cell_ids)
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        missing = np.ascontiguousarray(np.asarray(self.missing, dtype=bool))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.int64))
        w = self.schema.total_width
        if X.shape != (n, w):
            raise SchemaError(f"X shape {X.shape} != ({n}, {w})")
        if missing.shape != (n, w):
            raise SchemaError(f"missing shape {missing.shape} != ({n}, {w})")
        if y.shape != (n,):
            raise SchemaError(f"y shape {y.shape} != ({n},)")
        if len(set(self.cell_ids)) != n:
            raise SchemaError("duplicate cell_id")
        if n and ((y < 0) | (y >= self.label_space.n_classes)).any():
            bad = int(y[(y < 0) | (y >= self.label_space.n_classes)][0])
            raise SchemaError(
                f"label index {bad} outside label space {self.label_space.name}"
            )
        if n and not np.isfinite(X[~missing]).all():
            raise SchemaError("non-finite value in observed (non-missing) entry")
        for a in (X, missing, y):
            a.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "cell_ids", tuple(self.cell_ids))

    @property
    def n_cells(self) -> int:
        return len(self.cell_ids)

    def replace(self, **kw) -> "Dataset":
        fields = dict(
            schema=self.schema, species=self.species, label_space=self.label_space,
            cell_ids=self.cell_ids, X=self.X, missing=self.missing, y=self.y,
        )
        fields.update(kw)
        return Dataset(**fields)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return self.replace(
            cell_ids=tuple(self.cell_ids[i] for i in rows),
            X=self.X[rows], missing=self.missing[rows], y=self.y[rows],
        )


@dataclass(frozen=True)
class CellSequence:
    """One cell as 12 full-width steps, step t nonzero only in family block t."""

    steps: np.ndarray  # (12, total_width)

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim != 2 or steps.shape[0] != N_FAMILIES:
            raise SchemaError(f"steps must be ({N_FAMILIES}, W), got {steps.shape}")
        steps.setflags(write=False)
        object.__setattr__(self, "steps", steps)


def harmonize_labels(y, source: LabelSpace = MOUSE5, target: LabelSpace = ALIGNED4):
    """Map Mouse5 class indices to Aligned4 (Sncg merged into Vip)."""
    if (source, target) == (MOUSE5, ALIGNED4):
        mapping = np.array(
            [target.index("Vip" if c == "Sncg" else c) for c in source.classes]
        )
    elif source == target:
        mapping = np.arange(source.n_classes)
    else:
        raise SchemaError(f"no harmonization from {source.name} to {target.name}")
    y = np.asarray(y, dtype=np.int64)
    bad = (y < 0) | (y >= source.n_classes)
    if bad.any():
        raise SchemaError(f"unknown class index {int(y[bad][0])} for {source.name}")
    return mapping[y]


def harmonize_dataset(ds: Dataset) -> Dataset:
    """Dataset-level harmonization to Aligned4."""
    if ds.label_space == ALIGNED4:
        return ds
    return ds.replace(y=harmonize_labels(ds.y, ds.label_space, ALIGNED4),
                      label_space=ALIGNED4)


def to_sequence(ds: Dataset, row: int) -> CellSequence:
    """Expand one dataset row into its 12 block-masked steps (missing -> 0)."""
    if not (0 <= row < ds.n_cells):
        raise IndexError(f"row {row} out of range for N={ds.n_cells}")
    return CellSequence(sequence_tensor(ds)[row])


def sequence_tensor(ds: Dataset) -> np.ndarray:
    """All rows as a (N, 12, total_width) tensor; missing entries are zero."""
    x = np.where(ds.missing, 0.0, ds.X)
    out = np.zeros((ds.n_cells, N_FAMILIES, ds.schema.total_width))
    for t in range(N_FAMILIES):
        sl = ds.schema.block_slice(t)
        out[:, t, sl] = x[:, sl]
    return out
