"""Seeded synthetic dataset generator: class-conditional Gaussian families,
controllable imbalance, cross-species mean shift."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schema import ALIGNED4, MOUSE5, Dataset, FamilySchema, LabelSpace

# class counts after QC used for imbalance-shaped synthetic sets
MOUSE_COUNTS = {"Lamp5": 402, "Pvalb": 745, "Sncg": 198, "Sst": 1663, "Vip": 691}
HUMAN_COUNTS = {"Lamp5": 50, "Pvalb": 293, "Sst": 96, "Vip": 67}


class GenError(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    schema: FamilySchema
    label_space: LabelSpace
    class_means: np.ndarray      # (K, total_width)
    sigma: float
    class_counts: tuple          # (K,)
    missing_rate: float = 0.0
    seed: int = 0
    species: str = "Mouse"

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=np.float64)
        K = self.label_space.n_classes
        if means.shape != (K, self.schema.total_width):
            raise GenError(f"class_means shape {means.shape} != ({K}, {self.schema.total_width})")
        if len(self.class_counts) != K or any(c < 0 for c in self.class_counts):
            raise GenError("class_counts must be K nonnegative integers")
        if not self.sigma > 0:
            raise GenError("sigma must be positive")
        if not (0.0 <= self.missing_rate < 1.0):
            raise GenError("missing_rate must be in [0, 1)")
        means.setflags(write=False)
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_counts", tuple(int(c) for c in self.class_counts))

    def to_json(self) -> dict:
        return {
            "schema_widths": list(self.schema.widths),
            "label_space": self.label_space.name,
            "class_means": self.class_means.tolist(),
            "sigma": self.sigma,
            "class_counts": list(self.class_counts),
            "missing_rate": self.missing_rate,
            "seed": self.seed,
            "species": self.species,
        }


def generate(spec: GenSpec) -> Dataset:
    """Draw rows class-conditionally Gaussian(mean_c, sigma^2 I); seeded."""
    rng = np.random.default_rng(spec.seed)
    W = spec.schema.total_width
    n = sum(spec.class_counts)
    X = np.empty((n, W))
    y = np.empty(n, dtype=np.int64)
    pos = 0
    for c, cnt in enumerate(spec.class_counts):
        X[pos:pos + cnt] = spec.class_means[c] + spec.sigma * rng.standard_normal((cnt, W))
        y[pos:pos + cnt] = c
        pos += cnt
    missing = rng.uniform(size=(n, W)) < spec.missing_rate
    # keep at least one observed value per column so imputation stays possible
    full = missing.all(axis=0)
    missing[0, full] = False
    cell_ids = tuple(f"{spec.species.lower()}-{i:05d}" for i in range(n))
    return Dataset(
        schema=spec.schema, species=spec.species, label_space=spec.label_space,
        cell_ids=cell_ids, X=np.where(missing, 0.0, X), missing=missing, y=y,
    )


def generate_pair(spec: GenSpec, shift, target_counts, target_seed=None):
    """Source dataset from spec; target from shifted means and its own counts."""
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape not in ((spec.schema.total_width,), ()):
        raise GenError("shift must be scalar or length total_width")
    source = generate(spec)
    target_spec = GenSpec(
        schema=spec.schema,
        label_space=spec.label_space,
        class_means=spec.class_means + shift,
        sigma=spec.sigma,
        class_counts=target_counts,
        missing_rate=spec.missing_rate,
        seed=spec.seed + 1 if target_seed is None else target_seed,
        species="Human",
    )
    return source, generate(target_spec)


def make_class_means(schema: FamilySchema, label_space: LabelSpace,
                     separation: float, seed: int = 0,
                     informative_families=None) -> np.ndarray:
    """Random unit-direction class means scaled by `separation`.

    If informative_families is given (family indices), class means differ
    only inside those family blocks; all other columns are identical across
    classes, so only those families carry class signal.
    """
    rng = np.random.default_rng(seed)
    K = label_space.n_classes
    W = schema.total_width
    keep = np.ones(W, dtype=bool)
    if informative_families is not None:
        keep[:] = False
        for t in informative_families:
            keep[schema.block_slice(t)] = True
    n_keep = int(keep.sum())
    dirs = rng.standard_normal((K, n_keep))
    if K <= n_keep:
        # orthonormal directions give uniform pairwise distance sep*sqrt(2)
        dirs = np.linalg.qr(dirs.T)[0].T
    else:
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    means = np.tile(rng.standard_normal(W), (K, 1))
    means[:, keep] = separation * dirs
    return means


def mouse_like_spec(schema: FamilySchema, separation: float = 4.0, sigma: float = 1.0,
                    n_total=None, seed: int = 0, missing_rate: float = 0.0,
                    informative_families=None) -> GenSpec:
    """Mouse-proportioned 5-class GenSpec (counts scaled to n_total if given)."""
    counts = _scaled_counts(MOUSE_COUNTS, MOUSE5, n_total)
    means = make_class_means(schema, MOUSE5, separation, seed=seed,
                             informative_families=informative_families)
    return GenSpec(schema=schema, label_space=MOUSE5, class_means=means, sigma=sigma,
                   class_counts=counts, missing_rate=missing_rate, seed=seed,
                   species="Mouse")


def human_counts(n_total=None) -> tuple:
    return _scaled_counts(HUMAN_COUNTS, ALIGNED4, n_total)


def _scaled_counts(table: dict, label_space: LabelSpace, n_total) -> tuple:
    raw = np.array([table[c] for c in label_space.classes], dtype=np.float64)
    if n_total is None:
        return tuple(int(v) for v in raw)
    scaled = np.maximum(1, np.round(raw / raw.sum() * n_total).astype(int))
    return tuple(int(v) for v in scaled)
