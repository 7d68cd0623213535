import numpy as np
import pytest

from famseq.schema import ALIGNED4, MOUSE5, Dataset, FamilySchema


def small_schema(width: int = 1) -> FamilySchema:
    return FamilySchema.uniform(width)


def make_dataset(X, y, schema=None, species="Mouse", label_space=MOUSE5,
                 missing=None, ids=None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    schema = schema or small_schema(X.shape[1] // 12)
    if missing is None:
        missing = np.zeros_like(X, dtype=bool)
    if ids is None:
        ids = tuple(f"cell-{i}" for i in range(len(X)))
    return Dataset(schema=schema, species=species, label_space=label_space,
                   cell_ids=ids, X=X, missing=np.asarray(missing, dtype=bool),
                   y=np.asarray(y, dtype=np.int64))


@pytest.fixture
def three_cell_dataset():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((3, 12))
    missing = np.zeros((3, 12), dtype=bool)
    missing[1, 4] = True
    X[1, 4] = 0.0
    return make_dataset(X, [0, 2, 4], missing=missing)
