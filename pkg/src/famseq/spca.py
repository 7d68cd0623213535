"""Per-family sparse PCA via alternating elastic-net / SVD minimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import Dataset, FamilySchema, N_FAMILIES

MIN_VARIANCE_RATIO = 0.01
CONVERGENCE_TOL = 1e-6
MAX_ITER = 500
DEFAULT_L1_GRID = (0.01, 0.1, 1.0)
DEFAULT_L2 = 1e-6


class SpcaError(ValueError):
    pass


def _soft_threshold(z, gamma):
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def _elastic_net_gram(G, cov, l1, l2, beta0=None, tol=1e-10, max_iter=2000):
    """Coordinate descent for min ||Xa - Xb||^2 + l2||b||^2 + l1||b||_1.

    Works on the Gram matrix G = X'X and cov = X'X a.
    """
    w = G.shape[0]
    beta = np.zeros(w) if beta0 is None else beta0.copy()
    diag = np.diag(G)
    for _ in range(max_iter):
        delta = 0.0
        for k in range(w):
            if diag[k] + l2 == 0.0:
                new = 0.0
            else:
                r_k = cov[k] - G[k] @ beta + diag[k] * beta[k]
                new = _soft_threshold(r_k, l1 / 2.0) / (diag[k] + l2)
            delta = max(delta, abs(new - beta[k]))
            beta[k] = new
        if delta < tol:
            break
    return beta


@dataclass(frozen=True)
class SpcaFamilyModel:
    mean: np.ndarray       # (w,)
    loadings: np.ndarray   # (w, c) unit-norm columns
    ratios: np.ndarray     # (c,) adjusted explained-variance ratios, non-increasing
    converged: bool
    penalty_l1: float
    penalty_l2: float

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]


def adjusted_variance_ratios(Xc: np.ndarray, loadings: np.ndarray) -> np.ndarray:
    """QR-adjusted explained-variance ratio per component (Zou convention)."""
    total = float((Xc ** 2).sum())
    if total == 0.0 or loadings.shape[1] == 0:
        return np.zeros(loadings.shape[1])
    Z = Xc @ loadings
    R = np.linalg.qr(Z, mode="r")
    return np.diag(R) ** 2 / total


def spca_fit(family_matrix, penalty_l1: float, penalty_l2: float = DEFAULT_L2,
             max_components: int | None = None,
             min_ratio: float = MIN_VARIANCE_RATIO) -> SpcaFamilyModel:
    """Fit sparse PCA on one family block.

    Alternates elastic-net regressions for the sparse loadings B with an
    SVD update of the orthonormal basis A, until the loading change drops
    below 1e-6 or 500 iterations. Components are ordered by adjusted
    explained variance; components below the 1% ratio are dropped.
    """
    X = np.asarray(family_matrix, dtype=np.float64)
    n, w = X.shape
    if n < 2:
        raise SpcaError(f"need at least 2 rows, got {n}")
    if penalty_l1 < 0 or penalty_l2 < 0:
        raise SpcaError("penalties must be nonnegative")
    mean = X.mean(axis=0)
    Xc = X - mean
    c = min(n - 1, w) if max_components is None else min(max_components, n - 1, w)

    U, S, Vt = np.linalg.svd(Xc, full_matrices=False)
    A = Vt[:c].T                       # (w, c)
    G = Xc.T @ Xc
    B = A.copy()
    converged = False
    for _ in range(MAX_ITER):
        B_prev = B.copy()
        for j in range(c):
            B[:, j] = _elastic_net_gram(G, G @ A[:, j], penalty_l1, penalty_l2,
                                        beta0=B[:, j])
        M = G @ B
        Um, _, Vtm = np.linalg.svd(M, full_matrices=False)
        A = Um @ Vtm
        if np.max(np.abs(B - B_prev)) < CONVERGENCE_TOL:
            converged = True
            break

    norms = np.linalg.norm(B, axis=0)
    keep = norms > 1e-12
    loadings = B[:, keep] / norms[keep]
    ratios = adjusted_variance_ratios(Xc, loadings)
    order = np.argsort(-ratios, kind="stable")
    loadings, ratios = loadings[:, order], ratios[order]
    keep = ratios >= min_ratio
    return SpcaFamilyModel(
        mean=mean, loadings=loadings[:, keep], ratios=ratios[keep],
        converged=converged, penalty_l1=penalty_l1, penalty_l2=penalty_l2,
    )


@dataclass(frozen=True)
class SpcaModel:
    """Sparse PCA models for all 12 families, concatenated in family order."""

    schema: FamilySchema
    families: tuple  # 12 SpcaFamilyModel

    @property
    def n_components(self) -> int:
        return sum(f.n_components for f in self.families)

    def to_json(self) -> dict:
        return {
            "schema_widths": list(self.schema.widths),
            "families": [
                {
                    "mean": f.mean.tolist(),
                    "loadings": f.loadings.tolist(),
                    "ratios": f.ratios.tolist(),
                    "converged": f.converged,
                    "penalty_l1": f.penalty_l1,
                    "penalty_l2": f.penalty_l2,
                }
                for f in self.families
            ],
        }


def _reconstruction_error(Xc, loadings) -> float:
    if loadings.shape[1] == 0:
        return float((Xc ** 2).sum())
    Z = Xc @ loadings
    coef, *_ = np.linalg.lstsq(Z, Xc, rcond=None)
    return float(((Xc - Z @ coef) ** 2).sum())


def spca_fit_dataset(ds: Dataset, train_rows=None,
                     l1_grid=DEFAULT_L1_GRID, penalty_l2: float = DEFAULT_L2,
                     max_components: int | None = None) -> SpcaModel:
    """Fit per-family sparse PCA on the training rows of an imputed dataset.

    The l1 penalty is selected per family from `l1_grid` by training-set
    reconstruction error from the retained components.
    """
    rows = np.arange(ds.n_cells) if train_rows is None else np.asarray(train_rows)
    fams = []
    for t in range(N_FAMILIES):
        block = ds.X[rows][:, ds.schema.block_slice(t)]
        best = None
        best_err = np.inf
        for l1 in l1_grid:
            m = spca_fit(block, l1, penalty_l2, max_components=max_components)
            err = _reconstruction_error(block - m.mean, m.loadings)
            if err < best_err:
                best, best_err = m, err
        fams.append(best)
    return SpcaModel(schema=ds.schema, families=tuple(fams))


def spca_transform(model: SpcaModel, ds: Dataset) -> np.ndarray:
    """Scores: centered family blocks times loadings, concatenated in order."""
    if ds.schema.widths != model.schema.widths:
        raise SpcaError("dataset schema does not match the fitted schema")
    parts = []
    for t, fam in enumerate(model.families):
        block = ds.X[:, ds.schema.block_slice(t)]
        parts.append((block - fam.mean) @ fam.loadings)
    return np.concatenate(parts, axis=1) if parts else np.zeros((ds.n_cells, 0))
