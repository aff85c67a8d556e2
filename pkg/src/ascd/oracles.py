"""Estimators of the cross-coordinate gradient change for least squares.

When coordinate j moves by gamma, the smooth gradient of any passive
coordinate i changes by exactly ``gamma * <a_i, a_j>``.  An oracle returns
an estimate ``g_ij`` of the per-unit-gamma change together with a certified
radius ``delta_ij >= 0`` such that the true change lies in
``gamma * [g_ij - delta_ij, g_ij + delta_ij]``.

Available kinds:

* ``g1``   exact dot products, zero error,
* ``g2``   simulated sketch products: the exact value perturbed uniformly
           within ``eps * ||a_i|| * ||a_j||`` and clamped to the
           Cauchy-Schwarz interval,
* ``g3``   the zero estimate with error ``||a_i|| * ||a_j||``,
* ``g4``   a fixed pseudo-random value in the Cauchy-Schwarz interval; its
           certified error is the interval diameter ``2 ||a_i|| * ||a_j||``
           (the true product can sit at the opposite end of the interval,
           so the radius alone would not be a valid certificate),
* ``bh``   zero estimate with error ``M * ||a_i|| * ||a_j||`` for smooth
           losses with Hessian bounded by M.

All estimators are pure functions of ``(kind, matrix, seed, i, j)``; the g2
and g4 draws are keyed on the unordered pair so they are symmetric and do
not change between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ColumnSparseMatrix

__all__ = [
    "OracleSpec",
    "OracleOutput",
    "OracleContext",
    "ORACLE_KINDS",
    "exact_change",
    "jl_simulated_product",
    "oracle_estimate",
    "oracle_row",
]

ORACLE_KINDS = ("g1", "g2", "g3", "g4", "bh")

# salts so that g2 and g4 consume unrelated pseudo-random streams
_SALT_G2 = np.uint64(0x9E3779B97F4A7C15)
_SALT_G4 = np.uint64(0xC2B2AE3D27D4EB4F)


@dataclass
class OracleSpec:
    """Which estimator to use and its parameters.

    ``epsilon`` is only read by g2 and ``hessian_bound`` only by bh.
    """

    kind: str = "g3"
    epsilon: float = 0.0
    hessian_bound: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.epsilon < 0 or self.hessian_bound < 0:
            raise ValueError("epsilon and hessian_bound must be nonnegative")


@dataclass
class OracleOutput:
    estimate: float
    error: float


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _pair_uniform(seed: int, salt: np.uint64, i, j, n: int) -> np.ndarray:
    """Deterministic draw in [-1, 1] keyed on the unordered pair (i, j)."""
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    with np.errstate(over="ignore"):
        key = lo * np.uint64(n) + hi
        mixed = _splitmix64(key ^ _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ salt))
    u = (mixed >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return 2.0 * u - 1.0


def exact_change(matrix: ColumnSparseMatrix, i: int, j: int) -> float:
    """Sparse column product ``<a_i, a_j>``."""
    ri, vi = matrix.col(i)
    rj, vj = matrix.col(j)
    _, ii, jj = np.intersect1d(ri, rj, assume_unique=True,
                               return_indices=True)
    return float(vi[ii] @ vj[jj])


def jl_simulated_product(matrix: ColumnSparseMatrix, i: int, j: int,
                         epsilon: float, seed: int = 0) -> float:
    """Simulated sketch product: exact value plus a uniform draw from the
    allowed error interval, clamped to the Cauchy-Schwarz range.

    Symmetric and deterministic in ``(i, j, seed)``.
    """
    ri, vi = matrix.col(i)
    rj, vj = matrix.col(j)
    bound = float(np.sqrt((vi @ vi) * (vj @ vj)))
    u = float(_pair_uniform(seed, _SALT_G2, i, j, matrix.n_cols))
    s = exact_change(matrix, i, j) + epsilon * bound * u
    return float(np.clip(s, -bound, bound))


def oracle_estimate(spec: OracleSpec, matrix: ColumnSparseMatrix,
                    column_norms: np.ndarray, i: int, j: int) -> OracleOutput:
    """Single-pair estimate of the per-unit-gamma change of coordinate i
    when coordinate j moves.
    """
    bound = float(column_norms[i] * column_norms[j])
    if spec.kind == "g1":
        return OracleOutput(exact_change(matrix, i, j), 0.0)
    if spec.kind == "g2":
        est = jl_simulated_product(matrix, i, j, spec.epsilon, spec.seed)
        return OracleOutput(est, spec.epsilon * bound)
    if spec.kind == "g3":
        return OracleOutput(0.0, bound)
    if spec.kind == "g4":
        u = float(_pair_uniform(spec.seed, _SALT_G4, i, j, matrix.n_cols))
        return OracleOutput(bound * u, 2.0 * bound)
    # bh: centre of the bounded-Hessian interval
    return OracleOutput(0.0, spec.hessian_bound * bound)


class OracleContext:
    """Per-run precomputation backing the vectorised row queries.

    Column norms are always precomputed.  For the exact kinds (g1, g2) the
    dense Gram matrix is materialised when it fits, otherwise rows are
    recomputed on the fly at ``O(nnz(A))`` per query.
    """

    def __init__(self, spec: OracleSpec, matrix: ColumnSparseMatrix,
                 gram_limit: int = 2048):
        self.spec = spec
        self.matrix = matrix
        self.norms = np.sqrt(matrix.col_norms_sq())
        self.gram = None
        if spec.kind in ("g1", "g2") and matrix.n_cols <= gram_limit:
            dense = matrix.to_dense()
            self.gram = dense.T @ dense

    def _dot_row(self, i: int) -> np.ndarray:
        if self.gram is not None:
            return self.gram[i]
        rows, vals = self.matrix.col(i)
        dense = np.zeros(self.matrix.n_rows)
        dense[rows] = vals
        return self.matrix.col_dots(dense)


def oracle_row(ctx: OracleContext, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Estimates and errors for all pairs ``(i, j)``, ``j`` in ``[n]``.

    The entry at j = i is computed like any other; the caller that tracks
    the active coordinate separately simply overwrites it.
    """
    spec = ctx.spec
    n = ctx.matrix.n_cols
    bounds = ctx.norms[i] * ctx.norms
    if spec.kind == "g1":
        return ctx._dot_row(i), np.zeros(n)
    if spec.kind == "g2":
        u = _pair_uniform(spec.seed, _SALT_G2, i, np.arange(n), n)
        s = ctx._dot_row(i) + spec.epsilon * bounds * u
        return np.clip(s, -bounds, bounds), spec.epsilon * bounds
    if spec.kind == "g3":
        return np.zeros(n), bounds
    if spec.kind == "g4":
        u = _pair_uniform(spec.seed, _SALT_G4, i, np.arange(n), n)
        return bounds * u, 2.0 * bounds
    return np.zeros(n), spec.hessian_bound * bounds
