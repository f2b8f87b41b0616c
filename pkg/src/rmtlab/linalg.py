"""Dense real linear algebra used by the witness construction.

Matrices are plain 2-D float64 numpy arrays.  Bases of column spans are
built with two-pass classical Gram-Schmidt; singular values and LU solves
go through LAPACK.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .distributions import EntryDistribution, make_rng

PIVOT_TOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """A sampled matrix is numerically singular."""


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormal columns spanning a subspace of R^ambient_dim."""

    ambient_dim: int
    vectors: np.ndarray  # shape (ambient_dim, rank)
    requested: int = 0

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.requested

    def project(self, y) -> np.ndarray:
        q = self.vectors
        return q @ (q.T @ np.asarray(y, dtype=np.float64))


def generate_matrix(dist: EntryDistribution, rows: int, cols: int, seed: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    return dist.draw(make_rng(seed), (rows, cols))


def singular_values(m) -> np.ndarray:
    """Singular values in non-increasing order."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.svd(m, compute_uv=False)


def orthonormal_basis(columns, tol: float = PIVOT_TOL) -> OrthonormalBasis:
    """Orthonormal basis of the span of ``columns`` (a 2-D array, one vector per column).

    Each new column is orthogonalized twice against the current basis.  A
    column whose residual falls below ``tol`` times the largest input column
    norm is treated as dependent and dropped; ``rank_deficient`` reports it.
    """
    a = np.asarray(columns, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    n, k = a.shape
    scale = float(np.max(np.linalg.norm(a, axis=0))) if k else 0.0
    q = np.empty((n, min(n, k)))
    r = 0
    for j in range(k):
        v = a[:, j].copy()
        for _ in range(2):
            if r:
                basis = q[:, :r]
                v -= basis @ (basis.T @ v)
        norm = np.linalg.norm(v)
        if norm <= tol * scale or r == n:
            continue
        q[:, r] = v / norm
        r += 1
    return OrthonormalBasis(n, q[:, :r].copy(), requested=k)


def dist_to_subspace(y, basis: OrthonormalBasis) -> float:
    """Euclidean distance from ``y`` to the span of ``basis``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (basis.ambient_dim,):
        raise ValueError(f"vector of length {y.shape} does not match ambient dim {basis.ambient_dim}")
    q = basis.vectors
    resid = y - q @ (q.T @ y)
    # second pass keeps the residual orthogonal when y is nearly inside the span
    resid -= q @ (q.T @ resid)
    return float(np.linalg.norm(resid))


def lu_factor(m, tol: float = PIVOT_TOL):
    """LU factorization that rejects numerically singular square matrices."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    scale = float(np.max(np.linalg.norm(m, axis=0)))
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) <= tol * scale:
        raise SingularMatrixError("matrix is numerically singular")
    return lu, piv


def solve_transpose(m, k: int, factor=None) -> np.ndarray:
    """Solve M^T w = e_k (0-based ``k``), i.e. the k-th row of M^{-1}."""
    m = np.asarray(m, dtype=np.float64)
    lu = factor if factor is not None else lu_factor(m)
    e = np.zeros(m.shape[0])
    e[k] = 1.0
    return scipy.linalg.lu_solve(lu, e, trans=1)


def inverse_rows(m, factor=None) -> np.ndarray:
    """All rows of M^{-1} at once; column k of the result solves M^T w = e_k."""
    m = np.asarray(m, dtype=np.float64)
    lu = factor if factor is not None else lu_factor(m)
    return scipy.linalg.lu_solve(lu, np.eye(m.shape[0]), trans=1)


def operator_norm_estimate(m, iterations: int = 200) -> float:
    """Power-iteration estimate of the largest singular value (a lower bound)."""
    if iterations < 1:
        raise ValueError("iterations must be positive")
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape
    # fixed, generic start vector keeps the estimate deterministic
    v = 1.0 + np.sqrt(np.arange(1, cols + 1, dtype=np.float64)) % 1.0
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = m.T @ (m @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        est = float(np.linalg.norm(m @ v))
    return est


def write_matrix_csv(m, path) -> None:
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"# {m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        rows, cols = int(header[0]), int(header[1])
        data = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    m = np.array(data, dtype=np.float64).reshape(rows, cols)
    return m
