"""Sparse and dense linear algebra: CSR helpers, symmetric factorization,
dense generalized eigenvalues and Matrix Market I/O.
"""

import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sps
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import splu

from .exceptions import (
    DimensionMismatchError,
    ExportError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
)

logger = logging.getLogger(__name__)

CsrMatrix = sps.csr_matrix


def as_csr(matrix) -> sps.csr_matrix:
    """Canonical CSR copy: duplicates summed, column indices sorted."""
    out = sps.csr_matrix(matrix, dtype=float, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def symmetry_defect(matrix) -> float:
    """max |M - M^T|."""
    if sps.issparse(matrix):
        diff = abs(matrix - matrix.T)
        return float(diff.max()) if diff.nnz else 0.0
    matrix = np.asarray(matrix)
    return float(np.abs(matrix - matrix.T).max()) if matrix.size else 0.0


def is_symmetric(matrix, tol: float = 1e-13) -> bool:
    """Entry-wise symmetry relative to the largest entry."""
    scale = abs(matrix).max() if sps.issparse(matrix) else np.abs(matrix).max()
    return symmetry_defect(matrix) <= tol * max(float(scale), 1.0e-300)


def spmv(matrix, x: np.ndarray) -> np.ndarray:
    """y = M x.

    Raises:
        DimensionMismatchError: If the column count differs from len(x).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or matrix.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"Cannot multiply {matrix.shape} matrix by vector of shape {x.shape}",
            expected=matrix.shape[1],
            actual=x.shape,
        )
    return np.asarray(matrix @ x).ravel()


def _check_square(matrix) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(
            f"Expected a square matrix, got shape {matrix.shape}",
            expected="square",
            actual=matrix.shape,
        )


# =============================================================================
# LDL^T
# =============================================================================


@dataclass(frozen=True)
class SymFactor:
    """P M P^T = L D L^T with P the reverse Cuthill-McKee permutation."""

    permutation: np.ndarray
    lower: sps.csc_matrix
    diagonal: np.ndarray
    _lu: object = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.permutation)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return ldlt_solve(self, b)


def ldlt_factor(matrix, check_symmetry: bool = True) -> SymFactor:
    """Factor a sparse SPD matrix.

    SuperLU runs on the RCM-permuted matrix with natural column order,
    symmetric mode, no equilibration and a zero pivot threshold, so that no
    row exchanges happen and U = D L^T.

    Raises:
        InvalidArgumentError: If the matrix is not symmetric.
        NotPositiveDefiniteError: On a non-positive pivot.
    """
    matrix = as_csr(matrix)
    _check_square(matrix)
    if check_symmetry and not is_symmetric(matrix):
        raise InvalidArgumentError("LDL^T needs a symmetric matrix", argument="matrix")

    perm = reverse_cuthill_mckee(matrix, symmetric_mode=True).astype(np.int64)
    permuted = matrix[perm][:, perm].tocsc()
    try:
        lu = splu(
            permuted,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True, "Equil": False},
        )
    except RuntimeError as exc:
        raise NotPositiveDefiniteError(f"Factorization failed: {exc}") from exc

    natural = np.arange(matrix.shape[0])
    if not (np.array_equal(lu.perm_r, natural) and np.array_equal(lu.perm_c, natural)):
        raise NotPositiveDefiniteError("Factorization required pivoting; matrix is not SPD")

    diagonal = lu.U.diagonal()
    bad = np.flatnonzero(~(diagonal > 0.0))
    if len(bad):
        k = int(bad[0])
        raise NotPositiveDefiniteError(
            f"Non-positive pivot {diagonal[k]:.3e} at row {int(perm[k])}",
            pivot=int(perm[k]),
            value=float(diagonal[k]),
        )
    logger.debug("LDL^T of order %d, nnz(L) = %d", matrix.shape[0], lu.L.nnz)
    return SymFactor(perm, lu.L.tocsc(), diagonal, lu)


def ldlt_solve(factor: SymFactor, b: np.ndarray) -> np.ndarray:
    """Solve M x = b with a factor from :func:`ldlt_factor`."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != factor.n:
        raise DimensionMismatchError(
            f"Right-hand side of length {b.shape[0]} for factor of order {factor.n}",
            expected=factor.n,
            actual=b.shape,
        )
    z = factor._lu.solve(b[factor.permutation])
    x = np.empty_like(z)
    x[factor.permutation] = z
    return x


# =============================================================================
# Dense generalized eigenvalues
# =============================================================================


def dense_sym_geig(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Ascending eigenvalues of A x = lambda B x for symmetric A and SPD B.

    LAPACK reduces with the Cholesky factor of B and solves the symmetric
    standard problem.

    Raises:
        DimensionMismatchError: If A and B differ in shape.
        InvalidArgumentError: If A or B is not symmetric.
        NotPositiveDefiniteError: If B is not positive definite.
    """
    a = a.toarray() if sps.issparse(a) else np.asarray(a, dtype=float)
    b = b.toarray() if sps.issparse(b) else np.asarray(b, dtype=float)
    _check_square(a)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            "Pencil matrices differ in shape", expected=a.shape, actual=b.shape
        )
    for name, m in (("A", a), ("B", b)):
        if not is_symmetric(m, tol):
            raise InvalidArgumentError(f"{name} is not symmetric", argument=name)
    try:
        return scipy.linalg.eigh(0.5 * (a + a.T), 0.5 * (b + b.T), eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"B is not positive definite: {exc}") from exc


# =============================================================================
# Matrix Market
# =============================================================================


def write_matrix_market(matrix, path: Union[str, Path]) -> Path:
    """Write a sparse matrix in coordinate format with 17 significant digits.

    The file is written to a temporary sibling and renamed into place.

    Raises:
        ExportError: If the file cannot be written.
    """
    path = Path(path)
    matrix = as_csr(matrix)
    symmetry = "symmetric" if symmetry_defect(matrix) == 0.0 else "general"
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=path.parent or ".", prefix=".matrix_", suffix=".mtx")
        os.close(fd)
        try:
            scipy.io.mmwrite(tmp_path, matrix.tocoo(), precision=17, symmetry=symmetry)
            os.replace(tmp_path, path)
        finally:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
    except OSError as exc:
        raise ExportError(f"Failed to write Matrix Market file: {exc}", path=str(path)) from exc
    logger.info("Wrote %s matrix %s to %s", symmetry, matrix.shape, path)
    return path


def read_matrix_market(path: Union[str, Path]) -> sps.csr_matrix:
    """Read a Matrix Market coordinate file into CSR."""
    return as_csr(scipy.io.mmread(str(path)))
