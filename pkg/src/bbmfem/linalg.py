"""Direct solvers for the constant matrices of the scheme.

Every operator is factored once with SuperLU and reused for all stages.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# pivots below this fraction of the largest |U_ii| count as singular
PIVOT_RTOL = 1e-13


class FactorizationError(RuntimeError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class FactoredOperator:
    """Reusable LU factorization of a square sparse matrix."""

    def __init__(self, matrix):
        if not sp.issparse(matrix):
            matrix = sp.csc_matrix(np.atleast_2d(np.asarray(matrix, dtype=float)))
        matrix = sp.csc_matrix(matrix, dtype=float)
        n, m = matrix.shape
        if n != m:
            raise ValueError(f"matrix must be square, got {matrix.shape}")
        self.matrix = matrix
        self.dim = n
        try:
            self._lu = spla.splu(matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise FactorizationError(f"factorization failed: {exc}") from exc
        diag = np.abs(self._lu.U.diagonal())
        scale = diag.max() if n else 1.0
        bad = np.flatnonzero(diag <= PIVOT_RTOL * scale)
        if bad.size:
            # report the pivot in the original column numbering
            col = int(self._lu.perm_c[bad[0]])
            raise FactorizationError(f"numerically singular pivot at index {col}", pivot=col)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.dim:
            raise ValueError(f"rhs has length {rhs.shape[0]}, operator has dimension {self.dim}")
        return self._lu.solve(rhs)


def factor(matrix) -> FactoredOperator:
    if isinstance(matrix, SaddleOperator):
        return matrix.factor()
    return FactoredOperator(matrix)


def solve(fac: FactoredOperator, rhs) -> np.ndarray:
    return fac.solve(rhs)


class SaddleOperator:
    """Block system ``[[M_a, G/6], [G^T/6, -M_b/6]]`` of the mixed formulation.

    ``M_a`` is the mass matrix of the primal space, ``M_b`` that of the
    auxiliary (derivative) space and ``G[i, j] = (chi_i', psi_j)``.
    """

    def __init__(self, mass_a, coupling, mass_b):
        self.n_a = mass_a.shape[0]
        self.n_b = mass_b.shape[0]
        if coupling.shape != (self.n_a, self.n_b):
            raise ValueError("coupling block shape does not match the mass blocks")
        self.matrix = sp.bmat(
            [[mass_a, coupling / 6.0], [coupling.T / 6.0, -mass_b / 6.0]], format="csc"
        )
        self._factor = None

    def factor(self) -> FactoredOperator:
        if self._factor is None:
            self._factor = FactoredOperator(self.matrix)
        return self._factor

    def solve(self, rhs_a, rhs_b=None) -> tuple[np.ndarray, np.ndarray]:
        if rhs_b is None:
            rhs_b = np.zeros(self.n_b)
        x = self.factor().solve(np.concatenate([rhs_a, rhs_b]))
        return x[: self.n_a], x[self.n_a :]
