"""Sparse SPD solves and symmetric saddle-point systems with equality constraints.

Systems are solved by a sparse LU factorization followed by a few steps of
iterative refinement; a solve is accepted when its normwise backward error
reaches the requested tolerance.  Saddle systems

    [ A  Bᵀ ] [x]   [ rhs_primal     ]
    [ B  0  ] [λ] = [ rhs_constraint ]

are factorized once and may be solved for many right-hand sides.  Constraint
rows are rescaled internally (by row norm, or by caller-provided scales such
as region areas) for conditioning; returned multipliers are in the caller's
row convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConstraintDegeneracyError, InvalidArgumentError, SolverError

DEFAULT_TOL = 1e-10
_MAX_REFINE = 3


def check_symmetry(A: sp.spmatrix, rtol: float = 1e-12) -> None:
    """Raise unless A is entrywise symmetric to the given relative tolerance."""
    scale = abs(A).max() if A.nnz else 0.0
    gap = abs(A - A.T).max() if A.nnz else 0.0
    if gap > rtol * scale:
        raise InvalidArgumentError(
            f"matrix is not symmetric: max |A - A^T| = {gap:.3e} vs {rtol:.0e} * {scale:.3e}")


def _refined_solve(
    lu, K: sp.spmatrix, rhs: np.ndarray, tol: float, norm_K: float | None = None
) -> tuple[np.ndarray, float]:
    """LU solve with iterative refinement; returns (solution, backward error)."""
    x = lu.solve(rhs)
    if norm_K is None:
        norm_K = spla.norm(K, np.inf)
    norm_rhs = np.linalg.norm(rhs, np.inf)
    backward = np.inf
    for _ in range(_MAX_REFINE + 1):
        r = rhs - K @ x
        denom = norm_K * np.linalg.norm(x, np.inf) + norm_rhs
        backward = np.linalg.norm(r, np.inf) / denom if denom > 0 else 0.0
        if backward <= tol:
            break
        x = x + lu.solve(r)
    return x, backward


class SPDSolver:
    """Direct factorization of a sparse symmetric positive definite matrix."""

    def __init__(self, A: sp.spmatrix, tol: float = DEFAULT_TOL):
        self.tol = tol
        self._A = sp.csc_matrix(A)
        try:
            self._lu = spla.splu(self._A)
        except RuntimeError as exc:
            raise SolverError(f"SPD factorization failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x, backward = _refined_solve(self._lu, self._A, b, self.tol)
        if backward > self.tol:
            raise SolverError(
                f"SPD solve did not reach tolerance {self.tol:.1e}: "
                f"backward error {backward:.3e}")
        return x

    def smallest_pivot(self) -> float:
        return float(np.abs(self._lu.U.diagonal()).min())


def solve_spd(A: sp.spmatrix, b: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve Ax = b for SPD A at the requested relative residual."""
    return SPDSolver(A, tol).solve(b)


@dataclass
class SaddleSystem:
    """One constrained quadratic minimization: SPD block, constraint rows, right-hand sides."""

    A: sp.spmatrix
    B: sp.spmatrix
    rhs_primal: np.ndarray
    rhs_constraint: np.ndarray
    labels: tuple[str, ...] | None = None      # per-constraint names for diagnostics
    row_scale: np.ndarray | None = None        # e.g. region areas; default: row norms


class SaddleSolver:
    """Factorization of the KKT matrix [[A, Bᵀ], [B, 0]], reusable across right-hand sides."""

    def __init__(
        self,
        A: sp.spmatrix,
        B: sp.spmatrix,
        *,
        labels: tuple[str, ...] | None = None,
        row_scale: np.ndarray | None = None,
        tol: float = DEFAULT_TOL,
    ):
        check_symmetry(A)
        B = sp.csr_matrix(B)
        self.tol = tol
        self.n_primal = A.shape[0]
        self.n_constraints = B.shape[0]

        row_norms = np.sqrt(np.asarray(B.multiply(B).sum(axis=1)).ravel())
        for row in np.nonzero(row_norms == 0.0)[0]:
            name = labels[row] if labels else f"row {row}"
            raise ConstraintDegeneracyError(
                f"constraint {name} has no support on the interior dofs "
                "(the region touches only Dirichlet nodes)")
        self._scale = np.asarray(row_scale, dtype=float) if row_scale is not None else row_norms
        if np.any(self._scale <= 0.0):
            raise InvalidArgumentError("row scales must be positive")

        self._B_scaled = sp.csr_matrix(sp.diags(1.0 / self._scale) @ B)
        self._K = sp.bmat([[A, self._B_scaled.T], [self._B_scaled, None]], format="csc")
        self._norm_K = spla.norm(self._K, np.inf)
        try:
            self._lu = spla.splu(self._K)
        except RuntimeError as exc:
            raise SolverError(
                f"saddle factorization failed ({exc}); constraints may be linearly dependent"
            ) from exc

    def solve(
        self, rhs_primal: np.ndarray, rhs_constraint: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (primal, multipliers); multipliers follow the caller's row convention."""
        rhs_c_scaled = np.asarray(rhs_constraint, dtype=float) / self._scale
        rhs = np.concatenate([np.asarray(rhs_primal, dtype=float), rhs_c_scaled])
        z, backward = _refined_solve(self._lu, self._K, rhs, self.tol, self._norm_K)
        if not np.all(np.isfinite(z)):
            raise SolverError("saddle solve produced non-finite values; "
                              "constraints may be linearly dependent")
        if backward > self.tol:
            raise SolverError(
                f"saddle solve did not reach tolerance {self.tol:.1e}: "
                f"backward error {backward:.3e}")
        # The constraint block is well scaled, so enforce it near-absolutely.
        # A backward-stable solve can leave it short when the primal block
        # dominates ‖K‖ (high contrast); refine further, aiming at the gap.
        bound = self.tol * (1.0 + np.linalg.norm(rhs_c_scaled, np.inf))
        gap = self._constraint_gap(z, rhs_c_scaled)
        for _ in range(_MAX_REFINE):
            if gap <= bound:
                break
            z = z + self._lu.solve(rhs - self._K @ z)
            gap = self._constraint_gap(z, rhs_c_scaled)
        if not np.all(np.isfinite(z)):
            raise SolverError("saddle solve produced non-finite values; "
                              "constraints may be linearly dependent")
        if gap > bound:
            raise SolverError(f"constraints violated after solve: residual {gap:.3e}")
        return z[:self.n_primal], z[self.n_primal:] / self._scale

    def _constraint_gap(self, z: np.ndarray, rhs_c_scaled: np.ndarray) -> float:
        return float(np.linalg.norm(
            self._B_scaled @ z[:self.n_primal] - rhs_c_scaled, np.inf))


def solve_saddle(system: SaddleSystem, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Solve one saddle system; see SaddleSolver for the reusable form."""
    solver = SaddleSolver(
        system.A, system.B, labels=system.labels, row_scale=system.row_scale, tol=tol)
    return solver.solve(system.rhs_primal, system.rhs_constraint)
