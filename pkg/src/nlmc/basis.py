"""NLMC basis construction, the projection matrix R, coarse solve, and downscaling.

Each coarse region K_i^j carries one multiscale basis function: the minimizer
of the energy a(ψ,ψ) = ∫ κ|∇ψ|² over H¹₀ of the oversampled region K_{i,m},
subject to prescribed mean values — mean 1 on K_i^j and mean 0 on every other
region inside K_{i,m}.  Stacking all basis vectors as rows gives R; the coarse
system is R A Rᵀ ū = R b, and ū holds the solution's mean over each region.
Multipliers are reported in the raw-integral convention (they pair with
∫_{K_l^n} v dx).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import InvalidArgumentError, SolverError
from .grid import CoarseGrid, FineMesh, OversampledRegion, oversample
from .linalg import DEFAULT_TOL, SaddleSolver, SPDSolver, check_symmetry
from .medium import CoefficientField, RegionMap

__all__ = [
    "BasisFunction", "ProjectionOperator", "UpscaledSolution", "DEFAULT_LAYER_OFFSET",
    "auto_layers", "build_local_basis", "build_all_local_bases", "build_global_basis",
    "build_projection", "upscale_solve",
]

logger = logging.getLogger(__name__)

# Calibrated so that a contrast-1e4 medium on a 10×10 coarse grid gets 4 layers.
DEFAULT_LAYER_OFFSET = -13

_GLOBAL_COST_WARN = 400  # regions; beyond this a global KKT factor gets expensive


@dataclass(frozen=True)
class BasisFunction:
    """One multiscale basis ψ_{i,ms}^{(j)}, stored sparsely by support."""

    block: int                      # owner block i
    region: int                     # owner region j, local to the block
    layers: int | None              # oversampling layers m; None for a global basis
    support: np.ndarray             # global node indices that may be nonzero
    coeffs: np.ndarray              # nodal values on the support
    multipliers: np.ndarray         # λ per constraint, raw-integral convention
    constraint_regions: np.ndarray  # global region index per constraint row
    energy: float                   # a(ψ, ψ)

    def dense(self, n_nodes: int) -> np.ndarray:
        """Expand to a full nodal vector (zero outside the support)."""
        out = np.zeros(n_nodes)
        out[self.support] = self.coeffs
        return out


@dataclass(frozen=True)
class ProjectionOperator:
    """Sparse R whose rows are the basis vectors, over the interior dofs of the square."""

    R: sp.csr_matrix
    free_nodes: np.ndarray   # global node index per column
    n_nodes: int


@dataclass(frozen=True)
class UpscaledSolution:
    """Coarse solution ū (one mean value per region) and its downscaled field."""

    ubar: np.ndarray
    u_ms: np.ndarray              # all fine nodes, zero on the boundary
    coarse_matrix: sp.csr_matrix  # R A Rᵀ
    coarse_rhs: np.ndarray        # R b


def auto_layers(
    kappa_max: float, H: float, N_side: int | None = None, offset: int = DEFAULT_LAYER_OFFSET
) -> int:
    """Layer count from the log-scaling rule: ceil(log2(κ_max/H)) + offset.

    One extra layer per doubling of κ_max or halving of H.  The result is at
    least 1 and, when N_side is given, clipped at N_side-1 (covering the whole
    domain).  The offset absorbs the rule's unspecified constant; the default
    is calibrated at desk scale.
    """
    if kappa_max <= 0 or H <= 0:
        raise InvalidArgumentError(
            f"kappa_max and H must be positive, got {kappa_max}, {H}")
    m = max(1, math.ceil(math.log2(kappa_max / H)) + offset)
    if N_side is not None:
        m = min(m, max(N_side - 1, 0))
    return m


def _region_context(
    mesh: FineMesh,
    field: CoefficientField,
    regions: RegionMap,
    domain: OversampledRegion,
    A_full: sp.csr_matrix,
    integrals: sp.csr_matrix,
    tol: float,
) -> tuple[SaddleSolver, fem.RegionMoments, sp.csr_matrix]:
    """Local stiffness, constraint rows, and a factorized KKT for one region."""
    free = domain.interior_nodes
    A_loc = A_full[free][:, free].tocsr()
    moments = fem.assemble_region_moments(mesh, regions, domain, integrals=integrals)
    labels = tuple(
        f"(block {regions.regions[k].block}, bin {regions.regions[k].bin_id})"
        for k in moments.region_indices)
    solver = SaddleSolver(
        A_loc, moments.matrix, labels=labels, row_scale=moments.areas, tol=tol)
    return solver, moments, A_loc


def _solve_block_bases(
    mesh: FineMesh,
    field: CoefficientField,
    coarse: CoarseGrid,
    regions: RegionMap,
    i: int,
    m: int,
    A_full: sp.csr_matrix,
    integrals: sp.csr_matrix,
    tol: float,
) -> list[BasisFunction]:
    """All bases owned by block i at m layers, sharing one KKT factorization."""
    domain = oversample(coarse, i, m)
    solver, moments, A_loc = _region_context(
        mesh, field, regions, domain, A_full, integrals, tol)

    out = []
    owned = regions.by_block[i]
    for j, global_idx in enumerate(owned):
        rhs_constraint = np.where(
            moments.region_indices == global_idx, moments.areas, 0.0)
        x, lam = solver.solve(np.zeros(A_loc.shape[0]), rhs_constraint)
        out.append(BasisFunction(
            block=i,
            region=j,
            layers=m,
            support=domain.interior_nodes,
            coeffs=x,
            multipliers=lam,
            constraint_regions=moments.region_indices,
            energy=float(x @ (A_loc @ x)),
        ))
    return out


def build_local_basis(
    mesh: FineMesh,
    field: CoefficientField,
    coarse: CoarseGrid,
    regions: RegionMap,
    i: int,
    j: int,
    m: int,
    tol: float = DEFAULT_TOL,
) -> BasisFunction:
    """Construct ψ_{i,ms}^{(j)} on the oversampled region K_{i,m}."""
    regions.local_index(i, j)  # validates (i, j)
    if m == 0:
        logger.warning("layers m=0 restricts the basis to a single block; "
                       "expect poor accuracy")
    stiffness = fem.assemble_stiffness(mesh, field)
    integrals = fem.assemble_region_integrals(mesh, regions)
    bases = _solve_block_bases(
        mesh, field, coarse, regions, i, m, stiffness.full, integrals, tol)
    return bases[j]


def build_all_local_bases(
    mesh: FineMesh,
    field: CoefficientField,
    coarse: CoarseGrid,
    regions: RegionMap,
    m: int,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> list[BasisFunction]:
    """All local bases at m layers, ordered block-major then by region.

    Blocks are independent and may build concurrently; results are merged in
    block order so the outcome does not depend on scheduling.
    """
    if m == 0:
        logger.warning("layers m=0 restricts bases to single blocks; expect poor accuracy")
    stiffness = fem.assemble_stiffness(mesh, field)
    integrals = fem.assemble_region_integrals(mesh, regions)

    def run(i: int) -> list[BasisFunction]:
        return _solve_block_bases(
            mesh, field, coarse, regions, i, m, stiffness.full, integrals, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_block = list(pool.map(run, range(coarse.n_blocks)))
    else:
        per_block = [run(i) for i in range(coarse.n_blocks)]
    return [basis for block in per_block for basis in block]


def build_global_basis(
    mesh: FineMesh,
    field: CoefficientField,
    coarse: CoarseGrid,
    regions: RegionMap,
    i: int,
    j: int,
    tol: float = DEFAULT_TOL,
) -> BasisFunction:
    """Construct the global basis ψ_i^{(j)}: the same minimization posed on all of Ω."""
    regions.local_index(i, j)
    if regions.total_regions > _GLOBAL_COST_WARN:
        logger.warning("global basis couples all %d regions; expect a costly solve",
                       regions.total_regions)
    bases = _solve_block_bases(
        mesh, field, coarse, regions, i, coarse.N_side,
        fem.assemble_stiffness(mesh, field).full,
        fem.assemble_region_integrals(mesh, regions), tol)
    basis = bases[j]
    return BasisFunction(
        block=basis.block, region=basis.region, layers=None,
        support=basis.support, coeffs=basis.coeffs, multipliers=basis.multipliers,
        constraint_regions=basis.constraint_regions, energy=basis.energy)


def build_projection(
    bases: list[BasisFunction], regions: RegionMap, free_nodes: np.ndarray, n_nodes: int
) -> ProjectionOperator:
    """Stack the basis vectors as the rows of R (one row per region).

    Args:
        bases: one basis per region in global order (block-major, bin order).
        free_nodes: interior dofs of the square, the columns of R.
    """
    if len(bases) != regions.total_regions:
        raise InvalidArgumentError(
            f"expected {regions.total_regions} bases, got {len(bases)}")
    dof_of = np.full(n_nodes, -1, dtype=np.int64)
    dof_of[free_nodes] = np.arange(len(free_nodes))

    rows, cols, vals = [], [], []
    for k, basis in enumerate(bases):
        expected = regions.regions[k]
        if basis.block != expected.block or regions.local_index(basis.block, basis.region) != k:
            raise InvalidArgumentError(
                f"basis {k} is owned by (block {basis.block}, region {basis.region}); "
                f"expected the basis of (block {expected.block}, "
                f"local region {regions.by_block[expected.block].index(k)})")
        dofs = dof_of[basis.support]
        if np.any(dofs < 0):
            raise InvalidArgumentError(
                f"basis of (block {basis.block}, region {basis.region}) is supported "
                "on constrained nodes")
        rows.append(np.full(len(dofs), k))
        cols.append(dofs)
        vals.append(basis.coeffs)
    R = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(regions.total_regions, len(free_nodes))).tocsr()
    return ProjectionOperator(R, free_nodes, n_nodes)


def upscale_solve(
    projection: ProjectionOperator,
    A: sp.csr_matrix,
    b: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> UpscaledSolution:
    """Solve R A Rᵀ ū = R b and downscale to u_ms = Rᵀ ū.

    Args:
        A: stiffness on the interior dofs (the columns of R).
        b: load on the interior dofs.
    """
    R = projection.R
    if A.shape[0] != R.shape[1] or len(b) != R.shape[1]:
        raise InvalidArgumentError(
            f"dimension mismatch: R is {R.shape}, A is {A.shape}, b has {len(b)}")
    coarse_matrix = (R @ A @ R.T).tocsr()
    check_symmetry(coarse_matrix, rtol=1e-10)
    coarse_rhs = R @ b
    try:
        solver = SPDSolver(coarse_matrix, tol)
        pivot = solver.smallest_pivot()
        scale = np.abs(coarse_matrix.diagonal()).max()
        if pivot <= 1e-14 * scale:
            raise SolverError(
                f"coarse matrix is numerically singular (smallest pivot {pivot:.3e}); "
                "some regions are likely decoupled — increase the oversampling layers")
        ubar = solver.solve(coarse_rhs)
    except SolverError as exc:
        if "singular" in str(exc).lower():
            raise SolverError(
                f"coarse matrix is singular ({exc}); increase the oversampling layers"
            ) from exc
        raise
    u_ms = np.zeros(projection.n_nodes)
    u_ms[projection.free_nodes] = R.T @ ubar
    return UpscaledSolution(ubar, u_ms, coarse_matrix, coarse_rhs)
