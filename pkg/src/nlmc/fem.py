"""P1 finite-element assembly on the structured mesh and the fine reference solve.

Stiffness entries use the exact edge-vector formula for linear triangles:
``K_ij = κ (e_i · e_j) / (4 |τ|)`` with ``e_i`` the edge opposite vertex i.
Loads and region moments use the exact P1 integrals for piecewise-constant
data (``∫_τ φ_p = |τ|/3``).  Dirichlet conditions are imposed by eliminating
the boundary dofs, keeping every reduced block symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConstraintDegeneracyError, InvalidArgumentError
from .grid import FineMesh, OversampledRegion
from .linalg import DEFAULT_TOL, SPDSolver
from .medium import CoefficientField, RegionMap

__all__ = [
    "Indicator", "Stiffness", "RegionMoments", "FineSolution",
    "element_stiffness", "assemble_stiffness", "assemble_load",
    "assemble_region_integrals", "assemble_region_moments",
    "element_energies", "solve_fine",
]


@dataclass(frozen=True)
class Indicator:
    """Piecewise-constant source: ``value`` on [x0,x1]×[y0,y1], zero elsewhere.

    Triangle membership is decided by the centroid, so the load is exact
    whenever the box edges align with the cell grid.
    """

    x0: float
    y0: float
    x1: float
    y1: float
    value: float = 1.0


SourceTerm = float | Indicator | Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Stiffness:
    """Assembled stiffness on the free (non-Dirichlet) dofs of a domain."""

    matrix: sp.csr_matrix           # free×free reduced matrix
    free_nodes: np.ndarray          # global node index per dof, sorted
    full: sp.csr_matrix | None      # all-node (Neumann) matrix; global assembly only

    def dof_of_node(self, n_nodes: int) -> np.ndarray:
        """Global-node → dof index map (-1 for constrained nodes)."""
        lookup = np.full(n_nodes, -1, dtype=np.int64)
        lookup[self.free_nodes] = np.arange(len(self.free_nodes))
        return lookup


@dataclass(frozen=True)
class RegionMoments:
    """Rows of constraint integrals ∫_{K_l^n} φ_p dx over a domain's free dofs."""

    matrix: sp.csr_matrix          # n_rows × n_free_dofs
    region_indices: np.ndarray     # global region index per row
    areas: np.ndarray              # full region areas |K_l^n| per row


@dataclass(frozen=True)
class FineSolution:
    """Fine-grid solution on all nodes (zero on the Dirichlet boundary)."""

    values: np.ndarray
    energy: float


def element_stiffness(vertices: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """Exact 3×3 P1 stiffness of a single triangle."""
    p = np.asarray(vertices, dtype=float)
    e = p[[2, 0, 1]] - p[[1, 2, 0]]
    area = 0.5 * abs(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])
    return kappa * (e @ e.T) / (4.0 * area)


def _triangle_matrices(mesh: FineMesh, kappa_tri: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Vectorized per-triangle 3×3 stiffness blocks for the listed triangles."""
    p = mesh.nodes[mesh.triangles[tris]]
    e = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]
    area = mesh.cell_area[tris]
    dots = np.einsum("tid,tjd->tij", e, e)
    return kappa_tri[tris, None, None] * dots / (4.0 * area)[:, None, None]


def assemble_stiffness(
    mesh: FineMesh, field: CoefficientField, domain: OversampledRegion | None = None
) -> Stiffness:
    """Assemble the stiffness matrix, reduced to the free dofs of the domain.

    Args:
        domain: when given, assembly runs over its triangles with zero
            Dirichlet values on the closure boundary; otherwise the whole
            square with its outer boundary is used.  The unreduced all-node
            matrix is retained for global assembly.
    """
    if field.n_side != mesh.n_side:
        raise InvalidArgumentError(
            f"field resolution {field.n_side} does not match mesh {mesh.n_side}")
    kappa_tri = field.triangle_values()
    tris = domain.triangles if domain is not None else np.arange(mesh.n_triangles)
    blocks = _triangle_matrices(mesh, kappa_tri, tris)

    conn = mesh.triangles[tris]
    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    full = sp.coo_matrix(
        (blocks.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()

    if domain is not None:
        free = domain.interior_nodes
        return Stiffness(full[free][:, free].tocsr(), free, None)
    free = mesh.interior_nodes()
    return Stiffness(full[free][:, free].tocsr(), free, full)


def assemble_load(mesh: FineMesh, f: SourceTerm) -> np.ndarray:
    """Assemble the load vector over all nodes: b[p] = Σ_τ f_τ |τ|/3."""
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    if isinstance(f, Indicator):
        inside = ((centroids[:, 0] >= f.x0) & (centroids[:, 0] <= f.x1)
                  & (centroids[:, 1] >= f.y0) & (centroids[:, 1] <= f.y1))
        f_tri = np.where(inside, f.value, 0.0)
    elif callable(f):
        f_tri = np.asarray(f(centroids[:, 0], centroids[:, 1]), dtype=float)
        f_tri = np.broadcast_to(f_tri, (mesh.n_triangles,)).copy()
    else:
        f_tri = np.full(mesh.n_triangles, float(f))

    b = np.zeros(mesh.n_nodes)
    contrib = f_tri * mesh.cell_area / 3.0
    for corner in range(3):
        np.add.at(b, mesh.triangles[:, corner], contrib)
    return b


def assemble_region_integrals(mesh: FineMesh, regions: RegionMap) -> sp.csr_matrix:
    """Matrix of ∫_{K_l^n} φ_p dx over all nodes, one row per region.

    Row r dotted with a nodal vector gives the exact P1 integral of that
    function over region r; dividing by the region area gives its mean.
    """
    rows, cols, vals = [], [], []
    for region in regions.regions:
        conn = mesh.triangles[region.triangles]
        rows.append(np.full(conn.size, region.index))
        cols.append(conn.ravel())
        vals.append(np.repeat(mesh.cell_area[region.triangles] / 3.0, 3))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(regions.total_regions, mesh.n_nodes)).tocsr()


def assemble_region_moments(
    mesh: FineMesh,
    regions: RegionMap,
    domain: OversampledRegion | None = None,
    integrals: sp.csr_matrix | None = None,
) -> RegionMoments:
    """Constraint rows for every region inside the domain, on its free dofs.

    Args:
        domain: oversampled region; None means the whole square.
        integrals: optional precomputed all-node integral matrix to slice.

    Raises:
        ConstraintDegeneracyError: some region's row has no free-dof support.
    """
    if integrals is None:
        integrals = assemble_region_integrals(mesh, regions)
    if domain is not None:
        in_domain = np.isin(regions.block_of(), domain.blocks_in)
        region_indices = np.nonzero(in_domain)[0]
        free = domain.interior_nodes
    else:
        region_indices = np.arange(regions.total_regions)
        free = mesh.interior_nodes()

    matrix = integrals[region_indices][:, free].tocsr()
    support = np.diff(matrix.indptr)
    for row in np.nonzero(support == 0)[0]:
        region = regions.regions[region_indices[row]]
        raise ConstraintDegeneracyError(
            f"region (block {region.block}, bin {region.bin_id}) is supported "
            "only on Dirichlet nodes; its mean constraint cannot be imposed")
    areas = np.array([regions.regions[k].area for k in region_indices])
    return RegionMoments(matrix, region_indices, areas)


def element_energies(mesh: FineMesh, field: CoefficientField, u: np.ndarray) -> np.ndarray:
    """Per-triangle energies κ_τ |∇u|² |τ| of a nodal field."""
    blocks = _triangle_matrices(mesh, field.triangle_values(), np.arange(mesh.n_triangles))
    ue = u[mesh.triangles]
    return np.einsum("ti,tij,tj->t", ue, blocks, ue)


def solve_fine(
    stiffness: Stiffness, load: np.ndarray, tol: float = DEFAULT_TOL
) -> FineSolution:
    """Solve the reduced SPD system for the fine reference solution.

    Args:
        load: all-node load vector; it is restricted to the free dofs here.
    """
    load = np.asarray(load, dtype=float)
    x = SPDSolver(stiffness.matrix, tol).solve(load[stiffness.free_nodes])
    values = np.zeros(len(load))
    values[stiffness.free_nodes] = x
    energy = float(x @ (stiffness.matrix @ x))
    return FineSolution(values, energy)
