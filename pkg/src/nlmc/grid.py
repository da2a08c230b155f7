"""Structured fine triangulation of the unit square, coarse blocks, oversampled regions.

The fine mesh splits each of ``n_side²`` square cells along the lower-left to
upper-right diagonal into two counterclockwise triangles.  Nodes live on the
``(n_side+1)²`` lattice and are indexed row-major from the bottom-left corner:
``node = iy * (n_side + 1) + ix``.  Triangles are indexed per cell, lower
triangle first, so triangle ``t`` belongs to square cell ``t // 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class FineMesh:
    """Uniform P1 triangulation of [0,1]²."""

    n_side: int
    nodes: np.ndarray           # (n_nodes, 2) vertex coordinates
    triangles: np.ndarray       # (n_tris, 3) vertex indices, counterclockwise
    cell_area: np.ndarray       # (n_tris,) triangle areas, all h²/2
    boundary_nodes: np.ndarray  # sorted indices of nodes on the square's edge

    @property
    def h(self) -> float:
        return 1.0 / self.n_side

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def node_index(self, ix: int, iy: int) -> int:
        """Index of the lattice node at (ix·h, iy·h)."""
        return iy * (self.n_side + 1) + ix

    def interior_nodes(self) -> np.ndarray:
        """Sorted indices of nodes strictly inside the unit square."""
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.nonzero(mask)[0]


@dataclass(frozen=True)
class CoarseGrid:
    """Partition of the fine triangles into N_side² square coarse blocks.

    Blocks are indexed row-major from the bottom-left: ``block = by * N_side + bx``.
    """

    N_side: int
    n_side: int
    refinement: int                 # fine cells per coarse block side
    blocks: tuple[np.ndarray, ...]  # triangle indices per block, sorted
    block_of_triangle: np.ndarray   # (n_tris,) inverse map

    @property
    def H(self) -> float:
        return 1.0 / self.N_side

    @property
    def n_blocks(self) -> int:
        return self.N_side ** 2

    @property
    def block_area(self) -> float:
        return self.H ** 2

    def block_xy(self, i: int) -> tuple[int, int]:
        """Column/row position (bx, by) of block i."""
        by, bx = divmod(i, self.N_side)
        return bx, by

    def center_block(self) -> int:
        """Index of the block containing the domain midpoint (ties go up-right)."""
        half = self.N_side // 2
        return half * self.N_side + half


@dataclass(frozen=True)
class OversampledRegion:
    """Coarse block i enlarged by m rings of blocks, clipped at the domain boundary.

    ``interior_nodes`` are the fine nodes strictly inside the union rectangle;
    nodes on its closure boundary (including any part of the domain boundary)
    carry the zero-Dirichlet condition and are excluded.
    """

    block: int
    layers: int
    x_blocks: tuple[int, int]   # inclusive coarse-column range
    y_blocks: tuple[int, int]   # inclusive coarse-row range
    blocks_in: np.ndarray       # sorted block indices within the rectangle
    triangles: np.ndarray       # fine triangles covered by the rectangle
    interior_nodes: np.ndarray  # sorted global node indices strictly inside

    def covers_domain(self, coarse: CoarseGrid) -> bool:
        """True when the region is the whole unit square."""
        return len(self.blocks_in) == coarse.n_blocks


def build_fine_mesh(n_side: int) -> FineMesh:
    """Build the structured triangulation with n_side cells per side."""
    if n_side < 1:
        raise InvalidArgumentError(f"n_side must be a positive integer, got {n_side}")
    k = n_side + 1
    xs = np.arange(k) / n_side
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    cy, cx = np.divmod(np.arange(n_side * n_side), n_side)
    n00 = cy * k + cx
    n10 = n00 + 1
    n01 = n00 + k
    n11 = n01 + 1
    triangles = np.empty((2 * n_side * n_side, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([n00, n10, n11])  # lower triangle
    triangles[1::2] = np.column_stack([n00, n11, n01])  # upper triangle

    cell_area = np.full(len(triangles), 0.5 / n_side ** 2)
    on_edge = (X == 0.0) | (X == 1.0) | (Y == 0.0) | (Y == 1.0)
    boundary = np.nonzero(on_edge.ravel())[0]
    return FineMesh(n_side, nodes, triangles, cell_area, boundary)


def build_coarse_grid(mesh: FineMesh, N_side: int) -> CoarseGrid:
    """Group the fine triangles into N_side² square blocks."""
    if N_side < 1:
        raise InvalidArgumentError(f"N_side must be a positive integer, got {N_side}")
    if mesh.n_side % N_side != 0:
        raise InvalidArgumentError(
            f"coarse size must divide the fine size: n_side={mesh.n_side}, N_side={N_side}")
    r = mesh.n_side // N_side
    cell = np.arange(mesh.n_side * mesh.n_side)
    cy, cx = np.divmod(cell, mesh.n_side)
    block_of_cell = (cy // r) * N_side + cx // r
    block_of_triangle = np.repeat(block_of_cell, 2)

    order = np.argsort(block_of_triangle, kind="stable")
    blocks = tuple(np.sort(chunk) for chunk in np.split(order, N_side * N_side))
    return CoarseGrid(N_side, mesh.n_side, r, blocks, block_of_triangle)


def oversample(coarse: CoarseGrid, i: int, m: int) -> OversampledRegion:
    """Enlarge block i by m coarse layers (Chebyshev rings), clipped at the boundary."""
    if not 0 <= i < coarse.n_blocks:
        raise InvalidArgumentError(f"block index {i} out of range [0, {coarse.n_blocks})")
    if m < 0:
        raise InvalidArgumentError(f"layers must be non-negative, got {m}")
    N = coarse.N_side
    bx, by = coarse.block_xy(i)
    bx0, bx1 = max(0, bx - m), min(N - 1, bx + m)
    by0, by1 = max(0, by - m), min(N - 1, by + m)

    gx, gy = np.meshgrid(np.arange(bx0, bx1 + 1), np.arange(by0, by1 + 1), indexing="xy")
    blocks_in = np.sort((gy * N + gx).ravel())

    tb = coarse.block_of_triangle
    tbx = tb % N
    tby = tb // N
    tri_mask = (tbx >= bx0) & (tbx <= bx1) & (tby >= by0) & (tby <= by1)
    triangles = np.nonzero(tri_mask)[0]

    r = coarse.refinement
    k = coarse.n_side + 1
    nx = np.arange(bx0 * r + 1, (bx1 + 1) * r)
    ny = np.arange(by0 * r + 1, (by1 + 1) * r)
    gx, gy = np.meshgrid(nx, ny, indexing="xy")
    interior = np.sort((gy * k + gx).ravel())
    return OversampledRegion(i, m, (bx0, bx1), (by0, by1), blocks_in, triangles, interior)
