"""High-contrast coefficient fields, contrast bins, and the continuum decomposition.

A coefficient field assigns one conductivity value per square fine cell (both
triangles of a cell share it), stored row-major from the bottom-left cell —
the same layout as the plain-text medium file format:

    line 1:  "nx ny"          (nx == ny, the cell resolution)
    then  :  nx·ny positive decimal values, whitespace separated.

Each coarse block is decomposed into continua ("regions") by binning its κ
values; every nonempty bin contributes one region and one coarse degree of
freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import BinCoverageError, InvalidArgumentError, MediumFormatError
from .grid import CoarseGrid

__all__ = [
    "Rect", "Polyline", "CoefficientField", "ContrastBins", "Region", "RegionMap",
    "coefficient_field", "contrast_bins", "exact_bins", "load_medium", "save_medium",
    "generate_channel_medium", "generate_three_continuum_medium", "decompose_regions",
]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0,x1]×[y0,y1]; cells are inside when their center is."""

    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class Polyline:
    """Tube of the given width around a piecewise-linear path."""

    points: tuple[tuple[float, float], ...]
    width: float


Shape = Rect | Polyline


def _validate_shape(shape: Shape) -> None:
    if isinstance(shape, Rect):
        coords = (shape.x0, shape.y0, shape.x1, shape.y1)
        if not all(0.0 <= c <= 1.0 for c in coords):
            raise InvalidArgumentError(f"rectangle outside the unit square: {shape}")
        if shape.x0 > shape.x1 or shape.y0 > shape.y1:
            raise InvalidArgumentError(f"rectangle corners out of order: {shape}")
    elif isinstance(shape, Polyline):
        if len(shape.points) < 2:
            raise InvalidArgumentError("polyline needs at least two points")
        if shape.width <= 0:
            raise InvalidArgumentError(f"polyline width must be positive, got {shape.width}")
        for p in shape.points:
            if not (0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0):
                raise InvalidArgumentError(f"polyline point outside the unit square: {p}")
    else:
        raise InvalidArgumentError(f"unknown shape type: {type(shape).__name__}")


def _shape_mask(shape: Shape, n_side: int) -> np.ndarray:
    """Boolean (n,n) mask of the cells whose center lies inside the shape."""
    c = (np.arange(n_side) + 0.5) / n_side
    X, Y = np.meshgrid(c, c, indexing="xy")
    if isinstance(shape, Rect):
        return (X >= shape.x0) & (X <= shape.x1) & (Y >= shape.y0) & (Y <= shape.y1)
    mask = np.zeros((n_side, n_side), dtype=bool)
    P = np.stack([X, Y], axis=-1)
    for a, b in zip(shape.points[:-1], shape.points[1:]):
        a = np.asarray(a, dtype=float)
        ab = np.asarray(b, dtype=float) - a
        denom = float(ab @ ab)
        if denom == 0.0:
            d = np.linalg.norm(P - a, axis=-1)
        else:
            t = np.clip(((P - a) @ ab) / denom, 0.0, 1.0)
            d = np.linalg.norm(P - (a + t[..., None] * ab), axis=-1)
        mask |= d <= shape.width / 2
    return mask


@dataclass(frozen=True)
class CoefficientField:
    """Per-cell conductivity κ on the n_side×n_side cell grid, ``values[iy, ix]``."""

    n_side: int
    values: np.ndarray
    kappa_min: float
    kappa_max: float

    @property
    def contrast(self) -> float:
        return self.kappa_max / self.kappa_min

    def cell_values(self) -> np.ndarray:
        """Flat per-cell values in cell-index order (row-major from bottom-left)."""
        return self.values.ravel()

    def triangle_values(self) -> np.ndarray:
        """Per-triangle values; both triangles of a cell share the cell's κ."""
        return np.repeat(self.values.ravel(), 2)


def coefficient_field(n_side: int, values: np.ndarray) -> CoefficientField:
    """Validate and wrap an (n_side, n_side) array of positive conductivities."""
    values = np.asarray(values, dtype=float)
    if values.shape != (n_side, n_side):
        raise InvalidArgumentError(
            f"expected a {n_side}x{n_side} value grid, got shape {values.shape}")
    if not np.all(values > 0.0):
        bad = float(values[values <= 0.0].flat[0])
        raise InvalidArgumentError(f"conductivities must be positive, found {bad}")
    return CoefficientField(n_side, values, float(values.min()), float(values.max()))


def load_medium(path: str | Path, n_side: int | None = None) -> CoefficientField:
    """Read a coefficient field from the plain-text medium format.

    Args:
        path: file to read.
        n_side: expected resolution; mismatches are rejected when given.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    header_line = 0
    while header_line < len(lines) and not lines[header_line].split():
        header_line += 1
    if header_line == len(lines):
        raise MediumFormatError(f"{path}: empty file")

    header = lines[header_line].split()
    if len(header) != 2:
        raise MediumFormatError(
            f"{path}:{header_line + 1}: header must be 'nx ny', got {lines[header_line]!r}")
    try:
        nx, ny = int(header[0]), int(header[1])
    except ValueError:
        raise MediumFormatError(
            f"{path}:{header_line + 1}: header must hold two integers, got "
            f"{lines[header_line]!r}") from None
    if nx != ny:
        raise MediumFormatError(f"{path}:{header_line + 1}: grid must be square, got {nx}x{ny}")
    if nx < 1:
        raise MediumFormatError(f"{path}:{header_line + 1}: resolution must be positive, got {nx}")
    if n_side is not None and nx != n_side:
        raise MediumFormatError(
            f"{path}:{header_line + 1}: expected resolution {n_side}, file declares {nx}")

    expected = nx * ny
    values = np.empty(expected)
    count = 0
    for lineno in range(header_line + 1, len(lines)):
        for token in lines[lineno].split():
            if count >= expected:
                raise MediumFormatError(
                    f"{path}:{lineno + 1}: more than {expected} values in file")
            try:
                v = float(token)
            except ValueError:
                raise MediumFormatError(
                    f"{path}:{lineno + 1}: not a number: {token!r}") from None
            if not v > 0.0:
                raise MediumFormatError(
                    f"{path}:{lineno + 1}: coefficient must be positive, got {token}")
            values[count] = v
            count += 1
    if count != expected:
        raise MediumFormatError(
            f"{path}:{len(lines)}: expected {expected} values, file holds {count}")
    return coefficient_field(nx, values.reshape(ny, nx))


def save_medium(path: str | Path, field: CoefficientField) -> None:
    """Write a coefficient field in the plain-text medium format."""
    n = field.n_side
    rows = [f"{n} {n}"]
    rows.extend(" ".join(f"{v:.17g}" for v in row) for row in field.values)
    Path(path).write_text("\n".join(rows) + "\n")


def generate_channel_medium(
    n_side: int,
    background: float,
    channel: float,
    shapes: Sequence[Shape],
    seed: int | None = None,
) -> CoefficientField:
    """Binary medium: κ = channel inside the shapes, background elsewhere.

    The construction is deterministic; ``seed`` is accepted for interface
    symmetry with the random generator and is unused.
    """
    del seed
    if background <= 0 or channel <= 0:
        raise InvalidArgumentError(
            f"background and channel values must be positive, got {background}, {channel}")
    mask = np.zeros((n_side, n_side), dtype=bool)
    for shape in shapes:
        _validate_shape(shape)
        mask |= _shape_mask(shape, n_side)
    return coefficient_field(n_side, np.where(mask, channel, background))


def generate_three_continuum_medium(
    n_side: int,
    shapes: Sequence[tuple[Shape, str]],
    background_range: tuple[float, float] = (1.0, 10.0),
    mid: float = 1e3,
    high: float = 1e4,
    seed: int = 0,
) -> CoefficientField:
    """Random background in ``background_range`` with shapes set to mid/high values.

    Args:
        shapes: pairs (shape, level) with level "mid" or "high"; later shapes
            overwrite earlier ones where they overlap.
        seed: feeds the uniform background generator; same seed, same field.
    """
    lo, hi = background_range
    if not 0 < lo < hi:
        raise InvalidArgumentError(f"background range must satisfy 0 < lo < hi, got {lo}, {hi}")
    if mid <= 0 or high <= 0:
        raise InvalidArgumentError(f"mid and high values must be positive, got {mid}, {high}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(lo, hi, size=(n_side, n_side))
    levels = {"mid": mid, "high": high}
    for shape, level in shapes:
        if level not in levels:
            raise InvalidArgumentError(f"shape level must be 'mid' or 'high', got {level!r}")
        _validate_shape(shape)
        values[_shape_mask(shape, n_side)] = levels[level]
    return coefficient_field(n_side, values)


@dataclass(frozen=True)
class ContrastBins:
    """Ordered, disjoint value intervals [lo, hi]; every κ must fall in exactly one."""

    intervals: tuple[tuple[float, float], ...]

    @property
    def n_bins(self) -> int:
        return len(self.intervals)

    def classify(self, values: np.ndarray) -> np.ndarray:
        """Bin index per value; raises when a value is uncovered."""
        values = np.asarray(values, dtype=float)
        los = np.array([lo for lo, _ in self.intervals])
        his = np.array([hi for _, hi in self.intervals])
        idx = np.searchsorted(los, values, side="right") - 1
        inside = (idx >= 0) & (values <= his[np.clip(idx, 0, len(his) - 1)])
        if not np.all(inside):
            bad = float(values[~inside].flat[0])
            raise BinCoverageError(f"coefficient value {bad!r} is not covered by any bin")
        return idx


def contrast_bins(intervals: Sequence[Sequence[float]]) -> ContrastBins:
    """Validate and wrap a list of [lo, hi] intervals (ascending, disjoint)."""
    if not intervals:
        raise InvalidArgumentError("at least one bin is required")
    pairs = []
    for iv in intervals:
        lo, hi = float(iv[0]), float(iv[1])
        if lo <= 0:
            raise InvalidArgumentError(f"bin bounds must be positive, got [{lo}, {hi}]")
        if lo > hi:
            raise InvalidArgumentError(f"bin bounds out of order: [{lo}, {hi}]")
        pairs.append((lo, hi))
    for (lo0, hi0), (lo1, _) in zip(pairs, pairs[1:]):
        if hi0 >= lo1:
            raise InvalidArgumentError(
                f"bins must be ascending and disjoint: [.., {hi0}] overlaps [{lo1}, ..]")
    return ContrastBins(tuple(pairs))


def exact_bins(*values: float) -> ContrastBins:
    """Point bins [v, v] for the given distinct values, sorted ascending."""
    return contrast_bins([(v, v) for v in sorted(set(values))])


@dataclass(frozen=True)
class Region:
    """One continuum K_i^j: the cells of block i whose κ falls in one bin."""

    index: int              # global region index (block-major, then bin order)
    block: int
    bin_id: int
    component: int          # connected-component id, 0 union-wise
    triangles: np.ndarray
    area: float
    c_ratio: float          # max/min of κ actually occurring inside


@dataclass(frozen=True)
class RegionMap:
    """All regions of all blocks, ordered block-major then by bin (then component)."""

    regions: tuple[Region, ...]
    by_block: tuple[tuple[int, ...], ...]   # global region indices per block
    c_ratio: float                          # max over regions

    @property
    def total_regions(self) -> int:
        return len(self.regions)

    def areas(self) -> np.ndarray:
        return np.array([r.area for r in self.regions])

    def block_of(self) -> np.ndarray:
        return np.array([r.block for r in self.regions])

    def local_index(self, block: int, j: int) -> int:
        """Global index of the j-th region of a block."""
        if not 0 <= block < len(self.by_block):
            raise InvalidArgumentError(
                f"block index {block} out of range for {len(self.by_block)} blocks")
        locs = self.by_block[block]
        if not 0 <= j < len(locs):
            raise InvalidArgumentError(
                f"block {block} has {len(locs)} regions, index {j} out of range")
        return locs[j]


def decompose_regions(
    field: CoefficientField,
    coarse: CoarseGrid,
    bins: ContrastBins,
    split_components: bool = False,
) -> RegionMap:
    """Decompose every coarse block into one region per nonempty contrast bin.

    With ``split_components`` each bin is further split into 4-connected cell
    components, giving one region (and one coarse dof) per component.
    """
    n = field.n_side
    r = coarse.refinement
    cell_bin = bins.classify(field.cell_values()).reshape(n, n)
    cell_values = field.values
    tri_area = 0.5 / n ** 2

    regions: list[Region] = []
    by_block: list[tuple[int, ...]] = []
    for blk in range(coarse.n_blocks):
        bx, by = coarse.block_xy(blk)
        sl = (slice(by * r, (by + 1) * r), slice(bx * r, (bx + 1) * r))
        local_bins = cell_bin[sl]
        local_vals = cell_values[sl]
        # global flat cell index of every cell in this block
        gx, gy = np.meshgrid(np.arange(bx * r, (bx + 1) * r),
                             np.arange(by * r, (by + 1) * r), indexing="xy")
        local_cells = gy * n + gx

        indices: list[int] = []
        for bin_id in np.unique(local_bins):
            bin_mask = local_bins == bin_id
            if split_components:
                labels, n_comp = ndimage.label(bin_mask)
                groups = [(comp, labels == comp + 1) for comp in range(n_comp)]
            else:
                groups = [(0, bin_mask)]
            for comp, mask in groups:
                cells = local_cells[mask]
                tris = np.sort(np.concatenate([2 * cells, 2 * cells + 1]))
                vals = local_vals[mask]
                region = Region(
                    index=len(regions),
                    block=blk,
                    bin_id=int(bin_id),
                    component=int(comp),
                    triangles=tris,
                    area=len(tris) * tri_area,
                    c_ratio=float(vals.max() / vals.min()),
                )
                indices.append(region.index)
                regions.append(region)
        by_block.append(tuple(indices))

    global_ratio = max(r_.c_ratio for r_ in regions)
    return RegionMap(tuple(regions), tuple(by_block), global_ratio)
