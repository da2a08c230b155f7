"""Error metrics, basis-decay profiling, and sweep experiments.

The headline error is the relative coarse-average L² error between the fine
reference and the downscaled multiscale solution,

    e_L² = sqrt( Σ_K |K| (ū_f^K − ū_ms^K)² / Σ_K |K| (ū_f^K)² ),

with ū^K the mean over the coarse block K.  The squared ratio is reported
alongside, together with the relative energy-norm and fine-grid L² errors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import config as cfg
from . import fem
from .basis import (BasisFunction, ProjectionOperator, UpscaledSolution, auto_layers,
                    build_all_local_bases, build_projection, upscale_solve)
from .errors import InvalidArgumentError, NLMCError, UndefinedMetricError
from .grid import CoarseGrid, FineMesh, build_coarse_grid, build_fine_mesh
from .medium import CoefficientField, ContrastBins, RegionMap, decompose_regions

__all__ = [
    "L2Error", "ErrorReport", "Timings", "ExperimentResult", "SweepRow", "SweepTable",
    "coarse_cell_averages", "region_averages", "relative_L2_error", "energy_error",
    "fine_L2_error", "basis_decay_profile", "compute_errors", "run_experiment",
    "derive_config", "sweep",
]


class L2Error(NamedTuple):
    value: float     # sqrt of the weighted ratio — the headline number
    squared: float   # the raw ratio


@dataclass(frozen=True)
class ErrorReport:
    """All error metrics of one experiment, with the grid/medium metadata."""

    e_L2: float                # relative coarse-average L² error
    e_L2_sq: float             # its square (the raw ratio)
    e_energy: float            # relative energy-norm error of u_ms vs u_f
    e_L2_fine: float           # relative fine-grid L² error of u_ms vs u_f
    region_mean_error: float   # max |mean of u_ms over K_i^j − ū_ij|
    h: float
    H: float
    layers: int
    contrast: float
    bins: tuple[tuple[float, float], ...]
    total_regions: int


@dataclass(frozen=True)
class Timings:
    fine_seconds: float
    basis_seconds: float
    coarse_seconds: float
    total_seconds: float


@dataclass(frozen=True)
class ExperimentResult:
    """Everything one full upscaling run produced."""

    config: cfg.ExperimentConfig
    mesh: FineMesh
    coarse: CoarseGrid
    field: CoefficientField
    bins: ContrastBins
    regions: RegionMap
    layers: int
    fine: fem.FineSolution
    stiffness: fem.Stiffness
    load: np.ndarray
    bases: list[BasisFunction]
    projection: ProjectionOperator
    upscaled: UpscaledSolution
    report: ErrorReport
    timings: Timings


@dataclass(frozen=True)
class SweepRow:
    parameter: float
    e_L2: float
    e_L2_sq: float
    e_energy: float
    seconds: float
    error: str | None = None           # failure message; metrics are NaN when set
    report: ErrorReport | None = None  # full report of the row's run, when it succeeded


@dataclass(frozen=True)
class SweepTable:
    axis: str
    rows: tuple[SweepRow, ...]


def coarse_cell_averages(u: np.ndarray, mesh: FineMesh, coarse: CoarseGrid) -> np.ndarray:
    """Mean of a P1 field over each coarse block, by exact integration."""
    tri_means = u[mesh.triangles].mean(axis=1)
    sums = np.bincount(coarse.block_of_triangle, weights=tri_means * mesh.cell_area,
                       minlength=coarse.n_blocks)
    return sums / coarse.block_area


def region_averages(
    u: np.ndarray,
    mesh: FineMesh,
    regions: RegionMap,
    integrals: sp.csr_matrix | None = None,
) -> np.ndarray:
    """Mean of a P1 field over each region, by exact integration."""
    if integrals is None:
        integrals = fem.assemble_region_integrals(mesh, regions)
    return (integrals @ u) / regions.areas()


def relative_L2_error(
    ubar_f: np.ndarray, ubar_ms: np.ndarray, areas: np.ndarray
) -> L2Error:
    """Area-weighted relative L² distance between two sets of block averages."""
    ubar_f = np.asarray(ubar_f, dtype=float)
    ubar_ms = np.asarray(ubar_ms, dtype=float)
    if ubar_f.shape != ubar_ms.shape or ubar_f.shape != np.shape(areas):
        raise InvalidArgumentError(
            f"average vectors and areas must agree in shape, got {ubar_f.shape}, "
            f"{ubar_ms.shape}, {np.shape(areas)}")
    denom = float(areas @ ubar_f**2)
    if denom == 0.0:
        raise UndefinedMetricError(
            "relative L² error is undefined: the reference averages are all zero")
    ratio = float(areas @ (ubar_f - ubar_ms)**2) / denom
    return L2Error(float(np.sqrt(ratio)), ratio)


def energy_error(u_f: np.ndarray, u_ms: np.ndarray, A_full: sp.spmatrix) -> float:
    """Relative error in the energy norm, sqrt(dᵀA d / u_fᵀA u_f)."""
    d = u_f - u_ms
    denom = float(u_f @ (A_full @ u_f))
    if denom == 0.0:
        raise UndefinedMetricError(
            "energy error is undefined: the reference has zero energy")
    return float(np.sqrt(max(d @ (A_full @ d), 0.0) / denom))


def fine_L2_error(u_f: np.ndarray, u_ms: np.ndarray, mesh: FineMesh) -> float:
    """Relative fine-grid L² error, with exact P1 mass integration."""

    def squared_norm(v: np.ndarray) -> float:
        ve = v[mesh.triangles]
        return float(np.sum(mesh.cell_area / 12.0
                            * (np.sum(ve**2, axis=1) + np.sum(ve, axis=1)**2)))

    denom = squared_norm(u_f)
    if denom == 0.0:
        raise UndefinedMetricError(
            "fine L² error is undefined: the reference is identically zero")
    return float(np.sqrt(squared_norm(u_f - u_ms) / denom))


def basis_decay_profile(
    psi: BasisFunction, mesh: FineMesh, field: CoefficientField, coarse: CoarseGrid
) -> np.ndarray:
    """Fraction of a(ψ,ψ) carried outside K_{i,r}, for rings r = 0..m.

    The fraction is non-increasing in r, and exactly 0 at r = m because the
    basis is supported inside its oversampled region.  For a global basis the
    profile extends to the farthest block.
    """
    energies = fem.element_energies(mesh, field, psi.dense(mesh.n_nodes))
    total = float(energies.sum())
    if total == 0.0:
        raise UndefinedMetricError("decay profile is undefined: the basis has zero energy")

    bx = np.arange(coarse.n_blocks) % coarse.N_side
    by = np.arange(coarse.n_blocks) // coarse.N_side
    oxi, oyi = coarse.block_xy(psi.block)
    dist_block = np.maximum(np.abs(bx - oxi), np.abs(by - oyi))
    dist_tri = dist_block[coarse.block_of_triangle]

    m = psi.layers if psi.layers is not None else int(dist_block.max())
    outside = np.array([energies[dist_tri > r].sum() for r in range(m + 1)])
    return outside / total


def compute_errors(
    mesh: FineMesh,
    coarse: CoarseGrid,
    field: CoefficientField,
    regions: RegionMap,
    bins: ContrastBins,
    layers: int,
    fine: fem.FineSolution,
    upscaled: UpscaledSolution,
    A_full: sp.spmatrix,
) -> ErrorReport:
    """Assemble the full error report for one run."""
    avg_f = coarse_cell_averages(fine.values, mesh, coarse)
    avg_ms = coarse_cell_averages(upscaled.u_ms, mesh, coarse)
    areas = np.full(coarse.n_blocks, coarse.block_area)
    e = relative_L2_error(avg_f, avg_ms, areas)
    means = region_averages(upscaled.u_ms, mesh, regions)
    return ErrorReport(
        e_L2=e.value,
        e_L2_sq=e.squared,
        e_energy=energy_error(fine.values, upscaled.u_ms, A_full),
        e_L2_fine=fine_L2_error(fine.values, upscaled.u_ms, mesh),
        region_mean_error=float(np.abs(means - upscaled.ubar).max()),
        h=mesh.h,
        H=coarse.H,
        layers=layers,
        contrast=field.contrast,
        bins=bins.intervals,
        total_regions=regions.total_regions,
    )


def run_experiment(
    config: cfg.ExperimentConfig, cache: dict | None = None
) -> ExperimentResult:
    """Run the full pipeline: fine reference, local bases, coarse solve, errors.

    Args:
        cache: optional dict carried across calls; the fine reference (mesh,
            stiffness, load, solution) is reused when the medium, source, and
            tolerance match.
    """
    t0 = time.perf_counter()
    field = cfg.realize_medium(config)
    source = cfg.realize_source(config)
    key = (config.n_side, field.values.tobytes(), config.source, config.tol)
    if cache is not None and key in cache:
        mesh, stiffness, load, fine = cache[key]
        t_fine = 0.0
    else:
        mesh = build_fine_mesh(config.n_side)
        stiffness = fem.assemble_stiffness(mesh, field)
        load = fem.assemble_load(mesh, source)
        fine = fem.solve_fine(stiffness, load, config.tol)
        t_fine = time.perf_counter() - t0
        if cache is not None:
            cache[key] = (mesh, stiffness, load, fine)

    coarse = build_coarse_grid(mesh, config.N_side)
    bins = cfg.resolve_bins(config, field)
    regions = decompose_regions(field, coarse, bins, config.split_components)
    layers = (config.layers if isinstance(config.layers, int)
              else auto_layers(field.kappa_max, coarse.H, coarse.N_side,
                               config.layer_offset))

    t1 = time.perf_counter()
    bases = build_all_local_bases(
        mesh, field, coarse, regions, layers, tol=config.tol, threads=config.threads)
    t_basis = time.perf_counter() - t1

    t2 = time.perf_counter()
    projection = build_projection(bases, regions, stiffness.free_nodes, mesh.n_nodes)
    upscaled = upscale_solve(
        projection, stiffness.matrix, load[stiffness.free_nodes], config.tol)
    t_coarse = time.perf_counter() - t2

    report = compute_errors(mesh, coarse, field, regions, bins, layers, fine,
                            upscaled, stiffness.full)
    total = time.perf_counter() - t0
    return ExperimentResult(
        config=config, mesh=mesh, coarse=coarse, field=field, bins=bins,
        regions=regions, layers=layers, fine=fine, stiffness=stiffness, load=load,
        bases=bases, projection=projection, upscaled=upscaled, report=report,
        timings=Timings(t_fine, t_basis, t_coarse, total))


def derive_config(
    config: cfg.ExperimentConfig, axis: str, value: float
) -> cfg.ExperimentConfig:
    """The config of one sweep row: the base config with one axis value applied."""

    def as_int(v: float, what: str) -> int:
        if float(v) != int(v):
            raise InvalidArgumentError(f"{what} must be an integer, got {v}")
        return int(v)

    if axis == "layers":
        return cfg.apply_overrides(config, layers=as_int(value, "layer count"))
    if axis == "H":
        return cfg.apply_overrides(config, N_side=as_int(value, "coarse size"))
    if axis == "contrast":
        if not isinstance(config.medium, cfg.ChannelMedium):
            raise InvalidArgumentError(
                "the contrast axis needs a generated channel medium")
        if config.bins is not None:
            raise InvalidArgumentError(
                "the contrast axis derives bins from the medium; leave bins unset")
        medium = {**config.medium.model_dump(), "channel": float(value)}
        return cfg.apply_overrides(config, medium=medium)
    raise InvalidArgumentError(
        f"unknown sweep axis {axis!r}; expected layers, H, or contrast")


def sweep(config: cfg.ExperimentConfig, axis: str, values: list[float]) -> SweepTable:
    """One experiment per axis value; failures are recorded and the sweep continues.

    Rows are ordered by parameter value.  The fine reference is computed once
    per distinct medium and reused across rows (the layers and H axes share
    one; the contrast axis cannot).
    """
    if not values:
        raise InvalidArgumentError("sweep needs at least one axis value")
    cache: dict = {}
    rows = []
    for value in sorted(values):
        t0 = time.perf_counter()
        try:
            result = run_experiment(derive_config(config, axis, value), cache)
            r = result.report
            rows.append(SweepRow(float(value), r.e_L2, r.e_L2_sq, r.e_energy,
                                 time.perf_counter() - t0, report=r))
        except (NLMCError, ValueError, RuntimeError) as exc:
            rows.append(SweepRow(float(value), float("nan"), float("nan"),
                                 float("nan"), time.perf_counter() - t0, str(exc)))
    return SweepTable(axis, tuple(rows))
