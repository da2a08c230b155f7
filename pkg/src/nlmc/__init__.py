"""Non-local multicontinuum (NLMC) upscaling for 2D high-contrast elliptic problems.

Solves −∇·(κ∇u) = f on the unit square with u = 0 on the boundary, where κ is
a high-contrast coefficient field.  The solver builds energy-minimizing basis
functions with prescribed region averages on oversampled coarse regions,
projects the fine problem onto their span, and returns a coarse solution whose
entries are the solution's mean values over each continuum region.
"""

from .analysis import (ErrorReport, ExperimentResult, L2Error, SweepRow, SweepTable,
                       Timings, basis_decay_profile, coarse_cell_averages,
                       compute_errors, derive_config, energy_error, fine_L2_error,
                       region_averages, relative_L2_error, run_experiment, sweep)
from .basis import (BasisFunction, ProjectionOperator, UpscaledSolution, auto_layers,
                    build_all_local_bases, build_global_basis, build_local_basis,
                    build_projection, upscale_solve)
from .config import (ChannelMedium, ConstantSource, ExperimentConfig, FileMedium,
                     IndicatorSource, LeveledShape, PolylineShape, RectShape,
                     ThreeContinuumMedium, apply_overrides, dumps_config, load_config,
                     loads_config, realize_medium, resolve_bins, save_config)
from .errors import (BinCoverageError, ConfigError, ConstraintDegeneracyError,
                     InvalidArgumentError, MediumFormatError, NLMCError, SolverError,
                     UndefinedMetricError)
from .fem import (FineSolution, Indicator, RegionMoments, Stiffness, assemble_load,
                  assemble_region_integrals, assemble_region_moments,
                  assemble_stiffness, element_energies, solve_fine)
from .grid import (CoarseGrid, FineMesh, OversampledRegion, build_coarse_grid,
                   build_fine_mesh, oversample)
from .linalg import SaddleSolver, SPDSolver, solve_saddle, solve_spd
from .medium import (CoefficientField, ContrastBins, Polyline, Rect, Region,
                     RegionMap, coefficient_field, contrast_bins, decompose_regions,
                     exact_bins, generate_channel_medium,
                     generate_three_continuum_medium, load_medium, save_medium)
from .oracles import (dense_coarse_solve, dense_global_basis, dense_kkt_solve,
                      dense_stiffness, poisson_center_value,
                      subdivided_block_averages, validate)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # grid
    "FineMesh", "CoarseGrid", "OversampledRegion", "build_fine_mesh",
    "build_coarse_grid", "oversample",
    # medium
    "CoefficientField", "ContrastBins", "Rect", "Polyline", "Region", "RegionMap",
    "coefficient_field", "contrast_bins", "exact_bins", "decompose_regions",
    "generate_channel_medium", "generate_three_continuum_medium", "load_medium",
    "save_medium",
    # fem
    "Stiffness", "RegionMoments", "FineSolution", "Indicator", "assemble_stiffness",
    "assemble_load", "assemble_region_integrals", "assemble_region_moments",
    "element_energies", "solve_fine",
    # linear algebra
    "SPDSolver", "SaddleSolver", "solve_spd", "solve_saddle",
    # nlmc
    "BasisFunction", "ProjectionOperator", "UpscaledSolution", "auto_layers",
    "build_local_basis", "build_all_local_bases", "build_global_basis",
    "build_projection", "upscale_solve",
    # analysis
    "ErrorReport", "ExperimentResult", "L2Error", "SweepRow", "SweepTable", "Timings",
    "coarse_cell_averages", "region_averages", "relative_L2_error", "energy_error",
    "fine_L2_error", "basis_decay_profile", "compute_errors", "run_experiment",
    "derive_config", "sweep",
    # config
    "ExperimentConfig", "ChannelMedium", "ThreeContinuumMedium", "FileMedium",
    "RectShape", "PolylineShape", "LeveledShape",
    "ConstantSource", "IndicatorSource", "load_config", "loads_config",
    "save_config", "dumps_config", "apply_overrides", "realize_medium",
    "resolve_bins",
    # oracles
    "dense_stiffness", "dense_kkt_solve", "dense_global_basis", "dense_coarse_solve",
    "poisson_center_value", "subdivided_block_averages", "validate",
    # errors
    "NLMCError", "InvalidArgumentError", "MediumFormatError", "BinCoverageError",
    "ConfigError", "ConstraintDegeneracyError", "SolverError", "UndefinedMetricError",
]
