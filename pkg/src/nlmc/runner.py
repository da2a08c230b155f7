"""Experiment orchestration shared by the CLI and the HTTP service.

Each ``run_*`` function executes one subcommand's work and writes its
artifacts under the output directory.  Writes happen after the computation
succeeds; if any write fails, the files already written are removed so a
failed run never leaves a partial artifact set behind.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as nio
from .analysis import (ExperimentResult, SweepTable, basis_decay_profile,
                       run_experiment, sweep)
from .basis import BasisFunction, auto_layers, build_local_basis
from .config import (ExperimentConfig, dumps_config, realize_medium, resolve_bins,
                     save_config)
from .errors import InvalidArgumentError
from .grid import build_coarse_grid, build_fine_mesh
from .medium import decompose_regions, save_medium
from .oracles import CheckResult, validate

__all__ = ["SolveOutput", "BasisOutput", "run_solve", "run_sweep", "run_basis",
           "run_validate"]


@dataclass(frozen=True)
class SolveOutput:
    result: ExperimentResult
    paths: dict[str, Path]


@dataclass(frozen=True)
class BasisOutput:
    basis: BasisFunction
    profile: np.ndarray
    paths: dict[str, Path]


def _write_all(out_dir: Path, writers: list[tuple[str, object]]) -> dict[str, Path]:
    """Run the (filename, thunk) writers; on failure remove what was written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    try:
        for name, write in writers:
            path = out_dir / name
            write(path)
            written[name] = path
    except BaseException:
        for path in written.values():
            path.unlink(missing_ok=True)
        raise
    return written


def run_solve(config: ExperimentConfig) -> SolveOutput:
    """Full pipeline plus artifacts: config, medium, solutions, report."""
    result = run_experiment(config)
    n = config.n_side
    paths = _write_all(Path(config.out_dir), [
        ("config.yaml", lambda p: save_config(p, config)),
        ("medium.txt", lambda p: save_medium(p, result.field)),
        ("fine.txt", lambda p: nio.write_field(p, result.fine.values, n)),
        ("ums.txt", lambda p: nio.write_field(p, result.upscaled.u_ms, n)),
        ("ubar.csv", lambda p: nio.write_coarse_table(
            p, result.regions, result.upscaled.ubar)),
        ("report.json", lambda p: nio.write_report(p, result.report, result.timings)),
    ])
    return SolveOutput(result, paths)


def run_sweep(
    config: ExperimentConfig, axis: str, values: list[float]
) -> tuple[SweepTable, dict[str, Path]]:
    """Sweep one axis and write the CSV table plus the base config."""
    table = sweep(config, axis, values)
    paths = _write_all(Path(config.out_dir), [
        ("config.yaml", lambda p: save_config(p, config)),
        (f"sweep_{axis}.csv", lambda p: nio.write_sweep_csv(p, table)),
    ])
    return table, paths


def run_basis(
    config: ExperimentConfig, block: int | None = None, region: int = 0
) -> BasisOutput:
    """Build one basis function and write its dump and decay profile.

    Args:
        block: owner block index; None means the center block.
        region: region index local to the block (0-based).
    """
    mesh = build_fine_mesh(config.n_side)
    coarse = build_coarse_grid(mesh, config.N_side)
    field = realize_medium(config)
    bins = resolve_bins(config, field)
    regions = decompose_regions(field, coarse, bins, config.split_components)
    layers = (config.layers if isinstance(config.layers, int)
              else auto_layers(field.kappa_max, coarse.H, coarse.N_side,
                               config.layer_offset))
    if block is None:
        block = coarse.center_block()
    if not 0 <= block < coarse.n_blocks:
        raise InvalidArgumentError(
            f"block index {block} out of range [0, {coarse.n_blocks})")

    basis = build_local_basis(mesh, field, coarse, regions, block, region, layers,
                              tol=config.tol)
    profile = basis_decay_profile(basis, mesh, field, coarse)
    paths = _write_all(Path(config.out_dir), [
        (f"basis_b{block}_r{region}.txt",
         lambda p: nio.write_basis_dump(p, basis, config.n_side)),
        (f"decay_b{block}_r{region}.csv",
         lambda p: nio.write_decay_csv(p, profile)),
    ])
    return BasisOutput(basis, profile, paths)


def run_validate(perturb_stiffness: bool = False) -> list[CheckResult]:
    """Run the oracle suite (no artifacts; results go to the caller)."""
    return validate(perturb_stiffness)


def config_text(config: ExperimentConfig) -> str:
    """The YAML the run_* functions persist, for callers that inline it."""
    return dumps_config(config)
