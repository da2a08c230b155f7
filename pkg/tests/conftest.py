"""Shared fixtures: one small two-continuum instance reused across modules."""

from types import SimpleNamespace

import pytest

from nlmc import (Rect, build_coarse_grid, build_fine_mesh, decompose_regions,
                  exact_bins, generate_channel_medium)


@pytest.fixture(scope="session")
def small_instance():
    """16×16 fine / 4×4 coarse with one horizontal channel crossing two blocks."""
    mesh = build_fine_mesh(16)
    coarse = build_coarse_grid(mesh, 4)
    field = generate_channel_medium(16, 1.0, 1e4, [Rect(0.25, 0.4375, 0.75, 0.5)])
    bins = exact_bins(1.0, 1e4)
    regions = decompose_regions(field, coarse, bins)
    return SimpleNamespace(mesh=mesh, coarse=coarse, field=field, bins=bins,
                           regions=regions)
