"""Tests for error metrics, decay profiles, experiments, and sweeps."""

import math

import numpy as np
import pytest

from nlmc import (
    BasisFunction,
    ChannelMedium,
    ExperimentConfig,
    RectShape,
    ThreeContinuumMedium,
    assemble_region_integrals,
    assemble_stiffness,
    basis_decay_profile,
    build_global_basis,
    build_local_basis,
    coarse_cell_averages,
    derive_config,
    energy_error,
    fine_L2_error,
    region_averages,
    relative_L2_error,
    run_experiment,
    sweep,
)
from nlmc.errors import InvalidArgumentError, UndefinedMetricError
from nlmc.oracles import subdivided_block_averages

CHANNEL = RectShape(x0=0.25, y0=0.4375, x1=0.75, y1=0.5)
SMALL = ExperimentConfig(
    n_side=16, N_side=4, layers=2,
    medium=ChannelMedium(background=1.0, channel=1e4, shapes=(CHANNEL,)))


class TestCoarseCellAverages:
    def test_constant_field(self, small_instance):
        inst = small_instance
        avg = coarse_cell_averages(
            np.full(inst.mesh.n_nodes, 4.5), inst.mesh, inst.coarse)
        assert np.allclose(avg, 4.5, rtol=1e-13)

    def test_linear_field_hits_block_midpoints(self, small_instance):
        inst = small_instance
        avg = coarse_cell_averages(inst.mesh.nodes[:, 0], inst.mesh, inst.coarse)
        for i in range(inst.coarse.n_blocks):
            bx, _ = inst.coarse.block_xy(i)
            assert avg[i] == pytest.approx((bx + 0.5) * inst.coarse.H, rel=1e-13)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_subdivided_oracle(self, small_instance, seed):
        inst = small_instance
        u = np.random.default_rng(seed).standard_normal(inst.mesh.n_nodes)
        avg = coarse_cell_averages(u, inst.mesh, inst.coarse)
        ref = subdivided_block_averages(u, inst.mesh, inst.coarse)
        assert np.abs(avg - ref).max() <= 1e-12


class TestRegionAverages:
    def test_constant_field(self, small_instance):
        inst = small_instance
        avg = region_averages(np.ones(inst.mesh.n_nodes), inst.mesh, inst.regions)
        assert np.allclose(avg, 1.0, rtol=1e-13)

    def test_precomputed_integrals_identical(self, small_instance):
        inst = small_instance
        u = np.random.default_rng(5).standard_normal(inst.mesh.n_nodes)
        integrals = assemble_region_integrals(inst.mesh, inst.regions)
        assert np.array_equal(
            region_averages(u, inst.mesh, inst.regions),
            region_averages(u, inst.mesh, inst.regions, integrals))


class TestRelativeL2Error:
    def test_identical_vectors_give_zero(self):
        areas = np.array([0.5, 0.5])
        err = relative_L2_error(np.array([1.0, 2.0]), np.array([1.0, 2.0]), areas)
        assert err.value == 0.0
        assert err.squared == 0.0

    def test_zero_approximation_gives_one(self):
        areas = np.array([0.25, 0.75])
        err = relative_L2_error(np.array([3.0, -1.0]), np.zeros(2), areas)
        assert err.value == pytest.approx(1.0)

    def test_two_block_example(self):
        err = relative_L2_error(np.array([1.0, 2.0]), np.array([1.0, 1.0]),
                                np.array([0.5, 0.5]))
        assert err.value == pytest.approx(math.sqrt(1.0 / 5.0))
        assert err.squared == pytest.approx(1.0 / 5.0)

    def test_squared_field_consistent(self):
        rng = np.random.default_rng(2)
        err = relative_L2_error(rng.standard_normal(6), rng.standard_normal(6),
                                rng.uniform(0.1, 1.0, 6))
        assert err.squared == pytest.approx(err.value**2)

    def test_zero_reference_undefined(self):
        with pytest.raises(UndefinedMetricError, match="undefined"):
            relative_L2_error(np.zeros(3), np.ones(3), np.full(3, 1 / 3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError, match="shape"):
            relative_L2_error(np.ones(3), np.ones(2), np.ones(3))

    @pytest.mark.parametrize("seed", range(3))
    def test_invariant_under_common_scaling(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        areas = rng.uniform(0.1, 2.0, 8)
        base = relative_L2_error(a, b, areas).value
        scaled = relative_L2_error(7.0 * a, 7.0 * b, areas).value
        assert scaled == pytest.approx(base, rel=1e-12)


class TestEnergyError:
    def test_identical_fields_give_zero(self, small_instance):
        inst = small_instance
        A = assemble_stiffness(inst.mesh, inst.field).full
        u = np.random.default_rng(0).standard_normal(inst.mesh.n_nodes)
        assert energy_error(u, u, A) == 0.0

    def test_zero_approximation_gives_one(self, small_instance):
        inst = small_instance
        A = assemble_stiffness(inst.mesh, inst.field).full
        u = np.random.default_rng(1).standard_normal(inst.mesh.n_nodes)
        assert energy_error(u, np.zeros_like(u), A) == pytest.approx(1.0)

    def test_matches_dense_quadratic_form(self, small_instance):
        inst = small_instance
        A = assemble_stiffness(inst.mesh, inst.field).full
        dense = A.toarray()
        rng = np.random.default_rng(3)
        u, v = rng.standard_normal((2, inst.mesh.n_nodes))
        expected = math.sqrt(((u - v) @ dense @ (u - v)) / (u @ dense @ u))
        assert energy_error(u, v, A) == pytest.approx(expected, abs=1e-10)

    def test_constant_reference_undefined(self, small_instance):
        inst = small_instance
        A = assemble_stiffness(inst.mesh, inst.field).full
        with pytest.raises(UndefinedMetricError, match="zero energy"):
            energy_error(np.ones(inst.mesh.n_nodes), np.zeros(inst.mesh.n_nodes), A)


class TestFineL2Error:
    def test_identical_fields_give_zero(self, small_instance):
        inst = small_instance
        u = np.random.default_rng(0).standard_normal(inst.mesh.n_nodes)
        assert fine_L2_error(u, u, inst.mesh) == 0.0

    def test_constant_shift_of_linear_reference(self, small_instance):
        # ‖c‖ / ‖x‖ = c / sqrt(1/3) = c·√3 exactly under P1 mass integration
        inst = small_instance
        x = inst.mesh.nodes[:, 0]
        err = fine_L2_error(x, x - 0.01, inst.mesh)
        assert err == pytest.approx(0.01 * math.sqrt(3.0), rel=1e-12)

    def test_zero_reference_undefined(self, small_instance):
        inst = small_instance
        with pytest.raises(UndefinedMetricError, match="identically zero"):
            fine_L2_error(np.zeros(inst.mesh.n_nodes),
                          np.ones(inst.mesh.n_nodes), inst.mesh)


class TestBasisDecayProfile:
    def test_local_basis_profile(self, small_instance):
        inst = small_instance
        psi = build_local_basis(inst.mesh, inst.field, inst.coarse, inst.regions,
                                5, 0, 2)
        profile = basis_decay_profile(psi, inst.mesh, inst.field, inst.coarse)
        assert len(profile) == 3
        assert np.all(np.diff(profile) <= 1e-15)
        assert profile[-1] == 0.0
        assert 0.0 < profile[0] < 1.0

    def test_global_basis_profile_spans_grid(self, small_instance):
        inst = small_instance
        psi = build_global_basis(inst.mesh, inst.field, inst.coarse, inst.regions, 5, 0)
        profile = basis_decay_profile(psi, inst.mesh, inst.field, inst.coarse)
        # block (1,1) on a 4×4 grid: farthest block is two rings away
        assert len(profile) == 3
        assert profile[-1] == 0.0

    def test_strict_decay_for_first_ring(self, small_instance):
        inst = small_instance
        psi = build_local_basis(inst.mesh, inst.field, inst.coarse, inst.regions,
                                5, 0, 2)
        profile = basis_decay_profile(psi, inst.mesh, inst.field, inst.coarse)
        assert profile[1] < profile[0]

    def test_zero_energy_basis_undefined(self, small_instance):
        inst = small_instance
        dead = BasisFunction(block=0, region=0, layers=1, support=np.array([0]),
                             coeffs=np.array([0.0]), multipliers=np.zeros(1),
                             constraint_regions=np.array([0]), energy=0.0)
        with pytest.raises(UndefinedMetricError, match="zero energy"):
            basis_decay_profile(dead, inst.mesh, inst.field, inst.coarse)


class TestRunExperiment:
    def test_report_and_timings(self):
        result = run_experiment(SMALL)
        r = result.report
        assert 0.0 < r.e_L2 < 1.0
        assert r.e_L2_sq == pytest.approx(r.e_L2**2)
        assert 0.0 < r.e_energy <= 1.0
        assert r.region_mean_error <= 1e-10
        assert (r.h, r.H, r.layers) == (1 / 16, 1 / 4, 2)
        assert r.contrast == pytest.approx(1e4)
        assert r.total_regions == 18
        assert len(result.bases) == 18
        t = result.timings
        assert min(t.fine_seconds, t.basis_seconds, t.coarse_seconds) >= 0.0
        assert t.total_seconds >= t.basis_seconds

    def test_auto_layers_resolved(self):
        config = ExperimentConfig(n_side=16, N_side=4, layers="auto",
                                  medium=SMALL.medium)
        result = run_experiment(config)
        assert isinstance(result.layers, int)
        assert 1 <= result.layers <= 3

    def test_cache_reuses_fine_solve(self):
        cache = {}
        first = run_experiment(SMALL, cache)
        second = run_experiment(SMALL, cache)
        assert first.timings.fine_seconds > 0.0
        assert second.timings.fine_seconds == 0.0
        assert second.mesh is first.mesh
        assert second.report.e_L2 == first.report.e_L2


class TestDeriveConfig:
    def test_layers_axis(self):
        assert derive_config(SMALL, "layers", 3.0).layers == 3

    def test_layers_axis_requires_integer(self):
        with pytest.raises(InvalidArgumentError, match="integer"):
            derive_config(SMALL, "layers", 2.5)

    def test_coarse_axis(self):
        derived = derive_config(SMALL, "H", 8.0)
        assert derived.N_side == 8
        assert derived.n_side == SMALL.n_side

    def test_contrast_axis(self):
        derived = derive_config(SMALL, "contrast", 1e5)
        assert derived.medium.channel == pytest.approx(1e5)
        assert derived.medium.shapes == SMALL.medium.shapes

    def test_contrast_axis_needs_channel_medium(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=ThreeContinuumMedium())
        with pytest.raises(InvalidArgumentError, match="channel"):
            derive_config(config, "contrast", 1e5)

    def test_contrast_axis_rejects_explicit_bins(self):
        config = ExperimentConfig(n_side=16, N_side=4, medium=SMALL.medium,
                                  bins=((1.0, 1.0), (1e4, 1e4)))
        with pytest.raises(InvalidArgumentError, match="bins"):
            derive_config(config, "contrast", 1e5)

    def test_unknown_axis(self):
        with pytest.raises(InvalidArgumentError, match="axis"):
            derive_config(SMALL, "resolution", 32.0)


class TestSweep:
    def test_rows_sorted_by_parameter(self):
        table = sweep(SMALL, "layers", [3.0, 1.0, 2.0])
        assert table.axis == "layers"
        assert [row.parameter for row in table.rows] == [1.0, 2.0, 3.0]
        for row in table.rows:
            assert row.error is None
            assert math.isfinite(row.e_L2)
            assert row.report is not None
            assert row.seconds >= 0.0

    def test_failed_row_recorded_and_sweep_continues(self):
        table = sweep(SMALL, "H", [4.0, 3.0])
        good = next(r for r in table.rows if r.parameter == 4.0)
        bad = next(r for r in table.rows if r.parameter == 3.0)
        assert math.isfinite(good.e_L2)
        assert math.isnan(bad.e_L2) and math.isnan(bad.e_energy)
        assert bad.error is not None and "divisible" in bad.error
        assert bad.report is None

    def test_empty_values_rejected(self):
        with pytest.raises(InvalidArgumentError, match="at least one"):
            sweep(SMALL, "layers", [])
