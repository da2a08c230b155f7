"""Tests for YAML configs, medium/source realization, and artifact formats."""

import json
import math

import numpy as np
import pytest

from nlmc import (
    ChannelMedium,
    ConstantSource,
    ExperimentConfig,
    FileMedium,
    Indicator,
    IndicatorSource,
    LeveledShape,
    PolylineShape,
    RectShape,
    ThreeContinuumMedium,
    apply_overrides,
    build_global_basis,
    build_local_basis,
    dumps_config,
    load_config,
    loads_config,
    realize_medium,
    resolve_bins,
    save_config,
    save_medium,
)
from nlmc.analysis import ErrorReport, SweepRow, SweepTable, Timings
from nlmc.config import realize_source
from nlmc.errors import (
    BinCoverageError,
    ConfigError,
    InvalidArgumentError,
    MediumFormatError,
)
from nlmc.io import (
    read_basis_dump,
    read_field,
    read_sweep_csv,
    sweep_csv_text,
    write_basis_dump,
    write_coarse_table,
    write_decay_csv,
    write_field,
    write_report,
    write_sweep_csv,
)

RECT = RectShape(x0=0.25, y0=0.4375, x1=0.75, y1=0.5)
POLY = PolylineShape(points=((0.1, 0.1), (0.5, 0.9)), width=0.05)

ROUND_TRIP_CONFIGS = [
    ExperimentConfig(n_side=16, N_side=4),
    ExperimentConfig(n_side=16, N_side=4, layers=3,
                     medium=ChannelMedium(channel=1e5, shapes=(RECT, POLY))),
    ExperimentConfig(
        n_side=20, N_side=5, layer_offset=-10, split_components=True,
        medium=ThreeContinuumMedium(
            background_range=(1.0, 5.0), mid=1e2, high=1e6,
            shapes=(LeveledShape(shape=RECT, level="high"),
                    LeveledShape(shape=POLY, level="mid")))),
    ExperimentConfig(n_side=12, N_side=3, medium=FileMedium(path="medium.txt"),
                     bins=((0.5, 2.0), (1e3, 1e5))),
    ExperimentConfig(n_side=16, N_side=4, seed=7, tol=1e-9, threads=2,
                     out_dir="elsewhere",
                     source=IndicatorSource(x0=0.25, y0=0.25, x1=0.75, y1=0.75,
                                            value=2.0)),
]


class TestConfigRoundTrip:
    @pytest.mark.parametrize("config", ROUND_TRIP_CONFIGS)
    def test_yaml_round_trip_is_identity(self, config):
        assert loads_config(dumps_config(config)) == config

    def test_save_and_load_file(self, tmp_path):
        path = tmp_path / "config.yaml"
        save_config(path, ROUND_TRIP_CONFIGS[1])
        assert load_config(path) == ROUND_TRIP_CONFIGS[1]

    def test_dump_is_plain_yaml(self):
        text = dumps_config(ROUND_TRIP_CONFIGS[0])
        assert "n_side: 16" in text
        assert "!!" not in text  # no python-specific tags


class TestConfigValidation:
    def test_minimal_document(self):
        config = loads_config("n_side: 100\nN_side: 10\n")
        assert config.layers == "auto"
        assert isinstance(config.medium, ChannelMedium)
        assert config.medium.preset == "crossing-channels"

    def test_missing_required_keys(self):
        with pytest.raises(ConfigError, match="invalid config"):
            loads_config("n_side: 100\n")

    def test_not_yaml(self):
        with pytest.raises(ConfigError, match="not valid YAML"):
            loads_config("n_side: [")

    def test_not_a_mapping(self):
        with pytest.raises(ConfigError, match="mapping"):
            loads_config("- 1\n- 2\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="invalid config"):
            loads_config("n_side: 16\nN_side: 4\nresolution: 9\n")

    def test_grid_divisibility(self):
        with pytest.raises(ConfigError, match="divisible"):
            loads_config("n_side: 16\nN_side: 5\n")

    def test_negative_layers(self):
        with pytest.raises(ConfigError, match="non-negative"):
            loads_config("n_side: 16\nN_side: 4\nlayers: -1\n")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            loads_config("n_side: 16\nN_side: 4\n"
                         "medium: {kind: channels, preset: nope}\n")

    def test_shapes_and_preset_exclusive(self):
        with pytest.raises(ValueError, match="not both"):
            ChannelMedium(preset="crossing-channels", shapes=(RECT,))

    def test_three_continuum_level_ordering(self):
        with pytest.raises(ValueError, match="below"):
            ThreeContinuumMedium(mid=1e5, high=1e4)
        with pytest.raises(ValueError, match="background_range"):
            ThreeContinuumMedium(background_range=(5.0, 1.0))
        with pytest.raises(ValueError, match="below the mid"):
            ThreeContinuumMedium(background_range=(1.0, 1e9))

    def test_indicator_box_ordering(self):
        with pytest.raises(ValueError, match="unit square"):
            IndicatorSource(x0=0.5, x1=0.25)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


class TestApplyOverrides:
    def test_replaces_and_revalidates(self):
        base = ROUND_TRIP_CONFIGS[0]
        updated = apply_overrides(base, layers=2, seed=9)
        assert (updated.layers, updated.seed) == (2, 9)
        assert updated.medium == base.medium

    def test_none_values_are_skipped(self):
        base = ROUND_TRIP_CONFIGS[1]
        assert apply_overrides(base, layers=None) == base

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError, match="unknown config keys"):
            apply_overrides(ROUND_TRIP_CONFIGS[0], resolution=3)

    def test_invalid_override(self):
        with pytest.raises(ConfigError, match="invalid config override"):
            apply_overrides(ROUND_TRIP_CONFIGS[0], N_side=5)


class TestRealizeMedium:
    def test_channel_shapes(self):
        config = ExperimentConfig(
            n_side=16, N_side=4, medium=ChannelMedium(shapes=(RECT,)))
        field = realize_medium(config)
        values = np.unique(field.cell_values())
        assert np.allclose(values, [1.0, 1e4])

    def test_file_medium_round_trip(self, tmp_path, small_instance):
        path = tmp_path / "medium.txt"
        save_medium(path, small_instance.field)
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=FileMedium(path=str(path)),
                                  bins=((1.0, 1.0), (1e4, 1e4)))
        field = realize_medium(config)
        assert np.array_equal(field.cell_values(), small_instance.field.cell_values())

    def test_file_medium_missing_names_path(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=FileMedium(path="no-such-medium.txt"),
                                  bins=((1.0, 1.0),))
        with pytest.raises(MediumFormatError, match="no-such-medium.txt"):
            realize_medium(config)

    def test_three_continuum_seed_reproducible(self):
        medium = ThreeContinuumMedium()
        same = [realize_medium(ExperimentConfig(n_side=20, N_side=4, seed=3,
                                                medium=medium)) for _ in range(2)]
        other = realize_medium(ExperimentConfig(n_side=20, N_side=4, seed=4,
                                                medium=medium))
        assert np.array_equal(same[0].cell_values(), same[1].cell_values())
        assert not np.array_equal(same[0].cell_values(), other.cell_values())


class TestResolveBins:
    def test_channel_bins_derived(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=ChannelMedium(shapes=(RECT,)))
        bins = resolve_bins(config, realize_medium(config))
        assert bins.intervals == ((1.0, 1.0), (1e4, 1e4))

    def test_three_continuum_bins_derived(self):
        config = ExperimentConfig(n_side=20, N_side=4,
                                  medium=ThreeContinuumMedium())
        bins = resolve_bins(config, realize_medium(config))
        assert bins.intervals == ((1.0, 10.0), (1e3, 1e3), (1e4, 1e4))

    def test_explicit_bins_win(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=ChannelMedium(shapes=(RECT,)),
                                  bins=((0.5, 2.0), (1e3, 1e5)))
        bins = resolve_bins(config, realize_medium(config))
        assert bins.intervals == ((0.5, 2.0), (1e3, 1e5))

    def test_file_medium_requires_bins(self, tmp_path, small_instance):
        path = tmp_path / "medium.txt"
        save_medium(path, small_instance.field)
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=FileMedium(path=str(path)))
        with pytest.raises(ConfigError, match="bins must be given"):
            resolve_bins(config, realize_medium(config))

    def test_coverage_gap_detected(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  medium=ChannelMedium(shapes=(RECT,)),
                                  bins=((1.0, 1.0),))
        with pytest.raises(BinCoverageError):
            resolve_bins(config, realize_medium(config))


class TestRealizeSource:
    def test_constant(self):
        config = ExperimentConfig(n_side=16, N_side=4,
                                  source=ConstantSource(value=2.5))
        assert realize_source(config) == 2.5

    def test_indicator(self):
        config = ExperimentConfig(
            n_side=16, N_side=4,
            source=IndicatorSource(x0=0.1, y0=0.2, x1=0.3, y1=0.4, value=5.0))
        source = realize_source(config)
        assert source == Indicator(0.1, 0.2, 0.3, 0.4, 5.0)


class TestFieldDump:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(17 * 17)
        path = tmp_path / "field.txt"
        write_field(path, values, 16)
        back, n_side = read_field(path)
        assert n_side == 16
        assert np.array_equal(back, values)
        assert path.read_text().splitlines()[0] == "17 17"

    def test_wrong_size_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError, match="expected"):
            write_field(tmp_path / "field.txt", np.ones(10), 16)

    @pytest.mark.parametrize("text,fragment", [
        ("", "header"),
        ("3 4" + " 0" * 12, "square"),
        ("3 3 1 2", "expected 9"),
        ("2 2 1 2 3 x", "non-numeric"),
    ])
    def test_malformed_dumps(self, tmp_path, text, fragment):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(MediumFormatError, match=fragment):
            read_field(path)


class TestBasisDump:
    def test_local_basis_round_trip(self, tmp_path, small_instance):
        inst = small_instance
        basis = build_local_basis(inst.mesh, inst.field, inst.coarse, inst.regions,
                                  5, 1, 2)
        path = tmp_path / "basis.txt"
        write_basis_dump(path, basis, inst.mesh.n_side)
        back = read_basis_dump(path)
        assert (back["block"], back["region"], back["layers"]) == (5, 1, 2)
        assert back["energy"] == basis.energy
        assert np.array_equal(back["constraint_regions"], basis.constraint_regions)
        assert np.array_equal(back["multipliers"], basis.multipliers)
        assert np.array_equal(back["values"], basis.dense(inst.mesh.n_nodes))

    def test_global_basis_layers_field(self, tmp_path, small_instance):
        inst = small_instance
        basis = build_global_basis(inst.mesh, inst.field, inst.coarse, inst.regions,
                                   0, 0)
        path = tmp_path / "basis.txt"
        write_basis_dump(path, basis, inst.mesh.n_side)
        assert "layers: global" in path.read_text()
        assert read_basis_dump(path)["layers"] is None


class TestSweepCsv:
    TABLE = SweepTable("layers", (
        SweepRow(1.0, 0.25, 0.0625, 0.5, 1.5),
        SweepRow(2.0, 0.125, 0.015625, 0.25, 2.0),
    ))

    def test_header_and_format(self):
        lines = sweep_csv_text(self.TABLE).splitlines()
        assert lines[0] == "parameter,e_L2,e_L2_sq,e_energy,seconds"
        assert lines[1] == "1,0.25,0.0625,0.5,1.5"
        assert len(lines) == 3

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, self.TABLE)
        back = read_sweep_csv(path)
        assert back.axis == "unknown"
        for row, ref in zip(back.rows, self.TABLE.rows):
            assert row.parameter == ref.parameter
            assert row.e_L2 == pytest.approx(ref.e_L2, rel=1e-9)
            assert row.seconds == pytest.approx(ref.seconds, rel=1e-9)

    def test_failed_row_serializes_nan(self, tmp_path):
        table = SweepTable("H", (SweepRow(3.0, float("nan"), float("nan"),
                                          float("nan"), 0.1, "boom"),))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, table)
        row = read_sweep_csv(path).rows[0]
        assert math.isnan(row.e_L2)


class TestDecayCsv:
    def test_rows_per_ring(self, tmp_path):
        path = tmp_path / "decay.csv"
        write_decay_csv(path, np.array([0.5, 0.03, 0.0]))
        lines = path.read_text().splitlines()
        assert lines[0] == "ring,energy_fraction_outside"
        assert lines[1:] == ["0,0.5", "1,0.03", "2,0"]


class TestReportJson:
    REPORT = ErrorReport(
        e_L2=0.1, e_L2_sq=0.01, e_energy=0.2, e_L2_fine=0.15,
        region_mean_error=2e-13, h=1 / 16, H=1 / 4, layers=2, contrast=1e4,
        bins=((1.0, 1.0), (1e4, 1e4)), total_regions=18)

    def test_json_payload(self, tmp_path):
        path = tmp_path / "report.json"
        write_report(path, self.REPORT, Timings(0.1, 0.2, 0.05, 0.4))
        payload = json.loads(path.read_text())
        assert payload["e_L2"] == 0.1
        assert payload["bins"] == [[1.0, 1.0], [1e4, 1e4]]
        assert payload["timings"]["basis_seconds"] == 0.2
        assert payload["total_regions"] == 18


class TestCoarseTable:
    def test_one_row_per_region(self, tmp_path, small_instance):
        inst = small_instance
        ubar = np.arange(inst.regions.total_regions, dtype=float)
        path = tmp_path / "ubar.csv"
        write_coarse_table(path, inst.regions, ubar)
        lines = path.read_text().splitlines()
        assert lines[0] == "region,block,bin,component,area,mean"
        assert len(lines) == 1 + inst.regions.total_regions
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "0"
