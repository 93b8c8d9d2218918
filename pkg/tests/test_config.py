import numpy as np
import pytest

from fbarcirc.config import ConfigError, parse_config, serialize_config
from fbarcirc.netlist import PhaseSequence, Topology


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        design = cfg.design()
        assert design.topology is Topology.DIFFERENTIAL
        assert design.resonator.f_s == 2.65e9
        assert design.resonator.q == 700.0
        assert design.z0 == 50.0
        assert cfg.get_int("basis.n_harm") == 5

    def test_overrides_and_comments(self):
        cfg = parse_config("""
# a comment
design.topology = single_ended   # trailing comment
design.q = 350
design.phase_sequence = reverse
sweep.points = 11
""")
        design = cfg.design()
        assert design.topology is Topology.SINGLE_ENDED
        assert design.resonator.q == 350.0
        assert design.phase_sequence is PhaseSequence.REVERSE
        assert cfg.get_int("sweep.points") == 11

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("design.quality = 700\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("just some words\n")

    def test_type_error_carries_key_path(self):
        cfg = parse_config("sweep.points = eleven\n")
        with pytest.raises(ConfigError, match="sweep.points"):
            cfg.sweep_frequencies()

    def test_bad_topology_value(self):
        cfg = parse_config("design.topology = circular\n")
        with pytest.raises(ConfigError, match="design.topology"):
            cfg.design()

    def test_design_invariants_reported(self):
        cfg = parse_config("design.k_sq = 1.5\n")
        with pytest.raises(ConfigError, match="design"):
            cfg.design()

    def test_bool_parsing(self):
        assert parse_config("design.c0_to_ground = false\n").get_bool("design.c0_to_ground") is False
        with pytest.raises(ConfigError):
            parse_config("design.c0_to_ground = maybe\n").get_bool("design.c0_to_ground")


class TestSweep:
    def test_linspace(self):
        cfg = parse_config("sweep.f_start = 1e9\nsweep.f_stop = 2e9\nsweep.points = 5\n")
        assert np.array_equal(cfg.sweep_frequencies(), np.linspace(1e9, 2e9, 5))

    def test_include_unioned(self):
        cfg = parse_config("sweep.f_start = 1e9\nsweep.f_stop = 2e9\nsweep.points = 3\n"
                           "sweep.include = 1.25e9, 1.5e9\n")
        grid = cfg.sweep_frequencies()
        assert 1.25e9 in grid and 1.5e9 in grid
        assert grid.size == 4  # 1.5e9 collides with a linspace point

    def test_order_validated(self):
        cfg = parse_config("sweep.f_start = 2e9\nsweep.f_stop = 1e9\n")
        with pytest.raises(ConfigError, match="f_start"):
            cfg.sweep_frequencies()

    def test_points_validated(self):
        cfg = parse_config("sweep.points = 1\n")
        with pytest.raises(ConfigError, match="points"):
            cfg.sweep_frequencies()


class TestSerialize:
    def test_round_trip_lossless(self):
        text = ("design.delta = 0.028645925342861006\n"
                "design.f_mod = 31479745.75625309\n"
                "sweep.include = 2676659341.9773417\n")
        cfg = parse_config(text)
        reparsed = parse_config(serialize_config(cfg))
        assert reparsed.design() == cfg.design()
        assert np.array_equal(reparsed.sweep_frequencies(), cfg.sweep_frequencies())
        # serialization is canonical: a second pass is byte-identical
        assert serialize_config(reparsed) == serialize_config(cfg)

    def test_basis_f_mod_follows_design(self):
        cfg = parse_config("design.f_mod = 3.1e7\n")
        assert cfg.basis_f_mod() == 3.1e7
        cfg2 = parse_config("design.f_mod = 3.1e7\nbasis.f_mod = 2.9e7\n")
        assert cfg2.basis_f_mod() == 2.9e7
