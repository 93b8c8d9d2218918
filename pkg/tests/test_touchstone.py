import numpy as np
import pytest

from fbarcirc.htm import HarmonicBasis, sparams
from fbarcirc.netlist import CirculatorDesign, Topology, build_differential
from fbarcirc.touchstone import (TouchstoneError, read_harmonics_csv, read_s3p,
                                 write_harmonics_csv, write_s3p)

from conftest import GHZ_SPECS


@pytest.fixture(scope="module")
def demo_grid():
    design = CirculatorDesign(Topology.DIFFERENTIAL, GHZ_SPECS, delta=0.02, f_mod=23.2e6)
    net = build_differential(design)
    freqs = np.linspace(2.66e9, 2.70e9, 5)
    return sparams(net, HarmonicBasis(23.2e6, 2), freqs)


class TestS3p:
    def test_round_trip_values(self, tmp_path, demo_grid):
        path = tmp_path / "demo.s3p"
        write_s3p(path, demo_grid.frequencies, demo_grid.s0, 50.0)
        freqs, s, z0 = read_s3p(path)
        assert z0 == 50.0
        assert np.max(np.abs(freqs - demo_grid.frequencies) / demo_grid.frequencies) <= 1e-9
        assert np.max(np.abs(s - demo_grid.s0)) <= 1e-9

    def test_header_and_line_layout(self, tmp_path, demo_grid):
        path = tmp_path / "demo.s3p"
        write_s3p(path, demo_grid.frequencies[:2], demo_grid.s0[:2], 50.0,
                  comments=("config_fingerprint = abc",))
        lines = path.read_text().splitlines()
        assert lines[0] == "! config_fingerprint = abc"
        assert lines[1] == "# Hz S RI R 50"
        body = lines[2:]
        assert len(body) == 2
        assert all(len(line.split()) == 19 for line in body)
        # 9 significant digits: mantissa has 8 decimals
        assert body[0].split()[0] == f"{demo_grid.frequencies[0]:.8e}"

    def test_reader_tolerates_wrapped_lines(self, tmp_path, demo_grid):
        path = tmp_path / "demo.s3p"
        write_s3p(path, demo_grid.frequencies[:1], demo_grid.s0[:1], 50.0)
        tokens = []
        for line in path.read_text().splitlines():
            if line.startswith(("!", "#")):
                continue
            tokens.extend(line.split())
        wrapped = tmp_path / "wrapped.s3p"
        wrapped.write_text("# Hz S RI R 50\n" + "\n".join(
            " ".join(tokens[i:i + 7]) + " ! row comment" for i in range(0, len(tokens), 7)))
        freqs, s, _ = read_s3p(wrapped)
        assert np.max(np.abs(s - demo_grid.s0[:1])) <= 1e-9

    def test_reader_handles_ma_and_units(self, tmp_path):
        s_val = 0.5 * np.exp(1j * np.radians(30.0))
        cells = []
        for k in range(9):
            cells += ["0.5", "30.0"] if k == 1 else ["0.0", "0.0"]
        path = tmp_path / "ma.s3p"
        path.write_text("# GHz S MA R 75\n2.68 " + " ".join(cells) + "\n")
        freqs, s, z0 = read_s3p(path)
        assert z0 == 75.0
        assert freqs[0] == pytest.approx(2.68e9)
        assert s[0, 0, 1] == pytest.approx(s_val, rel=1e-12)
        assert s[0, 0, 0] == 0.0

    def test_malformed_rejected(self, tmp_path):
        bad = tmp_path / "bad.s3p"
        bad.write_text("# Hz S RI R 50\n1e9 0.1 0.2 0.3\n")
        with pytest.raises(TouchstoneError):
            read_s3p(bad)
        nonnum = tmp_path / "nn.s3p"
        nonnum.write_text("# Hz S RI R 50\n1e9 abc\n")
        with pytest.raises(TouchstoneError):
            read_s3p(nonnum)

    def test_wrong_shape_rejected(self, tmp_path, demo_grid):
        with pytest.raises(ValueError):
            write_s3p(tmp_path / "x.s3p", demo_grid.frequencies,
                      demo_grid.s0[:, :2, :2], 50.0)


class TestHarmonicsCsv:
    def test_exact_round_trip(self, tmp_path, demo_grid):
        path = tmp_path / "h.csv"
        write_harmonics_csv(path, demo_grid, comments=("config_fingerprint = xyz",))
        back = read_harmonics_csv(path)
        assert back.n_harm == demo_grid.n_harm
        assert back.ports == demo_grid.ports
        assert np.array_equal(back.frequencies, demo_grid.frequencies)
        assert np.array_equal(back.data, demo_grid.data)
        assert np.array_equal(back.z0, demo_grid.z0)

    def test_comment_carried(self, tmp_path, demo_grid):
        path = tmp_path / "h.csv"
        write_harmonics_csv(path, demo_grid, comments=("config_fingerprint = xyz",))
        head = path.read_text().splitlines()[0]
        assert head == "# config_fingerprint = xyz"

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("f_hz,n,q,p,re_s,im_s\n")
        with pytest.raises(TouchstoneError):
            read_harmonics_csv(path)
