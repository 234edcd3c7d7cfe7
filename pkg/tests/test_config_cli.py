import json
from pathlib import Path

import numpy as np
import pytest

import emom_md as em
from emom_md.cli import run_main
from emom_md.exceptions import ConfigError
from emom_md.output import read_csv

BENCHMARK_TOML = """
[process]
reactor_volume = 1.0
densities = [1.0, 1.0]
initial_concentrations = [2.0, 2.0]
x_min = 0.04
horizon = 0.01

[kinetics]
size_exponent = 0.0
[kinetics.g1]
type = "linear"
coefficient = 1.0
[kinetics.g2]
type = "linear"
coefficient = 5.0

[initial_datum]
type = "bump"
center = [0.1, 0.75]
halfwidth = [0.05, 0.25]

[grids.emom]
n_time = 51
resolution = [16, 16]

[grids.fvm]
cells = [12, 12]
cfl = 0.45

[run]
label = "tiny benchmark"
snapshot_times = [0.0, 0.01]
snapshot_grid = [24, 24]
time_ladder = [26, 51, 101]
reference_n_time = 801
emom_dof_ladder = [[64, 8, 8], [144, 12, 12], [256, 16, 16]]
fvm_dof_ladder = [[8, 8], [12, 12], [16, 16]]
comparison_reference = [1001, 32, 32]
timing_sizes = [[51, 12, 12], [101, 12, 12], [201, 12, 12]]
timing_repetitions = 1
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "bench.toml"
    path.write_text(BENCHMARK_TOML)
    return path


class TestConfigParsing:
    def test_valid_config(self, config_file):
        spec = em.load_config(config_file)
        assert spec.process.reactor_volume == 1.0
        assert spec.process.initial_concentrations == (2.0, 2.0)
        assert spec.law.exponent_n == 0.0
        assert spec.law.rates(2.0, 2.0) == (2.0, 10.0)
        assert spec.emom_grid.n_time == 51
        assert spec.fvm_grid.cells == (12, 12)
        assert spec.run.label == "tiny benchmark"
        assert spec.run.time_ladder == (26, 51, 101)
        box = spec.initial_density.support_box
        assert box.x1_min == pytest.approx(0.05, rel=1e-15)
        assert box.x1_max == pytest.approx(0.15, rel=1e-15)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            em.load_config(tmp_path / "nope.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("process = [unterminated")
        with pytest.raises(ConfigError, match="TOML"):
            em.load_config(path)

    @pytest.mark.parametrize("needle,replacement,fragment", [
        ("[process]", "[procss]", "procss"),
        ("reactor_volume = 1.0", "reactor_volume = 1.0\nvessel = 2",
         "process.vessel"),
        ('type = "linear"\ncoefficient = 1.0',
         'type = "linear"\ncoefficient = 1.0\nslope = 2',
         "kinetics.g1.slope"),
        ("snapshot_grid = [24, 24]", "snapshot_grid = [24, 24]\nfoo = 1",
         "run.foo"),
    ])
    def test_unknown_keys_rejected_with_path(self, tmp_path, needle,
                                             replacement, fragment):
        path = tmp_path / "cfg.toml"
        path.write_text(BENCHMARK_TOML.replace(needle, replacement, 1))
        with pytest.raises(ConfigError, match=fragment):
            em.load_config(path)

    def test_missing_section(self, tmp_path):
        text = BENCHMARK_TOML.replace("[kinetics]", "[kinetics_off]", 1) \
            .replace("[kinetics.g1]", "[kinetics_off.g1]") \
            .replace("[kinetics.g2]", "[kinetics_off.g2]")
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            em.load_config(path)

    def test_wrong_type_reported_with_path(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(BENCHMARK_TOML.replace(
            "reactor_volume = 1.0", 'reactor_volume = "one"', 1))
        with pytest.raises(ConfigError, match="process.reactor_volume"):
            em.load_config(path)

    def test_bad_kinetics_type(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(BENCHMARK_TOML.replace('type = "linear"',
                                               'type = "cubic"', 1))
        with pytest.raises(ConfigError, match="kinetics.g1.type"):
            em.load_config(path)

    def test_dirac_datum(self, tmp_path):
        text = BENCHMARK_TOML.replace(
            'type = "bump"\ncenter = [0.1, 0.75]\nhalfwidth = [0.05, 0.25]',
            'type = "dirac"\nstate = [0.1, 0.5]\ncount = 100.0')
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        spec = em.load_config(path)
        assert spec.initial_density.is_dirac
        assert spec.initial_density.dirac[1] == 100.0

    def test_support_below_x_min_rejected(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(BENCHMARK_TOML.replace("x_min = 0.04",
                                               "x_min = 0.06", 1))
        with pytest.raises(ConfigError, match="x_min"):
            em.load_config(path)

    def test_power_kinetics(self, tmp_path):
        text = BENCHMARK_TOML.replace(
            '[kinetics.g2]\ntype = "linear"\ncoefficient = 5.0',
            '[kinetics.g2]\ntype = "power"\ncoefficient = 5.0\n'
            'exponent = 0.0')
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        spec = em.load_config(path)
        assert spec.law.rates(2.0, 0.7) == (2.0, 5.0)


class TestCli:
    def run(self, *args):
        return run_main([str(a) for a in args])

    def test_solve_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        code = self.run("solve", "--config", config_file, "--out", out)
        assert code == 0
        header, rows = read_csv(out / "concentrations.csv")
        assert header == ["t", "c1", "c2"]
        assert len(rows) == 51
        # feed calibration reproduces c(0) up to the rounding of one
        # subtraction
        assert rows[0][1:] == pytest.approx([2.0, 2.0], rel=1e-14)
        assert (out / "concentrations.png").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert "environment" in manifest and "git_revision" in \
            manifest["environment"]

    def test_solve_no_plots(self, config_file, tmp_path):
        out = tmp_path / "out"
        code = self.run("solve", "--config", config_file, "--out", out,
                        "--no-plots")
        assert code == 0
        assert not (out / "concentrations.png").exists()

    def test_solve_csv_roundtrip_and_determinism(self, config_file,
                                                 tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert self.run("solve", "--config", config_file, "--out", out_a,
                        "--reproducible") == 0
        assert self.run("solve", "--config", config_file, "--out", out_b,
                        "--reproducible") == 0
        body_a = (out_a / "concentrations.csv").read_bytes()
        body_b = (out_b / "concentrations.csv").read_bytes()
        assert body_a == body_b
        # full-precision round trip against an in-process solve
        spec = em.load_config(config_file)
        res = em.solve(spec.process, spec.initial_density, spec.law,
                       spec.emom_grid)
        _, rows = read_csv(out_a / "concentrations.csv")
        assert np.array_equal(np.array(rows)[:, 1:], res.path.values)

    def test_reconstruct_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert self.run("reconstruct", "--config", config_file, "--out",
                        out) == 0
        psd_files = sorted(out.glob("psd_t*.csv"))
        assert len(psd_files) == 2
        header, rows = read_csv(psd_files[0])
        assert header == ["x1", "x2", "q"]
        assert len(rows) == 24 * 24
        assert all(r[2] >= 0.0 for r in rows)

    def test_radial_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert self.run("radial", "--config", config_file, "--out", out) == 0
        header, rows = read_csv(out / "radial_profile.csv")
        assert header == ["radius", "fraction"]
        assert len(rows) == 51
        fractions = [r[1] for r in rows]
        assert all(0.0 <= f <= 1.0 for f in fractions)

    def test_convergence_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert self.run("convergence", "--config", config_file, "--out",
                        out) == 0
        header, rows = read_csv(out / "errors.csv")
        assert header[0] == "n_time"
        assert [r[0] for r in rows] == [26.0, 51.0, 101.0]
        errs = [r[5] for r in rows]  # linf column
        assert errs[0] > errs[-1]
        _, slopes = read_csv(out / "slopes.csv")
        assert slopes[0][0] == "linf_vs_n_time"
        assert -2.0 < slopes[0][1] < -0.3
        assert (out / "convergence.png").exists()

    def test_compare_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert self.run("compare", "--config", config_file, "--out",
                        out) == 0
        _, rows = read_csv(out / "errors.csv")
        methods = {r[0] for r in rows}
        assert methods == {"emom", "fvm"}
        _, slopes = read_csv(out / "slopes.csv")
        assert {s[0] for s in slopes} == {"emom", "fvm"}
        assert (out / "comparison.png").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(BENCHMARK_TOML.replace("[process]", "[procss]", 1))
        assert self.run("solve", "--config", bad, "--out",
                        tmp_path / "o") == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert self.run("solve", "--config", tmp_path / "nope.toml",
                        "--out", tmp_path / "o") == 2

    def test_numerical_failure_exit_code(self, tmp_path):
        # an oversized explicit step drives the balance negative; abort mode
        # turns that into a numerical failure (exit 3)
        text = BENCHMARK_TOML \
            .replace("horizon = 0.01", "horizon = 0.2\n"
                     'on_negative_concentration = "abort"') \
            .replace('type = "bump"\ncenter = [0.1, 0.75]\n'
                     'halfwidth = [0.05, 0.25]',
                     'type = "dirac"\nstate = [0.1, 0.5]\ncount = 1.0') \
            .replace("n_time = 51", "n_time = 3")
        cfg = tmp_path / "explode.toml"
        cfg.write_text(text)
        assert self.run("solve", "--config", cfg, "--out",
                        tmp_path / "o") == 3

    def test_unknown_subcommand(self):
        assert self.run("frobnicate") == 2

    def test_reconstruct_dirac_rejected(self, tmp_path):
        text = BENCHMARK_TOML.replace(
            'type = "bump"\ncenter = [0.1, 0.75]\nhalfwidth = [0.05, 0.25]',
            'type = "dirac"\nstate = [0.1, 0.5]\ncount = 100.0')
        cfg = tmp_path / "dirac.toml"
        cfg.write_text(text)
        assert self.run("reconstruct", "--config", cfg, "--out",
                        tmp_path / "o") == 2
