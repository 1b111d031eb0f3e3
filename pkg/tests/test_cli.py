"""End-to-end command-line tests driven through main(argv).

Covers the file formats, byte-level determinism, config precedence
(flags > config file > built-in defaults) and the exit-code contract:
0 success, 2 usage/validation, 3 input parse, 4 resource guard.
"""

import json
import math

import numpy as np
import pytest

import levygibbs.cli as cli
from levygibbs import (
    BasisSystem,
    CoefficientVector,
    GibbsConfig,
    ResourceGuardError,
    SamplingScheme,
    Window,
    conditional_posterior,
    empirical_coefficients,
    read_increments,
    simulate_vg,
)
from levygibbs.cli import main
from levygibbs.experiment import DEFAULT_VG_PARAMS, RegimeSpec
from levygibbs.util import derive_seed

from conftest import MASTER_SEED


def simulate_file(tmp_path, name="inc.txt", delta=0.5, n=4096, seed=3, extra=()):
    path = tmp_path / name
    argv = ["simulate", "--delta", str(delta), "--n", str(n), "--seed", str(seed), "--out", str(path)]
    assert main(argv + list(extra)) == 0
    return path


class TestSimulate:
    def test_vg_file_round_trips_bitwise(self, tmp_path):
        path = simulate_file(tmp_path, delta=0.001, n=4096, seed=3)
        series = read_increments(path)
        direct = simulate_vg(DEFAULT_VG_PARAMS, SamplingScheme(0.001, 4096), 3)
        assert series.scheme.delta == 0.001 and series.scheme.n == 4096
        assert np.array_equal(series.values, direct.values)

    def test_header_carries_metadata(self, tmp_path, capsys):
        path = simulate_file(tmp_path, delta=0.25, n=64, seed=11)
        first = path.read_text().splitlines()[0]
        assert first == "# delta=0.25 n=64 seed=11"
        assert "simulate: wrote n=64" in capsys.readouterr().out

    def test_no_header_and_explicit_delta(self, tmp_path):
        path = simulate_file(tmp_path, delta=0.25, n=64, extra=["--no-header"])
        lines = path.read_text().splitlines()
        assert len(lines) == 64 and not lines[0].startswith("#")
        series = read_increments(path, delta=0.25)
        assert series.scheme.n == 64

    def test_compound_poisson_point_jumps(self, tmp_path):
        path = tmp_path / "cp.txt"
        argv = [
            "simulate", "--process", "cpois", "--lambda", "2.0", "--jump", "point:0.7",
            "--delta", "0.5", "--n", "2048", "--seed", "5", "--out", str(path),
        ]
        assert main(argv) == 0
        vals = read_increments(path).values
        counts = np.round(vals / 0.7)
        assert np.array_equal(counts * 0.7, vals)
        assert vals.max() > 0.0

    def test_degenerate_vg_writes_zeros(self, tmp_path):
        path = simulate_file(tmp_path, extra=["--mu", "0", "--sigma", "0"])
        assert not np.any(read_increments(path).values)


class TestEstimate:
    def test_coefficients_round_trip(self, tmp_path):
        inc = simulate_file(tmp_path, delta=0.5, n=4096, seed=3)
        out = tmp_path / "coeffs.json"
        assert main(["estimate", "--increments", str(inc), "--K", "8", "--out", str(out)]) == 0
        loaded = CoefficientVector.from_dict(json.loads(out.read_text()))
        basis = BasisSystem.trigonometric(Window(0.005, 0.015), 8)
        direct = empirical_coefficients(read_increments(inc), basis)
        assert np.array_equal(loaded.values, direct.values)
        assert loaded.t_n == 0.5 * 4096

    def test_output_bytes_deterministic(self, tmp_path):
        inc = simulate_file(tmp_path, delta=0.5, n=4096, seed=3)
        o1, o2 = tmp_path / "c1.json", tmp_path / "c2.json"
        for out in (o1, o2):
            assert main(["estimate", "--increments", str(inc), "--K", "8", "--out", str(out)]) == 0
        assert o1.read_bytes() == o2.read_bytes()

    def test_truth_flag_reports_l2_error(self, tmp_path, capsys):
        inc = simulate_file(tmp_path, delta=0.5, n=1024, seed=3)
        out = tmp_path / "coeffs.json"
        argv = [
            "estimate", "--increments", str(inc), "--K", "4", "--out", str(out),
            "--truth", "vg:0,0.117,0.002",
        ]
        assert main(argv) == 0
        assert "l2_error_on_D=" in capsys.readouterr().out

    def test_legendre_family(self, tmp_path):
        inc = simulate_file(tmp_path, delta=0.5, n=1024, seed=3)
        out = tmp_path / "coeffs.json"
        argv = ["estimate", "--increments", str(inc), "--family", "legendre",
                "--J", "2", "--L", "4", "--out", str(out)]
        assert main(argv) == 0
        loaded = CoefficientVector.from_dict(json.loads(out.read_text()))
        assert loaded.basis.K == 8 and loaded.basis.family == "piecewise-legendre"

    def test_pipeline_matches_run_regime(self, tmp_path, regime_reports):
        """simulate --j 1 then estimate reproduces the harness estimator bitwise."""
        sim_seed = int(derive_seed(MASTER_SEED, "simulate"))
        inc = tmp_path / "j1.txt"
        assert main(["simulate", "--j", "1", "--seed", str(sim_seed), "--out", str(inc)]) == 0
        out = tmp_path / "coeffs.json"
        assert main(["estimate", "--increments", str(inc), "--out", str(out)]) == 0
        loaded = CoefficientVector.from_dict(json.loads(out.read_text()))
        assert np.array_equal(loaded.values, regime_reports[1].theta_hat.values)


def write_coeffs(tmp_path, values, t_n=20.0, name="coeffs.json"):
    basis = BasisSystem.trigonometric(Window(0.005, 0.015), len(values))
    vec = CoefficientVector(basis, np.asarray(values, dtype=float), role="empirical", t_n=t_n)
    path = tmp_path / name
    path.write_text(json.dumps(vec.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


class TestPosterior:
    def test_output_files(self, tmp_path):
        coeffs = write_coeffs(tmp_path, [5.0, -2.0, 1.0, 0.5])
        out = tmp_path / "post"
        argv = ["posterior", "--coeffs", str(coeffs), "--out-dir", str(out),
                "--draws", "200", "--seed", "1"]
        assert main(argv) == 0
        records = [json.loads(line) for line in (out / "draws.jsonl").read_text().splitlines()]
        assert len(records) == 200
        for rec in records[:20]:
            assert set(rec) == {"draw_index", "K", "theta"}
            assert len(rec["theta"]) == rec["K"]
        k_rows = (out / "k_posterior.csv").read_text().splitlines()
        assert k_rows[0] == "j,K,prob"
        assert len(k_rows) == 1 + 4  # k_max = min(K=4, ceil(t_n))
        assert sum(float(r.split(",")[2]) for r in k_rows[1:]) == pytest.approx(1.0, abs=1e-12)
        band_rows = (out / "band.csv").read_text().splitlines()
        assert band_rows[0] == "x,psi_true,psi_mean,lo,hi"
        assert len(band_rows) == 1 + 512

    def test_byte_identical_reruns(self, tmp_path):
        coeffs = write_coeffs(tmp_path, [5.0, -2.0, 1.0, 0.5])
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            argv = ["posterior", "--coeffs", str(coeffs), "--out-dir", str(d),
                    "--draws", "100", "--seed", "7"]
            assert main(argv) == 0
        for name in ("draws.jsonl", "k_posterior.csv", "band.csv"):
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()

    def test_fixed_k_pins_dimension(self, tmp_path):
        coeffs = write_coeffs(tmp_path, [5.0, -2.0, 1.0, 0.5])
        out = tmp_path / "post"
        argv = ["posterior", "--coeffs", str(coeffs), "--out-dir", str(out),
                "--draws", "50", "--seed", "1", "--fixed-K", "3"]
        assert main(argv) == 0
        records = [json.loads(line) for line in (out / "draws.jsonl").read_text().splitlines()]
        assert all(rec["K"] == 3 for rec in records)
        probs = [float(r.split(",")[2]) for r in (out / "k_posterior.csv").read_text().splitlines()[1:]]
        assert probs == [0.0, 0.0, 1.0, 0.0]

    def test_fixed_k1_draw_moments(self, tmp_path):
        """1e5 fixed-K draws reproduce the closed-form coefficient posterior."""
        coeffs = write_coeffs(tmp_path, [5.0, -2.0, 1.0, 0.5])
        out = tmp_path / "post"
        argv = ["posterior", "--coeffs", str(coeffs), "--out-dir", str(out),
                "--draws", "100000", "--seed", "2", "--fixed-K", "1", "--grid-points", "2"]
        assert main(argv) == 0
        first = np.array([
            json.loads(line)["theta"][0]
            for line in (out / "draws.jsonl").read_text().splitlines()
        ])
        cond = conditional_posterior([5.0], 20.0, GibbsConfig())
        n = len(first)
        sd = math.sqrt(cond.variance)
        assert abs(first.mean() - cond.means[0]) < 4.0 * sd / math.sqrt(n)
        assert abs(first.var(ddof=1) - cond.variance) < 4.0 * cond.variance * math.sqrt(2.0 / (n - 1))

    def test_label_j_column(self, tmp_path):
        coeffs = write_coeffs(tmp_path, [5.0, -2.0])
        out = tmp_path / "post"
        argv = ["posterior", "--coeffs", str(coeffs), "--out-dir", str(out),
                "--draws", "10", "--label-j", "2"]
        assert main(argv) == 0
        rows = (out / "k_posterior.csv").read_text().splitlines()[1:]
        assert all(row.startswith("2,") for row in rows)

    def test_missing_horizon_is_usage_error(self, tmp_path, capsys):
        basis = BasisSystem.trigonometric(Window(0.005, 0.015), 2)
        vec = CoefficientVector(basis, np.array([1.0, 2.0]))
        path = tmp_path / "bare.json"
        path.write_text(json.dumps(vec.to_dict()) + "\n")
        assert main(["posterior", "--coeffs", str(path), "--out-dir", str(tmp_path / "o")]) == 2
        assert "t-n" in capsys.readouterr().err


class TestExperiment:
    def test_j1_outputs_and_byte_determinism(self, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert main(["experiment", "--j", "1", "--seed", "0", "--out-dir", str(d)]) == 0
        names = ["report.json", "errors.csv", "k_posterior.csv", "band.csv"]
        for name in names:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
        payload = json.loads((dirs[0] / "report.json").read_text())
        assert payload["schema"] == "levygibbs-report-v1"
        assert payload["regimes"][0]["err_postmean"] == 125.71867444127629

    def test_multi_regime_band_files(self, tmp_path, capsys):
        out = tmp_path / "multi"
        argv = ["experiment", "--j", "1", "--j", "2", "--seed", "0",
                "--draws", "50", "--out-dir", str(out)]
        assert main(argv) == 0
        assert (out / "band_j1.csv").exists() and (out / "band_j2.csv").exists()
        assert not (out / "band.csv").exists()
        stdout = capsys.readouterr().out
        assert "experiment: j=1" in stdout and "experiment: j=2" in stdout

    def test_requires_regime_and_out_dir(self, tmp_path):
        assert main(["experiment", "--out-dir", str(tmp_path / "x")]) == 2
        assert main(["experiment", "--j", "1"]) == 2


class TestCheck:
    def test_j3_defaults_all_pass(self, capsys):
        assert main(["check", "--j", "3"]) == 0
        out = capsys.readouterr().out
        assert "K=320" in out
        assert "n*delta^(5/3)" in out
        assert "[FAIL]" not in out

    def test_beta_zero_flags_failure(self, capsys):
        assert main(["check", "--j", "1", "--beta", "0"]) == 0
        assert "[FAIL]" in capsys.readouterr().out

    def test_fixed_k_case(self, capsys):
        assert main(["check", "--j", "1", "--case", "fixed-K"]) == 0
        out = capsys.readouterr().out
        assert "n*delta^3" in out and "n*delta^(5/3)" not in out


class TestConfigPrecedence:
    def test_file_overrides_defaults_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 7\nn = 64\ndelta = 0.25\n# comment line\n")
        f1, f2 = tmp_path / "a.txt", tmp_path / "b.txt"
        assert main(["simulate", "--config", str(cfg), "--out", str(f1)]) == 0
        assert f1.read_text().splitlines()[0] == "# delta=0.25 n=64 seed=7"
        assert main(["simulate", "--config", str(cfg), "--seed", "9", "--out", str(f2)]) == 0
        assert f2.read_text().splitlines()[0] == "# delta=0.25 n=64 seed=9"

    def test_boolean_keys(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("no_header = yes\nseed = 1\nn = 8\ndelta = 0.5\n")
        out = tmp_path / "x.txt"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert not out.read_text().startswith("#")

    def test_unknown_key_is_parse_error(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3
        assert "bogus" in capsys.readouterr().err

    def test_bad_value_is_parse_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = lots\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3

    def test_missing_equals_is_parse_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just a line\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3


class TestExitCodes:
    def test_usage_errors_exit_2(self, tmp_path, capsys):
        assert main([]) == 2
        assert main(["bogus-command"]) == 2
        assert main(["simulate"]) == 2  # missing --out
        assert main(["simulate", "--out", str(tmp_path / "x")]) == 2  # missing scheme
        capsys.readouterr()

    def test_bad_jump_spec_exits_3(self, tmp_path, capsys):
        argv = ["simulate", "--process", "cpois", "--lambda", "1.0", "--jump", "fancy:1",
                "--delta", "0.5", "--n", "16", "--out", str(tmp_path / "x")]
        assert main(argv) == 3
        assert "fancy" in capsys.readouterr().err

    def test_malformed_increments_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1.0\nabc\n")
        assert main(["estimate", "--increments", str(bad), "--delta", "0.5",
                     "--K", "2", "--out", str(tmp_path / "o.json")]) == 3
        assert "line 2" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["estimate", "--increments", str(tmp_path / "nope.txt"),
                     "--K", "2", "--out", str(tmp_path / "o.json")]) == 2
        capsys.readouterr()

    def test_resource_guard_exits_4(self, tmp_path, monkeypatch, capsys):
        def refuse(*args, **kwargs):
            raise ResourceGuardError("budget exceeded")

        monkeypatch.setattr(cli, "delta_condition", refuse)
        assert main(["check", "--j", "1"]) == 4
        assert "budget exceeded" in capsys.readouterr().err

    def test_thread_env_validated(self, tmp_path, monkeypatch, capsys):
        inc = simulate_file(tmp_path, delta=0.5, n=256, seed=1)
        out = tmp_path / "o.json"
        monkeypatch.setenv("LEVY_GIBBS_THREADS", "abc")
        assert main(["estimate", "--increments", str(inc), "--K", "2", "--out", str(out)]) == 2
        assert "LEVY_GIBBS_THREADS" in capsys.readouterr().err
        monkeypatch.setenv("LEVY_GIBBS_THREADS", "2")
        assert main(["estimate", "--increments", str(inc), "--K", "2", "--out", str(out)]) == 0
