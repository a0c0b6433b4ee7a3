"""Command-line interface: flags, outputs, exit codes, determinism."""

import csv
import json
import math

import numpy as np
import pytest

from pcvcm import gmrf, inference
from pcvcm.cli import main


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in row] for row in rows[1:]])


class TestScale:
    def test_precision_worked_example(self, tmp_path, capsys):
        out = tmp_path / "scale.json"
        code = main(["scale", "--family", "rw", "--U", "0.968", "--a", "0.01",
                     "-o", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["feasible"] is True
        assert payload["rates"]["theta"] == pytest.approx(4.758, abs=1e-3)

    def test_exchangeable_infeasible(self, tmp_path):
        out = tmp_path / "scale.json"
        code = main(["scale", "--family", "exch", "--U", "0.75", "--a", "0.3",
                     "-o", str(out)])
        assert code == 2
        payload = json.loads(out.read_text())
        assert payload["feasible"] is False
        assert payload["error"] == "infeasible: a <= sqrt(1-U)"

    def test_matern_rates(self, tmp_path):
        out = tmp_path / "scale.json"
        code = main(["scale", "--family", "matern", "--U", "2", "--a", "0.5",
                     "--U-tau", "0.3226", "--a-tau", "0.01", "-o", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["rates"]["lambda_phi"] == pytest.approx(1.3863, abs=1e-4)
        assert payload["rates"]["lambda_tau"] == pytest.approx(14.276, abs=0.03)

    def test_missing_matern_flags(self, tmp_path):
        code = main(["scale", "--family", "matern", "--U", "2", "--a", "0.5"])
        assert code == 1


class TestDensity:
    def test_ar1_curve_mass(self, tmp_path):
        out = tmp_path / "curve.csv"
        code = main(["density", "--family", "ar1", "--U", "0.5", "--a", "0.75",
                     "--grid-points", "1000", "-o", str(out)])
        assert code == 0
        header, data = read_csv(out)
        assert header == ["value", "density"]
        assert len(data) == 1000
        integral = np.trapezoid(data[:, 1], data[:, 0])
        assert integral == pytest.approx(1.0, abs=1e-4)

    def test_distance_scale_decreasing(self, tmp_path):
        out = tmp_path / "curve.csv"
        code = main(["density", "--family", "ar1", "--theta", "1.55",
                     "--scale", "distance", "--grid-points", "200",
                     "-o", str(out)])
        assert code == 0
        _, data = read_csv(out)
        assert np.all(np.diff(data[:, 1]) < 0.0)
        assert data[0, 0] == 0.0 and data[0, 1] > 0.0

    def test_matern_phi_mode(self, tmp_path):
        out = tmp_path / "curve.csv"
        code = main(["density", "--family", "matern-phi", "--lambda-phi",
                     "1.386", "--grid-points", "3000", "-o", str(out)])
        assert code == 0
        _, data = read_csv(out)
        mode = data[np.argmax(data[:, 1]), 0]
        assert mode == pytest.approx(1.386 / 2.0, abs=0.01)

    def test_rate_wins_over_statement(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        code = main(["density", "--family", "ar1", "--theta", "2.0", "--U",
                     "0.5", "--a", "0.75", "--grid-points", "50",
                     "-o", str(out)])
        assert code == 0
        assert "raw rate wins" in capsys.readouterr().err

    def test_nonpositive_rate_rejected(self):
        assert main(["density", "--family", "ar1", "--theta", "-1.0"]) == 2

    def test_exchangeable_default_range(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["density", "--family", "exch", "--theta", "1.0",
                     "--grid-points", "500", "-o", str(out)]) == 0
        _, data = read_csv(out)
        assert data[0, 0] == 0.0
        assert data[-1, 0] < 1.0
        integral = np.trapezoid(data[:, 1], data[:, 0])
        assert integral == pytest.approx(1.0, abs=1e-3)


class TestCompare:
    def test_curves_only(self, tmp_path, capsys):
        code = main(["compare", "--scenario", "sc1", "--reps", "0",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        curves = tmp_path / "compare_sc1_curves.csv"
        assert curves.exists()
        assert not (tmp_path / "compare_sc1_report.json").exists()
        header, data = read_csv(curves)
        assert header == ["d", "pc", "uniform", "reference"]
        # at the base model distance the shrinkage prior is positive while
        # the comparison priors carry nothing
        assert data[0, 0] == 0.0
        assert data[0, 1] > 0.0
        assert data[0, 2] <= 1e-6 and data[0, 3] <= 1e-6

    def test_deterministic_report(self, tmp_path):
        args = ["compare", "--scenario", "sc2", "--n", "25", "--reps", "2",
                "--seed", "3", "--grid-points", "15"]
        code = main(args + ["--output-dir", str(tmp_path / "a")])
        assert code == 0
        code = main(args + ["--output-dir", str(tmp_path / "b")])
        assert code == 0
        a = (tmp_path / "a" / "compare_sc2_report.json").read_bytes()
        b = (tmp_path / "b" / "compare_sc2_report.json").read_bytes()
        assert a == b
        summary = tmp_path / "a" / "compare_sc2_summary.csv"
        with open(summary, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "prior"
        assert {r[0] for r in rows[1:]} == {"pc", "uniform", "reference"}

    def test_invalid_scenario(self, tmp_path):
        assert main(["compare", "--scenario", "bad", "--reps", "0",
                     "--output-dir", str(tmp_path)]) == 2


class TestFit:
    def test_sc2_round_trip(self, tmp_path):
        ds = inference.simulate_scenario("sc2", seed=2, n=500, noise_sd=0.1)
        data = tmp_path / "data.csv"
        ds.to_csv(data)
        out = tmp_path / "fit.json"
        code = main(["fit", "--data", str(data), "--family", "ar1",
                     "--noise", "0.1", "--U", "0.5", "--a", "0.75",
                     "--grid-points", "51", "-o", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["summaries"]["mean_rho"] == pytest.approx(0.5, abs=0.1)
        assert len(payload["vc_estimates"]["beta_mean"]) == 500
        weights = np.array(payload["posterior_weights"])
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)

    def test_covariate_rescaling_equivariance(self, tmp_path):
        # rescaling x by k with U and the slope prior sd scaled by 1/k
        # leaves the fitted total effect curves unchanged
        ds = inference.simulate_scenario("sc2", seed=7, n=60, noise_sd=0.3)
        k = 4.0
        scaled = inference.VcmDataset(y=ds.y, x=k * ds.x, sigma_noise=0.3)
        paths = {}
        for tag, d, u, b0 in (("base", ds, 1.0, 1.0),
                              ("scaled", scaled, 1.0 / k, 1.0 / k)):
            data = tmp_path / f"{tag}.csv"
            d.to_csv(data)
            out = tmp_path / f"{tag}.json"
            code = main(["fit", "--data", str(data), "--family", "rw1",
                         "--noise", "0.3", "--U", repr(u), "--a", "0.05",
                         "--beta0-sd", repr(b0), "--grid-points", "31",
                         "-o", str(out)])
            assert code == 0
            paths[tag] = json.loads(out.read_text())
        base_curve = (np.array(paths["base"]["vc_estimates"]["total_effect_mean"]))
        scaled_curve = (np.array(paths["scaled"]["vc_estimates"]["total_effect_mean"]))
        scale = np.max(np.abs(base_curve))
        np.testing.assert_allclose(scaled_curve, base_curve, atol=0.01 * scale)

    def test_empty_file_exit_code(self, tmp_path):
        data = tmp_path / "data.csv"
        data.write_text("")
        code = main(["fit", "--data", str(data), "--family", "ar1",
                     "--noise", "0.5", "--theta", "1.0"])
        assert code == 1

    def test_missing_file_exit_code(self, tmp_path):
        code = main(["fit", "--data", str(tmp_path / "nope.csv"), "--family",
                     "ar1", "--noise", "0.5", "--theta", "1.0"])
        assert code == 1


class TestStructure:
    def test_icar_matches_rw1(self, tmp_path):
        graph = tmp_path / "graph.txt"
        graph.write_text("5\n1 2\n2 3\n3 4\n4 5\n")
        out = tmp_path / "icar.csv"
        assert main(["structure", "--family", "icar", "--graph", str(graph),
                     "-o", str(out)]) == 0
        matrix = np.loadtxt(out, delimiter=",")
        np.testing.assert_array_equal(matrix, gmrf.build_rw_structure(5, 1).matrix)

    def test_headerless_matrix(self, tmp_path):
        out = tmp_path / "exch.csv"
        assert main(["structure", "--family", "exchangeable", "--n", "3",
                     "--rho", "0.5", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        assert [float(v) for v in lines[0].split(",")] == [1.0, 0.5, 0.5]

    def test_scaled_rw(self, tmp_path):
        out = tmp_path / "rw.csv"
        assert main(["structure", "--family", "rw2", "--n", "8", "--scaled",
                     "-o", str(out)]) == 0
        matrix = np.loadtxt(out, delimiter=",")
        expected = gmrf.scale_structure(gmrf.build_rw_structure(8, 2)).matrix
        np.testing.assert_allclose(matrix, expected, rtol=1e-12)

    def test_usage_error(self):
        assert main(["structure", "--family", "ar1"]) == 1


class TestTopLevel:
    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PCVCM_OUTPUT_DIR", str(tmp_path))
        assert main(["structure", "--family", "ar1", "--n", "2", "--rho",
                     "0.5", "-o", "m.csv"]) == 0
        assert (tmp_path / "m.csv").exists()
