import json

import numpy as np
import pytest

from cvsense import cli, io
from cvsense import gaussian as g
from cvsense import montecarlo as mc
from cvsense.network import SchemeParams, sense

HEADLINE = SchemeParams.from_photons(4, 2.18, 0.30, 0.735)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestIo:
    @pytest.mark.parametrize("units", ["half", "snu"])
    def test_covariance_round_trip(self, tmp_path, units):
        state = sense(HEADLINE, [0.01, 0.0, -0.02, 0.0])
        path = tmp_path / "cov.csv"
        io.write_covariance(state, path, units=units)
        assert io.read_covariance(path).allclose(state)

    def test_covariance_shape_check(self, tmp_path):
        path = tmp_path / "cov.csv"
        io.write_covariance(g.vacuum(2), path)
        text = path.read_text().replace("n_modes=2", "n_modes=3")
        path.write_text(text)
        with pytest.raises(ValueError, match="expected"):
            io.read_covariance(path)

    def test_bad_units(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_covariance(g.vacuum(1), tmp_path / "c.csv", units="volts")

    def test_spectrum_round_trip(self, tmp_path):
        trace = mc.synthesize_spectrum(HEADLINE, 0.25, seed=4)
        path = tmp_path / "s.csv"
        io.write_spectrum(trace, path)
        back = io.read_spectrum(path)
        np.testing.assert_array_equal(back.psd, trace.psd)
        assert (back.V_sn, back.phi_avg_label, back.n_averages, back.seed) == (1.0, 0.25, 2000, trace.seed)

    def test_spectrum_missing_header(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("freq_hz,psd\n1,2\n")
        with pytest.raises(ValueError, match="missing"):
            io.read_spectrum(path)

    def test_json_handles_numpy(self):
        text = io.dumps_json({"a": np.float64(1.5), "b": np.arange(2), "c": float("inf")})
        assert json.loads(text) == {"a": 1.5, "b": [0, 1], "c": "inf"}


class TestParsing:
    def test_values(self):
        assert cli.parse_values("1,2,3") == [1.0, 2.0, 3.0]
        assert cli.parse_values("0:1:3") == [0.0, 0.5, 1.0]
        assert cli.parse_values("1:100:3:log") == pytest.approx([1, 10, 100])

    @pytest.mark.parametrize("text", ["", "1:2", "1:2:0", "0:1:3:log", "1:2:3:cubic"])
    def test_bad_values(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_values(text)

    def test_precedence(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("eta = 0.5\nphotons = 3\ngrid.M = 1:3:3\n")
        cfg = cli.resolve_config(["gain-curve", "--config", str(cfg_path), "--eta", "0.9"])
        assert (cfg["eta"], cfg["photons"], cfg["grid"]["M"]) == (0.9, 3.0, [1.0, 2.0, 3.0])

    def test_json_config(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"modes": 3, "n-sqz": 0.2, "grid": {"eta": "0.5,0.7"}}))
        cfg = cli.resolve_config(["sensitivity", "--config", str(cfg_path)])
        assert (cfg["modes"], cfg["n_sqz"], cfg["grid"]["eta"]) == (3, 0.2, [0.5, 0.7])

    def test_unknown_key(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("colour = blue\n")
        with pytest.raises(cli.UsageError, match="unknown"):
            cli.resolve_config(["sensitivity", "--config", str(cfg_path)])

    def test_format_restriction(self):
        with pytest.raises(cli.UsageError):
            cli.resolve_config(["sensitivity", "--format", "csv"])


class TestCommands:
    def test_sensitivity(self, capsys):
        code, out, _ = run(capsys, "sensitivity", "--photons", "2.48", "--n-sqz", "0.30")
        assert code == 0
        payload = json.loads(out)
        assert payload["schema_version"] == io.SCHEMA_VERSION
        assert payload["result"]["sigma"] == pytest.approx(0.100512, abs=1e-6)
        assert payload["config"]["photons"] == 2.48

    def test_gain_curve_csv(self, capsys):
        code, out, _ = run(capsys, "gain-curve", "--eta", "1", "--photons", "10", "--grid", "M=1,4")
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# schema_version=")
        assert lines[1].split(",")[:4] == ["M", "N", "eta", "gain"]
        assert float(lines[3].split(",")[3]) == pytest.approx(np.sqrt(41 / 11))

    def test_qcrb_unsplit(self, capsys):
        code, out, _ = run(capsys, "qcrb", "--ent-method", "unsplit", "--grid", "N=2.5", "--format", "json")
        assert code == 0
        rows = json.loads(out)["result"]["rows"]
        assert rows[0]["ordering_holds"] is True

    def test_montecarlo_is_seeded(self, capsys):
        args = ("montecarlo", "--photons", "2.48", "--n-sqz", "0.30", "--shots", "5000", "--seed", "3")
        _, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert first == second
        assert json.loads(first)["config"]["seed"] == 3

    def test_synthesize_then_analyze(self, capsys, tmp_path):
        out_dir = tmp_path / "spectra"
        code, _, _ = run(capsys, "synthesize", "--photons", "2.48", "--n-sqz", "0.30",
                         "--seed", "5", "--out", str(out_dir))
        assert code == 0
        assert len(list(out_dir.glob("spectrum_*.csv"))) == 12
        truth = json.loads((out_dir / "truth.json").read_text())["truth"]
        code, out, _ = run(capsys, "analyze", str(out_dir))
        assert code == 0
        res = json.loads(out)["result"]
        assert abs(res["sigma_min"] - truth["sigma_min"]) < 3 * res["errors"]["sigma_min"]
        assert res["N_coh"] == pytest.approx(2.18, rel=0.05)

    def test_calibrate_jones(self, capsys):
        code, out, _ = run(capsys, "calibrate", "--synthetic", "jones", "--phi-deg", "15")
        assert code == 0
        res = json.loads(out)["result"]
        np.testing.assert_allclose(res["k"], -4.0, atol=1e-9)
        np.testing.assert_allclose(res["b"], 15.0, atol=1e-9)

    def test_calibrate_from_file(self, capsys, tmp_path):
        path = tmp_path / "fringes.csv"
        ramp = np.linspace(0, 360, 24, endpoint=False)
        lines = ["channel,theta_v_deg,ramp_deg,signal"]
        for tv in (0.0, 2.0, 4.0, 6.0):
            for r in ramp:
                lines.append(f"0,{tv},{r},{-np.sin(np.radians(-4 * tv + 10 + r))}")
        path.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "calibrate", str(path))
        assert code == 0
        assert json.loads(out)["result"]["k"][0] == pytest.approx(-4.0)

    @pytest.mark.parametrize("argv", [
        ("sensitivity", "--eta", "1.5"),
        ("sensitivity", "--modes", "0"),
        ("gain-curve", "--grid", "M=1.5"),
        ("analyze",),
        ("calibrate",),
        ("sensitivity", "--bogus"),
        ("analyze", "/nonexistent/spectrum.csv"),
    ])
    def test_invalid_input_exit_code(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert json.loads(err)["exit_code"] == 2

    def test_numerical_failure_exit_code(self, capsys, monkeypatch):
        def boom(cfg):
            raise ArithmeticError("singular")

        monkeypatch.setitem(cli.COMMANDS, "sensitivity", boom)
        code, _, err = run(capsys, "sensitivity")
        assert code == 3
        assert json.loads(err)["error"] == "ArithmeticError"

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "s.json"
        assert run(capsys, "sensitivity", "--out", str(path))[0] == 0
        assert "sigma" in json.loads(path.read_text())["result"]
