"""End-to-end tests for the pat_cli subcommands."""
import logging

import numpy as np
import pytest

import pat_cli
import run_log
from mesh import disk_node_count, load_mesh
from phantoms import write_pgm
from reports import read_csv_report
from wavesim import MeasurementSeries, NodalField

FAST = ["--no-log-file", "--set", "h=0.2", "--set", "T=1.0"]


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    root = logging.getLogger()
    for handler in run_log._installed:
        root.removeHandler(handler)
        handler.close()
    run_log._installed.clear()
    logging.captureWarnings(False)


def _run(command, *argv):
    return pat_cli.main([command, *FAST, *argv])


class TestMeshGen:
    def test_writes_mesh(self, tmp_path, capsys):
        out = tmp_path / "disk.mesh"
        assert pat_cli.main(["mesh-gen", "--out", str(out), "--no-log-file", "--set", "h=0.25"]) == 0
        assert load_mesh(out).n_nodes == disk_node_count(1.0, 0.25)
        assert "Saved to" in capsys.readouterr().out

    def test_log_file_written(self, tmp_path):
        logs = tmp_path / "logs"
        assert pat_cli.main(["mesh-gen", "--out", str(tmp_path / "d.mesh"), "--log-dir", str(logs)]) == 0
        assert len(list(logs.glob("run_*.log"))) == 1


class TestForwardAndReconstruct:
    def test_forward_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.pat", tmp_path / "b.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(a)) == 0
        assert _run("forward", "--phantom", "bumps", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()
        series = MeasurementSeries.load(a)
        assert series.nb == 30
        assert series.nt == 11

    def test_forward_csv_header(self, tmp_path):
        csv = tmp_path / "v.csv"
        assert _run("forward", "--phantom", "vessels", "--out", str(tmp_path / "v.pat"),
                    "--csv", str(csv), "--kappa-override", "0") == 0
        header, body = read_csv_report(csv)
        assert header["command"] == "forward"
        assert header["kappa_override"] == "0.0"
        assert header["h"] == "0.2"
        assert list(body.columns[:2]) == ["t", "node_0"]

    def test_reconstruct_report(self, tmp_path, capsys):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        recon, report = tmp_path / "recon.npy", tmp_path / "recon.csv"
        code = _run("reconstruct", "--data", str(data), "--out", str(recon), "--report", str(report),
                    "--f-true", "bumps", "--set", "iterations=3", "--html")
        assert code == 0
        assert len(NodalField.load(recon)) == disk_node_count(1.0, 0.2)
        header, body = read_csv_report(report)
        assert header["command"] == "reconstruct"
        assert body["iteration"].tolist() == [1, 2, 3]
        assert report.with_suffix(".html").exists()
        assert "Final relative error" in capsys.readouterr().out

    def test_mu_sweep(self, tmp_path):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        sweep = tmp_path / "sweep.csv"
        code = _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"),
                    "--f-true", "bumps", "--mu-sweep", "0,0.5", "--sweep-out", str(sweep),
                    "--set", "iterations=2")
        assert code == 0
        _, body = read_csv_report(sweep)
        assert body["mu"].tolist() == [0.0, 0.5]

    def test_black_raster_gives_zero_voltage(self, tmp_path):
        raster = write_pgm(tmp_path / "black.pgm", np.zeros((32, 32)))
        out = tmp_path / "v.pat"
        assert _run("forward", "--phantom", str(raster), "--out", str(out)) == 0
        assert np.all(MeasurementSeries.load(out).values == 0.0)

    def test_reconstruct_is_deterministic(self, tmp_path):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        for run in ("a", "b"):
            (tmp_path / run).mkdir()
            assert _run("reconstruct", "--data", str(data), "--out", str(tmp_path / run / "r.npy"),
                        "--report", str(tmp_path / run / "r.csv"), "--f-true", "bumps",
                        "--set", "iterations=4") == 0
        for name in ("r.npy", "r.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_report_echoes_step(self, tmp_path):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        report = tmp_path / "r.csv"
        assert _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"),
                    "--report", str(report), "--set", "iterations=2") == 0
        header, _ = read_csv_report(report)
        assert header["data_weighting"] == "film"
        assert header["step_capped"] in ("true", "false")
        assert float(header["step"]) > 0
        assert float(header["normal_norm"]) > 0

    def test_noise_study(self, tmp_path, capsys):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        study = tmp_path / "study.csv"
        code = _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"), "--f-true", "bumps",
                    "--noise-study", str(study), "--set", "iterations=2", "--set", "noise_seeds=2")
        assert code == 0
        _, body = read_csv_report(study)
        assert body["color"].tolist() == ["white", "white", "pink", "pink", "red", "red"]
        assert "red: mean error" in capsys.readouterr().out

    def test_noise_study_needs_truth(self, tmp_path):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        code = _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"),
                    "--noise-study", str(tmp_path / "s.csv"), "--set", "iterations=2")
        assert code == 1

    def test_two_mesh_protocol(self, tmp_path):
        data = tmp_path / "fine.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data), "--set", "data_h=0.1") == 0
        assert MeasurementSeries.load(data).nb == 30
        assert _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"),
                    "--set", "iterations=2") == 0

    def test_boundary_mismatch_fails(self, tmp_path, capsys):
        data = tmp_path / "data.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        code = _run("reconstruct", "--data", str(data), "--out", str(tmp_path / "r.npy"), "--set", "h=0.25")
        assert code == 1
        assert "boundary nodes" in capsys.readouterr().out


class TestAnalysisCommands:
    def test_directivity(self, tmp_path, capsys):
        out = tmp_path / "dir.csv"
        assert pat_cli.main(["directivity", "--out", str(out), "--no-log-file"]) == 0
        header, body = read_csv_report(out)
        assert header["alpha"] == "0.75"
        assert len(body) == 5 * 181
        normal = body[(body["theta_deg"] == 0.0) & (np.isclose(body["kappa"], 0.9))]
        assert normal["linear"].iloc[0] == pytest.approx(8.0 / 7.0)
        assert "critical angle" in capsys.readouterr().out

    def test_noise_level_zero(self, tmp_path):
        data, noisy, psd = tmp_path / "d.pat", tmp_path / "n.pat", tmp_path / "psd.csv"
        assert _run("forward", "--phantom", "bumps", "--out", str(data), "--set", "T=2.0") == 0
        code = _run("noise", "--data", str(data), "--out", str(noisy), "--psd", str(psd),
                    "--set", "noise_level=0", "--set", "T=2.0")
        assert code == 0
        assert np.array_equal(MeasurementSeries.load(noisy).values, MeasurementSeries.load(data).values)
        _, body = read_csv_report(psd)
        assert (body["power"] == 0.0).all()

    def test_noise_level(self, tmp_path):
        data, noisy = tmp_path / "d.pat", tmp_path / "n.pat"
        assert _run("forward", "--phantom", "bumps", "--out", str(data)) == 0
        assert _run("noise", "--data", str(data), "--out", str(noisy),
                    "--set", "noise_color=pink", "--set", "noise_level=0.2", "--seed", "3") == 0
        clean = MeasurementSeries.load(data).values
        ratio = np.linalg.norm(MeasurementSeries.load(noisy).values - clean) / np.linalg.norm(clean)
        assert ratio == pytest.approx(0.2)

    def test_spectrum(self, tmp_path, capsys):
        out = tmp_path / "spec.csv"
        assert _run("spectrum", "--out", str(out), "--set", "n_probes=2") == 0
        header, body = read_csv_report(out)
        assert header["n_probes"] == "2"
        assert list(body.columns) == ["frequency", "power"]
        assert "band power ratio" in capsys.readouterr().out

    def test_adjoint_test(self, tmp_path, capsys):
        out = tmp_path / "adj.csv"
        assert _run("adjoint-test", "--out", str(out)) == 0
        _, body = read_csv_report(out)
        assert np.isfinite(body["mismatch"].iloc[0])
        assert "Adjoint mismatch" in capsys.readouterr().out


class TestErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        code = pat_cli.main(["mesh-gen", "--out", str(tmp_path / "d.mesh"), "--no-log-file",
                             "-c", str(tmp_path / "missing.cfg")])
        assert code == 1
        assert capsys.readouterr().out.startswith("Error:")

    def test_forward_without_phantom(self, tmp_path):
        assert _run("forward", "--out", str(tmp_path / "x.pat")) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            pat_cli.main(["bogus"])
