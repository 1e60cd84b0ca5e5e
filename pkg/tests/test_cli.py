"""Command-line client: in-process dispatch, artifacts, and exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from eitconvex.calibration import load_certificate, save_certificate
from eitconvex.cli import main
from eitconvex.measurement import assemble_f, save_matrix_csv
from eitconvex.service.handlers import hash_of
from eitconvex.service.schemas import ExperimentConfig

SMALL = dict(
    m=20,
    landscape_resolution=10,
    basins_resolution=6,
    noise_trials=2,
    property_trials=10,
    seed=0,
)


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL), encoding="utf-8")
    return path


def run(*argv) -> int:
    return main([str(a) for a in argv])


class TestLandscapeCommand:
    def test_writes_csv_and_svg(self, config_path, tmp_path, capsys):
        out = tmp_path / "art"
        code = run("landscape", "--config", config_path, "--out", out)
        assert code == 0
        assert (out / "landscape.svg").exists()
        lines = (out / "landscape.csv").read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert lines[1] == "sigma_2,sigma_3,residual"
        assert len(lines) == 2 + 10 * 10
        assert "strict local minima" in capsys.readouterr().out

    def test_flags_override_config_file(self, config_path, tmp_path):
        out = tmp_path / "art"
        assert run("landscape", "--config", config_path, "--m", 6, "--out", out) == 0
        header = (out / "landscape.csv").read_text().splitlines()[0]
        expected = hash_of(
            ExperimentConfig(**{**SMALL, "m": 6, "out_dir": str(out)})
        )
        assert header == f"# config_hash={expected}"


class TestBasinsCommand:
    def test_deterministic_artifacts(self, config_path, tmp_path):
        out1, out2 = tmp_path / "one", tmp_path / "two"
        assert run("basins", "--config", config_path, "--out", out1) == 0
        assert run("basins", "--config", config_path, "--out", out2) == 0
        assert (out1 / "basins.csv").read_bytes() == (out2 / "basins.csv").read_bytes()
        assert (out1 / "basins.svg").read_bytes() == (out2 / "basins.svg").read_bytes()

    def test_reports_populations(self, config_path, tmp_path, capsys):
        assert run("basins", "--config", config_path, "--out", tmp_path / "a") == 0
        text = capsys.readouterr().out
        assert "good" in text and "bad" in text


class TestCalibrateCommand:
    def test_writes_certificate(self, config_path, tmp_path, capsys):
        out = tmp_path / "art"
        assert run("calibrate", "--config", config_path, "--out", out) == 0
        cert = load_certificate(out / "certificate.json")
        assert cert.m == 20
        assert cert.lam == pytest.approx(4.503428785747502e-08, rel=1e-12)
        assert "verification" in capsys.readouterr().out

    def test_insufficient_modes_exits_2(self, config_path, tmp_path):
        code = run("calibrate", "--config", config_path, "--m", 6, "--out", tmp_path / "a")
        assert code == 2


class TestSolveCommand:
    def test_exact_with_certificate(self, config_path, tmp_path, capsys):
        out = tmp_path / "art"
        assert run("calibrate", "--config", config_path, "--out", out) == 0
        code = run(
            "solve",
            "--config", config_path,
            "--certificate", out / "certificate.json",
            "--out", out,
        )
        assert code == 0
        report = json.loads((out / "solve_report.jsonl").read_text().splitlines()[0])
        assert report["converged"] is True
        assert "euclidean" in capsys.readouterr().out

    def test_measurement_file_roundtrip(self, config_path, tmp_path, model20, truth):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run("calibrate", "--config", config_path, "--out", out_a) == 0
        y_path = tmp_path / "y.csv"
        save_matrix_csv(y_path, assemble_f(model20, truth))
        cert = out_a / "certificate.json"
        code = run("solve", "--config", config_path, "--certificate", cert, "--out", out_a)
        assert code == 0
        code = run(
            "solve",
            "--config", config_path,
            "--certificate", cert,
            "--y", y_path,
            "--out", out_b,
        )
        assert code == 0
        assert (
            (out_a / "solve_report.jsonl").read_bytes()
            == (out_b / "solve_report.jsonl").read_bytes()
        )

    def test_deflated_measurements_exit_2(self, config_path, tmp_path, model20, truth):
        y_path = tmp_path / "y.csv"
        save_matrix_csv(y_path, 0.5 * assemble_f(model20, truth))
        code = run(
            "solve", "--config", config_path, "--y", y_path, "--out", tmp_path / "a"
        )
        assert code == 2

    def test_noise_trials_write_jsonl(self, config_path, tmp_path, cert_pinned):
        out = tmp_path / "art"
        cert_path = tmp_path / "cert.json"
        save_certificate(cert_path, cert_pinned)
        code = run(
            "solve",
            "--config", config_path,
            "--certificate", cert_path,
            "--delta", "1e-3",
            "--trials", "2",
            "--out", out,
        )
        assert code == 0
        rows = [
            json.loads(line)
            for line in (out / "noise_trials.jsonl").read_text().splitlines()
        ]
        assert len(rows) == 2
        assert all(row["holds"] for row in rows)

    def test_trials_without_certificate_exit_1(self, config_path, tmp_path):
        code = run(
            "solve",
            "--config", config_path,
            "--delta", "1e-3",
            "--trials", "2",
            "--out", tmp_path / "a",
        )
        assert code == 1


class TestPropertiesCommand:
    def test_all_suites_pass(self, config_path, tmp_path, capsys):
        out = tmp_path / "art"
        assert run("properties", "--config", config_path, "--out", out) == 0
        lines = (out / "properties.jsonl").read_text().splitlines()
        names = {json.loads(line)["name"] for line in lines}
        assert "monotonicity-finite" in names
        assert "converse-monotonicity" in names
        text = capsys.readouterr().out
        assert "pass" in text
