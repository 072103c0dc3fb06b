import json
import subprocess
import sys

import numpy as np
import pytest

import blowup
from blowup import acceptance, cli
from blowup.acceptance import CriterionResult
from blowup.storage import read_csv, read_snapshot


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestSpectrum:
    def test_known_eigenvalues(self, tmp_path, capsys):
        code, out = run(tmp_path, "spectrum", "--p", "7", "--ell", "0..3", "--N", "24")
        assert code == 0
        header, rows = read_csv(out / "spectrum.csv")
        assert header == ["p", "ell", "m", "a3", "re", "im"]
        lams = np.array([float(r[4]) + 1j * float(r[5]) for r in rows])
        for lam in (1, 0, -1, -2, -3):
            assert np.abs(lams - lam).min() < 1e-7
        assert "gap" in capsys.readouterr().out

    def test_boosted_operator(self, tmp_path):
        code, out = run(tmp_path, "spectrum", "--p", "7", "--Lmax", "4", "--N", "12", "--a3", "0.1")
        assert code == 0
        _, rows = read_csv(out / "spectrum.csv")
        assert {r[1] for r in rows} == {"all"} and {r[3] for r in rows} == {"0.1"}
        lams = np.array([float(r[4]) for r in rows])
        assert np.abs(lams - 1).min() < 1e-7 and np.abs(lams).min() < 1e-7
        assert manifest(out)["config"]["ell"] is None

    def test_deterministic(self, tmp_path):
        outs = [run(tmp_path, "spectrum", "--p", "5", "--ell", "0,1", "--N", "16", name=f"r{k}")[1] for k in range(2)]
        assert (outs[0] / "spectrum.csv").read_bytes() == (outs[1] / "spectrum.csv").read_bytes()
        assert manifest(outs[0])["config_hash"] == manifest(outs[1])["config_hash"]


class TestDissipativity:
    def test_no_violations(self, tmp_path, capsys):
        code, out = run(tmp_path, "dissipativity", "--p", "5", "--samples", "100", "--seed", "1")
        assert code == 0
        assert "0 violations" in capsys.readouterr().out
        header, rows = read_csv(out / "margins.csv")
        assert len(rows) == 100

    def test_workers_do_not_change_output(self, tmp_path, monkeypatch):
        args = ("dissipativity", "--p", "4,7", "--samples", "5", "--seed", "3")
        _, one = run(tmp_path, *args, name="one")
        monkeypatch.setenv(cli.WORKERS_ENV, "2")
        _, two = run(tmp_path, *args, name="two")
        assert (one / "margins.csv").read_bytes() == (two / "margins.csv").read_bytes()

    @pytest.mark.parametrize("value", ["zero", "0"])
    def test_bad_worker_count(self, tmp_path, monkeypatch, value):
        monkeypatch.setenv(cli.WORKERS_ENV, value)
        code, _ = run(tmp_path, "dissipativity", "--p", "5", "--samples", "2")
        assert code == 2


class TestEvolve:
    def test_trajectory_and_snapshots(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--p", "7", "--N", "12", "--Lmax", "2", "--tau-max", "0.2",
                        "--cadence", "10", "--snapshots", "2", "--initial", "perturbed")
        assert code == 0
        header, rows = read_csv(out / "trajectory.csv")
        assert header[:6] == ["tau", "norm_total", "norm_sobolev", "a1", "a2", "a3"]
        assert header[6:] == ["amp_l0", "amp_l1", "amp_l2"]
        taus = [float(r[0]) for r in rows]
        assert taus[0] == 0.0 and np.all(np.diff(taus) > 0)
        snaps = sorted(out.glob("snapshot_*.json"))
        assert snaps
        _, head = read_snapshot(snaps[-1])
        assert abs(head["tau"] - taus[-1]) < 1e-12

    def test_text_snapshots(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--N", "12", "--Lmax", "2", "--tau-max", "0.05", "--text")
        assert code == 0
        assert list(out.glob("snapshot_*.csv")) and not list(out.glob("snapshot_*.bin"))

    def test_overflow_exit(self, tmp_path):
        code, out = run(tmp_path, "evolve", "--initial", "perturbed", "--delta", "3", "--tau-max", "5",
                        "--N", "12", "--Lmax", "2", "--cadence", "100000")
        assert code == 3
        fail = json.loads((out / "failure.json").read_text())
        assert fail["workflow"] == "evolve" and "traceback" in fail

    @pytest.mark.parametrize("argv", [
        ("--p", "3"),
        ("--a3", "0.9"),
        ("--dtau", "0.5"),
        ("--tau-max", "-1"),
        ("--weights", "1,2"),
    ])
    def test_invalid_parameters(self, tmp_path, argv, capsys):
        code, out = run(tmp_path, "evolve", *argv)
        assert code == 2
        assert "configuration error" in capsys.readouterr().err
        assert not out.exists()


class TestConfig:
    def test_flags_override_document(self, tmp_path):
        doc = tmp_path / "c.json"
        doc.write_text(json.dumps({"p": 5.0, "N": 16, "ell": "0"}))
        code, out = run(tmp_path, "spectrum", "--config", str(doc), "--N", "12")
        assert code == 0
        cfg = manifest(out)["config"]
        assert cfg["p"] == 5.0 and cfg["N"] == 12 and cfg["ell"] == "0"

    def test_unknown_field(self, tmp_path):
        doc = tmp_path / "c.json"
        doc.write_text(json.dumps({"q": 1}))
        assert run(tmp_path, "spectrum", "--config", str(doc))[0] == 2

    def test_unreadable_document(self, tmp_path):
        assert run(tmp_path, "spectrum", "--config", str(tmp_path / "missing.json"))[0] == 2

    def test_manifest_fields(self, tmp_path):
        code, out = run(tmp_path, "resolvent", "--ell", "0,1", "--points", "5")
        assert code == 0
        m = manifest(out)
        assert {"workflow", "config", "config_hash", "version", "wall_time_seconds", "outputs", "summary"} <= set(m)
        assert m["version"] == blowup.__version__
        for f in m["outputs"]:
            assert (out / f).exists()

    @pytest.mark.parametrize("spec,expected", [("0..3", [0, 1, 2, 3]), ("0,2", [0, 2]), (4, [4]), (None, None)])
    def test_parse_range(self, spec, expected):
        assert cli.parse_range(spec) == expected


class TestVerify:
    def test_passing_subset(self, tmp_path, capsys):
        code, out = run(tmp_path, "verify", "--only", "1,3")
        assert code == 0
        _, rows = read_csv(out / "acceptance.csv")
        assert [r[0] for r in rows] == ["1", "3"]
        assert "[PASS]" in capsys.readouterr().out

    def test_failure_exit(self, tmp_path, monkeypatch):
        def broken():
            return CriterionResult(1, "broken", False, 1.0, 0.0)

        monkeypatch.setattr(acceptance, "CRITERIA", (broken,))
        code, out = run(tmp_path, "verify")
        assert code == 4
        assert manifest(out)["summary"]["failed"] == [1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "blowup", "resolvent", "--ell", "0", "--out", str(tmp_path / "r")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "r" / "manifest.json").exists()


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
