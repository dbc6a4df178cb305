import csv
import io
import json
import math
import subprocess
import sys

import pytest

from aniso3d.cli import CSV_HEADERS, MANIFEST_PREFIX, RunManifest, fmt, run
from aniso3d.thomson import read_thomson_file


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def _parse(text):
    lines = text.splitlines()
    assert lines[0].startswith(MANIFEST_PREFIX)
    manifest = RunManifest.from_json(lines[0][len(MANIFEST_PREFIX):])
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    notes = [ln[2:] for ln in lines[1:] if ln.startswith("#")]
    rows = list(csv.reader(body))
    return manifest, rows[0], rows[1:], notes


def _strip_manifest(text):
    return "\n".join(text.splitlines()[1:])


class TestFormatting:
    def test_fmt(self):
        assert fmt(True) == "yes" and fmt(False) == "no"
        assert fmt(None) == ""
        assert fmt(-0.0) == "0"
        assert fmt(1 / 3) == "0.333333333"
        assert fmt(7) == "7"

    def test_manifest_round_trip(self):
        m = RunManifest("mass", {"eta": 2.0, "pattern_tx": {"type": "isotropic"}})
        assert RunManifest.from_json(m.to_json()) == m


class TestCommands:
    def test_s_table_isotropic(self):
        code, out, _ = _run(["s-table", "--patterns", '[{"type": "isotropic"}]', "--steps", "3"])
        assert code == 0
        manifest, header, rows, _ = _parse(out)
        assert header == CSV_HEADERS["s-table"] and manifest.command == "s-table"
        assert [r[0] for r in rows] == ["2", "4", "6"]
        assert all(float(r[2]) == pytest.approx(2.0) and float(r[3]) == pytest.approx(2.0) for r in rows)

    def test_s_table_narrow_has_no_closed_form(self):
        code, out, _ = _run(["s-table", "--patterns", '[{"type": "narrow", "lambda": 2}]', "--steps", "1"])
        _, _, rows, _ = _parse(out)
        assert code == 0 and rows[0][2] == "" and float(rows[0][3]) > 0

    def test_validate_gains(self):
        code, out, _ = _run(["validate-gains", "--pattern", '{"type": "donut", "m": 3}'])
        _, _, rows, _ = _parse(out)
        assert code == 0 and rows[0][-1] == "yes"
        assert float(rows[0][1]) == pytest.approx(4 * math.pi, rel=1e-8)

    def test_mass_isotropic(self):
        code, out, _ = _run(["mass", "--eta", "3", "--beta", "1", "--rho", "2"])
        _, header, rows, _ = _parse(out)
        row = dict(zip(header, rows[0]))
        assert code == 0
        assert float(row["mass"]) == pytest.approx(4 * math.pi / 3, rel=1e-8)
        assert float(row["mean_degree"]) == pytest.approx(8 * math.pi / 3, rel=1e-8)

    def test_simulate_small(self):
        code, out, _ = _run(["simulate", "--n-nodes", "20", "--trials", "3", "--beta", "1"])
        _, header, rows, _ = _parse(out)
        assert code == 0 and header == CSV_HEADERS["simulate"] and len(rows) == 1

    def test_corner_min_cardioid(self):
        code, out, _ = _run(["corner-min", "--pattern", '{"type": "cardioid", "epsilon": 1}', "--eta", "3"])
        _, header, rows, _ = _parse(out)
        row = dict(zip(header, rows[0]))
        assert code == 0
        assert float(row["min_corner_integral"]) == pytest.approx(math.pi / 2 - math.pi * math.sqrt(3) / 4, abs=1e-4)
        v = [float(row[k]) for k in ("vx", "vy", "vz")]
        assert sum(v) / math.sqrt(3) < -0.99

    def test_multisector_blind_note(self):
        code, out, _ = _run(["multisector", "--n", "6", "--euler-step", "10", "--thomson-restarts", "3"])
        _, _, rows, notes = _parse(out)
        assert code == 0 and rows[0][7] == "yes"
        assert notes == ["n=6 blind-spot: yes, min M_C = 0"]

    def test_thomson_fixture(self, tmp_path):
        path = tmp_path / "t4.txt"
        code, out, _ = _run(["thomson", "--n", "4", "--restarts", "3", "--out", str(path)])
        _, _, rows, _ = _parse(out)
        assert code == 0 and float(rows[0][1]) == pytest.approx(3.674234614, abs=1e-8)
        assert path.read_text().count("# manifest:") == 1
        assert read_thomson_file(path).n == 4


class TestErrors:
    @pytest.mark.parametrize(
        "argv, fragment",
        [
            (["validate-gains"], "pattern"),
            (["validate-gains", "--pattern", "{not json"], "--pattern"),
            (["validate-gains", "--pattern", '{"type": "cardioid"}'], "epsilon"),
            (["validate-gains", "--pattern", '{"type": "cardioid", "epsilon": 3}'], "pattern"),
            (["mass", "--eta", "-1"], "eta"),
            (["thomson"], "n"),
            (["multisector", "--n", "20", "--lambda", "1.5"], "lambda"),
            (["simulate", "--trials", "0"], "trials"),
            (["nonsense"], "invalid choice"),
        ],
    )
    def test_usage_errors_exit_2(self, argv, fragment):
        code, out, err = _run(argv)
        assert code == 2 and out == ""
        assert fragment in err

    def test_bad_thread_count(self, monkeypatch):
        monkeypatch.setenv("ANISO_THREADS", "zero")
        code, _, err = _run(["thomson", "--n", "3"])
        assert code == 2 and "ANISO_THREADS" in err

    def test_unknown_config_field(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"eta": 2.0, "bogus": 1}))
        code, _, err = _run(["mass", "--config", str(p)])
        assert code == 2 and "bogus" in err


class TestReplay:
    ARGS = ["sweep-eta", "--n-nodes", "25", "--trials", "4", "--beta", "2", "--eta-values", "2,3",
            "--patterns", '[{"type": "isotropic"}, {"type": "cardioid", "epsilon": 1}]']

    def test_thread_count_and_replay(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ANISO_THREADS", "1")
        first = tmp_path / "a.csv"
        assert _run(self.ARGS + ["--out", str(first)])[0] == 0
        monkeypatch.setenv("ANISO_THREADS", "4")
        code, again, _ = _run(self.ARGS)
        assert code == 0
        assert _strip_manifest(again) == _strip_manifest(first.read_text())
        # the output file carries its own configuration
        code, replay, _ = _run(["sweep-eta", "--config", str(first)])
        assert code == 0 and _strip_manifest(replay) == _strip_manifest(first.read_text())

    def test_flags_override_config(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"eta": 3.0, "beta": 1.0}))
        _, out, _ = _run(["mass", "--config", str(p), "--beta", "8"])
        manifest, header, rows, _ = _parse(out)
        assert manifest.config["eta"] == 3.0 and manifest.config["beta"] == 8.0
        assert float(dict(zip(header, rows[0]))["mass"]) == pytest.approx(4 * math.pi / 24, rel=1e-8)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aniso3d", "mass"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith(MANIFEST_PREFIX)
