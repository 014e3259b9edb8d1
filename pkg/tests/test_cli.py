import csv
import json
import shutil
import subprocess
import sys

import pytest

from activenewton import cli, problems


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_disk_converges(self, capsys, tmp_path):
        code, out, _ = run(capsys, "solve", "--problem", "disk-nlp", "--output", str(tmp_path / "t.csv"))
        assert code == 0
        summ = json.loads(out)
        assert summ["status"] == "Converged"
        assert summ["final_dist_to_solution"] <= 1e-10
        assert json.loads((tmp_path / "t.json").read_text()) == summ

    @pytest.mark.parametrize("name", ["sphere-vi", "orthant-vi", "box-vi", "scalar-root", "subspace-newton"])
    def test_builtins_converge(self, capsys, name):
        code, out, _ = run(capsys, "solve", "--problem", name)
        assert code == 0, out
        assert json.loads(out)["status"] == "Converged"

    def test_singular_demo(self, capsys):
        code, out, _ = run(capsys, "solve", "--problem", "singular-demo")
        assert code == 3
        assert json.loads(out)["status"] == "TransversalityFail"

    def test_max_iter(self, capsys):
        code, out, _ = run(capsys, "solve", "--problem", "scalar-root", "--max-iter", "1")
        assert code == 2
        assert json.loads(out)["status"] == "MaxIter"

    def test_malformed_json(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{kind: disk")
        code, _, err = run(capsys, "solve", "--problem", str(bad))
        assert code == 1
        assert "malformed" in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["solve", "--problem", "no-such-problem"],
            ["solve", "--problem", "disk-nlp", "--a", "0"],
            ["solve"],
            ["frobnicate"],
        ],
    )
    def test_config_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1

    def test_spec_file(self, capsys, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"kind": "disk-nlp", "params": {"c": [0, 2]}, "name": "up"}))
        code, out, _ = run(capsys, "solve", "--problem", str(path))
        assert code == 0
        summ = json.loads(out)
        assert summ["problem"] == "up"
        assert summ["final_u"] == pytest.approx([0, 1], abs=1e-12)

    def test_csv_schema(self, capsys, tmp_path):
        out = tmp_path / "trace.csv"
        run(capsys, "solve", "--problem", "orthant-vi", "--output", str(out))
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["k", "phase", "u_1", "u_2", "lambda", "residual", "active_set", "dist_to_solution"]
        assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))
        assert {r[1] for r in rows[1:]} == {"Identify", "Newton"}
        assert rows[-1][6] == "1"
        assert float(rows[-1][2]) == 1.0

    def test_json_format(self, capsys, tmp_path):
        out = tmp_path / "trace.json"
        code, stdout, _ = run(capsys, "solve", "--problem", "scalar-root", "--format", "json", "--output", str(out))
        data = json.loads(out.read_text())
        assert data["summary"] == json.loads(stdout)
        assert [r["u"][0] for r in data["trace"]][:2] == [1.5, 17 / 12]

    @pytest.mark.parametrize("fmt,name", [("csv", "t.csv"), ("json", "t.json")])
    def test_deterministic(self, capsys, tmp_path, fmt, name):
        blobs = []
        for d in ("a", "b"):
            (tmp_path / d).mkdir()
            out = tmp_path / d / name
            run(capsys, "solve", "--problem", "orthant-vi", "--seed", "3", "--format", fmt, "--output", str(out))
            blobs.append(sorted((p.name, p.read_bytes()) for p in (tmp_path / d).iterdir()))
        assert blobs[0] == blobs[1]


class TestRates:
    def test_scalar_root(self, capsys):
        code, out, _ = run(capsys, "rates", "--problem", "scalar-root", "--distances", "0.1", "0.01")
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert len(rows) == 2
        for r in rows:
            assert 1.8 <= float(r["fitted_order"]) <= 2.2

    def test_sphere_reaches_solution(self, capsys):
        code, out, _ = run(capsys, "rates", "--problem", "sphere-vi")
        assert code == 0
        for r in csv.DictReader(out.splitlines()):
            assert int(r["iterations_to_1e-12"]) <= 5

    def test_needs_known_solution(self, capsys, monkeypatch):
        real = problems.build

        def without_solution(spec):
            p = real(spec)
            return problems.GenEqProblem(p.F_value, p.F_jacobian, p.psi, p.dim, None, p.name)

        monkeypatch.setattr(problems, "build", without_solution)
        code, _, err = run(capsys, "rates", "--problem", "scalar-root")
        assert code == 1
        assert "known solution" in err

    def test_output_file(self, capsys, tmp_path):
        out = tmp_path / "rates.csv"
        run(capsys, "rates", "--problem", "subspace-newton", "--output", str(out))
        assert out.read_text().startswith("distance,")


class TestVerify:
    def test_all(self, capsys):
        code, out, _ = run(capsys, "verify", "all", "--seed", "7")
        assert code == 0
        assert "FAIL" not in out

    def test_injected_fault(self, capsys):
        code, out, _ = run(capsys, "verify", "varcalc", "--inject-fault", "coderivative")
        assert code == 4
        assert "FAIL" in out and "coderivative" in out.split("properties failed:")[1]

    def test_single_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "geometry")
        assert code == 0
        lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
        assert lines and all(l.split()[1] == "geometry" for l in lines)


@pytest.mark.skipif(shutil.which("activenewton") is None, reason="console script not installed")
def test_binary_exit_codes():
    assert subprocess.run(["activenewton", "solve", "--problem", "disk-nlp"], capture_output=True).returncode == 0
    assert subprocess.run(["activenewton", "solve", "--problem", "singular-demo"], capture_output=True).returncode == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "activenewton.cli", "verify", "problems"], capture_output=True, text=True)
    assert res.returncode == 0
