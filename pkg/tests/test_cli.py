import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from omest import report_schema
from omest.cli import main
from omest.report import format_value


def run_cli(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def field(text, label):
    for line in text.splitlines():
        if line.startswith(label):
            return line[len(label):].split()[0]
    raise AssertionError(f"{label!r} not in output")


class TestFormat:
    @pytest.mark.parametrize(
        "value,precision,expected",
        [
            (3.888888, 2, "3.9"),
            (11014.25, 4, "11014"),
            (0.125, 4, "0.125"),
            (2.0, 2, "2"),
            (0.0001234567, 3, "0.000123"),
            (-1.23456, 3, "-1.23"),
            (0.0, 4, "0"),
            (float("inf"), 4, "inf"),
            (7, 2, "7"),
        ],
    )
    def test_values(self, value, precision, expected):
        assert format_value(value, precision) == expected


class TestEstimate:
    def test_worked_example(self):
        code, text = run_cli("estimate", "--na", 177, "--nb", 265, "--nab", 171, "--scenario", "full", "--precision", 2)
        assert code == 0
        assert field(text, "missed <X>") == "3.9"
        assert field(text, "sd") == "2.5"

    def test_compare_table_row(self):
        code, text = run_cli("estimate", "--na", 323, "--nb", 101, "--nab", 3, "--compare", "--precision", 5)
        assert code == 0
        assert field(text, "total <N>") == "11014"
        assert field(text, "sd") == "7638.5"
        assert "Chapman           total 8261" in text
        assert "Lincoln-Petersen  total 10874" in text
        assert field(text, "Seber sd") == "3599.3"

    def test_compare_alias(self):
        a = run_cli("compare", "--na", 323, "--nb", 101, "--nab", 3)
        b = run_cli("estimate", "--compare", "--na", 323, "--nb", 101, "--nab", 3)
        assert a == b

    def test_fixed(self):
        _, text = run_cli("estimate", "--na", 10, "--nb", 10, "--nab", 10, "--scenario", "fixed")
        assert field(text, "missed <X>") == "0.125"

    def test_undefined_rendered(self):
        _, text = run_cli("estimate", "--na", 21, "--nb", 19, "--nab", 1)
        assert "sd            undefined (requires n_ab >= 2)" in text
        assert "nan" not in text.lower()

    def test_precision_env(self, monkeypatch):
        monkeypatch.setenv("OMEST_PRECISION", "2")
        _, text = run_cli("estimate", "--na", 177, "--nb", 265, "--nab", 171)
        assert field(text, "missed <X>") == "3.9"
        monkeypatch.setenv("OMEST_PRECISION", "bad")
        assert run_cli("estimate", "--na", 177, "--nb", 265, "--nab", 171)[0] == 1

    def test_json_schema(self):
        schema = report_schema()
        for argv in (
            ("--na", 177, "--nb", 265, "--nab", 171, "--compare", "--posterior"),
            ("--na", 19, "--nb", 19, "--nab", 0, "--compare"),
            ("--na", 10, "--nb", 10, "--nab", 10, "--scenario", "fixed"),
            ("--na", 150, "--nb", 123, "--nab", 115, "--posterior", "--flat-prior"),
        ):
            code, text = run_cli("estimate", "--json", *argv)
            assert code == 0
            jsonschema.validate(json.loads(text), schema)

    def test_json_undefined(self):
        _, text = run_cli("estimate", "--json", "--na", 21, "--nb", 19, "--nab", 1)
        d = json.loads(text)
        assert d["moments"]["variance"] == {"undefined": True, "min_n_ab": 2}

    @pytest.mark.parametrize(
        "argv",
        [
            ("--na", 3, "--nb", 2, "--nab", 5),
            ("--na", 3, "--nb", 2, "--nab", 1, "--scenario", "sideways"),
            ("--na", "x", "--nb", 2, "--nab", 1),
            ("--na", 3, "--nb", 2),
            ("--na", 3, "--nb", 2, "--nab", 1, "--scenario", "fixed", "--flat-prior", "--posterior"),
        ],
    )
    def test_validation_exit(self, argv, capsys):
        code, _ = run_cli("estimate", *argv)
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestPosterior:
    def test_csv_to_stdout(self, capsys):
        code, text = run_cli("posterior", "--na", 5, "--nb", 4, "--nab", 3, "--scenario", "fixed")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert sum(float(r["pmf"]) for r in rows) == pytest.approx(1.0, abs=1e-10)
        err = capsys.readouterr().err
        assert "mode              0" in err and "tail mass bound" in err

    def test_files(self, tmp_path):
        out_csv, out_json = tmp_path / "pmf.csv", tmp_path / "pmf.json"
        code, text = run_cli(
            "posterior", "--na", 177, "--nb", 265, "--nab", 171, "--mass", 0.68,
            "--output", out_csv, "--json-output", out_json,
        )
        assert code == 0
        assert "credible interval  [1, 5]" in text
        assert out_csv.read_text().startswith("x,pmf,cdf\n")
        assert json.loads(out_json.read_text())["metadata"]["shift"] == 2

    def test_divergent(self, capsys):
        code, _ = run_cli("posterior", "--na", 21, "--nb", 19, "--nab", 1, "--scenario", "fixed")
        assert code == 1
        assert "n_ab >= 2" in capsys.readouterr().err

    def test_budget_exit(self, capsys):
        code, _ = run_cli("posterior", "--na", 5, "--nb", 4, "--nab", 3, "--scenario", "fixed", "--mass", 0.999999)
        assert code == 0
        code, _ = run_cli(
            "posterior", "--na", 20, "--nb", 15, "--nab", 10, "--tail-tol", 1e-3, "--mass", 1 - 1e-8,
        )
        assert code == 2


class TestBatch:
    def write(self, tmp_path, text):
        path = tmp_path / "in.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_table_rows(self, tmp_path):
        src = self.write(tmp_path, "id,na,nb,nab\nmale,323,101,3\nfemale,21,19,1\ncombined,344,120,4\n")
        dst = tmp_path / "out.csv"
        assert run_cli("batch", src, dst, "--precision", 6)[0] == 0
        rows = {r["id"]: r for r in csv.DictReader(dst.open())}
        assert round(float(rows["male"]["mean"])) + 323 + 101 - 3 == 11014
        assert rows["female"]["sd"].startswith("undefined")
        assert round(float(rows["combined"]["chapman"])) + 344 + 120 - 4 == 8348
        assert all(r["status"] == "ok" for r in rows.values())

    def test_header_only(self, tmp_path):
        src = self.write(tmp_path, "id,na,nb,nab\n")
        code, text = run_cli("batch", src, "-")
        assert code == 0
        assert text == "id,na,nb,nab,mean,sd,skewness,kurtosis,chapman,lp,seber_sd,status\n"

    def test_bad_rows_continue(self, tmp_path):
        src = self.write(tmp_path, "id,na,nb,nab\na,5,4,9\nb,x,1,1\nc,20,15,10\n")
        code, text = run_cli("batch", src, "-")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert [r["status"] for r in rows] == ["error", "error", "ok"]
        assert rows[0]["mean"] == "" and rows[0]["chapman"] == ""

    def test_missing_columns(self, tmp_path):
        src = self.write(tmp_path, "id,na,nb\n1,2,3\n")
        assert run_cli("batch", src, "-")[0] == 1

    def test_unreadable(self, tmp_path):
        assert run_cli("batch", tmp_path / "nope.csv", "-")[0] == 2

    def test_round_trip_with_estimate(self, tmp_path):
        src = self.write(tmp_path, "id,na,nb,nab\nr,177,265,171\n")
        _, batch = run_cli("batch", src, "-", "--scenario", "full")
        row = next(csv.DictReader(io.StringIO(batch)))
        _, text = run_cli("estimate", "--na", 177, "--nb", 265, "--nab", 171, "--scenario", "full", "--compare")
        assert row["mean"] == field(text, "missed <X>")
        assert row["sd"] == field(text, "sd")
        assert row["skewness"] == field(text, "skewness")
        assert row["kurtosis"] == field(text, "kurtosis")
        assert row["seber_sd"] == field(text, "Seber sd")


class TestSimulate:
    def test_flags(self, tmp_path):
        out = tmp_path / "res.json"
        log = tmp_path / "log.csv"
        code, text = run_cli(
            "simulate", "--true-n", 200, "--mode", "fixed", "--na", 60, "--nb", 60,
            "--reps", 40, "--seed", 3, "--output", out, "--log-csv", log,
        )
        assert code == 0
        assert "coverage" in text
        d = json.loads(out.read_text())
        assert d["config"]["replicates"] == 40
        assert all("coverage" in v for v in d["estimators"].values())
        assert len(log.read_text().splitlines()) == 41

    def test_config_file_and_determinism(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"true_n": 300, "mode": {"kind": "full", "p_a": 0.4, "p_b": 0.6}, "replicates": 30}))
        a = run_cli("simulate", "--config", cfg, "--seed", 5)
        b = run_cli("simulate", "--config", cfg, "--seed", 5)
        assert a == b and a[0] == 0

    @pytest.mark.parametrize(
        "argv",
        [
            ("--true-n", 100, "--mode", "full", "--pa", 1.5, "--pb", 0.5),
            ("--true-n", 100, "--mode", "fixed", "--na", 150, "--nb", 5),
            ("--true-n", 100, "--mode", "fixed", "--na", 10),
            ("--mode", "full", "--pa", 0.5, "--pb", 0.5),
        ],
    )
    def test_invalid(self, argv):
        assert run_cli("simulate", *argv)[0] == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "omest", "estimate", "--na", "3", "--nb", "2", "--nab", "5"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1
    proc = subprocess.run(
        [sys.executable, "-m", "omest", "estimate", "--na", "10", "--nb", "10", "--nab", "10"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "0.1" in proc.stdout
