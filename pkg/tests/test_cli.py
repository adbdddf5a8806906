import csv
import json

import pytest

from curvature_lab.cli import main, render_text


def run(tmp_path, *argv, name="r.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, json.loads(out.read_text())


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def strip_duration(report):
    report["manifest"].pop("duration_seconds")
    return report


STAR = {"labels": ["c", "a", "b", "e"],
        "dist": [[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]]}


class TestExitCodes:

    def test_pass_and_fail(self, tmp_path):
        path = write(tmp_path, "star.json", STAR)
        assert run(tmp_path, "scan", "--file", path, "--functional", "quad")[0] == 0
        code, rep = run(tmp_path, "scan", "--file", path, "--functional", "lp")
        assert code == 1
        assert rep["result"]["min_defect"] == -1.0
        assert rep["result"]["witness"] == ["c", "a", "b", "e"]

    def test_input_errors(self, tmp_path, capsys):
        bad = write(tmp_path, "bad.json", {"dist": [[0, -1], [-1, 0]]})
        assert main(["scan", "--file", bad, "--functional", "quad"]) == 2
        assert main(["validate", "--file", str(tmp_path / "missing.json")]) == 2
        assert main(["liminf", "--space", "l1", "--functional", "a1", "--scales", "1,2"]) == 2
        assert "input error" in capsys.readouterr().err

    def test_argparse_errors_exit_2(self):
        with pytest.raises(SystemExit) as info:
            main(["scan", "--space", "klein-bottle", "--functional", "quad"])
        assert info.value.code == 2
        with pytest.raises(SystemExit) as info:
            main(["theorem", "--space", "l1", "--theorem", "T4"])
        assert info.value.code == 2

    def test_validate(self, tmp_path):
        broken = write(tmp_path, "b.json", {"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]})
        code, rep = run(tmp_path, "validate", "--file", broken)
        assert code == 1 and rep["result"]["violations"][0]["axiom"] == "triangle"
        assert run(tmp_path, "validate", "--space", "hyperbolic")[0] == 0


class TestReports:

    def test_manifest(self, tmp_path):
        path = write(tmp_path, "star.json", STAR)
        _, rep = run(tmp_path, "scan", "--file", path, "--functional", "ptolemy", "--seed", "4")
        man = rep["manifest"]
        assert rep["schema_version"] == "1.0"
        assert man["command"] == "scan" and man["seed"] == 4
        assert man["flags"]["functional"] == "ptolemy" and "threads" not in man["flags"]
        assert len(man["input_digests"]["file"]) == 64
        assert rep["result"]["tolerance"] == 1e-9

    def test_liminf_csv(self, tmp_path):
        csv_path = tmp_path / "s.csv"
        code, rep = run(tmp_path, "liminf", "--space", "tripod:1,1,1", "--functional", "a2",
                        "--scales", "geometric:0.5,0.5,5", "--samples", "12", "--csv", str(csv_path))
        assert code == 1
        rows = list(csv.reader(csv_path.open()))
        assert rows[0] == ["scale", "min_defect"]
        assert len(rows) == 6 and float(rows[1][1]) == -1.0

    def test_default_csv_next_to_out(self, tmp_path):
        run(tmp_path, "liminf", "--space", "l1", "--functional", "a1", "--scales", "1,0.5",
            "--samples", "8", name="lim.json")
        assert (tmp_path / "lim.csv").exists()

    def test_convexity_csv(self, tmp_path):
        csv_path = tmp_path / "p.csv"
        code, rep = run(tmp_path, "convexity", "--space", "snowflake:0.5", "--mode", "midpoint",
                        "--budget", "200", "--window", "64", "--csv", str(csv_path))
        assert code == 1
        rows = list(csv.reader(csv_path.open()))
        assert rows[0] == ["index", "defect"] and len(rows) == 65

    def test_pretangent_restrict(self, tmp_path):
        code, rep = run(tmp_path, "pretangent", "--space", "euclidean:2", "--window", "128",
                        "--restrict", "odd")
        assert code == 0
        assert rep["result"]["restriction"]["passed"]
        assert rep["result"]["pool_order"][0] == "p"


class TestTheorem:

    def test_euclidean_t3_agrees(self, tmp_path):
        code, rep = run(tmp_path, "theorem", "--space", "euclidean:2", "--theorem", "T3",
                        "--window", "128", "--samples", "20")
        res = rep["result"]
        assert code == 0 and res["hypotheses_passed"] and res["conclusion"]["passed"]
        assert res["agreement"] == "agree"

    def test_tripod_t5_negative_side(self, tmp_path):
        code, rep = run(tmp_path, "theorem", "--space", "tripod:1,1,1", "--theorem", "T5",
                        "--window", "128", "--samples", "20")
        res = rep["result"]
        assert code == 0
        assert not res["hypotheses"]["liminf_A2"]["passed"]
        assert res["hypotheses"]["liminf_A2"]["tail_inf"] <= -1 + 1e-6
        assert not res["conclusion"]["passed"]
        text = render_text(rep)
        assert "hypothesis liminf_A2: FAILED" in text
        assert "conclusion lebedeva_petrunin: FAILED" in text

    def test_snowflake_t3_reports_conclusion_separately(self, tmp_path):
        code, rep = run(tmp_path, "theorem", "--space", "snowflake:0.5", "--theorem", "T3",
                        "--window", "128", "--samples", "20", "--budget", "300")
        res = rep["result"]
        assert not res["hypotheses"]["midpoint_convexity"]["passed"]
        assert "report" in res["conclusion"]
        assert res["agreement"].startswith("hypotheses not met")


class TestRender:

    def test_vacuous(self, tmp_path, capsys):
        path = write(tmp_path, "tiny.json", {"dist": [[0, 1], [1, 0]]})
        run(tmp_path, "scan", "--file", path, "--functional", "quad")
        assert main(["render", str(tmp_path / "r.json")]) == 0
        assert "vacuous pass" in capsys.readouterr().out

    def test_liminf_extract(self, tmp_path):
        run(tmp_path, "liminf", "--space", "l1", "--functional", "a3",
            "--scales", "geometric:1,0.5,7", "--samples", "10")
        out_dir = tmp_path / "csv"
        assert main(["render", str(tmp_path / "r.json"), "--csv-dir", str(out_dir),
                     "--out", str(tmp_path / "r.txt")]) == 0
        rows = list(csv.reader((out_dir / "liminf.csv").open()))
        assert rows[0] == ["scale", "min_defect"] and len(rows) == 8
        assert "A3" in (tmp_path / "r.txt").read_text()

    def test_render_is_stable(self, tmp_path):
        _, rep = run(tmp_path, "liminf", "--space", "l1", "--functional", "a1", "--scales", "1",
                     "--samples", "6")
        assert render_text(rep) == render_text(json.loads(json.dumps(rep)))

    @pytest.mark.parametrize("payload", ["not json", json.dumps({"command": "scan"}),
                                         json.dumps({"schema_version": "1.0", "command": "scan"})])
    def test_malformed(self, tmp_path, payload):
        path = tmp_path / "bad.json"
        path.write_text(payload)
        assert main(["render", str(path)]) == 2


def test_threads_do_not_change_reports(tmp_path):
    argv = ["liminf", "--space", "hyperbolic", "--functional", "a2", "--scales",
            "geometric:1,0.5,4", "--samples", "30", "--seed", "5"]
    _, one = run(tmp_path, *argv, "--threads", "1", name="a.json")
    _, many = run(tmp_path, *argv, "--threads", "8", name="b.json")
    assert strip_duration(one) == strip_duration(many)
