import json

import pytest

from nak.cli import eval_expression, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dim_prop72(capsys):
    code, out, _ = run(capsys, "dim", "prop72", "--q", "5", "--z-norm", "5", "--tau", "5")
    assert code == 0 and "0.5" in out


def test_dim_prop72_needs_arguments(capsys):
    code, _, err = run(capsys, "dim", "prop72", "--q", "5")
    assert code == 2 and "configuration error" in err


def test_construct_mahler(capsys, tmp_path):
    path = tmp_path / "m.json"
    code, out, _ = run(capsys, "--json", str(path), "construct", "mahler", "--p", "2", "--precision", "64")
    assert code == 0 and "certificate: PASS" in out
    rep = json.loads(path.read_text())
    assert rep["schema"] == "nak-report/1" and rep["overall"] == "PASS"
    assert rep["result"]["branch_levels"]["levels"] == []


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--p", "3", "--max-lambda", "2", "--specs", "3")
    assert code == 0 and out.strip().endswith("overall: PASS")


def test_ud_json_stdout_is_deterministic(capsys):
    argv = ["ud", "--p", "5", "--N", "2000", "--levels", "1", "--seed", "4", "--json", "-"]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0 and out1 == out2
    body = out1[out1.index("{"):]
    assert json.loads(body)["config"]["seed"] == 4


def test_ud_csv(capsys, tmp_path):
    path = tmp_path / "f.csv"
    code, _, _ = run(capsys, "ud", "--p", "3", "--N", "900", "--levels", "1", "--csv", str(path))
    assert code == 0 and len(path.read_text().strip().splitlines()) == 1 + 3


def test_ud_constant_sequence_fails(capsys):
    code, out, _ = run(capsys, "ud", "--p", "5", "--N", "500", "--levels", "1",
                       "--x", "Qp{p=5; v=-1; digits=1; prec=1}")
    assert code == 1 and "haar_level_1: FAIL" in out


def test_configuration_errors(capsys):
    assert run(capsys, "ud", "--p", "5", "--filter", "pK_exact")[0] == 2
    assert run(capsys, "ud", "--p", "6")[0] == 2
    assert run(capsys, "ud", "--p", "5", "--char", "3")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2


def test_pisot_reports_failure(capsys):
    code, out, _ = run(capsys, "pisot", "--p", "3", "--k", "2", "--l", "1", "--n-max", "20")
    assert code == 1
    assert "level1_discrepancy_gt_half: FAIL" in out and "diff_exponent_two_paths: PASS" in out


def test_charp_small(capsys):
    code, out, _ = run(capsys, "charp", "--p", "2", "--N", "3000", "--levels", "2", "--trials", "1")
    assert "a_hull_frequency: PASS" in out and code in (0, 1)


def test_schedule_file(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"H0": 2, "first": 1, "lambda_rule": "2n", "H_rule": "1"}))
    code, out, _ = run(capsys, "dim", "gamma", "--schedule-file", str(path), "--q", "2", "--horizon", "200")
    assert code == 0 and "1/2" in out
    path.write_text(json.dumps({"H0": 1, "lambdas": [1, 3, 5], "Hs": [1, 1, 1]}))
    code, _, _ = run(capsys, "dim", "gamma", "--schedule-file", str(path), "--horizon", "3")
    assert code == 0
    path.write_text("{not json")
    assert run(capsys, "dim", "gamma", "--schedule-file", str(path))[0] == 2


def test_element_verbs(capsys):
    code, out, _ = run(capsys, "element", "eval", "86/5", "--p", "5", "--precision", "4")
    assert code == 0 and "Qp{p=5; v=-1; digits=1,2,3,0,0; prec=5}" in out
    code, out, _ = run(capsys, "element", "parse", "Qp{p=5; v=-1; digits=1,2,3; prec=3}")
    assert code == 0
    assert run(capsys, "element", "parse", "garbage")[0] == 2


def test_eval_expression_is_safe():
    from nak.field import FieldSpec
    Q5 = FieldSpec.qp(5)
    assert eval_expression("(1 + pi)**2 / 5", Q5, 10).valuation == -1
    with pytest.raises(Exception):
        eval_expression("__import__('os')", Q5, 10)
