import json

from odereduce.cli import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path), "--no-timestamp"])


def report(tmp_path, name):
    return json.loads((tmp_path / f"{name}.report.json").read_text())


def test_reduce_writes_transformed_equation(tmp_path, capsys):
    assert run(tmp_path, "reduce", "ex21") == EXIT_PASS
    rep = report(tmp_path, "ex21")
    assert "y_tt + 4*y*y_t = 0" in json.dumps(rep)
    assert (tmp_path / "ex21.transform.csv").exists()
    assert json.loads(capsys.readouterr().out)["pass"] is True


def test_solve_writes_trajectory_csv(tmp_path):
    assert run(tmp_path, "solve", "cauchy_euler") == EXIT_PASS
    csv = (tmp_path / "cauchy_euler.traj.csv").read_text().splitlines()
    assert csv[0] == "x,y,yp"
    assert len(csv) > 10


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "solve", "ex23")
    run(b, "solve", "ex23")
    for name in ("ex23.report.json", "ex23.traj.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_timestamp_present_by_default(tmp_path):
    assert main(["reduce", "ex22", "--out", str(tmp_path)]) == EXIT_PASS
    assert "generated_at" in report(tmp_path, "ex22")


def test_missing_file_is_input_error(tmp_path, capsys):
    assert run(tmp_path, "solve", str(tmp_path / "nope.prob")) == EXIT_INPUT
    err = json.loads(capsys.readouterr().out)
    assert err["error"]["type"] == "ProblemFileError"
    assert (tmp_path / "nope.error.json").exists()


def test_bad_arguments_are_input_error(tmp_path):
    assert main(["solve"]) == EXIT_INPUT
    assert main(["frobnicate", "x"]) == EXIT_INPUT


def test_wrong_candidate_fails_verification(tmp_path):
    assert run(tmp_path, "verify", "ex22", "--solution", "1/(1 - ln(x))^2") == EXIT_FAIL
    assert report(tmp_path, "ex22")["pass"] is False


def test_right_candidate_passes_verification(tmp_path):
    assert run(tmp_path, "verify", "ex22", "--solution", "2/(1 - ln(x))^2") == EXIT_PASS


def test_exact_check_reports_classification(tmp_path):
    assert run(tmp_path, "exact", "check", "ex42") == EXIT_PASS
    text = json.dumps(report(tmp_path, "ex42"))
    assert "exact-after-mu" in text


def test_functional_precondition(tmp_path):
    assert run(tmp_path, "functional", "el_sinh", "--y", "sinh(x)/sinh(1)",
               "--eta", "x*(1 - x)") == EXIT_PASS
    assert run(tmp_path, "functional", "el_sinh", "--y", "x^2",
               "--eta", "x*(1 - x)") == EXIT_FAIL
    assert run(tmp_path, "functional", "el_sinh", "--y", "x^2",
               "--eta", "x*(1 - x)", "--force") == EXIT_FAIL


def test_corpus_filter(tmp_path, capsys):
    assert run(tmp_path, "corpus", "--filter", "ex4*") == EXIT_PASS
    summary = json.loads((tmp_path / "corpus.summary.json").read_text())
    assert sorted(s["name"] for s in summary["corpus"]) == ["ex41", "ex42", "ex43"]
    assert "3/3 corpus entries pass" in capsys.readouterr().out


def test_corpus_filter_without_match(tmp_path):
    assert run(tmp_path, "corpus", "--filter", "zzz*") == EXIT_INPUT


def test_corpus_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "corpus", "--filter", "hyper*") == EXIT_PASS
    assert run(b, "corpus", "--filter", "hyper*", "--jobs", "2") == EXIT_PASS
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
