import json

import pytest

from odereduce.cli import corpus_files
from odereduce.errors import ProblemFileError
from odereduce.problemfile import load_problem, load_problem_data

BASE = {
    "name": "demo",
    "class": "chebyshev_type",
    "domain": [0.5, 3.0],
    "ics": {"x": 1, "y": 2, "yp": 4},
    "equation": "x^2*ypp + x*yp - 3*y^2",
    "p": "x^2",
    "f": "-3*y^2",
}


def test_minimal_problem_loads():
    spec = load_problem_data(dict(BASE))
    assert spec.kind == "chebyshev_type"
    assert spec.name == "demo"


def test_unknown_key_rejected():
    with pytest.raises(ProblemFileError, match="schema"):
        load_problem_data({**BASE, "colour": "blue"})


def test_missing_class_field_rejected():
    data = dict(BASE)
    del data["p"]
    with pytest.raises(ProblemFileError) as info:
        load_problem_data(data)
    assert info.value.to_dict()["missing"] == ["p"]


def test_bad_class_rejected():
    with pytest.raises(ProblemFileError):
        load_problem_data({**BASE, "class": "riccati"})


def test_bad_expression_reported():
    with pytest.raises(ProblemFileError) as info:
        load_problem_data({**BASE, "p": "x^^2"})
    err = info.value.to_dict()
    assert err["field"] == "p"
    assert "position 2" in err["message"]


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.prob"
    path.write_text("{\"class\": ")
    with pytest.raises(ProblemFileError, match="invalid JSON"):
        load_problem(path)


def test_missing_file(tmp_path):
    with pytest.raises(ProblemFileError, match="cannot read"):
        load_problem(tmp_path / "absent.prob")


def test_name_defaults_to_file_stem(tmp_path):
    data = dict(BASE)
    del data["name"]
    path = tmp_path / "stemmed.prob"
    path.write_text(json.dumps(data))
    assert load_problem(path).name == "stemmed"


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_bundled_corpus_validates(path):
    assert load_problem(path).name == path.stem
