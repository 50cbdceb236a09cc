import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from geoweb import expr as E
from geoweb.cli import main
from geoweb.jobs import (ConfigError, corpus_config, emit_grid, list_corpus, load_config,
                         report_json, run)
from geoweb.sampling import SamplePlan

CORPUS = ["constant-curvature-lines", "euler-roundtrip", "example1-cone", "example2-cylinder",
          "example3-four-web", "paraboloid-meridians"]

BOWL = {
    "name": "bowl",
    "dimension": 3,
    "geometry": {"type": "flat"},
    "web_functions": [{"name": "bowl", "expr": "x1^2 + x2^2 + x3"}],
    "sample_plan": {"box": [[0.1, 1], [0.1, 1], [0.1, 1]], "grid": 3, "random_points": 5},
}


def report_schema():
    text = resources.files("geoweb").joinpath("schemas").joinpath("report.schema.json")
    return json.loads(text.read_text(encoding="utf-8"))


def write(tmp_path, data, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# corpus --------------------------------------------------------------------

def test_corpus_listing(capsys):
    names = [n for n, _ in list_corpus()]
    assert names == CORPUS
    assert all(d for _, d in list_corpus())
    descriptions = dict(list_corpus())
    for n in ("example1-cone", "example2-cylinder", "example3-four-web"):
        assert descriptions[n].startswith("Example ")
    assert main(["corpus", "list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 6


@pytest.fixture(scope="module")
def corpus_reports():
    return {name: run(load_config(corpus_config(name))) for name in CORPUS}


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_job_passes_and_validates(name, corpus_reports):
    rep = corpus_reports[name]
    jsonschema.validate(rep, report_schema())
    assert rep["passed"], json.dumps(rep, indent=1)[:2000]


def test_cone_job_content(corpus_reports):
    rep = corpus_reports["example1-cone"]
    for branch in ("f4_plus", "f4_minus"):
        env = rep["envelopes"][branch]
        assert env["raw_match"] and env["exact_match"]
        assert rep["web_functions"][branch]["checks"]["hyperplanarity"]["max_scaled"] <= 1e-9
    assert rep["plan"]["rejected_by_constraints"] > 0


def test_four_web_job_content(corpus_reports):
    rep = corpus_reports["example3-four-web"]
    assert set(rep["euler_specs"]) == {"i", "ii", "iii", "iv"}
    for spec in rep["euler_specs"].values():
        assert spec["psi_reconstruction"]["passed"]
    assert rep["envelopes"]["f4"]["linear_kind"] == "pencil"
    assert rep["envelopes"]["f2_minus"]["canonical"] == "4*x1*x2 + 4*x2*x3 - 1"


def test_counts_sum_to_plan_size(corpus_reports):
    rep = corpus_reports["example2-cylinder"]
    size = rep["plan"]["evaluated"]
    for w in rep["web_functions"].values():
        for pair in w["geodesic"]["pairs"].values():
            assert pair["n_ok"] + pair["n_excluded"] + pair["n_error"] == size


# exit codes ----------------------------------------------------------------

def test_failing_check_exits_one(tmp_path):
    out = tmp_path / "r.json"
    assert main(["check", write(tmp_path, BOWL), "--report", str(out)]) == 1
    rep = json.loads(out.read_text())
    assert rep["passed"] is False
    assert rep["web_functions"]["bowl"]["passed"] is False
    plain = dict(BOWL, web_functions=[{"name": "bowl", "expr": "x1^2+x2^2"}])
    assert main(["check", write(tmp_path, plain, "plain.json")]) == 1


def test_passing_check_prints_json_to_stdout(tmp_path, capsys):
    data = dict(BOWL, web_functions=[{"name": "plane", "expr": "x1 + x2 - x3"}])
    assert main(["check", write(tmp_path, data)]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_missing_variable_makes_pairs_singular(tmp_path):
    # f_2 = 0 everywhere, so pairs with x2 have no regular points and cannot pass
    data = dict(BOWL, web_functions=[{"name": "plane", "expr": "x1 - x3"}])
    rep = run(load_config(data))
    pairs = rep["web_functions"]["plane"]["geodesic"]["pairs"]
    assert pairs["1,3"]["passed"] and pairs["1,3"]["n_excluded"] == 0
    assert pairs["1,2"]["n_ok"] == 0 and not pairs["1,2"]["passed"]


@pytest.mark.parametrize("mutate", [
    lambda d: d["web_functions"][0].update(expr="x1 +* x2"),
    lambda d: d["web_functions"][0].update(expr="x4"),
    lambda d: d.update(geometry={"type": "spherical"}),
    lambda d: d.update(geometry={"type": "constant_curvature"}),
    lambda d: d.pop("web_functions"),
    lambda d: d["sample_plan"].update(box=[[0, 1]]),
    lambda d: d.update(euler_specs=[{"name": "e", "u0": "t", "psi": ["t"]}]),
    lambda d: d.update(euler_specs=[{"name": "e", "u0": "t", "psi": ["t", "1"]}],
                       geometry={"type": "constant_curvature", "kappa": 1}),
    lambda d: d.update(unexpected=1),
])
def test_config_errors_exit_two(tmp_path, mutate, capsys):
    data = json.loads(json.dumps(BOWL))
    mutate(data)
    assert main(["check", write(tmp_path, data)]) == 2
    assert "config" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config(data)


def test_unreadable_or_malformed_config_exits_two(tmp_path):
    assert main(["check", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", str(bad)]) == 2
    assert main(["corpus", "run", "no-such-job"]) == 2


def test_unwritable_outputs_exit_three(tmp_path):
    cfg = write(tmp_path, BOWL)
    assert main(["check", cfg, "--csv", str(tmp_path / "no" / "dir" / "g.csv")]) == 3
    assert main(["check", cfg, "--report", str(tmp_path / "no" / "r.json")]) == 3


def test_seed_and_tolerance_overrides(tmp_path):
    data = dict(BOWL, checks={"distribution": False, "pair_implication": False})
    cfg = write(tmp_path, data)
    out = tmp_path / "r.json"
    assert main(["check", cfg, "--report", str(out), "--seed", "9", "--tolerance", "1e9"]) == 0
    rep = json.loads(out.read_text())
    assert rep["plan"]["seed"] == 9 and rep["tolerances"]["residual"] == 1e9


def test_sections_are_selected_by_subcommand(tmp_path):
    data = corpus_config("example2-cylinder")
    out = tmp_path / "r.json"
    assert main(["envelope", write(tmp_path, data), "--report", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["sections"] == ["envelope"]
    assert "envelopes" in rep and "web_functions" not in rep and "euler_specs" not in rep


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["corpus", "run", "euler-roundtrip", "--seed", "11",
                     "--report", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "geoweb", "check", write(tmp_path, BOWL)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["passed"] is False


# csv grids -----------------------------------------------------------------

def read_rows(path):
    raw = path.read_bytes()
    assert b"\r\n" in raw and raw.endswith(b"\r\n")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_grid_for_linear_function(tmp_path):
    path = tmp_path / "g.csv"
    plan = SamplePlan(((0, 1), (0, 1)), grid=2, n_random=0)
    assert emit_grid(E.parse("x1", 2), plan, path) == 4
    rows = read_rows(path)
    assert rows[0] == ["x1", "x2", "f", "flex_12"]
    assert [r[:2] for r in rows[1:]] == [["0", "0"], ["0", "1"], ["1", "0"], ["1", "1"]]
    assert all(float(r[3]) == 0.0 for r in rows[1:])


def test_grid_uses_seventeen_digits_and_blank_errors(tmp_path):
    path = tmp_path / "g.csv"
    plan = SamplePlan(((0, 0.1), (-1, 1)), grid=3, n_random=0)
    emit_grid(E.parse("x2/x1", 2), plan, path)
    rows = read_rows(path)
    assert rows[1][2:] == ["", ""]  # x1 = 0
    assert rows[4][0] == "0.050000000000000003"
    assert float(rows[4][2]) == -1 / 0.05


def test_cone_grid_has_vanishing_flex(tmp_path):
    cfg = load_config(corpus_config("example1-cone"))
    path = tmp_path / "cone.csv"
    emit_grid(cfg.functions[0].expr, cfg.plan, path)
    rows = read_rows(path)[1:]
    assert len(rows) == len(cfg.plan.points())
    assert max(abs(float(v)) for r in rows for v in r[4:]) <= 1e-9


def test_one_grid_per_function(tmp_path):
    cfg = write(tmp_path, corpus_config("example2-cylinder"))
    assert main(["check", cfg, "--csv", str(tmp_path / "grid.csv"),
                 "--report", str(tmp_path / "r.json")]) == 0
    assert sorted(p.name for p in tmp_path.glob("grid_*.csv")) == \
        ["grid_f4_minus.csv", "grid_f4_plus.csv"]


def test_report_json_is_sorted_and_plain():
    text = report_json({"b": 1, "a": [1.5, None]})
    assert text == '{\n  "a": [\n    1.5,\n    null\n  ],\n  "b": 1\n}\n'
