import csv
import json

import pytest

from inertial_prox.cli import BENCH_HEADER, main

TV_METHODS = [
    {"name": "two-step", "theta": 0.1, "delta": -1e-3, "lambda": 0.1},
    {"name": "one-step", "theta": 0.1, "delta": 0.0, "lambda": 0.1},
    {"name": "plain", "theta": 0.0, "delta": 0.0, "lambda": 0.1},
]


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc, encoding="utf-8")
        return str(path)

    return write


def linear_config(**extra):
    doc = {
        "family": "linear_monotone",
        "dims": {"dim": 6},
        "methods": [{"name": "plain", "theta": 0.0, "delta": 0.0, "lambda": 1.0}],
        "tol": 1e-8,
        "max_iter": 500,
    }
    doc.update(extra)
    return doc


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# --- validate --------------------------------------------------------------------------


def test_validate_table_parameters(capsys):
    assert main(["validate", "--theta", "0.1", "--delta", "-0.14412"]) == 0
    out = capsys.readouterr().out
    assert "(-0.20588235294117646, 0]" in out
    assert "valid" in out


def test_validate_origin_reports_unit_coefficients(capsys):
    assert main(["validate", "--theta", "0", "--delta", "0"]) == 0
    out = capsys.readouterr().out
    assert "c1 = 1.0" in out and "c2 = 1.0" in out


def test_validate_rejections(capsys):
    assert main(["validate", "--theta", "0.4", "--delta", "0"]) == 2
    assert "theta must be < 1/3" in capsys.readouterr().out
    assert main(["validate", "--theta", "0.1", "--delta", "-0.3"]) == 2


@pytest.mark.parametrize("argv", [
    ["validate", "--theta", "x", "--delta", "0"],
    ["validate", "--theta", "0.1"],
    ["validate", "--theta", "nan", "--delta", "0"],
    ["frobnicate"],
    [],
])
def test_malformed_flags_exit_64(argv, capsys):
    assert main(argv) == 64


# --- run ------------------------------------------------------------------------------------


def test_run_linear_writes_record_and_residuals(write_config, tmp_path):
    out = tmp_path / "out"
    assert main(["run", write_config(linear_config()), "--out", str(out)]) == 0
    record = json.loads((out / "record.json").read_text())
    assert record["status"] == "converged"
    assert record["params"] == {"theta": 0.0, "delta": 0.0, "lambda": 1.0, "rho": 1.0}
    assert record["seed"] == 0
    rows = read_csv(out / "residuals.csv")
    assert rows[0] == ["iter", "residual", "gamma", "gamma_bar"]
    assert rows[1][0] == "0"
    assert len(rows) - 1 == record["iterations"]
    residuals = [float(r[1]) for r in rows[1:]]
    # plain PPA on a monotone operator has nonincreasing steps
    assert all(b <= a * (1 + 1e-12) for a, b in zip(residuals, residuals[1:]))
    gamma_bar = [float(r[3]) for r in rows[1:]]
    assert all(b <= a + 1e-12 for a, b in zip(gamma_bar, gamma_bar[1:]))
    assert (out / "residuals.csv").read_bytes().count(b"\r") == 0


def test_run_floats_round_trip(write_config, tmp_path):
    out = tmp_path / "o"
    main(["run", write_config(linear_config(max_iter=3, tol=1e-300)), "--out", str(out)])
    for row in read_csv(out / "residuals.csv")[1:]:
        assert repr(float(row[1])) == row[1]


def test_run_tv_case_one_converges(write_config, tmp_path):
    doc = {"family": "tv_ls", "dims": {"N": 100, "p": 5}, "methods": TV_METHODS[:1],
           "tol": 1e-5, "max_iter": 2000}
    out = tmp_path / "tv"
    assert main(["run", write_config(doc), "--out", str(out)]) == 0
    assert read_csv(out / "residuals.csv")[0] == ["iter", "residual"]


def test_run_method_selection(write_config, tmp_path):
    doc = linear_config(methods=[
        {"name": "a", "theta": 0.0, "delta": 0.0, "lambda": 1.0},
        {"name": "b", "theta": 0.1, "delta": -0.05, "lambda": 1.0},
    ])
    out = tmp_path / "sel"
    assert main(["run", write_config(doc), "--out", str(out), "--method", "b"]) == 0
    assert json.loads((out / "record.json").read_text())["method"] == "b"
    assert main(["run", write_config(doc), "--out", str(out), "--method", "zzz"]) == 64


def test_run_invalid_delta_exits_2_without_output(write_config, tmp_path):
    out = tmp_path / "never"
    doc = linear_config(methods=[{"name": "bad", "theta": 0.1, "delta": -0.5, "lambda": 1.0}])
    assert main(["run", write_config(doc), "--out", str(out)]) == 2
    assert not out.exists()


def test_run_max_iter_exits_3(write_config, tmp_path):
    assert main(["run", write_config(linear_config(max_iter=2, tol=1e-300)), "--out", str(tmp_path / "m")]) == 3


def test_run_divergence_exits_4(write_config, tmp_path):
    doc = linear_config(methods=[{"name": "wild", "theta": 5.0, "delta": 0.0, "lambda": 1e-3}], max_iter=5000)
    assert main(["run", write_config(doc), "--no-validate", "--out", str(tmp_path / "d")]) == 4


def test_run_unwritable_output_exits_74(write_config, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", write_config(linear_config()), "--out", str(blocker / "sub")]) == 74


def test_run_missing_config_exits_64(tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 64


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(colour="blue"),
    lambda d: d["dims"].update(depth=3),
    lambda d: d["methods"][0].update(momentum=1),
    lambda d: d.pop("methods"),
    lambda d: d.update(family="quantum"),
    lambda d: d.update(tol=float("inf")),
    lambda d: d.update(max_iter=1.5),
    lambda d: d["methods"][0].update(theta="0.1"),
])
def test_bad_config_exits_64(mutate, write_config, tmp_path):
    doc = linear_config()
    mutate(doc)
    text = json.dumps(doc, allow_nan=True)
    assert main(["run", write_config(text), "--out", str(tmp_path / "x")]) == 64


def test_non_json_config_exits_64(write_config):
    assert main(["run", write_config("{not json")]) == 64


# --- bench ----------------------------------------------------------------------------


def bench_tv_config(**extra):
    doc = {"family": "tv_ls", "dims": {"N": 100, "M": 99, "p": 5}, "methods": TV_METHODS,
           "tol": 1e-5, "max_iter": 2000, "seed": 0}
    doc.update(extra)
    return doc


def test_bench_tv_three_rows(write_config, tmp_path):
    out = tmp_path / "b"
    assert main(["bench", write_config(bench_tv_config()), "--out", str(out)]) == 0
    rows = read_csv(out / "bench.csv")
    assert rows[0] == BENCH_HEADER
    assert [r[0] for r in rows[1:]] == ["two-step", "one-step", "plain"]
    two, one = int(rows[1][1]), int(rows[2][1])
    assert two <= one


def test_bench_basis_pursuit_rows(write_config, tmp_path):
    doc = {"family": "basis_pursuit", "dims": {"N": 40, "M": 20, "sparsity": 3},
           "methods": [{"name": "two-step", "theta": 0.1, "delta": -0.14412, "lambda": 1.0},
                       {"name": "one-step", "theta": 0.1, "delta": 0.0, "lambda": 1.0}],
           "tol": 1e-4, "max_iter": 200, "seed": 1}
    out = tmp_path / "bp"
    assert main(["bench", write_config(doc), "--out", str(out)]) == 0
    rows = read_csv(out / "bench.csv")
    assert [r[0] for r in rows[1:]] == ["two-step", "one-step"]
    assert all(r[4] == "converged" for r in rows[1:])


def test_bench_empty_methods_header_only(write_config, tmp_path):
    out = tmp_path / "e"
    assert main(["bench", write_config(bench_tv_config(methods=[])), "--out", str(out)]) == 0
    assert (out / "bench.csv").read_text() == ",".join(BENCH_HEADER) + "\n"


def test_bench_output_path_from_config(write_config, tmp_path):
    out = tmp_path / "cfgout"
    assert main(["bench", write_config(bench_tv_config(methods=TV_METHODS[:1], output_path=str(out)))]) == 0
    assert (out / "bench.csv").exists()


def test_bench_feasibility(write_config, tmp_path):
    doc = {"family": "feasibility", "dims": {"angle": 0.5},
           "methods": [{"name": "dr", "theta": 0.1, "delta": -0.05, "lambda": 1.0}], "tol": 1e-10}
    out = tmp_path / "f"
    assert main(["bench", write_config(doc), "--out", str(out)]) == 0
    assert read_csv(out / "bench.csv")[1][4] == "converged"


# --- certify ------------------------------------------------------------------------------


def test_certify_spd_passes(write_config, capsys):
    doc = linear_config(methods=[{"name": "two-step", "theta": 0.1, "delta": -0.14412, "lambda": 1.0},
                                 {"name": "plain", "theta": 0.0, "delta": 0.0, "lambda": 1.0}],
                        tol=1e-300, max_iter=200)
    assert main(["certify", write_config(doc)]) == 0
    out = capsys.readouterr().out
    assert "VIOLATED" not in out and out.count("worst margin") == 4


def test_certify_at_solution(write_config):
    doc = linear_config(x0="zeros", methods=[{"name": "m", "theta": 0.2, "delta": -0.1, "lambda": 1.0}])
    assert main(["certify", write_config(doc)]) == 0


def test_certify_out_of_region(write_config, capsys):
    doc = linear_config(methods=[{"name": "wild", "theta": 0.9, "delta": -0.05, "lambda": 1.0}],
                        tol=1e-300, max_iter=200)
    assert main(["certify", write_config(doc)]) == 2
    # outside the region nothing is guaranteed; this pair breaks monotonicity early
    assert main(["certify", write_config(doc), "--no-validate"]) == 5
    assert "VIOLATED at n=" in capsys.readouterr().out


def test_certify_requires_linear_family(write_config):
    assert main(["certify", write_config(bench_tv_config())]) == 64


def test_certify_rejects_relaxation(write_config):
    doc = linear_config(methods=[{"name": "r", "theta": 0.0, "delta": 0.0, "lambda": 1.0, "rho": 0.5}])
    assert main(["certify", write_config(doc)]) == 2
