"""End-to-end tests for the alpharisk command line."""

import csv
import json
import math

import pytest

import config
from main import main


def run_csv(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    assert main([*argv, "--out", str(out)]) == 0
    text = out.read_text()
    rows = list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))
    return text, rows


def test_identity_risk_is_constant_across_theta(tmp_path):
    _, rows = run_csv(tmp_path, "risk", "--d", "3", "--alpha", "0", "--c", "1", "--theta-grid", "0:5:6")
    assert len(rows) == 6
    assert {row["risk"] for row in rows} == {rows[0]["risk"]}
    assert {row["method"] for row in rows} == {"closed"}
    assert rows[0]["stderr"] == ""


def test_forced_monte_carlo_agrees_with_closed_form(tmp_path):
    common = ["risk", "--d", "3", "--sigma-x2", "1", "--sigma-y2", "0.5", "--estimator", "affine:0.75",
              "--alpha", "0", "--c", "1.3", "--theta-grid", "0:3:3", "--n-samples", "200000"]
    _, closed = run_csv(tmp_path, *common, name="closed.csv")
    _, mc = run_csv(tmp_path, *common, "--force-mc", name="mc.csv")
    for exact, sampled in zip(closed, mc):
        assert sampled["method"] == "mc"
        assert abs(float(sampled["risk"]) - float(exact["risk"])) <= 4.0 * float(sampled["stderr"])


def test_metadata_header(tmp_path):
    text, _ = run_csv(tmp_path, "ratio", "--d", "2", "--alpha", "0", "--seed", "7")
    lines = text.splitlines()
    assert lines[0] == f"# alpharisk {config.VERSION}"
    assert lines[1] == f"# schema {config.CSV_SCHEMA_VERSION}"
    assert lines[2] == "# seed 7"
    resolved = json.loads(lines[3].removeprefix("# config "))
    assert resolved["command"] == "ratio"
    assert resolved["d"] == 2
    assert "workers" not in resolved
    assert lines[4] == "d,r,alpha,c_opt,ratio"


def test_ratio_peak(tmp_path):
    _, rows = run_csv(tmp_path, "ratio", "--d", "2", "--sigma-x2", "9.6568", "--sigma-y2", "1", "--alpha", "0")
    assert float(rows[0]["ratio"]) == pytest.approx(1.2071, abs=1e-4)


def test_affine_cutoff(tmp_path):
    _, rows = run_csv(tmp_path, "cutoff", "--d", "1", "--sigma-x2", "2", "--estimator", "affine:1", "--alpha", "0")
    assert rows[0]["cutoff_kind"] == "affine"
    assert float(rows[0]["c2_star"]) == pytest.approx(4.0, rel=1e-10)


def test_general_cutoff_from_given_epsilon(tmp_path):
    _, rows = run_csv(tmp_path, "cutoff", "--d", "3", "--estimator", "js", "--kind", "general",
                      "--epsilon", "3", "--alpha", "-1", "--alpha", "0")
    assert float(rows[0]["c2_star"]) == pytest.approx(2.0)
    assert float(rows[1]["c2_star"]) == pytest.approx(0.5 + math.sqrt(1.25))


def test_kl_exact_cutoff(tmp_path):
    _, rows = run_csv(tmp_path, "cutoff", "--kind", "kl-exact", "--r-bar", "1")
    assert rows[0]["alpha"] == "-1.0"
    assert float(rows[0]["c2_star"]) > 2.0
    assert float(rows[0]["residual"]) <= 1e-12


def test_scan_bytes_do_not_depend_on_workers(tmp_path):
    argv = ["scan", "--d", "3", "--estimator", "jsplus", "--c", "1", "--c", "1.1", "--theta-grid", "0:2:3",
            "--n-samples", str(config.CHUNK_SIZE + 1000), "--seed", "11"]
    one, rows = run_csv(tmp_path, *argv, "--workers", "1", name="one.csv")
    two, _ = run_csv(tmp_path, *argv, "--workers", "2", name="two.csv")
    again, _ = run_csv(tmp_path, *argv, "--workers", "1", name="again.csv")
    assert one == two == again
    assert len(rows) == 6


def test_epsilon_for_identity(tmp_path):
    _, rows = run_csv(tmp_path, "epsilon", "--d", "3", "--alpha", "-1", "--theta-grid", "0:2:3", "--n-samples", "20000")
    assert float(rows[0]["epsilon"]) == pytest.approx(3.0, abs=0.1)


def test_empirical_cutoff_cap(tmp_path):
    _, rows = run_csv(tmp_path, "empirical-cutoff", "--d", "1", "--sigma-x2", "4", "--alpha", "0",
                      "--theta-grid", "0:0:1", "--n-samples", "2000")
    assert float(rows[0]["c2_star"]) == config.EMPIRICAL_C2_CAP


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d=2\nalpha=0.5\nsigma_x2=3\n")
    text, rows = run_csv(tmp_path, "ratio", "--config", str(cfg), "--alpha", "0")
    resolved = json.loads(text.splitlines()[3].removeprefix("# config "))
    assert resolved["d"] == 2
    assert resolved["sigma_x2"] == 3.0
    assert [row["alpha"] for row in rows] == ["0.0"]


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("dimension=2\n")
    assert main(["ratio", "--config", str(cfg)]) == 1


def test_figure_one_peak(tmp_path):
    _, rows = run_csv(tmp_path, "figure", "fig1")
    (peak,) = [row for row in rows if row["series"] == "d=2,r=9.6568" and float(row["x"]) == 0.0]
    assert float(peak["y"]) == pytest.approx(1.2071, abs=1e-4)


def test_figure_two_dominates(tmp_path):
    _, rows = run_csv(tmp_path, "figure", "fig2")
    assert all(float(row["y"]) <= 1.0 + 1e-9 for row in rows)
    at_origin = [row for row in rows if row["series"].endswith("c=k") and float(row["x"]) == 0.0]
    assert len(at_origin) == 3
    assert all(float(row["y"]) == pytest.approx(1.0, abs=1e-9) for row in at_origin)


def test_figure_three_dominates(tmp_path):
    _, rows = run_csv(tmp_path, "figure", "fig3")
    assert all(float(row["y"]) <= 1.0 + 1e-9 for row in rows)


def test_quick_verify(tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", "--quick", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert all(check["passed"] for check in report["checks"])


@pytest.mark.parametrize("argv,code", [
    (["risk", "--estimator", "nope"], 1),
    (["risk", "--alpha", "1.5"], 1),
    (["risk", "--c", "0.5"], 1),
    (["frobnicate"], 1),
    (["figure", "fig9"], 1),
    (["cutoff", "--kind", "kl-exact"], 1),
    (["cutoff", "--kind", "general", "--epsilon", "0"], 2),
])
def test_exit_codes(argv, code, tmp_path):
    assert main([*argv, "--out", str(tmp_path / "x.csv")] if argv[0] != "frobnicate" else argv) == code
