import json
from pathlib import Path

import pytest

from reginf import cli, fixtures
from reginf.cli import ScenarioError, load_scenario, run, scenario_to_json


def write_scenario(tmp_path, name="plane", **extras):
    data = fixtures.scenario_dict(name, **extras)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path, data


class TestScenarioLoading:
    def test_round_trip_lossless(self, tmp_path):
        path, data = write_scenario(tmp_path)
        sc = load_scenario(str(path))
        assert json.loads(scenario_to_json(sc)) == data

    def test_malformed_json_diagnostic(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x", \n  "map": !!}')
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario(str(path))

    def test_missing_field_diagnostic(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x", "map": {"n": 1}}))
        with pytest.raises(ScenarioError, match="map.m"):
            load_scenario(str(path))

    def test_dimension_mismatch_diagnostic(self, tmp_path):
        data = fixtures.scenario_dict("plane")
        data["map"]["pieces"][0]["normals"] = [[0.0, 1.0]]  # wrong width
        data["map"]["pieces"][0]["offsets"] = [0.0]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ScenarioError, match="pieces"):
            load_scenario(str(path))

    def test_parse_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert run("jelonek", str(path), str(tmp_path / "out")) == 3


class TestRunSubcommands:
    def test_jelonek_pass(self, tmp_path):
        path, _ = write_scenario(tmp_path, queries={"expect_jelonek": True})
        code = run("jelonek", str(path), str(tmp_path / "out"))
        assert code == 0
        report = (tmp_path / "out" / "report.jsonl").read_text().strip()
        rec = json.loads(report)
        assert rec["check"] == "jelonek" and rec["pass"]

    def test_failed_expectation_exit_2(self, tmp_path):
        path, _ = write_scenario(tmp_path, queries={"expect_rg_plus": 0.123})
        assert run("rg-plus", str(path), str(tmp_path / "out")) == 2

    def test_criterion_record_structure(self, tmp_path):
        path, _ = write_scenario(tmp_path, budget=1500)
        assert run("criterion-check", str(path), str(tmp_path / "out")) == 0
        rec = json.loads((tmp_path / "out" / "report.jsonl").read_text())
        names = {v["name"] for v in rec["values"]}
        assert {"rg_plus", "reg_estimate", "gap"} <= names
        for v in rec["values"]:
            assert "tol" in v and v["method"] in ("exact", "sampled")

    def test_reg_estimate_writes_ratio_csv(self, tmp_path):
        path, _ = write_scenario(tmp_path, budget=800)
        assert run("reg-estimate", str(path), str(tmp_path / "out")) == 0
        csv = (tmp_path / "out" / "ratios.csv").read_text().splitlines()
        assert csv[0] == "x,y,numerator,denominator,ratio"
        assert len(csv) > 10

    def test_solve_lg_writes_residuals(self, tmp_path):
        path, _ = write_scenario(
            tmp_path, budget=800,
            solver={"kappa": 1.05, "lam": 0.3, "epsilon": 0.05,
                    "max_iters": 300, "x0": [3.0, 0.1], "y": [0.05],
                    "bump": {"K": 1, "scale": 0.3}})
        assert run("solve-lg", str(path), str(tmp_path / "out")) == 0
        csv = (tmp_path / "out" / "residuals.csv").read_text().splitlines()
        assert csv[0] == "iteration,residual"

    def test_determinism_byte_identical(self, tmp_path):
        path, _ = write_scenario(tmp_path, budget=600)
        assert run("criterion-check", str(path), str(tmp_path / "o1")) == 0
        assert run("criterion-check", str(path), str(tmp_path / "o2")) == 0
        b1 = (tmp_path / "o1" / "report.jsonl").read_bytes()
        b2 = (tmp_path / "o2" / "report.jsonl").read_bytes()
        assert b1 == b2

    def test_seed_override_changes_digest_not_pass(self, tmp_path):
        path, _ = write_scenario(tmp_path, budget=600)
        assert run("criterion-check", str(path), str(tmp_path / "o1"),
                   {"seed": 7, "budget": None, "tol": None}) == 0


class TestBundledScenarios:
    def test_bundled_files_parse(self):
        root = Path(__file__).resolve().parents[1] / "scenarios"
        for path in sorted(root.glob("*.json")):
            sc = load_scenario(str(path))
            assert sc.F.n >= 1 and sc.F.m >= 1

    def test_degenerate_chain_on_ray(self, tmp_path):
        root = Path(__file__).resolve().parents[1] / "scenarios"
        code = run("all", str(root / "horizontal-ray.json"),
                   str(tmp_path / "out"), {"seed": None, "budget": 1200,
                                           "tol": None})
        assert code == 0
        lines = (tmp_path / "out" / "report.jsonl").read_text().splitlines()
        checks = [json.loads(l) for l in lines]
        assert all(c["pass"] for c in checks)
        assert {"jelonek", "rg-plus", "criterion-check", "perturb",
                "radius-report"} <= {c["check"] for c in checks}

    def test_staircase_surfaces_criterion_discrepancy(self, tmp_path):
        # the staircase window deliberately hides the empty-preimage bands,
        # so its criterion check must fail (rg+ = 0 exact vs finite windowed
        # estimate) while every other stage passes
        root = Path(__file__).resolve().parents[1] / "scenarios"
        code = run("all", str(root / "staircase.json"), str(tmp_path / "out"),
                   {"seed": None, "budget": 1200, "tol": None})
        assert code == 2
        checks = [json.loads(l) for l in
                  (tmp_path / "out" / "report.jsonl").read_text().splitlines()]
        failing = {c["check"] for c in checks if not c["pass"]}
        assert failing == {"criterion-check"}
        strong = [c for c in checks if c["check"] == "strong-check"]
        assert strong and strong[0]["pass"]
