"""Scenario-driven command-line front end.

Scenarios are JSON files describing a polyhedral mapping, the reference
output value, window parameters, and budgets.  Every subcommand appends
structured records (one JSON object per line) to <out>/report.jsonl; each
numeric value carries its tolerance and a method tag (exact | sampled).
Side files ratios.csv / residuals.csv hold the raw estimator samples and
solver residuals for plotting.

Exit codes: 0 all checks pass, 1 computation error, 2 at least one check
failed, 3 scenario parse error.
"""

from __future__ import annotations

import os

if "REGINF_THREADS" in os.environ:  # must precede the numpy import chain
    os.environ.setdefault("OMP_NUM_THREADS", os.environ["REGINF_THREADS"])
    os.environ.setdefault("OPENBLAS_NUM_THREADS", os.environ["REGINF_THREADS"])

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import geom, lgsolve, normals, perturb, regmod, svmap
from .geom import Polyhedron, UnionRegion
from .svmap import InfinityWindow, SampledMap, SetValuedMap
from .tolerances import ANGULAR_TOL_SAMPLED, CRITERION_REL_TOL


class ScenarioError(Exception):
    """Scenario file is malformed; message carries a field/line diagnostic."""


SUBCOMMANDS = ("slice", "jelonek", "normal-cone", "coderivative-inf",
               "reg-estimate", "rg-plus", "criterion-check", "strong-check",
               "perturb", "radius-report", "solve-lg", "all")


# ---------------------------------------------------------------------------
# scenario loading
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    F: SetValuedMap
    ybar: np.ndarray
    window: InfinityWindow
    budget: int
    seed: int
    criterion_tol: float
    angular_tol: float
    perturbation_K: int
    solver: Optional[dict]
    queries: dict
    strong: bool
    radius_mode: str
    raw: dict

    def digest(self, subcommand: str) -> str:
        blob = json.dumps(self.raw, sort_keys=True) + "|" + subcommand
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_MISSING = object()


def _field(data: dict, path: str, expected_type=None, default=_MISSING):
    cur: Any = data
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is not _MISSING:
                return default
            raise ScenarioError(f"missing field '{path}'")
        cur = cur[part]
    if expected_type is not None and not isinstance(cur, expected_type):
        raise ScenarioError(f"field '{path}' has wrong type "
                            f"(got {type(cur).__name__})")
    return cur


def load_scenario(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    name = _field(data, "name", str)
    n = _field(data, "map.n", int)
    m = _field(data, "map.m", int)
    pieces_raw = _field(data, "map.pieces", list)
    pieces = []
    for idx, piece in enumerate(pieces_raw):
        try:
            normals_list = piece["normals"]
            offsets_list = piece["offsets"]
            poly = Polyhedron(np.asarray(normals_list, dtype=float),
                              np.asarray(offsets_list, dtype=float))
        except (KeyError, TypeError, ValueError, geom.GeometryError) as exc:
            raise ScenarioError(f"field 'map.pieces[{idx}]': {exc}") from exc
        if poly.dim != n + m:
            raise ScenarioError(
                f"field 'map.pieces[{idx}]': row dimension {poly.dim} != n+m = {n + m}")
        pieces.append(poly)
    try:
        F = SetValuedMap(n, m, UnionRegion(n + m, tuple(pieces)))
    except geom.DimensionMismatch as exc:
        raise ScenarioError(f"map definition inconsistent: {exc}") from exc
    ybar = np.asarray(_field(data, "ybar", list), dtype=float)
    if ybar.shape != (m,):
        raise ScenarioError(f"field 'ybar' must have length m = {m}")
    try:
        window = InfinityWindow(
            R=float(_field(data, "window.R")),
            r=float(_field(data, "window.r")),
            gamma=float(_field(data, "window.gamma")),
            schedule=tuple(_field(data, "window.schedule", list)))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field 'window': {exc}") from exc
    solver = data.get("solver")
    if solver is not None:
        for key in ("kappa", "lam", "epsilon", "x0", "y"):
            if key not in solver:
                raise ScenarioError(f"missing field 'solver.{key}'")
    return Scenario(
        name=name,
        F=F,
        ybar=ybar,
        window=window,
        budget=int(data.get("budget", 10000)),
        seed=int(data.get("seed", 0)),
        criterion_tol=float(_field(data, "tolerances.criterion",
                                   default=CRITERION_REL_TOL)),
        angular_tol=float(_field(data, "tolerances.angular",
                                 default=ANGULAR_TOL_SAMPLED)),
        perturbation_K=int(_field(data, "perturbation.K", default=8)),
        solver=solver,
        queries=data.get("queries", {}),
        strong=bool(data.get("strong", False)),
        radius_mode=str(data.get("radius_mode", "plain")),
        raw=data,
    )


def scenario_to_json(sc: Scenario) -> str:
    """Canonical re-serialization (round-trip check support)."""
    return json.dumps(sc.raw, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def _num(name: str, value, tol, method: str) -> dict:
    if isinstance(value, (np.floating, np.integer)):
        value = float(value)
    if isinstance(value, float) and math.isnan(value):
        value = "nan"
    return {"name": name, "value": value, "tol": tol, "method": method}


class ReportWriter:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.records: list[dict] = []
        self.csv_files: dict[str, list[str]] = {}

    def add(self, check: str, digest: str, values: list[dict], passed: bool,
            tolerance: float):
        self.records.append({
            "check": check,
            "inputs": digest,
            "values": values,
            "pass": bool(passed),
            "tolerance": tolerance,
        })

    def add_csv(self, filename: str, header: str, rows: list[str]):
        self.csv_files[filename] = [header] + rows

    def flush(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        report_path = self.out_dir / "report.jsonl"
        with open(report_path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for filename, lines in self.csv_files.items():
            with open(self.out_dir / filename, "w") as fh:
                fh.write("\n".join(lines) + "\n")

    @property
    def all_passed(self) -> bool:
        return all(rec["pass"] for rec in self.records)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cfg(sc: Scenario) -> regmod.SamplerConfig:
    return regmod.SamplerConfig(budget=sc.budget, seed=sc.seed)


def _run_slice(sc: Scenario, rep: ReportWriter):
    x = np.asarray(sc.queries.get("slice_x", [0.0] * sc.F.n), dtype=float)
    y = np.asarray(sc.queries.get("slice_y", list(sc.ybar)), dtype=float)
    img = svmap.image_slice(sc.F, x)
    pre = svmap.preimage_slice(sc.F, y)
    d_img = svmap.dist_to_image(sc.F, x, y)
    values = [
        _num("image_pieces", len(img.pieces), 0, "exact"),
        _num("preimage_pieces", len(pre.pieces), 0, "exact"),
        _num("dist_to_image", d_img, 1e-9, "exact"),
    ]
    rep.add("slice", sc.digest("slice"), values, True, 0.0)


def _run_jelonek(sc: Scenario, rep: ReportWriter):
    res = svmap.jelonek_contains(sc.F, sc.ybar)
    values = [
        _num("contains", bool(res), 0, "exact"),
        _num("witness_piece", res.piece if res.piece is not None else -1, 0, "exact"),
    ]
    expected = sc.queries.get("expect_jelonek")
    passed = True if expected is None else (bool(res) == bool(expected))
    rep.add("jelonek", sc.digest("jelonek"), values, passed, 0.0)
    return res


def _run_normal_cone(sc: Scenario, rep: ReportWriter):
    cone = normals.normal_cone_at_infinity(sc.F.graph, sc.F.n, sc.ybar)
    values = [
        _num("pieces", len(cone.pieces), 0, "exact"),
        _num("rays", len(cone.all_rays()), 0, "exact"),
    ]
    rep.add("normal-cone", sc.digest("normal-cone"), values, True, 0.0)
    return cone


def _run_coderivative_inf(sc: Scenario, rep: ReportWriter):
    ystar = np.asarray(sc.queries.get("ystar", [1.0] * sc.F.m), dtype=float)
    try:
        approx, diag = normals.sampled_coderivative_limit(
            sc.F, sc.ybar, ystar, sc.window, seed=sc.seed)
        exact = normals.normal_cone_at_infinity(sc.F.graph, sc.F.n, sc.ybar)
        dist = geom.cone_union_hausdorff(approx, exact)
        ok = dist <= sc.angular_tol
        values = [
            _num("stabilized_at_stage", diag.stabilized_at, 0, "sampled"),
            _num("hausdorff_to_exact", dist, sc.angular_tol, "sampled"),
            _num("direction_samples", len(diag.direction_samples), 0, "sampled"),
        ]
        rep.add("coderivative-inf", sc.digest("coderivative-inf"), values, ok,
                sc.angular_tol)
    except normals.NotStabilized:
        rep.add("coderivative-inf", sc.digest("coderivative-inf"),
                [_num("stabilized_at_stage", -1, 0, "sampled")], False,
                sc.angular_tol)


def _run_reg_estimate(sc: Scenario, rep: ReportWriter):
    est = regmod.estimate_reg_at_infinity(sc.F, sc.ybar, sc.window, _cfg(sc))
    values = [
        _num("reg_estimate", est.value if math.isfinite(est.value) else "inf",
             sc.criterion_tol, "sampled"),
        _num("samples", est.samples, 0, "sampled"),
        _num("failure_flag", est.failed, 0, "sampled"),
    ]
    rep.add("reg-estimate", sc.digest("reg-estimate"), values, True,
            sc.criterion_tol)
    rows = [f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]}" for r in est.ratios]
    rep.add_csv("ratios.csv", "x,y,numerator,denominator,ratio", rows)
    return est


def _run_rg_plus(sc: Scenario, rep: ReportWriter):
    rg = regmod.rg_plus(sc.F, sc.ybar)
    values = [
        _num("rg_plus", rg.value if math.isfinite(rg.value) else "inf",
             1e-9, "exact"),
        _num("method", rg.method, 0, "exact"),
    ]
    expected = sc.queries.get("expect_rg_plus")
    passed = True
    if expected is not None:
        passed = abs(rg.value - float(expected)) <= 1e-6 * max(1.0, abs(float(expected)))
    rep.add("rg-plus", sc.digest("rg-plus"), values, passed, 1e-9)
    return rg


def _run_criterion(sc: Scenario, rep: ReportWriter):
    r = regmod.criterion_check(sc.F, sc.ybar, sc.window, _cfg(sc),
                               tol=sc.criterion_tol)
    values = [
        _num("rg_plus", r.rg_plus_value if math.isfinite(r.rg_plus_value)
             else "inf", 1e-9, "exact"),
        _num("reg_estimate", r.reg_estimate if math.isfinite(r.reg_estimate)
             else "inf", sc.criterion_tol, "sampled"),
        _num("gap", r.gap if math.isfinite(r.gap) else "inf",
             sc.criterion_tol, "sampled"),
        _num("branch", r.branch, 0, "exact"),
    ]
    rep.add("criterion-check", sc.digest("criterion-check"), values,
            r.passed, sc.criterion_tol)
    return r


def _run_strong(sc: Scenario, rep: ReportWriter):
    r = regmod.strong_regularity_check(sc.F, sc.ybar, sc.window, _cfg(sc))
    values = [
        _num("decision", r.decision, 0, "sampled"),
        _num("diagnostic", r.diagnostic, 0, "sampled"),
        _num("lipschitz", r.lipschitz if math.isfinite(r.lipschitz) else "inf",
             sc.criterion_tol, "sampled"),
        _num("reg_estimate", r.reg_estimate if math.isfinite(r.reg_estimate)
             else "inf", sc.criterion_tol, "sampled"),
    ]
    expected = sc.queries.get("expect_strong")
    passed = True if expected is None else (r.decision == bool(expected))
    rep.add("strong-check", sc.digest("strong-check"), values, passed,
            sc.criterion_tol)
    return r


def _run_perturb(sc: Scenario, rep: ReportWriter):
    spec = perturb.build_perturbation(sc.F, sc.ybar, K=sc.perturbation_K,
                                      seed=sc.seed)
    ver = perturb.verify_perturbation(spec, sc.F, sc.ybar, sc.window,
                                      regmod.SamplerConfig(budget=600, seed=sc.seed),
                                      seed=sc.seed)
    values = [
        _num("K", spec.K, 0, "exact"),
        _num("rg_plus", spec.rgplus, 1e-9, "exact"),
        _num("decay_passed", ver.decay_passed, 0, "sampled"),
        _num("lip_value", ver.lip_value, 1e-6, "sampled"),
        _num("lip_passed", ver.lip_passed, 1e-6, "sampled"),
        _num("rank_one_passed", ver.rank_one_passed, 1e-12, "sampled"),
        _num("destab_passed", ver.destab_passed, 1e-9, "exact"),
        _num("perturbed_reg_probe", ver.perturbed_reg_estimate
             if math.isfinite(ver.perturbed_reg_estimate) else "inf",
             0, "sampled"),
        _num("trend", ver.trend_note, 0, "sampled"),
    ]
    rep.add("perturb", sc.digest("perturb"), values, ver.passed, 1e-6)
    return spec, ver


def _run_radius(sc: Scenario, rep: ReportWriter, spec=None, ver=None):
    if spec is None:
        spec = perturb.build_perturbation(sc.F, sc.ybar, K=sc.perturbation_K,
                                          seed=sc.seed)
        ver = perturb.verify_perturbation(spec, sc.F, sc.ybar, sc.window,
                                          regmod.SamplerConfig(budget=600,
                                                               seed=sc.seed),
                                          seed=sc.seed)
    f = perturb.as_sampled_map(spec)
    rng = np.random.default_rng(sc.seed)
    lip = regmod.lip_at_infinity(f, sc.window, seed=sc.seed, budget=400,
                                 extra_pairs=perturb._case_pairs(spec, rng)
                                 if spec.K else ())
    r = regmod.radius_report(sc.F, sc.ybar, lip, ver.passed, sc.window,
                             mode=sc.radius_mode, config=_cfg(sc),
                             tol=sc.criterion_tol)
    values = [
        _num("rg_plus", r.rg_plus_value, 1e-9, "exact"),
        _num("reg_estimate", r.reg_estimate if math.isfinite(r.reg_estimate)
             else "inf", sc.criterion_tol, "sampled"),
        _num("destabilizer_lip", r.destabilizer_lip, sc.criterion_tol, "sampled"),
        _num("chain_gap", r.chain_gap if math.isfinite(r.chain_gap) else "inf",
             sc.criterion_tol, "sampled"),
        _num("branch", r.branch, 0, "exact"),
        _num("mode", r.mode, 0, "exact"),
    ]
    rep.add("radius-report", sc.digest("radius-report"), values, r.passed,
            sc.criterion_tol)
    return r


def _solver_map(sc: Scenario) -> SampledMap:
    cfg = sc.solver or {}
    bump = cfg.get("bump")
    if not bump:
        return SampledMap.zero(sc.F.n, sc.F.m)
    spec = perturb.build_perturbation(sc.F, sc.ybar, K=int(bump.get("K", 1)),
                                      seed=sc.seed)
    return perturb.as_sampled_map(spec).scaled(float(bump.get("scale", 1.0)))


def _run_solve_lg(sc: Scenario, rep: ReportWriter):
    if sc.solver is None:
        rep.add("solve-lg", sc.digest("solve-lg"),
                [_num("skipped", "no solver section", 0, "exact")], True, 0.0)
        return
    cfg = sc.solver
    f = _solver_map(sc)
    kappa, lam, eps = float(cfg["kappa"]), float(cfg["lam"]), float(cfg["epsilon"])
    y = np.asarray(cfg["y"], dtype=float)
    x0 = np.asarray(cfg["x0"], dtype=float)
    trace = lgsolve.lg_solve(sc.F, f, y, x0, kappa, lam, eps,
                             max_iters=int(cfg.get("max_iters", 300)))
    ratio_bound = kappa * lam + eps
    worst = max(trace.ratios) if trace.ratios else 0.0
    values = [
        _num("status", trace.status, 0, "exact"),
        _num("iterations", len(trace.iterates) - 1, 0, "exact"),
        _num("worst_ratio", worst, ratio_bound, "sampled"),
    ]
    passed = trace.status == "converged" and worst <= ratio_bound + 1e-12
    if trace.status == "converged":
        cert = lgsolve.certify_bound(trace, sc.F, f, y, x0, kappa, lam)
        values.append(_num("bound_lhs", cert.lhs, 1e-9, "exact"))
        values.append(_num("bound_rhs", cert.rhs, 1e-9, "exact"))
        passed = passed and cert.passed
    rep.add("solve-lg", sc.digest("solve-lg"), values, passed, ratio_bound)
    rows = [f"{i},{r}" for i, r in trace.to_rows()]
    rep.add_csv("residuals.csv", "iteration,residual", rows)
    return trace


def run(subcommand: str, scenario_path: str, out_dir: str,
        overrides: Optional[dict] = None) -> int:
    """Execute one subcommand against a scenario; returns the exit code."""
    try:
        sc = load_scenario(scenario_path)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 3
    if overrides:
        if overrides.get("seed") is not None:
            sc.seed = int(overrides["seed"])
        if overrides.get("budget") is not None:
            sc.budget = int(overrides["budget"])
        if overrides.get("tol") is not None:
            sc.criterion_tol = float(overrides["tol"])
    rep = ReportWriter(Path(out_dir))
    try:
        if subcommand == "slice":
            _run_slice(sc, rep)
        elif subcommand == "jelonek":
            _run_jelonek(sc, rep)
        elif subcommand == "normal-cone":
            _run_normal_cone(sc, rep)
        elif subcommand == "coderivative-inf":
            _run_coderivative_inf(sc, rep)
        elif subcommand == "reg-estimate":
            _run_reg_estimate(sc, rep)
        elif subcommand == "rg-plus":
            _run_rg_plus(sc, rep)
        elif subcommand == "criterion-check":
            _run_criterion(sc, rep)
        elif subcommand == "strong-check":
            _run_strong(sc, rep)
        elif subcommand == "perturb":
            _run_perturb(sc, rep)
        elif subcommand == "radius-report":
            _run_radius(sc, rep)
        elif subcommand == "solve-lg":
            _run_solve_lg(sc, rep)
        elif subcommand == "all":
            _run_slice(sc, rep)
            _run_jelonek(sc, rep)
            _run_normal_cone(sc, rep)
            _run_coderivative_inf(sc, rep)
            _run_reg_estimate(sc, rep)
            _run_rg_plus(sc, rep)
            _run_criterion(sc, rep)
            spec, ver = _run_perturb(sc, rep)
            _run_radius(sc, rep, spec, ver)
            _run_solve_lg(sc, rep)
            if sc.strong:
                _run_strong(sc, rep)
        else:
            print(f"unknown subcommand '{subcommand}'", file=sys.stderr)
            return 3
    except Exception as exc:  # computation failure -> exit 1
        print(f"computation error in '{subcommand}': {exc}", file=sys.stderr)
        rep.flush()
        return 1
    rep.flush()
    return 0 if rep.all_passed else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reginf",
        description="metric-regularity-at-infinity toolkit: scenario runner")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--scenario", required=True, help="scenario JSON path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--budget", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    args = parser.parse_args(argv)
    return run(args.subcommand, args.scenario, args.out,
               {"seed": args.seed, "budget": args.budget, "tol": args.tol})


if __name__ == "__main__":
    raise SystemExit(main())
