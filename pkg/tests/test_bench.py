import json

import numpy as np
import pytest

from upliftbench.bench import (
    ConfigError,
    ExperimentConfig,
    build_generated,
    run,
    run_generate,
    run_ite_benchmark,
    run_separability,
    run_validate,
)
from upliftbench.data import load_csv
from upliftbench.synthgen import GroundTruthBundle


def _strip_env(report_dict):
    report_dict = dict(report_dict)
    report_dict.pop("environment", None)
    return report_dict


def test_config_validation():
    with pytest.raises(ConfigError, match="protocol"):
        ExperimentConfig(protocol="mystery")
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"protocol": "validate", "bogus": 1})
    with pytest.raises(ConfigError, match="surface"):
        ExperimentConfig(protocol="validate", surfaces=["cubic"])


def test_generate_writes_and_regenerates(tmp_path):
    config = ExperimentConfig(
        protocol="generate",
        seed=5,
        out_dir=str(tmp_path / "first"),
        generator={"mode": "ite", "surface": "multi_peaked", "n": 400},
    )
    report = run_generate(config)
    manifest = json.loads((tmp_path / "first" / "manifest.json").read_text())
    assert manifest["generator"]["delta"] == 0.01
    assert manifest["generator"]["surface"] == "multi_peaked"
    assert manifest["generator"]["seed"] == 5
    assert manifest["generator"]["n_anchors"] == 5
    assert manifest["generator"]["sigma"] == 1.0

    # Regenerating from the manifest reproduces both files byte for byte.
    again = ExperimentConfig(
        protocol="generate",
        seed=999,  # ignored: the manifest pins its own seed
        out_dir=str(tmp_path / "second"),
        generator=manifest["generator"],
    )
    run_generate(again)
    for name in ("data.csv", "ground_truth.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    loaded = load_csv(tmp_path / "first" / "data.csv")
    truth = GroundTruthBundle.from_csv(tmp_path / "first" / "ground_truth.csv")
    assert loaded.n == 400 and len(truth.tau) == 400
    assert report.results["n"] == 400


def test_build_generated_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown ite generator keys"):
        build_generated({"mode": "ite", "walrus": 1}, 100, 0)
    with pytest.raises(ConfigError, match="unknown um generator keys"):
        build_generated({"mode": "um", "walrus": 1}, 100, 0)
    with pytest.raises(ConfigError, match="generator mode"):
        build_generated({"mode": "other"}, 100, 0)


def test_validate_on_rct_corpus():
    config = ExperimentConfig(
        protocol="validate",
        seed=2,
        n=8000,
        generator={"mode": "um", "n_projections": 8},
        c2st_permutations=19,
    )
    report = run_validate(config)
    res = report.results
    assert res["constraints"]["ok"]
    assert res["treatment_independence"]["p_value"] > 0.05
    assert res["reference"]["treatment_ratio"] == 0.85
    assert isinstance(res["informativeness_pct"]["visit"], float)
    assert 0.80 < res["treatment_ratio"] < 0.90
    text = report.render_text()
    assert "treatment independence" in text


def test_validate_flags_confounded_corpus():
    config = ExperimentConfig(
        protocol="validate",
        seed=3,
        n=20_000,
        generator={"mode": "ite", "surface": "linear"},
        c2st_permutations=19,
    )
    report = run_validate(config)
    assert report.results["treatment_independence"]["p_value"] <= 0.05
    # Continuous-outcome corpus has all-zero visit labels: marked, not fatal.
    assert "skipped" in report.results["informativeness_pct"]["visit"]


def test_separability_structure(tmp_path):
    config = ExperimentConfig(
        protocol="separability",
        seed=4,
        n=6000,
        generator={"mode": "um", "n_projections": 6},
        methods=["mom", "cvt"],
        test_sizes=[200, 800, 5000],
        n_bootstrap=200,
        include_oracle=True,
        oracle_noise_sd=1.0,
        out_dir=str(tmp_path),
    )
    with pytest.warns(UserWarning, match="exceeds the test set"):
        report = run_separability(config)
    res = report.results
    assert res["n_test"] == 1200
    assert res["sizes_run"] == [200, 800]
    cells = res["cells"]
    assert set(cells) == {"mom", "cvt", "oracle", "oracle_noised"}
    assert "skipped" in cells["mom"]["5000"]
    for size in ("200", "800"):
        for method in cells:
            cell = cells[method][size]
            assert cell["ci_low"] <= cell["ci_high"]
    assert "mom|oracle" in res["ci_overlap"]["200"] or "cvt|mom" in res["ci_overlap"]["200"]
    curve_csv = (tmp_path / "separability_curve.csv").read_text().splitlines()
    assert curve_csv[0] == "method,size,auuc,ci_low,ci_high"
    assert len(curve_csv) == 1 + 4 * 2  # four scorers, two sizes run
    assert (tmp_path / "report.json").exists() is False  # run_separability alone does not write report.json


def test_separability_warns_on_oversized(tmp_path):
    config = ExperimentConfig(
        protocol="separability",
        seed=4,
        n=3000,
        generator={"mode": "um", "n_projections": 4},
        methods=["mom"],
        test_sizes=[100, 100000],
        n_bootstrap=100,
    )
    with pytest.warns(UserWarning, match="exceeds the test set"):
        report = run_separability(config)
    assert report.results["sizes_run"] == [100]


def test_ite_benchmark_structure_and_oracle():
    config = ExperimentConfig(
        protocol="ite-bench",
        seed=6,
        n=3000,
        n_realizations=2,
        surfaces=["linear"],
        methods=["t_learner", "dr_learner"],
        include_oracle=True,
        cv_folds=3,
    )
    report = run_ite_benchmark(config)
    res = report.results
    assert len(res["cells"]) == 2 * 3  # 2 realizations x (2 methods + oracle)
    oracle = res["summary"]["linear"]["oracle"]
    assert oracle["mean"] == 0.0 and oracle["n_missing"] == 0
    assert res["best"]["linear"] == "oracle"
    for method in ("t_learner", "dr_learner"):
        cell = res["summary"]["linear"][method]
        assert cell["n_missing"] == 0
        assert cell["mean"] > 0.0
    text = report.render_text()
    assert "oracle" in text and "*" in text


def test_ite_benchmark_records_failures():
    config = ExperimentConfig(
        protocol="ite-bench",
        seed=7,
        n=2000,
        n_realizations=1,
        surfaces=["linear"],
        methods=["t_learner"],
        grids={"t_learner": [{"l2": -5.0}]},  # invalid everywhere
        cv_folds=3,
    )
    report = run_ite_benchmark(config)
    row = report.results["cells"][0]
    assert row["pehe"] is None and "error" in row
    assert report.results["summary"]["linear"]["t_learner"]["n_missing"] == 1
    assert report.results["best"]["linear"] is None


def test_ite_benchmark_reproducible_and_worker_invariant():
    base = dict(
        protocol="ite-bench",
        seed=8,
        n=2000,
        n_realizations=2,
        surfaces=["linear"],
        methods=["t_learner"],
        cv_folds=3,
    )
    a = run_ite_benchmark(ExperimentConfig(**base))
    b = run_ite_benchmark(ExperimentConfig(**base))
    c = run_ite_benchmark(ExperimentConfig(**base, workers=2))
    assert _strip_env(a.to_dict()) == _strip_env(b.to_dict())
    assert a.results == c.results  # worker count must not change the numbers


def test_run_dispatch_writes_report(tmp_path):
    config = ExperimentConfig(
        protocol="generate",
        seed=1,
        out_dir=str(tmp_path),
        generator={"mode": "ite", "surface": "linear", "n": 50},
    )
    report = run(config)
    assert (tmp_path / "report.json").exists()
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["protocol"] == "generate"
    assert payload["environment"]["package_version"] == report.environment["package_version"]
