"""Experiment orchestration: generation, validation, the uplift separability
protocol and the effect-prediction benchmark.

Every protocol is driven by an :class:`ExperimentConfig` (JSON-mirrorable),
fans independent work items out to an optional process pool, and assembles
an :class:`EvaluationReport` whose numbers are all traceable to explicit
seeds. Rerunning a protocol with the same config reproduces the report
numerically.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_csv, validate_constraints, write_csv
from .encoding import FeatureEncoder
from .learners.scoring import UpliftScorer
from .learners.tuning import (
    ITE_METHODS,
    UM_METHODS,
    default_grid,
    fit_method,
    tune,
)
from .metrics import MetricResult, auuc_ci, pehe
from .splits import (
    STRATIFY_TREATMENT,
    STRATIFY_TREATMENT_AND_OUTCOME,
    stratum_labels,
    train_indices_per_stratum,
)
from .synthgen import (
    ASSIGN_CONFOUNDED,
    ASSIGN_RCT,
    SURFACE_KINDS,
    SURFACE_MULTI_PEAKED,
    AssignmentSpec,
    GeneratedData,
    derive_seed,
    generate_ite_dataset,
    generate_um_dataset,
)
from .validation import c2st, dummy_improvement

PROTOCOL_GENERATE = "generate"
PROTOCOL_VALIDATE = "validate"
PROTOCOL_SEPARABILITY = "separability"
PROTOCOL_ITE_BENCH = "ite-bench"
PROTOCOLS = (PROTOCOL_GENERATE, PROTOCOL_VALIDATE, PROTOCOL_SEPARABILITY, PROTOCOL_ITE_BENCH)

# Published reference statistics of the real corpus, echoed in validation
# reports for side-by-side comparison.
REFERENCE_STATS = {
    "n": 13_979_592,
    "treatment_ratio": 0.85,
    "visit_rate": 0.0470,
    "conversion_rate": 0.0029,
}


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    protocol: str
    seed: int = 0
    workers: int = 1
    out_dir: str | None = None
    data_path: str | None = None
    generator: dict = field(default_factory=dict)
    methods: list[str] | None = None
    grids: dict = field(default_factory=dict)
    test_sizes: list[int] = field(default_factory=lambda: [1000, 5000, 20000])
    n: int = 20_000
    n_realizations: int = 10
    surfaces: list[str] = field(default_factory=lambda: list(SURFACE_KINDS))
    cv_folds: int = 5
    resolution: int = 100
    n_bootstrap: int = 1000
    include_oracle: bool = False
    oracle_noise_sd: float = 0.0
    c2st_permutations: int = 99

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        for kind in self.surfaces:
            if kind not in SURFACE_KINDS:
                raise ConfigError(f"unknown surface kind {kind!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EvaluationReport:
    protocol: str
    config: dict
    results: dict
    environment: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True), encoding="utf-8")

    def render_text(self) -> str:
        lines = [f"protocol: {self.protocol}", f"seed: {self.config.get('seed')}"]
        renderer = _TEXT_RENDERERS.get(self.protocol)
        if renderer:
            lines.extend(renderer(self.results))
        return "\n".join(lines)


def _environment(seed: int) -> dict:
    return {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
    }


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _format_table(headers: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    out.extend(fmt.format(*row) for row in rows)
    return out


# -- generation --------------------------------------------------------------

_UM_KEYS = {
    "n_projections",
    "buckets_per_projection",
    "rct_ratio",
    "n_anchors",
    "sigma",
    "weight_scale",
    "conversion_given_visit",
}
_ITE_KEYS = {"n_projections", "buckets_per_projection", "noise_sd", "target_effect"}
_ITE_SURFACE_KEYS = {"sigma", "n_anchors", "offset_value"}


def build_generated(generator: dict, n: int, seed: int) -> tuple[GeneratedData, dict]:
    """Instantiate a generator spec; returns the data and the fully resolved
    parameter dict (a regeneration manifest)."""
    g = dict(generator)
    mode = g.pop("mode", "ite")
    n = int(g.pop("n", n))
    seed = int(g.pop("seed", seed))

    if mode == "um":
        kwargs = {k: g.pop(k) for k in list(g) if k in _UM_KEYS}
        if g:
            raise ConfigError(f"unknown um generator keys: {sorted(g)}")
        gen = generate_um_dataset(n, seed, **kwargs)
        resolved = {
            "mode": "um",
            "n": n,
            "seed": seed,
            "rct_ratio": 0.85,
            "n_projections": 100,
            "buckets_per_projection": 6,
            "n_anchors": 5,
            "sigma": "auto",
            "weight_scale": 1.0,
            "conversion_given_visit": 0.3,
            **kwargs,
        }
        return gen, resolved

    if mode != "ite":
        raise ConfigError(f"unknown generator mode {mode!r}")

    surface_kind = g.pop("surface", SURFACE_MULTI_PEAKED)
    assignment_mode = g.pop("assignment", ASSIGN_CONFOUNDED)
    if assignment_mode == ASSIGN_RCT:
        assignment = AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=float(g.pop("rct_ratio", 0.5)), seed=seed)
    elif assignment_mode == ASSIGN_CONFOUNDED:
        assignment = AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=float(g.pop("delta", 0.01)), seed=seed)
    else:
        raise ConfigError(f"unknown assignment mode {assignment_mode!r}")

    kwargs = {k: g.pop(k) for k in list(g) if k in _ITE_KEYS}
    surface_kwargs = {k: g.pop(k) for k in list(g) if k in _ITE_SURFACE_KEYS}
    if surface_kind != SURFACE_MULTI_PEAKED:
        surface_kwargs.pop("sigma", None)
        surface_kwargs.pop("n_anchors", None)
    if surface_kind != "exponential":
        surface_kwargs.pop("offset_value", None)
    if g:
        raise ConfigError(f"unknown ite generator keys: {sorted(g)}")

    gen = generate_ite_dataset(
        n, surface_kind, seed, assignment=assignment, surface_kwargs=surface_kwargs or None, **kwargs
    )
    resolved = {
        "mode": "ite",
        "n": n,
        "seed": seed,
        "surface": surface_kind,
        "assignment": assignment_mode,
        **({"delta": assignment.delta} if assignment_mode == ASSIGN_CONFOUNDED else {"rct_ratio": assignment.rct_ratio}),
        "n_projections": 5,
        "buckets_per_projection": 6,
        "noise_sd": 1.0,
        "target_effect": 4.0,
        **({"sigma": 1.0, "n_anchors": 5} if surface_kind == SURFACE_MULTI_PEAKED else {}),
        **({"offset_value": 0.5} if surface_kind == "exponential" else {}),
        **kwargs,
        **surface_kwargs,
    }
    return gen, resolved


def run_generate(config: ExperimentConfig) -> EvaluationReport:
    """Write a generated dataset, its ground-truth sidecar and a manifest
    sufficient to regenerate both bit-identically."""
    if not config.out_dir:
        raise ConfigError("generate needs out_dir")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    gen, resolved = build_generated(config.generator, config.n, config.seed)
    data_path = out / "data.csv"
    truth_path = out / "ground_truth.csv"
    manifest_path = out / "manifest.json"
    write_csv(gen.dataset, data_path)
    gen.truth.to_csv(truth_path)
    manifest = {"generator": resolved, "package_version": __version__}
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")

    results = {
        "files": {
            "data": str(data_path),
            "ground_truth": str(truth_path),
            "manifest": str(manifest_path),
        },
        "manifest": manifest,
        "n": gen.dataset.n,
        "treatment_ratio": gen.dataset.treatment_ratio,
    }
    return EvaluationReport(PROTOCOL_GENERATE, config.to_dict(), results, _environment(config.seed))


# -- validation ---------------------------------------------------------------


def run_validate(config: ExperimentConfig) -> EvaluationReport:
    """Constraint counts, treatment-independence test and informativeness
    checks, reported next to the published reference statistics."""
    if config.data_path:
        dataset = load_csv(config.data_path)
        encoder = FeatureEncoder(
            n_projections=int(config.generator.get("n_projections", 5)),
            buckets_per_projection=int(config.generator.get("buckets_per_projection", 6)),
            seed=config.seed,
        )
        enc = encoder.fit_transform(dataset)
    else:
        gen, _ = build_generated(config.generator, config.n, config.seed)
        dataset, enc = gen.dataset, gen.encoded

    constraints = validate_constraints(dataset)
    independence = c2st(enc, dataset.treatment, n_permutations=config.c2st_permutations, seed=config.seed)

    informativeness: dict[str, object] = {}
    for outcome in ("visit", "conversion"):
        y = dataset.label(outcome)
        try:
            informativeness[outcome] = dummy_improvement(enc, y, seed=config.seed)
        except ValueError as exc:
            informativeness[outcome] = {"skipped": str(exc)}

    results = {
        "n": dataset.n,
        "treatment_ratio": dataset.treatment_ratio,
        "visit_rate": dataset.visit_rate,
        "conversion_rate": dataset.conversion_rate,
        "reference": REFERENCE_STATS,
        "constraints": constraints.to_dict(),
        "treatment_independence": independence.to_dict(),
        "informativeness_pct": informativeness,
    }
    return EvaluationReport(PROTOCOL_VALIDATE, config.to_dict(), results, _environment(config.seed))


# -- separability ---------------------------------------------------------------

ORACLE = "oracle"
ORACLE_NOISED = "oracle_noised"


def _ci_overlap(a: MetricResult, b: MetricResult) -> bool:
    return a.ci_low <= b.ci_high and b.ci_low <= a.ci_high


def run_separability(config: ExperimentConfig) -> EvaluationReport:
    """Tune and fit the uplift baselines, then compare AUUC confidence
    intervals on nested test subsamples of increasing size."""
    generator = {"mode": "um", **config.generator}
    gen, resolved = build_generated(generator, config.n, config.seed)
    dataset, enc, truth = gen.dataset, gen.encoded, gen.truth

    y = dataset.visit.astype(np.float64)
    t = dataset.treatment
    strata = stratum_labels(dataset, STRATIFY_TREATMENT_AND_OUTCOME, "visit")
    train_mask = train_indices_per_stratum(strata, 0.8, seed=derive_seed(config.seed, 11))
    train_idx = np.flatnonzero(train_mask)
    test_idx = np.flatnonzero(~train_mask)
    X_train, X_test = enc.values[train_idx], enc.values[test_idx]

    methods = list(UM_METHODS if config.methods is None else config.methods)
    scores: dict[str, np.ndarray] = {}
    tuning: dict[str, dict] = {}
    for method in methods:
        grid = config.grids.get(method) or default_grid(method)
        result = tune(
            method,
            grid,
            X_train,
            y[train_idx],
            t[train_idx],
            k=config.cv_folds,
            select_by="auuc",
            strata=strata[train_idx],
            seed=derive_seed(config.seed, 12),
            resolution=config.resolution,
        )
        scorer = fit_method(method, X_train, y[train_idx], t[train_idx], result.best_config)
        scores[method] = scorer.score(X_test)
        tuning[method] = result.to_dict()

    if config.include_oracle:
        scores[ORACLE] = truth.tau[test_idx]
        if config.oracle_noise_sd > 0:
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, 13]))
            spread = float(truth.tau[test_idx].std()) or 1.0
            scores[ORACLE_NOISED] = truth.tau[test_idx] + rng.normal(
                0.0, config.oracle_noise_sd * spread, size=len(test_idx)
            )

    shuffle = np.random.default_rng(np.random.SeedSequence([config.seed, 14])).permutation(len(test_idx))
    y_test, t_test = y[test_idx], t[test_idx]

    cells: dict[str, dict] = {name: {} for name in scores}
    overlap: dict[str, dict] = {}
    sizes_run: list[int] = []
    for size in sorted(set(config.test_sizes)):
        if size > len(test_idx):
            warnings.warn(f"test subsample {size} exceeds the test set ({len(test_idx)}); skipped", stacklevel=2)
            for name in scores:
                cells[name][str(size)] = {"skipped": "subsample larger than test set"}
            continue
        sizes_run.append(size)
        prefix = shuffle[:size]
        y_s, t_s = y_test[prefix], t_test[prefix]
        n_t = int((t_s == 1).sum())
        n_c = int((t_s == 0).sum())
        resolution = min(config.resolution, n_t, n_c)
        size_results: dict[str, MetricResult] = {}
        for name, s in scores.items():
            size_results[name] = auuc_ci(
                s[prefix], y_s, t_s,
                resolution=resolution,
                n_bootstrap=config.n_bootstrap,
                seed=derive_seed(config.seed, 15, size),
            )
            cells[name][str(size)] = size_results[name].to_dict()
        pair_overlap = {}
        names = sorted(size_results)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                pair_overlap[f"{a}|{b}"] = _ci_overlap(size_results[a], size_results[b])
        overlap[str(size)] = pair_overlap

    results = {
        "generator": resolved,
        "n_train": int(len(train_idx)),
        "n_test": int(len(test_idx)),
        "sizes_run": sizes_run,
        "cells": cells,
        "ci_overlap": overlap,
        "tuning": tuning,
    }
    report = EvaluationReport(PROTOCOL_SEPARABILITY, config.to_dict(), results, _environment(config.seed))
    if config.out_dir:
        _write_separability_csv(report, Path(config.out_dir))
    return report


def _write_separability_csv(report: EvaluationReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lines = ["method,size,auuc,ci_low,ci_high"]
    for method, by_size in sorted(report.results["cells"].items()):
        for size, cell in sorted(by_size.items(), key=lambda kv: int(kv[0])):
            if "skipped" in cell:
                continue
            lines.append(f"{method},{size},{cell['value']!r},{cell['ci_low']!r},{cell['ci_high']!r}")
    (out / "separability_curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- effect benchmark -----------------------------------------------------------


def _ite_benchmark_item(args: dict) -> list[dict]:
    """One (surface, realization): generate, split 50/50, tune, fit, score."""
    surface = args["surface"]
    realization = args["realization"]
    seed_r = derive_seed(args["seed"], SURFACE_KINDS.index(surface), realization)
    gen, _ = build_generated(
        {**args["generator"], "mode": "ite", "surface": surface, "seed": seed_r},
        args["n"],
        seed_r,
    )
    t = gen.dataset.treatment
    y = gen.dataset.outcome
    tau = gen.truth.tau
    mask = train_indices_per_stratum(t.astype(np.int64), 0.5, seed=derive_seed(seed_r, 21))
    train_idx = np.flatnonzero(mask)
    test_idx = np.flatnonzero(~mask)
    X = gen.encoded.values

    rows = []
    for method in args["methods"]:
        row = {"surface": surface, "realization": realization, "method": method}
        try:
            grid = args["grids"].get(method) or default_grid(method)
            result = tune(
                method,
                grid,
                X[train_idx],
                y[train_idx],
                t[train_idx],
                k=args["cv_folds"],
                select_by="pehe",
                tau=tau[train_idx],
                seed=derive_seed(seed_r, 22),
            )
            scorer = fit_method(method, X[train_idx], y[train_idx], t[train_idx], result.best_config)
            row["pehe"] = pehe(tau[test_idx], scorer.score(X[test_idx]))
            row["config"] = result.best_config
        except Exception as exc:  # noqa: BLE001 - a method failure must not sink the run
            row["pehe"] = None
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    if args["include_oracle"]:
        rows.append(
            {
                "surface": surface,
                "realization": realization,
                "method": ORACLE,
                "pehe": pehe(tau[test_idx], tau[test_idx]),
            }
        )
    return rows


def run_ite_benchmark(config: ExperimentConfig) -> EvaluationReport:
    """Mean effect-recovery error per (surface, method) over seeded
    realizations; failed cells are recorded, not fatal."""
    methods = list(ITE_METHODS if config.methods is None else config.methods)
    items = [
        {
            "surface": surface,
            "realization": r,
            "seed": config.seed,
            "n": config.n,
            "methods": methods,
            "grids": config.grids,
            "cv_folds": config.cv_folds,
            "include_oracle": config.include_oracle,
            "generator": {k: v for k, v in config.generator.items() if k not in ("mode", "surface", "seed")},
        }
        for surface in config.surfaces
        for r in range(config.n_realizations)
    ]
    rows = [row for batch in _pmap(_ite_benchmark_item, items, config.workers) for row in batch]
    rows.sort(key=lambda r: (r["surface"], r["realization"], r["method"]))

    all_methods = methods + ([ORACLE] if config.include_oracle else [])
    summary: dict[str, dict] = {}
    best: dict[str, str | None] = {}
    for surface in config.surfaces:
        summary[surface] = {}
        for method in all_methods:
            values = [
                r["pehe"]
                for r in rows
                if r["surface"] == surface and r["method"] == method and r["pehe"] is not None
            ]
            missing = config.n_realizations - len(values)
            summary[surface][method] = {
                "mean": float(np.mean(values)) if values else None,
                "std": float(np.std(values)) if values else None,
                "values": values,
                "n_missing": missing,
            }
        complete = {m: s for m, s in summary[surface].items() if s["mean"] is not None and s["n_missing"] == 0}
        best[surface] = min(complete, key=lambda m: complete[m]["mean"]) if complete else None

    results = {"cells": rows, "summary": summary, "best": best}
    report = EvaluationReport(PROTOCOL_ITE_BENCH, config.to_dict(), results, _environment(config.seed))
    if config.out_dir:
        _write_ite_csv(report, Path(config.out_dir))
    return report


def _write_ite_csv(report: EvaluationReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lines = ["surface,realization,method,sqrt_pehe"]
    for row in report.results["cells"]:
        value = "" if row["pehe"] is None else repr(row["pehe"])
        lines.append(f"{row['surface']},{row['realization']},{row['method']},{value}")
    (out / "ite_bench.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- text rendering ---------------------------------------------------------------


def _render_validate(results: dict) -> list[str]:
    ref = results["reference"]
    rows = [
        ["rows", str(results["n"]), str(ref["n"])],
        ["treatment_ratio", f"{results['treatment_ratio']:.4f}", f"{ref['treatment_ratio']:.2f}"],
        ["visit_rate", f"{results['visit_rate']:.4f}", f"{ref['visit_rate']:.4f}"],
        ["conversion_rate", f"{results['conversion_rate']:.4f}", f"{ref['conversion_rate']:.4f}"],
    ]
    lines = _format_table(["statistic", "value", "reference"], rows)
    c = results["constraints"]
    lines.append(
        f"constraints: control_exposed={c['control_exposed']} "
        f"conversion_without_visit={c['conversion_without_visit']}"
    )
    ind = results["treatment_independence"]
    lines.append(
        f"treatment independence: model_loss={ind['treatment_loss']:.5f} "
        f"median_null={ind['median_random_loss']:.5f} p={ind['p_value']:.5f}"
    )
    for outcome, value in results["informativeness_pct"].items():
        shown = f"{value:.2f}%" if isinstance(value, float) else str(value)
        lines.append(f"informativeness[{outcome}]: {shown}")
    return lines


def _render_separability(results: dict) -> list[str]:
    headers = ["method"] + [str(s) for s in results["sizes_run"]]
    rows = []
    for method, by_size in sorted(results["cells"].items()):
        row = [method]
        for size in results["sizes_run"]:
            cell = by_size[str(size)]
            row.append(f"{cell['value']:.5f} [{cell['ci_low']:.5f}, {cell['ci_high']:.5f}]")
        rows.append(row)
    return _format_table(headers, rows)


def _render_ite(results: dict) -> list[str]:
    surfaces = sorted(results["summary"])
    methods = sorted({m for s in surfaces for m in results["summary"][s]})
    headers = ["method"] + surfaces
    rows = []
    for method in methods:
        row = [method]
        for surface in surfaces:
            cell = results["summary"][surface].get(method)
            if not cell or cell["mean"] is None:
                row.append("missing")
                continue
            marker = " *" if results["best"].get(surface) == method else ""
            row.append(f"{cell['mean']:.3f} +- {cell['std']:.3f}{marker}")
        rows.append(row)
    out = _format_table(headers, rows)
    out.append("* best mean error per surface")
    return out


def _render_generate(results: dict) -> list[str]:
    files = results["files"]
    return [f"{kind}: {path}" for kind, path in files.items()] + [
        f"n={results['n']} treatment_ratio={results['treatment_ratio']:.4f}"
    ]


_TEXT_RENDERERS = {
    PROTOCOL_VALIDATE: _render_validate,
    PROTOCOL_SEPARABILITY: _render_separability,
    PROTOCOL_ITE_BENCH: _render_ite,
    PROTOCOL_GENERATE: _render_generate,
}

RUNNERS = {
    PROTOCOL_GENERATE: run_generate,
    PROTOCOL_VALIDATE: run_validate,
    PROTOCOL_SEPARABILITY: run_separability,
    PROTOCOL_ITE_BENCH: run_ite_benchmark,
}


def run(config: ExperimentConfig) -> EvaluationReport:
    report = RUNNERS[config.protocol](config)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_json(out / "report.json")
    return report
