"""Grid-search tuning over stratified k-fold cross-validation.

Uplift methods select the configuration with the best mean validation AUUC;
effect methods on synthetic data select by validation effect-recovery error
against the known ground truth. Exact ties go to the stronger
regularization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..metrics import auuc_score, pehe
from ..splits import kfold_indices
from .base import BaseLearnerConfig
from .meta import fit_dr_learner, fit_r_learner, fit_x_learner
from .scoring import UpliftScorer, as_matrix
from .uplift import fit_cvt, fit_mom, fit_sdr, fit_two_model

METHOD_TWO_MODEL = "two_model"
METHOD_CVT = "cvt"
METHOD_MOM = "mom"
METHOD_SDR = "sdr"
METHOD_T_LEARNER = "t_learner"
METHOD_X_LEARNER = "x_learner"
METHOD_R_LEARNER = "r_learner"
METHOD_DR_LEARNER = "dr_learner"

UM_METHODS = (METHOD_TWO_MODEL, METHOD_CVT, METHOD_MOM, METHOD_SDR)
ITE_METHODS = (METHOD_T_LEARNER, METHOD_X_LEARNER, METHOD_R_LEARNER, METHOD_DR_LEARNER)

SELECT_AUUC = "auuc"
SELECT_PEHE = "pehe"

# Grids from the published uplift-model tuning setup.
LOGISTIC_C_GRID = (1e0, 1e2, 1e4, 1e6, 1e8)
RIDGE_ALPHA_GRID = (1e-8, 1e-6, 1e-4, 1e-2, 1e0)
SDR_C_GRID = (1.0, 10.0, 100.0, 1000.0)
SDR_LAMBDA_GRID = (0.1, 1.0)

# The effect-stage regression of the meta-learners targets pseudo-outcomes
# whose variance far exceeds the raw outcome's, so its useful shrinkage range
# extends well past the base ridge grid.
EFFECT_L2_GRID = (1e-8, 1e-4, 1e0, 1e2, 1e4, 1e6)
OUTCOME_L2_GRID = (1e-4, 1e-2)


def default_logistic_grid() -> tuple[float, ...]:
    """Inverse-regularization (C) grid for logistic base learners."""
    return LOGISTIC_C_GRID


def default_ridge_grid() -> tuple[float, ...]:
    """l2 (alpha) grid for ridge base learners."""
    return RIDGE_ALPHA_GRID


def default_grid(method: str) -> list[dict]:
    if method in (METHOD_TWO_MODEL, METHOD_CVT):
        return [{"l2": 1.0 / c} for c in LOGISTIC_C_GRID]
    if method == METHOD_MOM:
        return [{"l2": a} for a in RIDGE_ALPHA_GRID]
    if method == METHOD_SDR:
        return [
            {"l2": 1.0 / c, "interaction_penalty": lam}
            for c in SDR_C_GRID
            for lam in SDR_LAMBDA_GRID
        ]
    if method == METHOD_T_LEARNER:
        return [{"l2": a} for a in RIDGE_ALPHA_GRID]
    if method == METHOD_X_LEARNER:
        return [
            {"outcome_l2": o, "effect_l2": e}
            for o in OUTCOME_L2_GRID
            for e in EFFECT_L2_GRID
        ]
    if method in (METHOD_R_LEARNER, METHOD_DR_LEARNER):
        return [{"outcome_l2": 1e-2, "effect_l2": e} for e in EFFECT_L2_GRID]
    raise ValueError(f"unknown method {method!r}")


def fit_method(method: str, X, y: np.ndarray, t: np.ndarray, config: dict) -> UpliftScorer:
    """Fit any supported method from a flat configuration dict."""
    cfg = dict(config)
    if method == METHOD_TWO_MODEL:
        base = BaseLearnerConfig(kind=cfg.pop("base_kind", "logistic"), l2=cfg.pop("l2"), **cfg)
        return fit_two_model(X, y, t, base)
    if method == METHOD_T_LEARNER:
        base = BaseLearnerConfig(kind=cfg.pop("base_kind", "ridge"), l2=cfg.pop("l2"), **cfg)
        return fit_two_model(X, y, t, base)
    if method == METHOD_CVT:
        weighted = cfg.pop("propensity_weighted", True)
        base = BaseLearnerConfig(kind="logistic", l2=cfg.pop("l2"), **cfg)
        return fit_cvt(X, y, t, base, propensity_weighted=weighted)
    if method == METHOD_MOM:
        return fit_mom(X, y, t, l2=cfg.pop("l2"))
    if method == METHOD_SDR:
        lam = cfg.pop("interaction_penalty", 1.0)
        base = BaseLearnerConfig(kind="logistic", l2=cfg.pop("l2"), **cfg)
        return fit_sdr(X, y, t, base, interaction_penalty=lam)

    outcome = BaseLearnerConfig(kind="ridge", l2=cfg.pop("outcome_l2", 1e-2))
    effect = BaseLearnerConfig(kind="ridge", l2=cfg.pop("effect_l2", 1e-2))
    propensity: BaseLearnerConfig | float = BaseLearnerConfig(
        kind="logistic", l2=cfg.pop("propensity_l2", 1e-2)
    )
    if "propensity_constant" in cfg:
        propensity = float(cfg.pop("propensity_constant"))
    seed = cfg.pop("seed", 0)
    if cfg:
        raise ValueError(f"unused config keys for {method}: {sorted(cfg)}")
    if method == METHOD_X_LEARNER:
        return fit_x_learner(X, y, t, outcome=outcome, effect=effect, propensity=propensity)
    if not isinstance(propensity, BaseLearnerConfig):
        raise ValueError(f"{method} needs a fitted propensity model, not a constant")
    if method == METHOD_R_LEARNER:
        return fit_r_learner(X, y, t, outcome=outcome, propensity=propensity, effect=effect, seed=seed)
    if method == METHOD_DR_LEARNER:
        return fit_dr_learner(X, y, t, outcome=outcome, propensity=propensity, effect=effect, seed=seed)
    raise ValueError(f"unknown method {method!r}")


def _regularization_strength(config: dict) -> float:
    return float(sum(v for k, v in config.items() if k.endswith("l2") and isinstance(v, (int, float))))


@dataclass(frozen=True)
class TuneResult:
    method: str
    best_config: dict
    best_score: float
    select_by: str
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "best_config": self.best_config,
            "best_score": self.best_score,
            "select_by": self.select_by,
            "table": self.table,
        }


def tune(
    method: str,
    grid: list[dict],
    X,
    y: np.ndarray,
    t: np.ndarray,
    k: int = 5,
    select_by: str = SELECT_AUUC,
    tau: np.ndarray | None = None,
    strata: np.ndarray | None = None,
    seed: int = 0,
    resolution: int = 100,
) -> TuneResult:
    """Cross-validated grid search.

    ``select_by="auuc"`` maximizes mean validation AUUC; ``"pehe"`` minimizes
    mean validation effect error and requires ``tau``. Fold stratification
    defaults to the treatment flag; pass ``strata`` for joint treatment and
    outcome strata. A configuration failing on any fold is marked invalid;
    if all fail, an error is raised.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    if select_by == SELECT_PEHE and tau is None:
        raise ValueError("pehe selection needs ground-truth effects")
    V = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    folds = kfold_indices(np.asarray(strata if strata is not None else t, dtype=np.int64), k, seed)

    table = []
    best: tuple[float, float, dict] | None = None  # (score_key, -strength, config)
    for config in grid:
        fold_scores: list[float] = []
        valid = True
        error = None
        for train_idx, val_idx in folds:
            try:
                scorer = fit_method(method, V[train_idx], y[train_idx], t[train_idx], config)
                scores = scorer.score(V[val_idx])
                if select_by == SELECT_AUUC:
                    n_t = int((t[val_idx] == 1).sum())
                    n_c = int((t[val_idx] == 0).sum())
                    res = min(resolution, n_t, n_c)
                    fold_scores.append(auuc_score(scores, y[val_idx], t[val_idx], res))
                else:
                    fold_scores.append(pehe(tau[val_idx], scores))
            except Exception as exc:  # noqa: BLE001 - any fold failure invalidates the config
                valid = False
                error = f"{type(exc).__name__}: {exc}"
                break
        mean_score = float(np.mean(fold_scores)) if valid else None
        table.append(
            {
                "config": dict(config),
                "mean_score": mean_score,
                "fold_scores": fold_scores if valid else None,
                "valid": valid,
                "error": error,
            }
        )
        if not valid:
            continue
        key = -mean_score if select_by == SELECT_AUUC else mean_score
        strength = _regularization_strength(config)
        if best is None or (key, -strength) < (best[0], best[1]):
            best = (key, -strength, dict(config))

    if best is None:
        raise RuntimeError(f"every configuration in the {method} grid failed")
    best_score = -best[0] if select_by == SELECT_AUUC else best[0]
    return TuneResult(method=method, best_config=best[2], best_score=float(best_score), select_by=select_by, table=table)
