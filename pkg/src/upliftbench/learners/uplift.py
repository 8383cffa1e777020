"""Uplift baselines for randomized-trial data: two-model, class variable
transformation, modified outcome, and shared-representation scorers.
"""

from __future__ import annotations

import numpy as np

from .base import BaseLearnerConfig, LogisticModel, RidgeModel, logistic_fit, ridge_fit, sigmoid
from .scoring import (
    FitError,
    UpliftScorer,
    as_matrix,
    check_arms,
    logistic_from_dict,
    logistic_to_dict,
    ridge_from_dict,
    ridge_to_dict,
)


def _fit_base(X: np.ndarray, y: np.ndarray, config: BaseLearnerConfig, sample_weight=None):
    if config.kind == "ridge":
        return ridge_fit(X, y, config.l2, sample_weight=sample_weight)
    return logistic_fit(
        X,
        y,
        config.l2,
        max_iters=config.max_iters,
        tol=config.tol,
        sample_weight=sample_weight,
    )


def _predict_base(model, X: np.ndarray) -> np.ndarray:
    # Probabilities for classifiers, raw predictions for regressors.
    if isinstance(model, LogisticModel):
        return model.predict_proba(X)
    return model.predict(X)


def _base_to_dict(model) -> dict:
    if isinstance(model, LogisticModel):
        return {"kind": "logistic", **logistic_to_dict(model)}
    return {"kind": "ridge", **ridge_to_dict(model)}


def _base_from_dict(raw: dict):
    raw = dict(raw)
    kind = raw.pop("kind")
    return logistic_from_dict(raw) if kind == "logistic" else ridge_from_dict(raw)


class TwoModelScorer(UpliftScorer):
    """Difference of an outcome model per arm: score = m1(x) - m0(x)."""

    method = "two_model"

    def __init__(self, model_treated, model_control, treatment_ratio: float) -> None:
        self.model_treated = model_treated
        self.model_control = model_control
        self.treatment_ratio = treatment_ratio

    def score(self, X) -> np.ndarray:
        V = as_matrix(X)
        return _predict_base(self.model_treated, V) - _predict_base(self.model_control, V)

    def control_prediction(self, X) -> np.ndarray:
        return _predict_base(self.model_control, as_matrix(X))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "treatment_ratio": self.treatment_ratio,
            "model_treated": _base_to_dict(self.model_treated),
            "model_control": _base_to_dict(self.model_control),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TwoModelScorer":
        return cls(
            _base_from_dict(raw["model_treated"]),
            _base_from_dict(raw["model_control"]),
            float(raw["treatment_ratio"]),
        )


def fit_two_model(
    X,
    y: np.ndarray,
    t: np.ndarray,
    base: BaseLearnerConfig,
    base_control: BaseLearnerConfig | None = None,
) -> TwoModelScorer:
    """Fit one outcome model per arm. ``base_control`` defaults to ``base``."""
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)
    treated = t == 1
    m1 = _fit_base(V[treated], y[treated], base)
    m0 = _fit_base(V[~treated], y[~treated], base_control or base)
    return TwoModelScorer(m1, m0, treatment_ratio=float(treated.mean()))


# The two-model method and the T-learner are one operation with two names.
fit_t_learner = fit_two_model


class CvtScorer(UpliftScorer):
    """Class-variable-transformation scorer: score = 2 g(x) - 1."""

    method = "cvt"

    def __init__(self, model: LogisticModel, treatment_ratio: float, propensity_weighted: bool) -> None:
        self.model = model
        self.treatment_ratio = treatment_ratio
        self.propensity_weighted = propensity_weighted

    def score(self, X) -> np.ndarray:
        return 2.0 * self.model.predict_proba(as_matrix(X)) - 1.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "treatment_ratio": self.treatment_ratio,
            "propensity_weighted": self.propensity_weighted,
            "model": logistic_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CvtScorer":
        return cls(
            logistic_from_dict(raw["model"]),
            float(raw["treatment_ratio"]),
            bool(raw["propensity_weighted"]),
        )


def cvt_labels(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Transformed class label Z = T*Y + (1-T)*(1-Y)."""
    y = np.asarray(y)
    t = np.asarray(t)
    return (t * y + (1 - t) * (1 - y)).astype(np.float64)


def fit_cvt(
    X,
    y: np.ndarray,
    t: np.ndarray,
    config: BaseLearnerConfig | None = None,
    *,
    propensity_weighted: bool = True,
) -> CvtScorer:
    """One classifier on the transformed label.

    The classic transformation assumes a 50/50 trial; under imbalance, rows
    are weighted by 1/(2e) and 1/(2(1-e)) for the treated and control arm so
    the estimand is preserved. ``propensity_weighted=False`` restores the
    unweighted variant.
    """
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("cvt requires a binary outcome")
    config = config or BaseLearnerConfig(kind="logistic", l2=1.0)
    if config.kind != "logistic":
        raise ValueError("cvt uses a logistic base learner")

    z = cvt_labels(y, t)
    e_hat = float(t.mean())
    weights = None
    if propensity_weighted:
        weights = np.where(t == 1, 1.0 / (2.0 * e_hat), 1.0 / (2.0 * (1.0 - e_hat)))
    model = logistic_fit(
        V, z, config.l2, max_iters=config.max_iters, tol=config.tol, sample_weight=weights
    )
    return CvtScorer(model, e_hat, propensity_weighted)


class MomScorer(UpliftScorer):
    """Ridge regression on the inverse-propensity transformed outcome."""

    method = "mom"

    def __init__(self, model: RidgeModel, treatment_ratio: float) -> None:
        self.model = model
        self.treatment_ratio = treatment_ratio

    def score(self, X) -> np.ndarray:
        return self.model.predict(as_matrix(X))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "treatment_ratio": self.treatment_ratio,
            "model": ridge_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MomScorer":
        return cls(ridge_from_dict(raw["model"]), float(raw["treatment_ratio"]))


def mom_transform(y: np.ndarray, t: np.ndarray, e_hat: float | None = None) -> np.ndarray:
    """Transformed outcome Y* = Y*T/e - Y*(1-T)/(1-e).

    With the empirical treatment ratio as ``e_hat``, the mean of Y* equals
    the difference-in-means effect estimate exactly.
    """
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if e_hat is None:
        e_hat = float(t.mean())
    if not 0.0 < e_hat < 1.0:
        raise FitError("treatment ratio must be strictly inside (0, 1)")
    return y * t / e_hat - y * (1.0 - t) / (1.0 - e_hat)


def fit_mom(X, y: np.ndarray, t: np.ndarray, l2: float) -> MomScorer:
    V = as_matrix(X)
    t = check_arms(t)
    y_star = mom_transform(y, t)
    return MomScorer(ridge_fit(V, y_star, l2), treatment_ratio=float(np.mean(t == 1)))


class SdrScorer(UpliftScorer):
    """Single logistic model on the treatment-augmented design [x; t*x; t].

    The treatment-interaction block's l2 penalty is scaled by 1/lambda, so a
    larger lambda leaves the interaction freer to express heterogeneity.
    Scores are probability differences between the treated and control
    version of the same row.
    """

    method = "sdr"

    def __init__(self, model: LogisticModel, interaction_penalty: float, treatment_ratio: float) -> None:
        self.model = model
        self.interaction_penalty = interaction_penalty
        self.treatment_ratio = treatment_ratio

    def score(self, X) -> np.ndarray:
        V = as_matrix(X)
        d = V.shape[1]
        w = self.model.weights
        base_logit = V @ w[:d] + self.model.intercept
        treated_logit = base_logit + V @ w[d : 2 * d] + w[2 * d]
        return sigmoid(treated_logit) - sigmoid(base_logit)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "interaction_penalty": self.interaction_penalty,
            "treatment_ratio": self.treatment_ratio,
            "model": logistic_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SdrScorer":
        return cls(
            logistic_from_dict(raw["model"]),
            float(raw["interaction_penalty"]),
            float(raw["treatment_ratio"]),
        )


def fit_sdr(
    X,
    y: np.ndarray,
    t: np.ndarray,
    config: BaseLearnerConfig | None = None,
    *,
    interaction_penalty: float = 1.0,
) -> SdrScorer:
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("sdr requires a binary outcome")
    if interaction_penalty <= 0:
        raise ValueError("interaction_penalty must be > 0")
    config = config or BaseLearnerConfig(kind="logistic", l2=1.0)
    if config.kind != "logistic":
        raise ValueError("sdr uses a logistic base learner")

    d = V.shape[1]
    tf = t.astype(np.float64)
    augmented = np.hstack([V, V * tf[:, None], tf[:, None]])
    penalty_scale = np.concatenate([np.ones(d), np.full(d + 1, 1.0 / interaction_penalty)])
    model = logistic_fit(
        augmented,
        y,
        config.l2,
        max_iters=config.max_iters,
        tol=config.tol,
        penalty_scale=penalty_scale,
    )
    return SdrScorer(model, interaction_penalty, treatment_ratio=float(tf.mean()))
