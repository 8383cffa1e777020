"""Meta-learners for treatment-effect regression: X-, R- and DR-learner.

The T-learner lives in :mod:`.uplift` as ``fit_t_learner`` (it is the
two-model method under another name). R- and DR-learner estimate nuisance
models with 2-fold cross-fitting so the effect regression never reuses rows
its nuisances were trained on. Every estimated propensity that ends up in a
denominator is clipped to [0.01, 0.99].
"""

from __future__ import annotations

import numpy as np

from .base import BaseLearnerConfig, LogisticModel, RidgeModel, logistic_fit, ridge_fit
from .scoring import (
    PROPENSITY_CLIP,
    FitError,
    UpliftScorer,
    as_matrix,
    check_arms,
    logistic_from_dict,
    logistic_to_dict,
    ridge_from_dict,
    ridge_to_dict,
)
from .uplift import fit_t_learner, fit_two_model  # re-exported for symmetry  # noqa: F401

DEFAULT_RIDGE = BaseLearnerConfig(kind="ridge", l2=1e-2)
DEFAULT_PROPENSITY = BaseLearnerConfig(kind="logistic", l2=1e-2)


def _fit_ridge(X, y, config: BaseLearnerConfig, sample_weight=None) -> RidgeModel:
    if config.kind != "ridge":
        raise ValueError("outcome/effect stages use ridge base learners")
    return ridge_fit(X, y, config.l2, sample_weight=sample_weight)


def _fit_propensity(X, t, config: BaseLearnerConfig) -> LogisticModel:
    if config.kind != "logistic":
        raise ValueError("propensity stage uses a logistic base learner")
    return logistic_fit(X, t.astype(np.float64), config.l2, max_iters=config.max_iters, tol=config.tol)


def _crossfit_folds(t: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Treatment-stratified fold ids so every fold sees both arms."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    fold_of = np.empty(len(t), dtype=np.int64)
    for arm in (0, 1):
        members = np.flatnonzero(t == arm)
        if len(members) < n_folds:
            raise FitError(f"arm {arm} has {len(members)} rows; need >= {n_folds} for cross-fitting")
        shuffled = members[rng.permutation(len(members))]
        fold_of[shuffled] = np.arange(len(members)) % n_folds
    return fold_of


class XLearnerScorer(UpliftScorer):
    """Imputed-effect learner: per-arm outcome models, per-arm effect models,
    blended by a propensity gate g: score = g * tau0 + (1 - g) * tau1."""

    method = "x_learner"

    def __init__(self, mu0, mu1, tau0, tau1, gate_model, gate_constant) -> None:
        self.mu0 = mu0
        self.mu1 = mu1
        self.tau0 = tau0
        self.tau1 = tau1
        self.gate_model = gate_model
        self.gate_constant = gate_constant

    def gate(self, V: np.ndarray) -> np.ndarray:
        if self.gate_model is not None:
            return np.clip(self.gate_model.predict_proba(V), *PROPENSITY_CLIP)
        # Explicit constants are taken at face value; they are not denominators.
        return np.full(V.shape[0], self.gate_constant)

    def score(self, X) -> np.ndarray:
        V = as_matrix(X)
        g = self.gate(V)
        return g * self.tau0.predict(V) + (1.0 - g) * self.tau1.predict(V)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mu0": ridge_to_dict(self.mu0),
            "mu1": ridge_to_dict(self.mu1),
            "tau0": ridge_to_dict(self.tau0),
            "tau1": ridge_to_dict(self.tau1),
            "gate_model": None if self.gate_model is None else logistic_to_dict(self.gate_model),
            "gate_constant": self.gate_constant,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "XLearnerScorer":
        return cls(
            ridge_from_dict(raw["mu0"]),
            ridge_from_dict(raw["mu1"]),
            ridge_from_dict(raw["tau0"]),
            ridge_from_dict(raw["tau1"]),
            None if raw["gate_model"] is None else logistic_from_dict(raw["gate_model"]),
            None if raw["gate_constant"] is None else float(raw["gate_constant"]),
        )


def fit_x_learner(
    X,
    y: np.ndarray,
    t: np.ndarray,
    outcome: BaseLearnerConfig = DEFAULT_RIDGE,
    effect: BaseLearnerConfig = DEFAULT_RIDGE,
    propensity: BaseLearnerConfig | float = DEFAULT_PROPENSITY,
) -> XLearnerScorer:
    """Two-stage imputation learner.

    Stage 1 fits mu0/mu1 per arm; stage 2 regresses the imputed effects
    D1 = y - mu0(x) on treated rows and D0 = mu1(x) - y on control rows.
    ``propensity`` is either a logistic config for a fitted gate or an
    explicit constant (e.g. the known trial ratio).
    """
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)
    treated = t == 1

    mu1 = _fit_ridge(V[treated], y[treated], outcome)
    mu0 = _fit_ridge(V[~treated], y[~treated], outcome)
    d1 = y[treated] - mu0.predict(V[treated])
    d0 = mu1.predict(V[~treated]) - y[~treated]
    tau1 = _fit_ridge(V[treated], d1, effect)
    tau0 = _fit_ridge(V[~treated], d0, effect)

    if isinstance(propensity, BaseLearnerConfig):
        gate_model: LogisticModel | None = _fit_propensity(V, t, propensity)
        gate_constant = None
    else:
        gate_model = None
        gate_constant = float(propensity)
    return XLearnerScorer(mu0, mu1, tau0, tau1, gate_model, gate_constant)


class RidgeEffectScorer(UpliftScorer):
    """A single ridge model over pseudo-outcomes (R- and DR-learner)."""

    def __init__(self, model: RidgeModel, method: str) -> None:
        self.model = model
        self.method = method

    def score(self, X) -> np.ndarray:
        return self.model.predict(as_matrix(X))

    def to_dict(self) -> dict:
        return {"method": self.method, "model": ridge_to_dict(self.model)}

    @classmethod
    def from_dict(cls, raw: dict) -> "RidgeEffectScorer":
        return cls(ridge_from_dict(raw["model"]), raw["method"])


def fit_r_learner(
    X,
    y: np.ndarray,
    t: np.ndarray,
    outcome: BaseLearnerConfig = DEFAULT_RIDGE,
    propensity: BaseLearnerConfig = DEFAULT_PROPENSITY,
    effect: BaseLearnerConfig = DEFAULT_RIDGE,
    n_folds: int = 2,
    seed: int = 0,
) -> RidgeEffectScorer:
    """Residual-on-residual effect regression.

    Cross-fitted nuisances m(x) ~ E[y|x] and e(x) = P(T=1|x); the effect
    model is a weighted ridge on (y - m) / (t - e) with weights (t - e)^2.
    Rows where t and e coincide to numerical precision carry zero weight and
    are dropped.
    """
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)

    fold_of = _crossfit_folds(t, n_folds, seed)
    m_hat = np.empty(len(y))
    e_hat = np.empty(len(y))
    for fold in range(n_folds):
        held = fold_of == fold
        rest = ~held
        m_hat[held] = _fit_ridge(V[rest], y[rest], outcome).predict(V[held])
        prop = _fit_propensity(V[rest], t[rest], propensity)
        e_hat[held] = np.clip(prop.predict_proba(V[held]), *PROPENSITY_CLIP)

    resid_t = t.astype(np.float64) - e_hat
    weights = resid_t**2
    usable = weights > 1e-12
    if not usable.any():
        raise FitError("no identification: every residualized treatment weight is ~0")
    pseudo = (y[usable] - m_hat[usable]) / resid_t[usable]
    model = _fit_ridge(V[usable], pseudo, effect, sample_weight=weights[usable])
    return RidgeEffectScorer(model, "r_learner")


def fit_dr_learner(
    X,
    y: np.ndarray,
    t: np.ndarray,
    outcome: BaseLearnerConfig = DEFAULT_RIDGE,
    propensity: BaseLearnerConfig = DEFAULT_PROPENSITY,
    effect: BaseLearnerConfig = DEFAULT_RIDGE,
    n_folds: int = 2,
    seed: int = 0,
) -> RidgeEffectScorer:
    """Doubly robust pseudo-outcome regression.

    phi = mu1 - mu0 + t (y - mu1) / e - (1 - t)(y - mu0) / (1 - e), with all
    nuisances cross-fitted, then a plain ridge of phi on x.
    """
    V = as_matrix(X)
    t = check_arms(t)
    y = np.asarray(y, dtype=np.float64)

    fold_of = _crossfit_folds(t, n_folds, seed)
    mu0_hat = np.empty(len(y))
    mu1_hat = np.empty(len(y))
    e_hat = np.empty(len(y))
    for fold in range(n_folds):
        held = fold_of == fold
        rest = ~held
        rest_treated = rest & (t == 1)
        rest_control = rest & (t == 0)
        if not rest_treated.any() or not rest_control.any():
            raise FitError(f"cross-fitting fold {fold}: an arm is empty")
        mu1_hat[held] = _fit_ridge(V[rest_treated], y[rest_treated], outcome).predict(V[held])
        mu0_hat[held] = _fit_ridge(V[rest_control], y[rest_control], outcome).predict(V[held])
        prop = _fit_propensity(V[rest], t[rest], propensity)
        e_hat[held] = np.clip(prop.predict_proba(V[held]), *PROPENSITY_CLIP)

    phi = dr_pseudo_outcome(y, t, mu0_hat, mu1_hat, e_hat)
    model = _fit_ridge(V, phi, effect)
    return RidgeEffectScorer(model, "dr_learner")


def dr_pseudo_outcome(
    y: np.ndarray,
    t: np.ndarray,
    mu0: np.ndarray,
    mu1: np.ndarray,
    e: np.ndarray,
) -> np.ndarray:
    """Doubly robust transformed outcome; E[phi | x] = tau(x) at the truth."""
    y = np.asarray(y, dtype=np.float64)
    tf = np.asarray(t, dtype=np.float64)
    e = np.clip(np.asarray(e, dtype=np.float64), *PROPENSITY_CLIP)
    return mu1 - mu0 + tf * (y - mu1) / e - (1.0 - tf) * (y - mu0) / (1.0 - e)
