"""Common scorer interface shared by every uplift / effect learner."""

from __future__ import annotations

import numpy as np

from ..encoding import EncodedMatrix
from .base import LogisticModel, RidgeModel

# Positivity floor applied to any estimated propensity used in a denominator.
PROPENSITY_CLIP = (0.01, 0.99)


class FitError(RuntimeError):
    """A learner could not be fitted on the given data."""


def as_matrix(X) -> np.ndarray:
    """Accept either an EncodedMatrix or a raw (n, d) array."""
    if isinstance(X, EncodedMatrix):
        return X.values
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d design matrix")
    return arr


def check_arms(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)
    if not np.isin(t, (0, 1)).all():
        raise ValueError("treatment must be binary")
    if not (t == 1).any() or not (t == 0).any():
        raise FitError("both treatment arms must be nonempty")
    return t.astype(np.int8)


class UpliftScorer:
    """A fitted model exposing ``score(x)`` as the predicted uplift / effect.

    Scores are deterministic pure functions of the fitted state, so any two
    loads of the same serialized scorer agree bit-for-bit.
    """

    method: str = "?"

    def score(self, X) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def ridge_to_dict(model: RidgeModel) -> dict:
    return {"weights": model.weights.tolist(), "intercept": model.intercept}


def ridge_from_dict(raw: dict) -> RidgeModel:
    w = np.asarray(raw["weights"], dtype=np.float64)
    w.flags.writeable = False
    return RidgeModel(weights=w, intercept=float(raw["intercept"]))


def logistic_to_dict(model: LogisticModel) -> dict:
    return {
        "weights": model.weights.tolist(),
        "intercept": model.intercept,
        "converged": model.converged,
    }


def logistic_from_dict(raw: dict) -> LogisticModel:
    w = np.asarray(raw["weights"], dtype=np.float64)
    w.flags.writeable = False
    return LogisticModel(weights=w, intercept=float(raw["intercept"]), converged=bool(raw["converged"]))
