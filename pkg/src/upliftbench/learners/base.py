"""Self-contained base learners: closed-form ridge regression and logistic
regression trained by deterministic full-batch gradient descent with
backtracking line search. No stochastic elements, so refits are bit-for-bit
reproducible.

Regularization conventions match the usual ones: ridge minimizes
``sum((y - Xw - b)^2) + l2 * ||w||^2`` and logistic minimizes
``mean log-loss + (l2 / (2n)) * ||w||^2`` where ``l2 = 1/C``. Intercepts are
never penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BaseLearnerConfig:
    """Configuration for one base learner."""

    kind: str = "ridge"  # "ridge" | "logistic"
    l2: float = 1e-2
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("ridge", "logistic"):
            raise ValueError(f"unknown base learner kind {self.kind!r}")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "l2": self.l2,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "BaseLearnerConfig":
        return cls(**raw)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y: np.ndarray, p: np.ndarray, eps: float = 1e-15) -> float:
    """Mean binary cross-entropy with probability clipping."""
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    converged: bool

    def logits(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(X))


def ridge_fit(
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
    *,
    fit_intercept: bool = True,
    sample_weight: np.ndarray | None = None,
) -> RidgeModel:
    """Closed-form ridge via the normal equations with a symmetric solve.

    The intercept is handled by weighted centering, so it is unpenalized.
    A singular system (only possible at l2=0) raises with advice to use
    l2 > 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(y) != X.shape[0] or X.shape[0] < 1:
        raise ValueError("X must be (n, d) with matching y, n >= 1")
    if l2 < 0:
        raise ValueError("l2 must be >= 0")

    if sample_weight is None:
        sw = None
        if fit_intercept:
            x_mean = X.mean(axis=0)
            y_mean = float(y.mean())
    else:
        sw = np.asarray(sample_weight, dtype=np.float64)
        total = sw.sum()
        if total <= 0:
            raise ValueError("sample weights must have positive total")
        if fit_intercept:
            x_mean = sw @ X / total
            y_mean = float(sw @ y / total)

    if fit_intercept:
        Xc = X - x_mean
        yc = y - y_mean
    else:
        Xc, yc = X, y

    if sw is None:
        A = Xc.T @ Xc
        rhs = Xc.T @ yc
    else:
        Xw = Xc * sw[:, None]
        A = Xc.T @ Xw
        rhs = Xw.T @ yc
    A[np.diag_indices_from(A)] += l2

    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError(
            "normal equations are singular; use l2 > 0 for a unique solution"
        ) from None
    w = np.linalg.solve(A, rhs)

    b = y_mean - float(x_mean @ w) if fit_intercept else 0.0
    w.flags.writeable = False
    return RidgeModel(weights=w, intercept=b)


def logistic_objective(
    w: np.ndarray,
    b: float,
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
    sample_weight: np.ndarray | None = None,
    penalty_scale: np.ndarray | None = None,
) -> tuple[float, np.ndarray, float]:
    """Objective value and gradient of the regularized mean log-loss.

    ``penalty_scale`` optionally reweights the l2 penalty per coefficient
    (used for treatment-interaction blocks).
    """
    n = X.shape[0]
    z = X @ w + b
    p = sigmoid(z)
    losses = np.logaddexp(0.0, z) - y * z
    scale = 1.0 if penalty_scale is None else penalty_scale
    if sample_weight is None:
        f = float(losses.mean())
        delta = (p - y) / n
    else:
        f = float(sample_weight @ losses) / n
        delta = sample_weight * (p - y) / n
    f += 0.5 * l2 / n * float(np.sum(scale * w * w))
    grad_w = X.T @ delta + (l2 / n) * (scale * w)
    grad_b = float(delta.sum())
    return f, grad_w, grad_b


def logistic_fit(
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
    max_iters: int = 500,
    tol: float = 1e-6,
    *,
    sample_weight: np.ndarray | None = None,
    penalty_scale: np.ndarray | None = None,
) -> LogisticModel:
    """Full-batch gradient descent with Armijo backtracking.

    Converged when the gradient infinity-norm (weights and intercept) drops
    below ``tol``; otherwise stops at ``max_iters`` with the flag unset.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logistic_fit requires binary labels in {0, 1}")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0

    step = 1.0
    converged = False
    armijo = 1e-4
    scale = 1.0 if penalty_scale is None else penalty_scale
    sw = sample_weight
    z = np.zeros(n)

    def value(z_at: np.ndarray, w_at: np.ndarray) -> float:
        losses = np.logaddexp(0.0, z_at) - y * z_at
        val = float(losses.mean()) if sw is None else float(sw @ losses) / n
        return val + 0.5 * l2 / n * float(np.sum(scale * w_at * w_at))

    f = value(z, w)
    for it in range(max_iters + 1):
        p = sigmoid(z)
        delta = (p - y) / n if sw is None else sw * (p - y) / n
        grad_w = X.T @ delta + (l2 / n) * (scale * w)
        grad_b = float(delta.sum())
        if max(float(np.abs(grad_w).max(initial=0.0)), abs(grad_b)) < tol:
            converged = True
            break
        if it == max_iters:
            break
        # One matvec covers every backtracking trial along -gradient.
        Xg = X @ grad_w
        g_sq = float(grad_w @ grad_w) + grad_b * grad_b
        step = min(step * 2.0, 1e8)
        accepted = False
        while step > 1e-20:
            z_new = z - step * (Xg + grad_b)
            w_new = w - step * grad_w
            f_new = value(z_new, w_new)
            if f_new <= f - armijo * step * g_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w = w_new
        b = b - step * grad_b
        z = z_new
        f = f_new

    w = w.copy()
    w.flags.writeable = False
    return LogisticModel(weights=w, intercept=float(b), converged=converged)
