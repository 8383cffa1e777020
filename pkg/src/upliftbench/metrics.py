"""Evaluation metrics: the separate, relative uplift curve and its area,
bootstrap confidence intervals, effect-recovery error, policy risk and
average-effect estimators.

The uplift curve sorts each arm separately by score (descending, ties broken
by original position) and reports, at each fraction rho, the difference
between the top-rho treated outcome mean and the top-rho control outcome
mean. The area is a rectangle rule on an equispaced grid, which a brute
force direct evaluation can reproduce exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UpliftCurve:
    grid: np.ndarray  # fractions k/K, k = 1..K
    values: np.ndarray
    resolution: int

    def __post_init__(self) -> None:
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if len(self.grid) != self.resolution or len(self.values) != self.resolution:
            raise ValueError("grid and values must have length K")
        if not (np.diff(self.grid) > 0).all() or self.grid[-1] != 1.0:
            raise ValueError("grid must be strictly increasing and end at 1.0")
        self.grid.flags.writeable = False
        self.values.flags.writeable = False


@dataclass(frozen=True)
class MetricResult:
    value: float
    ci_low: float | None = None
    ci_high: float | None = None
    n_bootstrap: int = 0
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_bootstrap": self.n_bootstrap,
            "seed": self.seed,
        }


def _check_arms(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t)
    treated = np.flatnonzero(t == 1)
    control = np.flatnonzero(t == 0)
    if len(treated) == 0 or len(control) == 0:
        raise ValueError("both treatment arms must be nonempty")
    return treated, control


def _sorted_outcomes(scores: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Stable descending sort keeps ties in original-index order.
    order = np.argsort(-scores, kind="stable")
    return y[order]


def uplift_curve(
    scores: np.ndarray, y: np.ndarray, t: np.ndarray, resolution: int = 100
) -> UpliftCurve:
    """Per-arm top-fraction outcome difference at fractions k/K."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    treated, control = _check_arms(t)
    n_t, n_c = len(treated), len(control)
    if resolution > min(n_t, n_c):
        raise ValueError(f"resolution {resolution} exceeds the smaller arm size {min(n_t, n_c)}")

    cum_t = np.cumsum(_sorted_outcomes(scores[treated], y[treated]))
    cum_c = np.cumsum(_sorted_outcomes(scores[control], y[control]))
    ks = np.arange(1, resolution + 1)
    top_t = -(-ks * n_t // resolution)  # ceil(k * n_t / K) in integers
    top_c = -(-ks * n_c // resolution)
    values = cum_t[top_t - 1] / top_t - cum_c[top_c - 1] / top_c
    return UpliftCurve(grid=ks / resolution, values=values, resolution=resolution)


def auuc(curve: UpliftCurve) -> float:
    """Rectangle-rule area: mean of the curve values."""
    return float(curve.values.mean())


def auuc_score(
    scores: np.ndarray, y: np.ndarray, t: np.ndarray, resolution: int = 100
) -> float:
    return auuc(uplift_curve(scores, y, t, resolution))


def auuc_ci(
    scores: np.ndarray,
    y: np.ndarray,
    t: np.ndarray,
    resolution: int = 100,
    n_bootstrap: int = 1000,
    seed: int = 0,
) -> MetricResult:
    """Percentile bootstrap of the area, resampling within each arm.

    Replicate i draws from an RNG stream keyed by (seed, i), so results do
    not depend on evaluation order or worker count.
    """
    if n_bootstrap < 2:
        raise ValueError("n_bootstrap must be >= 2")
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    treated, control = _check_arms(t)

    point = auuc(uplift_curve(scores, y, t, resolution))
    replicates = np.empty(n_bootstrap)
    redraws = 0
    for i in range(n_bootstrap):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        while True:
            idx_t = treated[rng.integers(0, len(treated), size=len(treated))]
            idx_c = control[rng.integers(0, len(control), size=len(control))]
            if len(idx_t) and len(idx_c):
                break
            redraws += 1  # unreachable under per-arm resampling, kept defensively
            if redraws > n_bootstrap // 2:
                raise RuntimeError("more than half of the bootstrap replicates were redrawn")
        rep_scores = np.concatenate([scores[idx_t], scores[idx_c]])
        rep_y = np.concatenate([y[idx_t], y[idx_c]])
        rep_t = np.concatenate([np.ones(len(idx_t), dtype=np.int8), np.zeros(len(idx_c), dtype=np.int8)])
        replicates[i] = auuc(uplift_curve(rep_scores, rep_y, rep_t, resolution))

    lo, hi = np.percentile(replicates, [2.5, 97.5])
    return MetricResult(
        value=point, ci_low=float(lo), ci_high=float(hi), n_bootstrap=n_bootstrap, seed=seed
    )


def pehe(tau_true: np.ndarray, tau_pred: np.ndarray) -> float:
    """Root mean squared error between true and predicted effects."""
    tau_true = np.asarray(tau_true, dtype=np.float64)
    tau_pred = np.asarray(tau_pred, dtype=np.float64)
    if tau_true.shape != tau_pred.shape or tau_true.size < 1:
        raise ValueError("effect vectors must have equal nonzero length")
    return float(np.sqrt(np.mean((tau_true - tau_pred) ** 2)))


def policy_risk(
    scores: np.ndarray, y: np.ndarray, t: np.ndarray, threshold: float = 0.0
) -> float:
    """Estimated loss of treating exactly the rows scored above threshold.

    Valid on randomized data, where each policy cell can be evaluated on the
    arm that matches it. Empty cells contribute zero with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    _check_arms(t)

    policy = scores > threshold
    p_treat = float(policy.mean())
    gain = 0.0
    cell_treat = policy & (t == 1)
    cell_skip = ~policy & (t == 0)
    if cell_treat.any():
        gain += float(y[cell_treat].mean()) * p_treat
    elif p_treat > 0:
        warnings.warn("no treated rows under policy=1; cell contributes 0", stacklevel=2)
    if cell_skip.any():
        gain += float(y[cell_skip].mean()) * (1.0 - p_treat)
    elif p_treat < 1:
        warnings.warn("no control rows under policy=0; cell contributes 0", stacklevel=2)
    return 1.0 - gain


ATE_DIFF_MEANS = "diff_means"
ATE_IPW = "ipw"


def ate(
    y: np.ndarray,
    t: np.ndarray,
    mode: str = ATE_DIFF_MEANS,
    propensities: np.ndarray | None = None,
) -> float:
    """Average treatment effect by difference in means or inverse weighting."""
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t)
    _check_arms(t)
    if mode == ATE_DIFF_MEANS:
        return float(y[t == 1].mean() - y[t == 0].mean())
    if mode == ATE_IPW:
        if propensities is None:
            raise ValueError("ipw mode needs propensities")
        p = np.asarray(propensities, dtype=np.float64)
        if (p <= 0).any() or (p >= 1).any():
            raise ValueError("propensities must lie strictly inside (0, 1)")
        tf = t.astype(np.float64)
        return float(np.mean(y * tf / p - y * (1.0 - tf) / (1.0 - p)))
    raise ValueError(f"unknown mode {mode!r}")
