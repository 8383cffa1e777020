"""Dataset sanity checks.

Two checks are provided: a classifier two-sample test of treatment
independence (a classifier that predicts the treatment flag from features
better than label-permuted retrains evidences confounding), and the relative
log-loss improvement of a tuned classifier over a constant base-rate
predictor (evidence that the features are informative for an outcome).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import EncodedMatrix
from .learners.base import log_loss, logistic_fit
from .learners.scoring import as_matrix
from .splits import kfold_indices, train_indices_per_stratum


@dataclass(frozen=True, eq=False)
class C2STResult:
    """Permutation-calibrated classifier two-sample test result."""

    model_loss: float
    null_losses: np.ndarray
    p_value: float
    n_permutations: int

    @property
    def median_null_loss(self) -> float:
        return float(np.median(self.null_losses))

    def to_dict(self) -> dict:
        return {
            "median_random_loss": self.median_null_loss,
            "treatment_loss": self.model_loss,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
        }


def _fit_eval_loss(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    y_test: np.ndarray,
    c_grid: tuple[float, ...],
    max_iters: int,
    inner_mask: np.ndarray | None,
) -> float:
    """Train (with optional inner-split C selection) and return test log-loss."""
    if len(c_grid) > 1:
        assert inner_mask is not None
        best_c, best_loss = c_grid[0], np.inf
        for c in c_grid:
            model = logistic_fit(X_train[inner_mask], y_train[inner_mask], 1.0 / c, max_iters=max_iters)
            loss = log_loss(y_train[~inner_mask], model.predict_proba(X_train[~inner_mask]))
            if loss < best_loss:
                best_c, best_loss = c, loss
    else:
        best_c = c_grid[0]
    model = logistic_fit(X_train, y_train, 1.0 / best_c, max_iters=max_iters)
    return log_loss(y_test, model.predict_proba(X_test))


def c2st(
    enc: EncodedMatrix | np.ndarray,
    t: np.ndarray,
    n_permutations: int = 99,
    seed: int = 0,
    c_grid: tuple[float, ...] = (100.0,),
    max_iters: int = 300,
) -> C2STResult:
    """One-sided permutation test of treatment predictability.

    The data is split 50/50 (stratified on the flag); the model loss is the
    held-out log-loss of a classifier trained on the true labels, and each
    null replicate retrains on within-half label permutations. The p-value
    is (1 + #{null <= model}) / (1 + n_permutations), small when the true
    labels are genuinely easier to predict than permuted ones.
    """
    if n_permutations < 19:
        raise ValueError("n_permutations must be >= 19")
    X = as_matrix(enc)
    t = np.asarray(t, dtype=np.float64)
    if not np.isin(t, (0.0, 1.0)).all():
        raise ValueError("treatment flag must be binary")
    if t.min() == t.max():
        raise ValueError("both treatment classes must be present")

    split_seed = int(np.random.SeedSequence([seed, 0]).generate_state(1)[0])
    train_mask = train_indices_per_stratum(t.astype(np.int64), 0.5, seed=split_seed)
    X_train, X_test = X[train_mask], X[~train_mask]
    t_train, t_test = t[train_mask], t[~train_mask]

    inner_mask = None
    if len(c_grid) > 1:
        inner_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        inner_mask = np.zeros(len(t_train), dtype=bool)
        inner_mask[inner_rng.permutation(len(t_train))[: len(t_train) // 2]] = True

    model_loss = _fit_eval_loss(X_train, t_train, X_test, t_test, c_grid, max_iters, inner_mask)

    null_losses = np.empty(n_permutations)
    for i in range(n_permutations):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 2 + i]))
        t_train_perm = t_train[rng.permutation(len(t_train))]
        t_test_perm = t_test[rng.permutation(len(t_test))]
        null_losses[i] = _fit_eval_loss(
            X_train, t_train_perm, X_test, t_test_perm, c_grid, max_iters, inner_mask
        )

    p_value = (1.0 + float((null_losses <= model_loss).sum())) / (1.0 + n_permutations)
    return C2STResult(
        model_loss=float(model_loss),
        null_losses=null_losses,
        p_value=p_value,
        n_permutations=n_permutations,
    )


def relative_improvement(loss_dummy: float, loss_model: float) -> float:
    """Percent log-loss improvement over the dummy; 0 for the dummy itself."""
    if loss_dummy <= 0:
        raise ValueError("dummy loss must be positive")
    return 100.0 * (loss_dummy - loss_model) / loss_dummy


def dummy_improvement(
    enc: EncodedMatrix | np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    c_grid: tuple[float, ...] = (1.0, 100.0, 10000.0),
    max_iters: int = 300,
) -> float:
    """Relative test log-loss improvement of a tuned classifier over the
    train base rate, on an 80/20 stratified split."""
    X = as_matrix(enc)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("outcome must be binary")
    if y.min() == y.max():
        raise ValueError("both outcome classes must be present")

    train_mask = train_indices_per_stratum(
        y.astype(np.int64), 0.8, seed=int(np.random.SeedSequence([seed, 3]).generate_state(1)[0])
    )
    X_train, X_test = X[train_mask], X[~train_mask]
    y_train, y_test = y[train_mask], y[~train_mask]

    base_rate = float(np.clip(y_train.mean(), 1e-12, 1.0 - 1e-12))
    loss_dummy = log_loss(y_test, np.full(len(y_test), base_rate))

    if len(c_grid) > 1:
        folds = kfold_indices(y_train.astype(np.int64), k=5, seed=int(np.random.SeedSequence([seed, 4]).generate_state(1)[0]))
        best_c, best_loss = c_grid[0], np.inf
        for c in c_grid:
            losses = []
            for tr, va in folds:
                model = logistic_fit(X_train[tr], y_train[tr], 1.0 / c, max_iters=max_iters)
                losses.append(log_loss(y_train[va], model.predict_proba(X_train[va])))
            mean = float(np.mean(losses))
            if mean < best_loss:
                best_c, best_loss = c, mean
    else:
        best_c = c_grid[0]
    model = logistic_fit(X_train, y_train, 1.0 / best_c, max_iters=max_iters)
    loss_model = log_loss(y_test, model.predict_proba(X_test))
    return relative_improvement(loss_dummy, loss_model)
