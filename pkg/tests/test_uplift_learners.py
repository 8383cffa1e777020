import numpy as np
import pytest

from upliftbench.learners.base import BaseLearnerConfig, LogisticModel, sigmoid
from upliftbench.learners.scoring import FitError
from upliftbench.learners.uplift import (
    CvtScorer,
    SdrScorer,
    cvt_labels,
    fit_cvt,
    fit_mom,
    fit_sdr,
    fit_t_learner,
    fit_two_model,
    mom_transform,
)
from upliftbench.metrics import ate
from upliftbench.synthgen import sample_binary_outcomes

RIDGE = BaseLearnerConfig(kind="ridge", l2=1e-8)
LOGISTIC = BaseLearnerConfig(kind="logistic", l2=1e-2)


def _linear_data(rng, n=400, d=5, effect=4.0, noise=0.0):
    X = rng.normal(size=(n, d))
    beta = rng.normal(size=d)
    t = (rng.random(n) < 0.5).astype(np.int8)
    y = X @ beta + effect * t + noise * rng.normal(size=n)
    return X, y, t


def test_two_model_recovers_constant_effect(rng):
    X, y, t = _linear_data(rng)
    scorer = fit_two_model(X, y, t, RIDGE)
    np.testing.assert_allclose(scorer.score(X), 4.0, atol=1e-6)


def test_two_model_and_t_learner_are_one_operation(rng):
    X, y, t = _linear_data(rng, noise=1.0)
    a = fit_two_model(X, y, t, RIDGE)
    b = fit_t_learner(X, y, t, RIDGE)
    np.testing.assert_array_equal(a.score(X), b.score(X))


def test_two_model_control_component(rng):
    X, y, t = _linear_data(rng, noise=0.5)
    scorer = fit_two_model(X, y, t, RIDGE)
    np.testing.assert_array_equal(
        scorer.control_prediction(X), scorer.model_control.predict(X)
    )


def test_two_model_empty_arm_errors(rng):
    X, y, _ = _linear_data(rng)
    with pytest.raises(FitError, match="arm"):
        fit_two_model(X, y, np.ones(len(y), dtype=np.int8), RIDGE)


def test_cvt_label_transform():
    y = np.array([1.0, 1.0, 0.0, 0.0])
    t = np.array([1, 0, 1, 0])
    np.testing.assert_array_equal(cvt_labels(y, t), [1.0, 0.0, 0.0, 1.0])


def test_cvt_score_from_probability():
    model = LogisticModel(weights=np.zeros(2), intercept=float(np.log(3.0)), converged=True)
    scorer = CvtScorer(model, treatment_ratio=0.5, propensity_weighted=False)
    # g(x) = sigmoid(log 3) = 0.75 everywhere, score = 2 * 0.75 - 1.
    np.testing.assert_allclose(scorer.score(np.zeros((3, 2))), 0.5, atol=1e-12)


def test_cvt_no_effect_scores_near_zero():
    rng = np.random.default_rng(0)
    n = 40_000
    X = rng.normal(size=(n, 3))
    t = (rng.random(n) < 0.5).astype(np.int8)
    y = (rng.random(n) < 0.4).astype(float)  # independent of both t and X
    scorer = fit_cvt(X, y, t, BaseLearnerConfig(kind="logistic", l2=1.0))
    assert np.abs(scorer.score(X)).max() < 0.05


def test_cvt_requires_binary_outcome(rng):
    X, y, t = _linear_data(rng)
    with pytest.raises(ValueError, match="binary"):
        fit_cvt(X, y, t, LOGISTIC)


def test_cvt_weighted_handles_imbalance():
    rng = np.random.default_rng(4)
    n = 60_000
    X = rng.normal(size=(n, 2))
    t = (rng.random(n) < 0.85).astype(np.int8)
    uplift = sigmoid(X[:, 0]) * 0.2
    base = 0.3
    y = (rng.random(n) < base + uplift * t).astype(float)
    scorer = fit_cvt(X, y, t, BaseLearnerConfig(kind="logistic", l2=1.0))
    scores = scorer.score(X)
    # Positive effect overall, increasing in the driving feature.
    assert np.corrcoef(scores, X[:, 0])[0, 1] > 0.5


def test_mom_transform_values():
    assert mom_transform(np.array([1.0]), np.array([1.0]), 0.5)[0] == pytest.approx(2.0)
    assert mom_transform(np.array([1.0]), np.array([0.0]), 0.5)[0] == pytest.approx(-2.0)
    val = mom_transform(np.array([1.0]), np.array([0.0]), 0.85)[0]
    assert val == pytest.approx(-1.0 / 0.15)
    assert val == pytest.approx(-6.6667, abs=5e-5)


@pytest.mark.parametrize("ratio", [0.5, 0.85, 0.3])
def test_mom_mean_equals_diff_in_means(ratio):
    rng = np.random.default_rng(int(ratio * 100))
    for trial in range(5):
        n = int(rng.integers(50, 500))
        t = (rng.random(n) < ratio).astype(np.int8)
        if t.min() == t.max():
            continue
        y = rng.normal(size=n)
        assert float(mom_transform(y, t).mean()) == pytest.approx(ate(y, t), abs=1e-10)


def test_mom_fit_scores_linear_effect(rng):
    X, y, t = _linear_data(rng, n=5000, noise=0.1)
    scorer = fit_mom(X, y, t, l2=1e-4)
    assert scorer.score(X).mean() == pytest.approx(4.0, abs=0.2)


def test_mom_degenerate_ratio_errors():
    with pytest.raises(FitError):
        mom_transform(np.ones(3), np.ones(3))


def test_sdr_score_formula_with_zero_interactions():
    d = 3
    w = np.concatenate([np.array([0.5, -0.2, 0.1]), np.zeros(d), [0.8]])
    model = LogisticModel(weights=w, intercept=-0.3, converged=True)
    scorer = SdrScorer(model, interaction_penalty=1.0, treatment_ratio=0.5)
    X = np.random.default_rng(0).normal(size=(20, d))
    base = X @ w[:d] - 0.3
    expected = sigmoid(base + 0.8) - sigmoid(base)
    np.testing.assert_allclose(scorer.score(X), expected, atol=1e-12)


def test_sdr_tiny_lambda_kills_interactions():
    rng = np.random.default_rng(1)
    n = 5000
    X = rng.normal(size=(n, 4))
    t = (rng.random(n) < 0.5).astype(np.int8)
    rate = sigmoid(X[:, 0] + (1.0 + X[:, 1]) * t * 0.5)
    y = (rng.random(n) < rate).astype(float)
    free = fit_sdr(X, y, t, BaseLearnerConfig(kind="logistic", l2=1.0), interaction_penalty=1.0)
    pinned = fit_sdr(X, y, t, BaseLearnerConfig(kind="logistic", l2=1.0), interaction_penalty=1e-10)
    d = 4
    assert np.abs(pinned.model.weights[d : 2 * d + 1]).max() < 1e-4
    assert np.abs(free.model.weights[d : 2 * d + 1]).max() > 0.05
    # With the interaction block pinned to zero the score spread collapses.
    assert pinned.score(X).std() < free.score(X).std()


def test_sdr_sign_agreement_on_binary_constant_shift():
    rng = np.random.default_rng(2)
    n = 20_000
    X = rng.normal(size=(n, 6))
    t = (rng.random(n) < 0.5).astype(np.int8)
    rate0 = np.clip(0.15 + 0.08 * X[:, 0], 0.01, 0.5)
    rate1 = np.clip(rate0 + 0.25, 0.0, 1.0)
    y, truth = sample_binary_outcomes(rate0, rate1, t, seed=3, propensities=np.full(n, 0.5))
    scorer = fit_sdr(X, y.astype(float), t, BaseLearnerConfig(kind="logistic", l2=1e-2))
    agreement = float((np.sign(scorer.score(X)) == np.sign(truth.tau)).mean())
    assert agreement >= 0.9


def test_sdr_requires_binary_and_positive_lambda(rng):
    X, y, t = _linear_data(rng)
    with pytest.raises(ValueError, match="binary"):
        fit_sdr(X, y, t, LOGISTIC)
    with pytest.raises(ValueError, match="interaction_penalty"):
        fit_sdr(X, (y > 0).astype(float), t, LOGISTIC, interaction_penalty=0.0)
