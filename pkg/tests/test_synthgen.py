import dataclasses

import numpy as np
import pytest
from scipy.optimize import brentq

from upliftbench.data import validate_constraints
from upliftbench.encoding import EncodedMatrix, encode
from upliftbench.synthgen import (
    ASSIGN_CONFOUNDED,
    ASSIGN_RCT,
    CARDINALITIES,
    SURFACE_EXPONENTIAL,
    SURFACE_LINEAR,
    SURFACE_MULTI_PEAKED,
    AssignmentSpec,
    CalibrationError,
    GroundTruthBundle,
    SurfaceOverflowError,
    SurfaceSpec,
    assign_treatment,
    calibrate,
    eval_surface,
    gen_covariates,
    generate_ite_dataset,
    generate_um_dataset,
    sample_binary_outcomes,
    sample_exponential_surface,
    sample_linear_surface,
    sample_outcomes,
    select_alpha_index,
)


def _plain_matrix(X):
    return EncodedMatrix(np.asarray(X, dtype=float), tuple(f"c{i}" for i in range(np.asarray(X).shape[1])))


# -- covariates ---------------------------------------------------------------


def test_covariates_single_row_within_bounds():
    d = gen_covariates(1, seed=0)
    assert d.n == 1
    for j, cardinality in enumerate(CARDINALITIES):
        assert 0 <= d.categorical[0, j] < cardinality


def test_covariates_deterministic():
    a = gen_covariates(500, seed=11)
    b = gen_covariates(500, seed=11)
    np.testing.assert_array_equal(a.continuous, b.continuous)
    np.testing.assert_array_equal(a.categorical, b.categorical)
    c = gen_covariates(500, seed=12)
    assert (a.categorical != c.categorical).any()


def test_covariates_zipf_head_is_mode():
    d = gen_covariates(100_000, seed=1)
    for j in range(8):
        counts = np.bincount(d.categorical[:, j])
        assert int(np.argmax(counts)) == 0


def test_covariates_pairwise_correlation():
    d = gen_covariates(100_000, seed=2)
    corr = np.corrcoef(d.continuous.T)
    off_diag = corr[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off_diag, 0.2, atol=0.02)


def test_covariates_validation():
    with pytest.raises(ValueError):
        gen_covariates(0, seed=0)


# -- assignment ---------------------------------------------------------------


def test_assignment_sigmoid_values():
    X = _plain_matrix(np.array([[0.0], [np.log(3.0)], [50.0]]))
    spec = AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=0.01, alpha_index=0, seed=0)
    _, p = assign_treatment(X, spec)
    assert p[0] == pytest.approx(0.5)
    assert p[1] == pytest.approx(0.745, abs=1e-12)
    assert p[2] == pytest.approx(1.0 - 0.01, abs=1e-9)


def test_assignment_bounds_hold(rng):
    X = _plain_matrix(rng.normal(size=(50_000, 3)) * 10)
    spec = AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=0.05, alpha_index=1, seed=3)
    t, p = assign_treatment(X, spec)
    assert p.min() >= 0.05 and p.max() <= 0.95
    assert set(np.unique(t)) <= {0, 1}


def test_assignment_rct_constant():
    X = _plain_matrix(np.zeros((1000, 2)))
    t, p = assign_treatment(X, AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=0.85, seed=4))
    assert (p == 0.85).all()
    assert abs(t.mean() - 0.85) < 0.05


def test_assignment_spec_validation():
    with pytest.raises(ValueError):
        AssignmentSpec(mode="other")
    with pytest.raises(ValueError):
        AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=0.5)
    with pytest.raises(ValueError):
        AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=1.0)


def test_high_delta_degenerates_to_rct():
    gen = generate_ite_dataset(
        100_000,
        SURFACE_LINEAR,
        seed=5,
        assignment=AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=0.49, seed=5),
    )
    alpha = gen.assignment.alpha_index
    col = gen.encoded.values[:, alpha]
    corr = np.corrcoef(col, gen.dataset.treatment)[0, 1]
    assert abs(corr) < 0.02


# -- surfaces -----------------------------------------------------------------


def test_linear_surface_constant_effect(rng):
    X = _plain_matrix(rng.normal(size=(100, 6)))
    spec = sample_linear_surface(6, seed=0)
    mu0, mu1 = eval_surface(spec, X)
    # Exact up to one rounding step of (x + 4) - x.
    np.testing.assert_allclose(mu1 - mu0, 4.0, rtol=0, atol=1e-12)


def test_linear_beta_support():
    spec = sample_linear_surface(500, seed=1)
    assert set(np.unique(spec.beta)) <= {0.0, 1.0, 2.0, 3.0, 4.0}
    spec_b = sample_exponential_surface(500, seed=1)
    assert set(np.round(np.unique(spec_b.beta), 10)) <= {0.0, 0.1, 0.2, 0.3, 0.4}


def test_multi_peaked_at_anchor():
    anchor = np.array([[1.0, 2.0, 3.0]])
    spec = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=anchor,
        weights_control=np.array([0.2]),
        weights_treated=np.array([0.7]),
        sigmas=np.array([1.0]),
    )
    X = _plain_matrix(anchor)
    mu0, mu1 = eval_surface(spec, X)
    assert mu0[0] == pytest.approx(0.2)
    assert mu1[0] == pytest.approx(0.7)
    assert (mu1 - mu0)[0] == pytest.approx(0.5)


def test_multi_peaked_half_effect_radius():
    # At distance sigma * sqrt(2 ln 2) the kernel halves, so tau = 0.25.
    anchor = np.zeros((1, 3))
    spec = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=anchor,
        weights_control=np.array([0.2]),
        weights_treated=np.array([0.7]),
        sigmas=np.array([1.0]),
    )
    radius = np.sqrt(2.0 * np.log(2.0))
    X = _plain_matrix(np.array([[radius, 0.0, 0.0]]))
    mu0, mu1 = eval_surface(spec, X)
    assert (mu1 - mu0)[0] == pytest.approx(0.25, abs=1e-12)


def test_multi_peaked_additive_in_anchors(rng):
    X = _plain_matrix(rng.normal(size=(50, 4)))
    anchors = rng.normal(size=(6, 4))
    w0 = rng.random(6)
    w1 = rng.random(6)
    sig = rng.random(6) + 0.5

    def spec_for(idx):
        return SurfaceSpec(
            kind=SURFACE_MULTI_PEAKED,
            anchors=anchors[idx],
            weights_control=w0[idx],
            weights_treated=w1[idx],
            sigmas=sig[idx],
        )

    full0, full1 = eval_surface(spec_for(slice(None)), X)
    a0, a1 = eval_surface(spec_for(slice(0, 2)), X)
    b0, b1 = eval_surface(spec_for(slice(2, 6)), X)
    np.testing.assert_allclose(full0, a0 + b0, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(full1, a1 + b1, rtol=1e-14, atol=1e-14)


def test_exponential_overflow_reports_row(rng):
    X = np.asarray(rng.normal(size=(10, 3)))
    X[7] = 900.0
    spec = SurfaceSpec(kind=SURFACE_EXPONENTIAL, beta=np.array([1.0, 1.0, 1.0]))
    with pytest.raises(SurfaceOverflowError, match="row 7"):
        eval_surface(spec, _plain_matrix(X))


def test_surface_spec_validation():
    with pytest.raises(ValueError, match="beta"):
        SurfaceSpec(kind=SURFACE_LINEAR)
    with pytest.raises(ValueError, match="anchors"):
        SurfaceSpec(kind=SURFACE_MULTI_PEAKED)
    with pytest.raises(ValueError, match="sigmas"):
        SurfaceSpec(
            kind=SURFACE_MULTI_PEAKED,
            anchors=np.zeros((1, 2)),
            weights_control=np.array([0.1]),
            weights_treated=np.array([0.2]),
            sigmas=np.array([0.0]),
        )


# -- calibration ---------------------------------------------------------------


def test_calibrate_linear_is_noop(rng):
    X = _plain_matrix(rng.normal(size=(30, 4)))
    spec = sample_linear_surface(4, seed=2)
    assert calibrate(spec, X, np.ones(30)) is spec


def test_calibrate_multi_peaked_scales_differences(rng):
    X = _plain_matrix(rng.normal(size=(200, 3)))
    base = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=np.zeros((1, 3)),
        weights_control=np.array([0.0]),
        weights_treated=np.array([1.0]),
        sigmas=np.array([2.0]),
    )
    mu0, mu1 = eval_surface(base, X)
    pre_ate = float((mu1 - mu0).mean())
    target_scale = 4.0 / pre_ate

    calibrated = calibrate(base, X, np.ones(200))
    assert calibrated.weights_treated[0] == pytest.approx(target_scale * 1.0, rel=1e-12)
    mu0c, mu1c = eval_surface(calibrated, X)
    assert (mu1c - mu0c).mean() == pytest.approx(4.0, abs=1e-12)


def test_calibrate_multi_peaked_known_scale():
    # One anchor, all rows at the anchor: tau = w1 - w0 = 2 everywhere,
    # so the calibration scale is exactly 2.
    X = _plain_matrix(np.zeros((10, 2)))
    spec = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=np.zeros((1, 2)),
        weights_control=np.array([0.5]),
        weights_treated=np.array([2.5]),
        sigmas=np.array([1.0]),
    )
    calibrated = calibrate(spec, X, np.ones(10))
    assert calibrated.weights_treated[0] == pytest.approx(0.5 + 2.0 * 2.0)


def test_calibrate_exponential_att_matches_root_finding(rng):
    X = _plain_matrix(rng.normal(size=(500, 5)) * 0.3)
    spec = sample_exponential_surface(5, seed=3)
    treatments = (rng.random(500) < 0.6).astype(np.int8)

    calibrated = calibrate(spec, X, treatments)
    mu0, mu1 = eval_surface(calibrated, X)
    att = float((mu1 - mu0)[treatments == 1].mean())
    assert att == pytest.approx(4.0, abs=1e-9)

    # Independent oracle: solve ATT(omega) = 4 by bracketed root finding.
    def att_at(omega):
        probe = dataclasses.replace(spec, omega=omega)
        m0, m1 = eval_surface(probe, X)
        return float((m1 - m0)[treatments == 1].mean()) - 4.0

    root = brentq(att_at, -1e6, 1e6, xtol=1e-12)
    assert calibrated.omega == pytest.approx(root, abs=1e-9)


def test_calibrate_idempotent(rng):
    X = _plain_matrix(rng.normal(size=(300, 4)))
    spec = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=rng.normal(size=(3, 4)),
        weights_control=rng.random(3),
        weights_treated=rng.random(3),
        sigmas=np.full(3, 1.5),
    )
    treatments = (rng.random(300) < 0.5).astype(np.int8)
    once = calibrate(spec, X, treatments)
    twice = calibrate(once, X, treatments)
    np.testing.assert_allclose(twice.weights_treated, once.weights_treated, atol=1e-12)

    exp_spec = sample_exponential_surface(4, seed=9)
    once = calibrate(exp_spec, X, treatments)
    twice = calibrate(once, X, treatments)
    assert twice.omega == pytest.approx(once.omega, abs=1e-12)


def test_calibrate_degenerate_effect_errors():
    X = _plain_matrix(np.zeros((10, 2)))
    flat = SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=np.zeros((1, 2)),
        weights_control=np.array([0.4]),
        weights_treated=np.array([0.4]),
        sigmas=np.array([1.0]),
    )
    with pytest.raises(CalibrationError):
        calibrate(flat, X, np.ones(10))


# -- outcomes -----------------------------------------------------------------


def test_outcomes_noiseless_exact(rng):
    mu0 = rng.normal(size=100)
    mu1 = mu0 + 4
    t = (rng.random(100) < 0.5).astype(np.int8)
    p = np.full(100, 0.5)
    y, bundle = sample_outcomes(mu0, mu1, t, noise_sd=0.0, seed=0, propensities=p)
    np.testing.assert_array_equal(y, np.where(t == 1, mu1, mu0))
    np.testing.assert_array_equal(bundle.tau, bundle.mu1 - bundle.mu0)


def test_outcomes_clt_difference_in_means():
    gen = generate_ite_dataset(
        100_000,
        SURFACE_LINEAR,
        seed=21,
        assignment=AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=0.5, seed=21),
        noise_sd=1.0,
    )
    y = gen.dataset.outcome
    t = gen.dataset.treatment
    diff = y[t == 1].mean() - y[t == 0].mean()
    se = np.sqrt(y[t == 1].var() / (t == 1).sum() + y[t == 0].var() / (t == 0).sum())
    assert abs(diff - 4.0) <= 3 * se


def test_outcomes_validation(rng):
    with pytest.raises(ValueError):
        sample_outcomes(np.zeros(3), np.zeros(3), np.zeros(3), -1.0, 0, np.full(3, 0.5))


def test_binary_outcomes_rates_clipped(rng):
    mu0 = rng.normal(size=1000) * 3
    mu1 = mu0 + 4
    t = (rng.random(1000) < 0.5).astype(np.int8)
    y, bundle = sample_binary_outcomes(mu0, mu1, t, seed=5, propensities=np.full(1000, 0.5))
    assert set(np.unique(y)) <= {0, 1}
    assert bundle.mu0.min() >= 0.0 and bundle.mu1.max() <= 1.0
    np.testing.assert_array_equal(bundle.tau, bundle.mu1 - bundle.mu0)


# -- orchestration ---------------------------------------------------------------


def test_generate_multi_peaked_defaults_calibrated():
    gen = generate_ite_dataset(5000, SURFACE_MULTI_PEAKED, seed=42)
    assert len(gen.surface.anchors) == 5
    assert (gen.surface.sigmas == 1.0).all()
    assert gen.assignment.delta == 0.01
    assert gen.truth.tau.mean() == pytest.approx(4.0, abs=1e-9)
    assert gen.truth.propensity.min() >= 0.01
    assert gen.truth.propensity.max() <= 0.99
    assert validate_constraints(gen.dataset).ok


def test_generate_rct_mode_propensities():
    gen = generate_ite_dataset(
        500, SURFACE_LINEAR, seed=1, assignment=AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=0.7, seed=1)
    )
    assert (gen.truth.propensity == 0.7).all()


def test_generate_bit_identical():
    a = generate_ite_dataset(800, SURFACE_MULTI_PEAKED, seed=9)
    b = generate_ite_dataset(800, SURFACE_MULTI_PEAKED, seed=9)
    np.testing.assert_array_equal(a.dataset.outcome, b.dataset.outcome)
    np.testing.assert_array_equal(a.encoded.values, b.encoded.values)
    np.testing.assert_array_equal(a.truth.tau, b.truth.tau)
    c = generate_ite_dataset(800, SURFACE_MULTI_PEAKED, seed=10)
    assert (a.dataset.outcome != c.dataset.outcome).any()


def test_alpha_index_picks_correlated_column(rng):
    X = rng.normal(size=(5000, 5))
    target = 3.0 * X[:, 2] + 0.1 * rng.normal(size=5000)
    assert select_alpha_index(_plain_matrix(X), target) == 2


def test_generate_um_dataset_shape_and_constraints():
    gen = generate_um_dataset(3000, seed=3, n_projections=10)
    d = gen.dataset
    assert validate_constraints(d).ok
    assert 0.80 <= d.treatment_ratio <= 0.90
    assert 0.0 < d.visit_rate < 1.0
    assert d.conversion_rate <= d.visit_rate
    assert (gen.truth.propensity == 0.85).all()
    # conversions only where visits happened
    assert not ((d.conversion == 1) & (d.visit == 0)).any()


def test_ground_truth_csv_round_trip(tmp_path, rng):
    bundle = GroundTruthBundle.build(rng.normal(size=50), rng.normal(size=50), rng.random(50))
    path = tmp_path / "truth.csv"
    bundle.to_csv(path)
    loaded = GroundTruthBundle.from_csv(path)
    np.testing.assert_array_equal(loaded.mu0, bundle.mu0)
    np.testing.assert_array_equal(loaded.tau, bundle.tau)
    np.testing.assert_array_equal(loaded.propensity, bundle.propensity)
