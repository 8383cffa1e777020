"""Semi-synthetic dataset generation with known ground truth.

Covariates mimic the real corpus shape (4 correlated Gaussians plus 8
Zipf-distributed categorical codes at the published cardinalities). Three
response-surface families are supported:

- ``linear``: mu0(x) = x.beta, mu1(x) = x.beta + 4 (constant effect);
- ``exponential``: mu0(x) = exp((x + W).beta), mu1(x) = x.beta - omega,
  with omega calibrated so the treated-row average effect is 4;
- ``multi_peaked``: radial bumps around anchor rows,
  mu_t(x) = sum_c w_{t,c} exp(-||x - c||^2 / (2 sigma_c^2)), with the
  weight differences rescaled so the all-row average effect is 4.

Treatment is assigned either completely at random or confounded through
p(x) = (1 - 2*delta) * sigmoid(x_alpha) + delta, where alpha indexes the
standardized encoded column most correlated with the mean surface; every
propensity therefore lies in [delta, 1 - delta].
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .encoding import EncodedMatrix, FeatureEncoder, standardize_column
from .learners.base import sigmoid

CARDINALITIES = (60, 552, 260, 132, 1645, 3743, 1594, 136)
ZIPF_EXPONENT = 1.2
CONTINUOUS_CORRELATION = 0.2

SURFACE_LINEAR = "linear"
SURFACE_EXPONENTIAL = "exponential"
SURFACE_MULTI_PEAKED = "multi_peaked"
SURFACE_KINDS = (SURFACE_LINEAR, SURFACE_EXPONENTIAL, SURFACE_MULTI_PEAKED)

ASSIGN_RCT = "rct"
ASSIGN_CONFOUNDED = "confounded"

LINEAR_BETA_SUPPORT = (0.0, 1.0, 2.0, 3.0, 4.0)
LINEAR_BETA_PROBS = (0.5, 0.2, 0.15, 0.1, 0.05)
EXPONENTIAL_BETA_SUPPORT = (0.0, 0.1, 0.2, 0.3, 0.4)
EXPONENTIAL_BETA_PROBS = (0.6, 0.1, 0.1, 0.1, 0.1)

_EXP_OVERFLOW_LIMIT = 700.0

# Sub-stream tags for deriving stage seeds from one realization seed.
_STAGE_COVARIATES = 0
_STAGE_ENCODE = 1
_STAGE_SURFACE = 2
_STAGE_ASSIGN = 3
_STAGE_OUTCOME = 4
_STAGE_CONVERSION = 5


class SurfaceOverflowError(ArithmeticError):
    """The exponential surface overflows for at least one row."""


class CalibrationError(RuntimeError):
    """The requested average effect cannot be reached by rescaling."""


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit sub-seed from integer stream coordinates."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0]
    return int(state)


def _rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out is arr and out.flags.writeable:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SurfaceSpec:
    """Parameters of one response-surface pair."""

    kind: str
    beta: np.ndarray | None = None
    offset_value: float = 0.5
    omega: float = 0.0
    anchors: np.ndarray | None = None
    weights_control: np.ndarray | None = None
    weights_treated: np.ndarray | None = None
    sigmas: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.kind in (SURFACE_LINEAR, SURFACE_EXPONENTIAL):
            if self.beta is None:
                raise ValueError(f"{self.kind} surface needs beta")
            object.__setattr__(self, "beta", _freeze(self.beta))
        else:
            for name in ("anchors", "weights_control", "weights_treated", "sigmas"):
                if getattr(self, name) is None:
                    raise ValueError(f"multi_peaked surface needs {name}")
                object.__setattr__(self, name, _freeze(getattr(self, name)))
            m = len(self.anchors)
            if not (len(self.weights_control) == len(self.weights_treated) == len(self.sigmas) == m):
                raise ValueError("anchors, weights and sigmas must have equal length")
            if (self.sigmas <= 0).any():
                raise ValueError("all sigmas must be > 0")


@dataclass(frozen=True)
class AssignmentSpec:
    """Treatment assignment: completely random or covariate-confounded."""

    mode: str = ASSIGN_RCT
    rct_ratio: float = 0.5
    delta: float = 0.01
    alpha_index: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (ASSIGN_RCT, ASSIGN_CONFOUNDED):
            raise ValueError(f"unknown assignment mode {self.mode!r}")
        if self.mode == ASSIGN_RCT and not 0.0 < self.rct_ratio < 1.0:
            raise ValueError("rct_ratio must be in (0, 1)")
        if self.mode == ASSIGN_CONFOUNDED and not 0.0 < self.delta < 0.5:
            raise ValueError("delta must be in (0, 0.5)")


@dataclass(frozen=True, eq=False)
class GroundTruthBundle:
    """Per-row potential-outcome surfaces, effect and propensity."""

    mu0: np.ndarray
    mu1: np.ndarray
    tau: np.ndarray
    propensity: np.ndarray

    def __post_init__(self) -> None:
        for name in ("mu0", "mu1", "tau", "propensity"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        n = len(self.mu0)
        if not (len(self.mu1) == len(self.tau) == len(self.propensity) == n):
            raise ValueError("bundle arrays must have equal length")

    @classmethod
    def build(cls, mu0: np.ndarray, mu1: np.ndarray, propensity: np.ndarray) -> "GroundTruthBundle":
        mu0 = np.asarray(mu0, dtype=np.float64)
        mu1 = np.asarray(mu1, dtype=np.float64)
        return cls(mu0=mu0, mu1=mu1, tau=mu1 - mu0, propensity=propensity)

    def subset(self, indices: np.ndarray) -> "GroundTruthBundle":
        idx = np.asarray(indices)
        return GroundTruthBundle(self.mu0[idx], self.mu1[idx], self.tau[idx], self.propensity[idx])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["mu0", "mu1", "tau", "propensity"])
            for i in range(len(self.mu0)):
                writer.writerow(
                    [repr(float(v)) for v in (self.mu0[i], self.mu1[i], self.tau[i], self.propensity[i])]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "GroundTruthBundle":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["mu0", "mu1", "tau", "propensity"]:
                raise ValueError(f"{path}: unexpected ground-truth header {header}")
            rows = np.array([[float(c) for c in row] for row in reader], dtype=np.float64)
        if rows.size == 0:
            rows = rows.reshape(0, 4)
        return cls(mu0=rows[:, 0], mu1=rows[:, 1], tau=rows[:, 2], propensity=rows[:, 3])


# -- covariates ------------------------------------------------------------


def zipf_probabilities(cardinality: int, exponent: float = ZIPF_EXPONENT) -> np.ndarray:
    ranks = np.arange(1, cardinality + 1, dtype=np.float64)
    p = ranks**-exponent
    return p / p.sum()


def gen_covariates(n: int, seed: int) -> Dataset:
    """Features-only dataset: labels and flags all zero."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed, _STAGE_COVARIATES)
    cov = np.full((4, 4), CONTINUOUS_CORRELATION)
    np.fill_diagonal(cov, 1.0)
    cont = rng.standard_normal((n, 4)) @ np.linalg.cholesky(cov).T
    cats = np.empty((n, 8), dtype=np.int64)
    for j, cardinality in enumerate(CARDINALITIES):
        cats[:, j] = rng.choice(cardinality, size=n, p=zipf_probabilities(cardinality))
    zeros = np.zeros(n, dtype=np.int8)
    return Dataset(cont, cats, zeros, zeros, zeros, zeros)


# -- surfaces ---------------------------------------------------------------


def sample_linear_surface(
    dims: int,
    seed: int,
    support: tuple[float, ...] = LINEAR_BETA_SUPPORT,
    probs: tuple[float, ...] = LINEAR_BETA_PROBS,
) -> SurfaceSpec:
    rng = _rng(seed, _STAGE_SURFACE)
    beta = rng.choice(np.asarray(support, dtype=np.float64), size=dims, p=probs)
    return SurfaceSpec(kind=SURFACE_LINEAR, beta=beta, seed=seed)


def sample_exponential_surface(
    dims: int,
    seed: int,
    support: tuple[float, ...] = EXPONENTIAL_BETA_SUPPORT,
    probs: tuple[float, ...] = EXPONENTIAL_BETA_PROBS,
    offset_value: float = 0.5,
) -> SurfaceSpec:
    rng = _rng(seed, _STAGE_SURFACE)
    beta = rng.choice(np.asarray(support, dtype=np.float64), size=dims, p=probs)
    return SurfaceSpec(kind=SURFACE_EXPONENTIAL, beta=beta, offset_value=offset_value, seed=seed)


def sample_multi_peaked_surface(
    enc: EncodedMatrix,
    seed: int,
    n_anchors: int = 5,
    sigma: float | str = 1.0,
) -> SurfaceSpec:
    """Anchors are encoded rows sampled uniformly without replacement.

    ``sigma="auto"`` sets every width to half the median pairwise distance of
    a small row subsample, which keeps the bumps visible in high-dimensional
    encodings.
    """
    rng = _rng(seed, _STAGE_SURFACE)
    if n_anchors < 1 or n_anchors > enc.rows:
        raise ValueError("n_anchors must be in [1, rows]")
    anchors = enc.values[np.sort(rng.choice(enc.rows, size=n_anchors, replace=False))]
    if sigma == "auto":
        sample = enc.values[rng.choice(enc.rows, size=min(256, enc.rows), replace=False)]
        sq = np.sum((sample[:, None, :] - sample[None, :, :]) ** 2, axis=-1)
        median = float(np.sqrt(np.median(sq[np.triu_indices(len(sample), k=1)])))
        sigma_value = max(median / 2.0, 1e-6)
    else:
        sigma_value = float(sigma)
    return SurfaceSpec(
        kind=SURFACE_MULTI_PEAKED,
        anchors=anchors,
        weights_control=rng.random(n_anchors),
        weights_treated=rng.random(n_anchors),
        sigmas=np.full(n_anchors, sigma_value),
        seed=seed,
    )


def sample_surface(kind: str, enc: EncodedMatrix, seed: int, **kwargs) -> SurfaceSpec:
    if kind == SURFACE_LINEAR:
        return sample_linear_surface(enc.dims, seed, **kwargs)
    if kind == SURFACE_EXPONENTIAL:
        return sample_exponential_surface(enc.dims, seed, **kwargs)
    if kind == SURFACE_MULTI_PEAKED:
        return sample_multi_peaked_surface(enc, seed, **kwargs)
    raise ValueError(f"unknown surface kind {kind!r}")


def _multi_peaked_kernels(spec: SurfaceSpec, X: np.ndarray) -> np.ndarray:
    kernels = np.empty((X.shape[0], len(spec.anchors)))
    for c, anchor in enumerate(spec.anchors):
        sq = np.sum((X - anchor) ** 2, axis=1)
        kernels[:, c] = np.exp(-sq / (2.0 * spec.sigmas[c] ** 2))
    return kernels


def eval_surface(spec: SurfaceSpec, enc: EncodedMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (mu0, mu1) for the surface pair."""
    X = enc.values
    if spec.kind == SURFACE_LINEAR:
        if len(spec.beta) != X.shape[1]:
            raise ValueError("beta dimensionality does not match the encoding")
        base = X @ spec.beta
        return base, base + 4.0
    if spec.kind == SURFACE_EXPONENTIAL:
        if len(spec.beta) != X.shape[1]:
            raise ValueError("beta dimensionality does not match the encoding")
        exponent = X @ spec.beta + spec.offset_value * float(spec.beta.sum())
        worst = int(np.argmax(exponent))
        if exponent[worst] > _EXP_OVERFLOW_LIMIT:
            raise SurfaceOverflowError(
                f"exp overflow at row {worst}: exponent {exponent[worst]:.1f}; rescale beta"
            )
        return np.exp(exponent), X @ spec.beta - spec.omega
    kernels = _multi_peaked_kernels(spec, X)
    return kernels @ spec.weights_control, kernels @ spec.weights_treated


def calibrate(
    spec: SurfaceSpec,
    enc: EncodedMatrix,
    treatments: np.ndarray,
    target: float = 4.0,
) -> SurfaceSpec:
    """Pin the average effect to ``target``.

    Linear surfaces already satisfy it. The exponential pair solves omega in
    closed form against the treated-row average effect (omega enters mu1
    linearly). The multi-peaked pair rescales the weight differences so the
    all-row mean effect equals the target; recalibrating a calibrated spec is
    a no-op to machine precision.
    """
    if spec.kind == SURFACE_LINEAR:
        return spec
    if spec.kind == SURFACE_EXPONENTIAL:
        treated = np.asarray(treatments) == 1
        if not treated.any():
            raise CalibrationError("no treated rows to calibrate against")
        X = enc.values[treated]
        linear = X @ spec.beta
        exponent = linear + spec.offset_value * float(spec.beta.sum())
        if exponent.max() > _EXP_OVERFLOW_LIMIT:
            raise SurfaceOverflowError(
                f"exp overflow at treated row {int(np.argmax(exponent))}; rescale beta"
            )
        omega = float(linear.mean() - np.exp(exponent).mean() - target)
        return dataclasses.replace(spec, omega=omega)

    mu0, mu1 = eval_surface(spec, enc)
    tau = mu1 - mu0
    if not tau.any():
        raise CalibrationError("degenerate surface: effect is identically zero")
    mean_tau = float(tau.mean())
    if mean_tau == 0.0 or not np.isfinite(target / mean_tau):
        raise CalibrationError("mean effect is zero; rescaling cannot reach the target")
    scale = target / mean_tau
    new_treated = spec.weights_control + scale * (spec.weights_treated - spec.weights_control)
    return dataclasses.replace(spec, weights_treated=new_treated)


# -- treatment assignment ----------------------------------------------------


def assign_treatment(enc: EncodedMatrix, spec: AssignmentSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw treatments; returns (treatments, exact propensities).

    In confounded mode the propensity is
    ``(1 - 2 delta) * sigmoid(x[alpha]) + delta`` over the alpha column as
    stored, which the caller must have standardized.
    """
    rng = _rng(spec.seed, _STAGE_ASSIGN)
    if spec.mode == ASSIGN_RCT:
        p = np.full(enc.rows, spec.rct_ratio)
    else:
        if spec.alpha_index is None or not 0 <= spec.alpha_index < enc.dims:
            raise ValueError("confounded mode needs a valid alpha_index")
        z = enc.values[:, spec.alpha_index]
        # The clip only removes one-ulp rounding excursions; mathematically
        # the affine sigmoid already lies inside [delta, 1 - delta].
        p = np.clip((1.0 - 2.0 * spec.delta) * sigmoid(z) + spec.delta, spec.delta, 1.0 - spec.delta)
    t = (rng.random(enc.rows) < p).astype(np.int8)
    return t, p


def select_alpha_index(enc: EncodedMatrix, mean_surface: np.ndarray) -> int:
    """Column with the largest |Pearson correlation| to the mean surface."""
    X = enc.values
    xc = X - X.mean(axis=0)
    mc = mean_surface - mean_surface.mean()
    norms = np.sqrt((xc**2).sum(axis=0)) * np.sqrt((mc**2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(norms > 0, np.abs(xc.T @ mc) / np.where(norms > 0, norms, 1.0), 0.0)
    if not corr.any():
        raise ValueError("no encoded column correlates with the mean surface")
    return int(np.argmax(corr))


# -- outcomes ----------------------------------------------------------------


def sample_outcomes(
    mu0: np.ndarray,
    mu1: np.ndarray,
    treatments: np.ndarray,
    noise_sd: float,
    seed: int,
    propensities: np.ndarray,
) -> tuple[np.ndarray, GroundTruthBundle]:
    """Factual outcomes y_i = mu_{t_i}(x_i) + Normal(0, noise_sd^2)."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    t = np.asarray(treatments)
    y = np.where(t == 1, mu1, mu0).astype(np.float64)
    if noise_sd > 0:
        y = y + _rng(seed, _STAGE_OUTCOME).normal(0.0, noise_sd, size=len(y))
    return y, GroundTruthBundle.build(mu0, mu1, propensities)


def sample_binary_outcomes(
    mu0: np.ndarray,
    mu1: np.ndarray,
    treatments: np.ndarray,
    seed: int,
    propensities: np.ndarray,
) -> tuple[np.ndarray, GroundTruthBundle]:
    """Bernoulli outcomes with rates clip(mu_t, 0, 1).

    The returned bundle stores the clipped rates, so its effect column is
    the true rate difference of the sampling process.
    """
    rate0 = np.clip(mu0, 0.0, 1.0)
    rate1 = np.clip(mu1, 0.0, 1.0)
    t = np.asarray(treatments)
    rate = np.where(t == 1, rate1, rate0)
    y = (_rng(seed, _STAGE_OUTCOME).random(len(rate)) < rate).astype(np.int8)
    return y, GroundTruthBundle.build(rate0, rate1, propensities)


# -- orchestration ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneratedData:
    dataset: Dataset
    encoded: EncodedMatrix
    truth: GroundTruthBundle
    surface: SurfaceSpec
    assignment: AssignmentSpec


def generate_ite_dataset(
    n: int,
    surface_kind: str,
    seed: int,
    assignment: AssignmentSpec | None = None,
    n_projections: int = 5,
    buckets_per_projection: int = 6,
    noise_sd: float = 1.0,
    target_effect: float = 4.0,
    surface_kwargs: dict | None = None,
) -> GeneratedData:
    """Full generation pipeline with continuous outcomes.

    Covariates are drawn and encoded, the surface is sampled, the confounding
    column is picked as the encoded column most correlated with the
    pre-assignment mean surface (then standardized), treatment is drawn,
    the surface is calibrated and factual outcomes are sampled. Everything
    is reproducible from the arguments alone.
    """
    if surface_kind not in SURFACE_KINDS:
        raise ValueError(f"unknown surface kind {surface_kind!r}")
    covariates = gen_covariates(n, seed)
    encoder = FeatureEncoder(n_projections, buckets_per_projection, seed=derive_seed(seed, _STAGE_ENCODE))
    enc = encoder.fit_transform(covariates)
    surface = sample_surface(surface_kind, enc, seed, **(surface_kwargs or {}))

    mu0_raw, mu1_raw = eval_surface(surface, enc)
    if assignment is None:
        assignment = AssignmentSpec(mode=ASSIGN_CONFOUNDED, delta=0.01, seed=seed)
    if assignment.mode == ASSIGN_CONFOUNDED:
        if assignment.alpha_index is None:
            alpha = select_alpha_index(enc, (mu0_raw + mu1_raw) / 2.0)
            assignment = dataclasses.replace(assignment, alpha_index=alpha)
        enc_assign = enc.replace_column(
            assignment.alpha_index, standardize_column(enc, assignment.alpha_index)
        )
    else:
        enc_assign = enc
    treatments, propensities = assign_treatment(enc_assign, assignment)

    surface = calibrate(surface, enc, treatments, target=target_effect)
    mu0, mu1 = eval_surface(surface, enc)
    y, truth = sample_outcomes(mu0, mu1, treatments, noise_sd, seed, propensities)

    dataset = covariates.with_labels(treatment=treatments, exposure=treatments, outcome=y)
    return GeneratedData(dataset, enc, truth, surface, assignment)


def generate_um_dataset(
    n: int,
    seed: int,
    rct_ratio: float = 0.85,
    n_projections: int = 100,
    buckets_per_projection: int = 6,
    n_anchors: int = 5,
    sigma: float | str = "auto",
    weight_scale: float = 1.0,
    conversion_given_visit: float = 0.3,
) -> GeneratedData:
    """Binary-outcome randomized corpus for the uplift-modeling pipeline.

    Multi-peaked rate surfaces (no average-effect calibration: rates live in
    [0, 1]); visits are Bernoulli draws of the clipped rates and conversions
    thin the visits at a constant rate, so visit=0 implies conversion=0.
    ``weight_scale`` multiplies both weight vectors, trading base-rate level
    for rate heterogeneity.
    """
    covariates = gen_covariates(n, seed)
    encoder = FeatureEncoder(n_projections, buckets_per_projection, seed=derive_seed(seed, _STAGE_ENCODE))
    enc = encoder.fit_transform(covariates)
    surface = sample_multi_peaked_surface(enc, seed, n_anchors=n_anchors, sigma=sigma)
    if weight_scale != 1.0:
        surface = dataclasses.replace(
            surface,
            weights_control=surface.weights_control * weight_scale,
            weights_treated=surface.weights_treated * weight_scale,
        )

    assignment = AssignmentSpec(mode=ASSIGN_RCT, rct_ratio=rct_ratio, seed=seed)
    treatments, propensities = assign_treatment(enc, assignment)
    mu0, mu1 = eval_surface(surface, enc)
    visits, truth = sample_binary_outcomes(mu0, mu1, treatments, seed, propensities)

    conv_draw = _rng(seed, _STAGE_CONVERSION).random(n) < conversion_given_visit
    conversions = (visits.astype(bool) & conv_draw).astype(np.int8)
    dataset = covariates.with_labels(
        treatment=treatments, exposure=treatments, visit=visits, conversion=conversions
    )
    return GeneratedData(dataset, enc, truth, surface, assignment)
