"""Stratified holdout splitting and k-fold partitioning.

Stratification keys are the treatment flag alone or the (treatment, label)
pair, which preserves both treatment and outcome imbalance across parts.
Rounding follows a floor-then-largest-remainder rule so partitions are
deterministic and fair to every stratum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

STRATIFY_TREATMENT = "treatment"
STRATIFY_TREATMENT_AND_OUTCOME = "treatment_and_outcome"


class StratumError(ValueError):
    """A stratum is too small for the requested partition."""


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    stratify_on: str = STRATIFY_TREATMENT
    seed: int = 0
    outcome_label: str = "visit"

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be strictly between 0 and 1")
        if self.stratify_on not in (STRATIFY_TREATMENT, STRATIFY_TREATMENT_AND_OUTCOME):
            raise ValueError(f"unknown stratification {self.stratify_on!r}")


def stratum_labels(dataset: Dataset, stratify_on: str, outcome_label: str = "visit") -> np.ndarray:
    """Integer stratum key per row."""
    if stratify_on == STRATIFY_TREATMENT:
        return dataset.treatment.astype(np.int64)
    if stratify_on == STRATIFY_TREATMENT_AND_OUTCOME:
        y = dataset.label(outcome_label)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("outcome stratification needs a binary label")
        return dataset.treatment.astype(np.int64) * 2 + y.astype(np.int64)
    raise ValueError(f"unknown stratification {stratify_on!r}")


def _stratum_name(key: int, stratify_on: str) -> str:
    if stratify_on == STRATIFY_TREATMENT:
        return f"treatment={key}"
    return f"treatment={key // 2},outcome={key % 2}"


def train_indices_per_stratum(strata: np.ndarray, train_fraction: float, seed: int) -> np.ndarray:
    """Boolean train mask using floor-per-stratum plus largest-remainder."""
    n = len(strata)
    keys, counts = np.unique(strata, return_counts=True)
    ideal = counts * train_fraction
    base = np.floor(ideal).astype(np.int64)
    remainder = int(round(n * train_fraction)) - int(base.sum())
    if remainder > 0:
        # Largest fractional parts get the leftover slots; ties resolve in
        # ascending stratum-key order for determinism.
        fractional = ideal - base
        order = np.lexsort((keys, -fractional))
        for k in order[:remainder]:
            base[k] += 1

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    mask = np.zeros(n, dtype=bool)
    for key, take in zip(keys, base):
        members = np.flatnonzero(strata == key)
        perm = rng.permutation(len(members))
        mask[members[perm[:take]]] = True
    return mask


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; deterministic given the spec seed."""
    strata = stratum_labels(dataset, spec.stratify_on, spec.outcome_label)
    keys, counts = np.unique(strata, return_counts=True)
    for key, count in zip(keys, counts):
        if count < 2:
            raise StratumError(
                f"stratum {_stratum_name(int(key), spec.stratify_on)} has {count} row(s); need >= 2"
            )
    mask = train_indices_per_stratum(strata, spec.train_fraction, spec.seed)
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(np.flatnonzero(~mask))


def kfold_indices(strata: np.ndarray, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint, exhaustive (train, validation) index pairs, stratum-balanced
    within one row per fold."""
    if k < 2:
        raise ValueError("k must be >= 2")
    keys, counts = np.unique(strata, return_counts=True)
    for key, count in zip(keys, counts):
        if count < k:
            raise StratumError(f"stratum key {int(key)} has {count} row(s); need >= k={k}")

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    fold_of = np.empty(len(strata), dtype=np.int64)
    for key in keys:
        members = np.flatnonzero(strata == key)
        shuffled = members[rng.permutation(len(members))]
        fold_of[shuffled] = np.arange(len(members)) % k

    pairs = []
    for fold in range(k):
        val = np.flatnonzero(fold_of == fold)
        train = np.flatnonzero(fold_of != fold)
        pairs.append((train, val))
    return pairs


def kfold(
    dataset: Dataset,
    k: int,
    stratify_on: str = STRATIFY_TREATMENT,
    seed: int = 0,
    outcome_label: str = "visit",
) -> list[tuple[Dataset, Dataset]]:
    strata = stratum_labels(dataset, stratify_on, outcome_label)
    return [
        (dataset.subset(train), dataset.subset(val))
        for train, val in kfold_indices(strata, k, seed)
    ]
