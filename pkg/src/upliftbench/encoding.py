"""Dense design-matrix construction: standardized continuous features plus
one-hot indicators of salted hash projections of the categorical codes.

Each projection maps the full 8-tuple of categorical codes to one of b
buckets through a splitmix64-style integer mixer salted with (seed,
projection index), so the encoding is a pure function of its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import CONTINUOUS_COLUMNS, Dataset

_MIX_MUL_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_MUL_2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _MIX_MUL_1
    x = (x ^ (x >> np.uint64(27))) * _MIX_MUL_2
    return x ^ (x >> np.uint64(31))


def _mix_int(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def project_codes(
    codes: np.ndarray, n_projections: int, buckets: int, seed: int
) -> np.ndarray:
    """Bucket indices, shape (n, n_projections), for the categorical codes."""
    n = codes.shape[0]
    out = np.empty((n, n_projections), dtype=np.int64)
    codes64 = codes.astype(np.uint64)
    for j in range(n_projections):
        base = _mix_int(int(seed) + _GOLDEN * (j + 1))
        acc = np.full(n, base, dtype=np.uint64)
        for c in range(codes.shape[1]):
            salt = np.uint64((_GOLDEN * (c + 1)) & _MASK64)
            acc = _splitmix64(acc ^ (codes64[:, c] + salt))
        out[:, j] = (acc % np.uint64(buckets)).astype(np.int64)
    return out


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    """Dense real design matrix with a per-column description.

    ``column_spec`` entries are ``"cont:<name>"`` for standardized continuous
    passthrough columns and ``"proj:<j>:bucket:<k>"`` for one-hot indicator
    columns of projection j.
    """

    values: np.ndarray
    column_spec: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("values must be 2-d")
        if self.values.shape[1] != len(self.column_spec):
            raise ValueError("column_spec length must match the column count")
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr is self.values and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "column_spec", tuple(self.column_spec))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def replace_column(self, index: int, column: np.ndarray) -> "EncodedMatrix":
        """Copy with one column substituted (spec label kept)."""
        values = self.values.copy()
        values[:, index] = column
        values.flags.writeable = False
        return EncodedMatrix(values, self.column_spec)

    def subset(self, indices: np.ndarray) -> "EncodedMatrix":
        values = self.values[np.asarray(indices)]
        values.flags.writeable = False
        return EncodedMatrix(values, self.column_spec)


class FeatureEncoder:
    """Fits continuous standardization statistics on one population and
    applies them to any dataset, so train-time statistics can be reused at
    test time without leakage.
    """

    def __init__(self, n_projections: int = 100, buckets_per_projection: int = 6, seed: int = 0) -> None:
        if n_projections < 0:
            raise ValueError("n_projections must be >= 0")
        if buckets_per_projection < 2:
            raise ValueError("buckets_per_projection must be >= 2")
        self.n_projections = n_projections
        self.buckets_per_projection = buckets_per_projection
        self.seed = seed
        self.means_: np.ndarray | None = None
        self.stds_: np.ndarray | None = None

    def fit(self, dataset: Dataset) -> "FeatureEncoder":
        cont = dataset.continuous
        self.means_ = cont.mean(axis=0)
        stds = cont.std(axis=0)
        degenerate = stds == 0.0
        if degenerate.any():
            names = [CONTINUOUS_COLUMNS[i] for i in np.flatnonzero(degenerate)]
            warnings.warn(
                f"zero-variance continuous column(s) {names}; standardized to all-zeros",
                stacklevel=2,
            )
            stds = np.where(degenerate, 1.0, stds)
        self.stds_ = stds
        return self

    def transform(self, dataset: Dataset) -> EncodedMatrix:
        if self.means_ is None or self.stds_ is None:
            raise RuntimeError("encoder is not fitted")
        n = dataset.n
        b = self.buckets_per_projection
        dims = 4 + self.n_projections * b
        values = np.zeros((n, dims), dtype=np.float64)
        values[:, :4] = (dataset.continuous - self.means_) / self.stds_

        spec = [f"cont:{name}" for name in CONTINUOUS_COLUMNS]
        if self.n_projections:
            buckets = project_codes(dataset.categorical, self.n_projections, b, self.seed)
            rows = np.arange(n)
            for j in range(self.n_projections):
                values[rows, 4 + j * b + buckets[:, j]] = 1.0
        for j in range(self.n_projections):
            spec.extend(f"proj:{j}:bucket:{k}" for k in range(b))
        values.flags.writeable = False
        return EncodedMatrix(values, tuple(spec))

    def fit_transform(self, dataset: Dataset) -> EncodedMatrix:
        return self.fit(dataset).transform(dataset)


def encode(
    dataset: Dataset,
    n_projections: int,
    buckets_per_projection: int,
    seed: int,
) -> EncodedMatrix:
    """One-shot encoding with statistics fitted on the same population."""
    return FeatureEncoder(n_projections, buckets_per_projection, seed).fit_transform(dataset)


def standardize_column(enc: EncodedMatrix, index: int) -> np.ndarray:
    """Zero-mean unit-variance copy of one encoded column."""
    col = enc.values[:, index]
    std = col.std()
    if std == 0.0:
        raise ValueError(f"column {index} has zero variance")
    return (col - col.mean()) / std
