"""Dataset container and CSV tooling for incrementality-test data.

The on-disk schema is one row per user: twelve feature columns (four
continuous, eight categorical integer codes), then a binary treatment flag,
a conversion label, a visit label and an ad-exposure flag. Two structural
constraints follow from how the data is collected: a user in the control
arm is never exposed to ads (T=0 implies E=0) and a conversion requires a
visit (V=0 implies C=0). Violations are reported, never fatal, so that
deliberately broken corpora can still be loaded for testing.
"""

from __future__ import annotations

import csv
import gzip
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

CONTINUOUS_COLUMNS = ("f0", "f2", "f7", "f10")
CATEGORICAL_COLUMNS = ("f1", "f3", "f4", "f5", "f6", "f8", "f9", "f11")
FEATURE_COLUMNS = tuple(f"f{i}" for i in range(12))
FLAG_COLUMNS = ("treatment", "conversion", "visit", "exposure")
OUTCOME_COLUMN = "outcome"

_CHUNK_ROWS = 1_000_000


class SchemaError(ValueError):
    """The file header does not match the expected column set."""


class ParseError(ValueError):
    """A cell could not be parsed; the message carries the row number."""


def _frozen(values, dtype) -> np.ndarray:
    """Read-only contiguous array; copies rather than freezing caller data."""
    arr = np.ascontiguousarray(values, dtype=dtype)
    if arr is values and arr.flags.writeable:
        arr = arr.copy()
    arr.flags.writeable = False
    return arr


class RebalanceError(ValueError):
    """A per-test treatment ratio target cannot be reached."""


@dataclass(frozen=True)
class Sample:
    """One user row: features, treatment assignment and labels."""

    continuous: tuple[float, ...]
    categorical: tuple[int, ...]
    treatment: int
    exposure: int
    visit: int
    conversion: int

    def __post_init__(self) -> None:
        if len(self.continuous) != 4:
            raise ValueError("expected 4 continuous features")
        if len(self.categorical) != 8:
            raise ValueError("expected 8 categorical codes")
        if not all(np.isfinite(v) for v in self.continuous):
            raise ValueError("continuous features must be finite")
        if any(c < 0 for c in self.categorical):
            raise ValueError("categorical codes must be non-negative")
        for name in ("treatment", "exposure", "visit", "conversion"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")


class Dataset:
    """Immutable column-oriented collection of samples.

    Feature and label columns are stored as read-only numpy arrays. An
    optional continuous ``outcome`` column carries simulated real-valued
    responses; ``source_tags`` optionally records, per row, which
    incrementality test a row came from.
    """

    def __init__(
        self,
        continuous: np.ndarray,
        categorical: np.ndarray,
        treatment: np.ndarray,
        exposure: np.ndarray,
        visit: np.ndarray,
        conversion: np.ndarray,
        *,
        outcome: np.ndarray | None = None,
        source_tags: np.ndarray | Sequence[str] | None = None,
        source_tag: str | None = None,
    ) -> None:
        cont = _frozen(continuous, np.float64)
        cats = _frozen(categorical, np.int64)
        if cont.ndim != 2 or cont.shape[1] != 4:
            raise ValueError(f"continuous must be (n, 4), got {cont.shape}")
        if cats.ndim != 2 or cats.shape[1] != 8:
            raise ValueError(f"categorical must be (n, 8), got {cats.shape}")
        n = cont.shape[0]
        if cats.shape[0] != n:
            raise ValueError("continuous and categorical row counts differ")
        if not np.isfinite(cont).all():
            raise ValueError("continuous features must be finite")
        if cats.size and cats.min() < 0:
            raise ValueError("categorical codes must be non-negative")

        flags = {}
        for name, col in (
            ("treatment", treatment),
            ("exposure", exposure),
            ("visit", visit),
            ("conversion", conversion),
        ):
            arr = _frozen(col, np.int8)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise ValueError(f"{name} must be binary")
            flags[name] = arr

        self._continuous = cont
        self._categorical = cats
        self._treatment = flags["treatment"]
        self._exposure = flags["exposure"]
        self._visit = flags["visit"]
        self._conversion = flags["conversion"]

        if outcome is not None:
            outcome = _frozen(outcome, np.float64)
            if outcome.shape != (n,):
                raise ValueError(f"outcome must have shape ({n},)")
        self._outcome = outcome

        if source_tags is not None and source_tag is not None:
            raise ValueError("pass source_tags or source_tag, not both")
        if source_tag is not None:
            source_tags = np.full(n, source_tag, dtype=object)
        if source_tags is not None:
            tags_arr = np.asarray(source_tags, dtype=object)
            if tags_arr is source_tags and tags_arr.flags.writeable:
                tags_arr = tags_arr.copy()
            if tags_arr.shape != (n,):
                raise ValueError(f"source_tags must have shape ({n},)")
            tags_arr.flags.writeable = False
            self._source_tags: np.ndarray | None = tags_arr
        else:
            self._source_tags = None

    # -- basic views ---------------------------------------------------

    @property
    def n(self) -> int:
        return self._continuous.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def continuous(self) -> np.ndarray:
        return self._continuous

    @property
    def categorical(self) -> np.ndarray:
        return self._categorical

    @property
    def treatment(self) -> np.ndarray:
        return self._treatment

    @property
    def exposure(self) -> np.ndarray:
        return self._exposure

    @property
    def visit(self) -> np.ndarray:
        return self._visit

    @property
    def conversion(self) -> np.ndarray:
        return self._conversion

    @property
    def outcome(self) -> np.ndarray | None:
        return self._outcome

    @property
    def source_tags(self) -> np.ndarray | None:
        return self._source_tags

    @property
    def source_tag(self) -> str | None:
        """The unique per-dataset tag, or None if absent or mixed."""
        if self._source_tags is None:
            return None
        tags = set(self._source_tags.tolist())
        return tags.pop() if len(tags) == 1 else None

    @property
    def treatment_ratio(self) -> float:
        return float(self._treatment.mean()) if self.n else 0.0

    @property
    def visit_rate(self) -> float:
        return float(self._visit.mean()) if self.n else 0.0

    @property
    def conversion_rate(self) -> float:
        return float(self._conversion.mean()) if self.n else 0.0

    def label(self, name: str) -> np.ndarray:
        """Return a label column by name (visit / conversion / outcome)."""
        if name == "visit":
            return self._visit
        if name == "conversion":
            return self._conversion
        if name == "outcome":
            if self._outcome is None:
                raise ValueError("dataset has no continuous outcome column")
            return self._outcome
        raise ValueError(f"unknown label {name!r}")

    def sample(self, i: int) -> Sample:
        return Sample(
            continuous=tuple(float(v) for v in self._continuous[i]),
            categorical=tuple(int(v) for v in self._categorical[i]),
            treatment=int(self._treatment[i]),
            exposure=int(self._exposure[i]),
            visit=int(self._visit[i]),
            conversion=int(self._conversion[i]),
        )

    def __iter__(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(self.n))

    # -- derived datasets ----------------------------------------------

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self._continuous[idx],
            self._categorical[idx],
            self._treatment[idx],
            self._exposure[idx],
            self._visit[idx],
            self._conversion[idx],
            outcome=None if self._outcome is None else self._outcome[idx],
            source_tags=None if self._source_tags is None else self._source_tags[idx],
        )

    def with_labels(
        self,
        *,
        treatment: np.ndarray | None = None,
        exposure: np.ndarray | None = None,
        visit: np.ndarray | None = None,
        conversion: np.ndarray | None = None,
        outcome: np.ndarray | None = None,
    ) -> "Dataset":
        """Copy with some label columns replaced (features untouched)."""
        return Dataset(
            self._continuous,
            self._categorical,
            self._treatment if treatment is None else treatment,
            self._exposure if exposure is None else exposure,
            self._visit if visit is None else visit,
            self._conversion if conversion is None else conversion,
            outcome=self._outcome if outcome is None else outcome,
            source_tags=self._source_tags,
        )

    @classmethod
    def from_samples(
        cls, samples: Sequence[Sample], *, source_tag: str | None = None
    ) -> "Dataset":
        cont = np.array([s.continuous for s in samples], dtype=np.float64).reshape(-1, 4)
        cats = np.array([s.categorical for s in samples], dtype=np.int64).reshape(-1, 8)
        return cls(
            cont,
            cats,
            np.array([s.treatment for s in samples], dtype=np.int8),
            np.array([s.exposure for s in samples], dtype=np.int8),
            np.array([s.visit for s in samples], dtype=np.int8),
            np.array([s.conversion for s in samples], dtype=np.int8),
            source_tag=source_tag,
        )

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ValueError("cannot concatenate zero datasets")
        has_outcome = all(p.outcome is not None for p in parts)
        has_tags = all(p.source_tags is not None for p in parts)
        return cls(
            np.concatenate([p.continuous for p in parts]),
            np.concatenate([p.categorical for p in parts]),
            np.concatenate([p.treatment for p in parts]),
            np.concatenate([p.exposure for p in parts]),
            np.concatenate([p.visit for p in parts]),
            np.concatenate([p.conversion for p in parts]),
            outcome=np.concatenate([p.outcome for p in parts]) if has_outcome else None,
            source_tags=np.concatenate([p.source_tags for p in parts]) if has_tags else None,
        )

    def __repr__(self) -> str:
        return (
            f"Dataset(n={self.n}, treatment_ratio={self.treatment_ratio:.4f}, "
            f"visit_rate={self.visit_rate:.4f}, conversion_rate={self.conversion_rate:.4f})"
        )


# -- structural constraints ---------------------------------------------


@dataclass(frozen=True)
class ConstraintReport:
    """Counts of rows violating the structural constraints."""

    control_exposed: int
    conversion_without_visit: int

    @property
    def ok(self) -> bool:
        return self.control_exposed == 0 and self.conversion_without_visit == 0

    def to_dict(self) -> dict:
        return {
            "control_exposed": self.control_exposed,
            "conversion_without_visit": self.conversion_without_visit,
            "ok": self.ok,
        }


def validate_constraints(dataset: Dataset) -> ConstraintReport:
    """Count rows with T=0,E=1 and rows with V=0,C=1."""
    return ConstraintReport(
        control_exposed=int(((dataset.treatment == 0) & (dataset.exposure == 1)).sum()),
        conversion_without_visit=int(((dataset.visit == 0) & (dataset.conversion == 1)).sum()),
    )


# -- schema descriptors --------------------------------------------------


@dataclass(frozen=True)
class SchemaDescriptor:
    """Maps file column names to roles, for corpora with non-default headers."""

    continuous: tuple[str, ...] = CONTINUOUS_COLUMNS
    categorical: tuple[str, ...] = CATEGORICAL_COLUMNS
    treatment: str = "treatment"
    conversion: str = "conversion"
    visit: str = "visit"
    exposure: str = "exposure"
    outcome: str = OUTCOME_COLUMN

    def __post_init__(self) -> None:
        if len(self.continuous) != 4:
            raise ValueError("schema needs exactly 4 continuous columns")
        if len(self.categorical) != 8:
            raise ValueError("schema needs exactly 8 categorical columns")

    @classmethod
    def from_file(cls, path: str | Path) -> "SchemaDescriptor":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            continuous=tuple(raw.get("continuous", CONTINUOUS_COLUMNS)),
            categorical=tuple(raw.get("categorical", CATEGORICAL_COLUMNS)),
            treatment=raw.get("treatment", "treatment"),
            conversion=raw.get("conversion", "conversion"),
            visit=raw.get("visit", "visit"),
            exposure=raw.get("exposure", "exposure"),
            outcome=raw.get("outcome", OUTCOME_COLUMN),
        )


DEFAULT_SCHEMA = SchemaDescriptor()


# -- CSV I/O ---------------------------------------------------------------


def _open_text(path: Path, mode: str, use_gzip: bool) -> IO[str]:
    if use_gzip:
        return gzip.open(path, mode + "t", encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def _is_gzip(path: Path, flag: bool | None) -> bool:
    return path.suffix == ".gz" if flag is None else flag


def load_csv(
    path: str | Path,
    *,
    use_gzip: bool | None = None,
    schema: SchemaDescriptor = DEFAULT_SCHEMA,
) -> Dataset:
    """Load a dataset from the CSV schema, preserving row order.

    ``use_gzip=None`` infers compression from a ``.gz`` suffix. Missing
    columns raise :class:`SchemaError`; unparsable cells raise
    :class:`ParseError` with the offending data row number (1-based).
    Structural-constraint violations are counted and reported via a
    warning, not an error.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    with _open_text(path, "r", _is_gzip(path, use_gzip)) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None

        required = (
            list(schema.continuous)
            + list(schema.categorical)
            + [schema.treatment, schema.conversion, schema.visit, schema.exposure]
        )
        positions = {name: i for i, name in enumerate(header)}
        for name in required:
            if name not in positions:
                raise SchemaError(f"{path}: missing column {name!r}")
        cont_idx = [positions[c] for c in schema.continuous]
        cat_idx = [positions[c] for c in schema.categorical]
        flag_idx = [positions[c] for c in (schema.treatment, schema.conversion, schema.visit, schema.exposure)]
        out_idx = positions.get(schema.outcome)

        cont_chunks: list[np.ndarray] = []
        cat_chunks: list[np.ndarray] = []
        flag_chunks: list[np.ndarray] = []
        out_chunks: list[np.ndarray] = []
        cont_buf: list[list[float]] = []
        cat_buf: list[list[int]] = []
        flag_buf: list[list[int]] = []
        out_buf: list[float] = []

        def flush() -> None:
            if cont_buf:
                cont_chunks.append(np.array(cont_buf, dtype=np.float64))
                cat_chunks.append(np.array(cat_buf, dtype=np.int64))
                flag_chunks.append(np.array(flag_buf, dtype=np.int8))
                cont_buf.clear()
                cat_buf.clear()
                flag_buf.clear()
            if out_buf:
                out_chunks.append(np.array(out_buf, dtype=np.float64))
                out_buf.clear()

        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {rownum}: expected {len(header)} cells, got {len(row)}")
            try:
                cont_buf.append([float(row[i]) for i in cont_idx])
                cat_buf.append([int(row[i]) for i in cat_idx])
                flag_buf.append([int(row[i]) for i in flag_idx])
                if out_idx is not None:
                    out_buf.append(float(row[out_idx]))
            except ValueError as exc:
                raise ParseError(f"{path}: row {rownum}: {exc}") from None
            if len(cont_buf) >= _CHUNK_ROWS:
                flush()
        flush()

    if cont_chunks:
        cont = np.concatenate(cont_chunks)
        cats = np.concatenate(cat_chunks)
        flags = np.concatenate(flag_chunks)
        out = np.concatenate(out_chunks) if out_chunks else None
    else:
        cont = np.empty((0, 4))
        cats = np.empty((0, 8), dtype=np.int64)
        flags = np.empty((0, 4), dtype=np.int8)
        out = None

    dataset = Dataset(
        cont,
        cats,
        flags[:, 0],
        flags[:, 3],
        flags[:, 2],
        flags[:, 1],
        outcome=out,
    )
    report = validate_constraints(dataset)
    if not report.ok:
        warnings.warn(
            f"{path}: {report.control_exposed} control rows with exposure, "
            f"{report.conversion_without_visit} conversions without a visit",
            stacklevel=2,
        )
    return dataset


def write_csv(
    dataset: Dataset,
    path: str | Path,
    *,
    use_gzip: bool | None = None,
    schema: SchemaDescriptor = DEFAULT_SCHEMA,
) -> None:
    """Write the CSV schema with canonical (shortest round-trip) floats."""
    path = Path(path)
    header = (
        list(schema.continuous)
        + list(schema.categorical)
        + [schema.treatment, schema.conversion, schema.visit, schema.exposure]
    )
    if dataset.outcome is not None:
        header.append(schema.outcome)

    with _open_text(path, "w", _is_gzip(path, use_gzip)) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        cont = dataset.continuous
        cats = dataset.categorical
        for i in range(dataset.n):
            row = [repr(float(v)) for v in cont[i]]
            row += [str(int(v)) for v in cats[i]]
            row += [
                str(int(dataset.treatment[i])),
                str(int(dataset.conversion[i])),
                str(int(dataset.visit[i])),
                str(int(dataset.exposure[i])),
            ]
            if dataset.outcome is not None:
                row.append(repr(float(dataset.outcome[i])))
            writer.writerow(row)


# -- rebalancing -----------------------------------------------------------


def rebalance(tests: Sequence[Dataset], target_ratio: float, seed: int = 0) -> Dataset:
    """Down-sample each test's over-represented arm to a global treatment ratio.

    Within each test the arm that exceeds ``target_ratio`` is uniformly
    down-sampled so the per-test treated fraction lands on the target within
    one row; the kept rows are concatenated and deterministically shuffled.
    Each input must carry a distinct ``source_tag`` and both arms nonempty.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ValueError("target_ratio must be in (0, 1)")
    if not tests:
        raise ValueError("no tests given")
    tags = [t.source_tag for t in tests]
    if any(tag is None for tag in tags) or len(set(tags)) != len(tags):
        raise ValueError("each test needs a distinct source_tag")

    kept: list[Dataset] = []
    for i, test in enumerate(tests):
        treated = np.flatnonzero(test.treatment == 1)
        control = np.flatnonzero(test.treatment == 0)
        if len(treated) == 0 or len(control) == 0:
            raise RebalanceError(f"test {tags[i]!r}: an arm is empty, target unreachable")
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        ratio = len(treated) / test.n
        if ratio > target_ratio:
            n_keep = int(np.floor(len(control) * target_ratio / (1.0 - target_ratio)))
            treated = np.sort(rng.choice(treated, size=n_keep, replace=False))
        elif ratio < target_ratio:
            n_keep = int(np.floor(len(treated) * (1.0 - target_ratio) / target_ratio))
            control = np.sort(rng.choice(control, size=n_keep, replace=False))
        kept.append(test.subset(np.sort(np.concatenate([treated, control]))))

    merged = Dataset.concat(kept)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, len(tests)]))
    return merged.subset(shuffle_rng.permutation(merged.n))
