"""Frozen random-feature extraction, synthetic data, and CSV ingestion.

The extractor replaces a heavyweight pretrained backbone with a seeded
Gaussian random projection (entries scaled by 1/sqrt(input_dim)) followed
by an optional ReLU.  It is drawn once from its seed and never mutated, so
feature extraction is a pure function of (seed, input).

Datasets come in two flavors: RawDataset (inputs not yet projected) and
EncodedDataset (feature rows plus one-hot labels, keyed by sample id).
Both round-trip through a CSV format selected by header prefix:

    id,label,x0,...,x{m-1}   raw inputs
    id,label,f0,...,f{d-1}   pre-extracted features (extractor bypassed)

Labels are 0-based integers.  Parse errors report 1-based line numbers.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .core import FeatureBatch
from .errors import ContractViolation, InputError

NONLINEARITIES = ("relu", "identity")


def one_hot(label: int, class_count: int) -> np.ndarray:
    """Length-class_count vector with a single 1 at `label`."""
    if not 0 <= label < class_count:
        raise InputError(f"label {label} out of range [0, {class_count})")
    vec = np.zeros(class_count)
    vec[label] = 1.0
    return vec


@dataclass(frozen=True)
class FeatureExtractor:
    """Seeded, frozen map from raw input vectors to feature vectors."""

    seed: int
    input_dim: int
    feature_dim: int
    nonlinearity: str
    projection: np.ndarray

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ContractViolation(f"seed must fit in 64 unsigned bits: {self.seed}")
        if self.input_dim <= 0 or self.feature_dim <= 0:
            raise ContractViolation("input_dim and feature_dim must be positive")
        if self.nonlinearity not in NONLINEARITIES:
            raise ContractViolation(
                f"nonlinearity must be one of {NONLINEARITIES}, "
                f"got {self.nonlinearity!r}"
            )
        projection = np.array(self.projection, dtype=np.float64, order="C", copy=True)
        if projection.shape != (self.input_dim, self.feature_dim):
            raise ContractViolation(
                f"projection must be {self.input_dim}x{self.feature_dim}, "
                f"got {projection.shape}"
            )
        projection.setflags(write=False)
        object.__setattr__(self, "projection", projection)

    @classmethod
    def from_seed(
        cls,
        seed: int,
        input_dim: int,
        feature_dim: int,
        nonlinearity: str = "relu",
    ) -> "FeatureExtractor":
        """Draw the projection once from `seed` and freeze it."""
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        projection = rng.standard_normal((input_dim, feature_dim)) / math.sqrt(
            input_dim
        )
        return cls(seed, input_dim, feature_dim, nonlinearity, projection)

    def extract(self, x) -> np.ndarray:
        """Feature vector G(x @ projection) for a single input row."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.input_dim:
            raise ContractViolation(
                f"input length {x.shape[0]} does not match input_dim "
                f"{self.input_dim}"
            )
        z = x @ self.projection
        if self.nonlinearity == "relu":
            return np.maximum(z, 0.0)
        return z

    def extract_rows(self, inputs) -> np.ndarray:
        """extract() applied row by row (identical bits to per-row calls)."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2:
            raise ContractViolation(f"inputs must be 2-D, got ndim={inputs.ndim}")
        out = np.empty((inputs.shape[0], self.feature_dim))
        for row, x in enumerate(inputs):
            out[row] = self.extract(x)
        return out

    def projection_hash(self) -> str:
        return hashlib.sha256(self.projection.tobytes()).hexdigest()


@dataclass(frozen=True)
class RawDataset:
    """Inputs and integer labels, keyed by distinct non-negative ids."""

    sample_ids: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        ids = np.array(self.sample_ids, dtype=np.int64, copy=True).reshape(-1)
        inputs = np.array(self.inputs, dtype=np.float64, order="C", copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if inputs.ndim != 2:
            raise ContractViolation("inputs must be a 2-D array")
        n = inputs.shape[0]
        if ids.shape[0] != n or labels.shape[0] != n:
            raise ContractViolation("ids, inputs, and labels must have equal length")
        if n > 0:
            if np.unique(ids).size != n:
                raise ContractViolation("sample ids must be unique")
            if (ids < 0).any():
                raise ContractViolation("sample ids must be non-negative")
            if (labels < 0).any() or (labels >= self.class_count).any():
                raise ContractViolation(
                    f"labels must lie in [0, {self.class_count})"
                )
        for name, arr in (("sample_ids", ids), ("inputs", inputs), ("labels", labels)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-cluster dataset recipe: one seeded mean per class, per-sample
    noise scaled by cluster_spread."""

    class_count: int
    samples_per_class: int
    input_dim: int
    cluster_spread: float
    seed: int

    def __post_init__(self):
        if self.class_count <= 0 or self.samples_per_class <= 0 or self.input_dim <= 0:
            raise ContractViolation("all synthetic-spec counts must be positive")
        if self.cluster_spread < 0:
            raise ContractViolation("cluster_spread must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ContractViolation(f"seed must fit in 64 unsigned bits: {self.seed}")


def generate_synthetic(spec: SyntheticSpec, draw: int = 0) -> RawDataset:
    """Deterministic Gaussian clusters for `spec`.

    Class means depend only on spec.seed, so different `draw` values yield
    fresh samples from the same distribution (held-out test draws).  Ids
    are disjoint across draws.
    """
    if draw < 0:
        raise ContractViolation(f"draw must be non-negative, got {draw}")
    n = spec.class_count * spec.samples_per_class
    rng_means = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(0,))
    )
    rng_noise = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(1, draw))
    )
    means = rng_means.standard_normal((spec.class_count, spec.input_dim))
    noise = rng_noise.standard_normal((n, spec.input_dim))
    inputs = np.repeat(means, spec.samples_per_class, axis=0)
    inputs = inputs + spec.cluster_spread * noise
    labels = np.repeat(np.arange(spec.class_count), spec.samples_per_class)
    ids = np.arange(n, dtype=np.int64) + draw * n
    return RawDataset(ids, inputs, labels, spec.class_count)


@dataclass(frozen=True)
class EncodedDataset:
    """Feature rows with one-hot labels, keyed by distinct sample ids."""

    sample_ids: np.ndarray
    features: np.ndarray
    label_indices: np.ndarray
    one_hots: np.ndarray
    class_count: int

    def __post_init__(self):
        ids = np.array(self.sample_ids, dtype=np.int64, copy=True).reshape(-1)
        features = np.array(self.features, dtype=np.float64, order="C", copy=True)
        labels = np.array(self.label_indices, dtype=np.int64, copy=True).reshape(-1)
        one_hots = np.array(self.one_hots, dtype=np.float64, order="C", copy=True)
        if features.ndim != 2 or one_hots.ndim != 2:
            raise ContractViolation("features and one_hots must be 2-D arrays")
        n = features.shape[0]
        if ids.shape[0] != n or labels.shape[0] != n or one_hots.shape[0] != n:
            raise ContractViolation("all row arrays must have equal length")
        if one_hots.shape[1] != self.class_count:
            raise ContractViolation(
                f"one_hots width {one_hots.shape[1]} does not match class_count "
                f"{self.class_count}"
            )
        if n > 0:
            if np.unique(ids).size != n:
                raise ContractViolation("sample ids must be unique")
            if (ids < 0).any():
                raise ContractViolation("sample ids must be non-negative")
            if (labels < 0).any() or (labels >= self.class_count).any():
                raise ContractViolation(f"labels must lie in [0, {self.class_count})")
            expected = np.zeros_like(one_hots)
            expected[np.arange(n), labels] = 1.0
            if not np.array_equal(one_hots, expected):
                raise ContractViolation("one_hots must match label_indices exactly")
        for name, arr in (
            ("sample_ids", ids),
            ("features", features),
            ("label_indices", labels),
            ("one_hots", one_hots),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_features(cls, sample_ids, features, label_indices, class_count):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(label_indices, dtype=np.int64).reshape(-1)
        if labels.size > 0 and ((labels < 0).any() or (labels >= class_count).any()):
            raise ContractViolation(f"labels must lie in [0, {class_count})")
        one_hots = np.zeros((features.shape[0], class_count))
        if labels.size > 0:
            one_hots[np.arange(labels.size), labels] = 1.0
        return cls(sample_ids, features, labels, one_hots, class_count)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "EncodedDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return EncodedDataset(
            self.sample_ids[indices],
            self.features[indices],
            self.label_indices[indices],
            self.one_hots[indices],
            self.class_count,
        )

    def subset_by_ids(self, ids) -> "EncodedDataset":
        """Rows whose id is in `ids`, in dataset order.  Unknown ids are a
        contract violation."""
        wanted = set(int(i) for i in ids)
        unknown = wanted - set(self.sample_ids.tolist())
        if unknown:
            raise ContractViolation(
                f"ids not present in dataset: {sorted(unknown)[:5]}"
                + ("..." if len(unknown) > 5 else "")
            )
        mask = np.isin(self.sample_ids, np.fromiter(wanted, dtype=np.int64))
        return self.subset(np.nonzero(mask)[0])

    def to_batch(self) -> FeatureBatch:
        return FeatureBatch(self.features, self.one_hots, self.sample_ids)

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(self.class_count).encode())
        for arr in (self.sample_ids, self.features, self.label_indices):
            digest.update(arr.tobytes())
        return digest.hexdigest()


def encode(
    extractor: FeatureExtractor, raw: RawDataset, class_count: int | None = None
) -> EncodedDataset:
    """Extract every raw row, preserving order and ids.

    Errors from extraction or label encoding are re-raised with the
    offending row index attached.
    """
    if raw.input_dim != extractor.input_dim and len(raw) > 0:
        raise ContractViolation(
            f"dataset input_dim {raw.input_dim} does not match extractor "
            f"input_dim {extractor.input_dim}"
        )
    n_classes = raw.class_count if class_count is None else class_count
    features = np.empty((len(raw), extractor.feature_dim))
    one_hots = np.empty((len(raw), n_classes))
    for row in range(len(raw)):
        try:
            features[row] = extractor.extract(raw.inputs[row])
            one_hots[row] = one_hot(int(raw.labels[row]), n_classes)
        except (ContractViolation, InputError) as exc:
            raise type(exc)(f"row {row}: {exc}") from exc
    return EncodedDataset(
        raw.sample_ids, features, raw.labels, one_hots, n_classes
    )


def _format_float(value: float) -> str:
    return repr(float(value))


def write_csv(path, dataset) -> None:
    """Write a RawDataset (x columns) or EncodedDataset (f columns)."""
    if isinstance(dataset, RawDataset):
        prefix, values, labels = "x", dataset.inputs, dataset.labels
    elif isinstance(dataset, EncodedDataset):
        prefix, values, labels = "f", dataset.features, dataset.label_indices
    else:
        raise ContractViolation(f"cannot write {type(dataset).__name__} as CSV")
    width = values.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "label"] + [f"{prefix}{k}" for k in range(width)])
        for row in range(values.shape[0]):
            writer.writerow(
                [int(dataset.sample_ids[row]), int(labels[row])]
                + [_format_float(v) for v in values[row]]
            )


def load_csv(path, class_count: int | None = None):
    """Load a dataset CSV; the header's 3rd column picks the mode.

    Returns an EncodedDataset for `f`-prefixed columns or a RawDataset for
    `x`-prefixed ones.  class_count defaults to max(label) + 1.
    """
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("line 1: file is empty, expected a header row")
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise InputError(
                "line 1: header must start with 'id,label' followed by "
                "f0..f{d-1} or x0..x{m-1}"
            )
        prefix = header[2][:1]
        if prefix not in ("f", "x"):
            raise InputError(
                f"line 1: data columns must start with 'f' or 'x', got "
                f"{header[2]!r}"
            )
        width = len(header) - 2
        expected = [f"{prefix}{k}" for k in range(width)]
        if header[2:] != expected:
            raise InputError(
                f"line 1: data columns must be exactly {prefix}0..{prefix}{width - 1}"
            )
        ids, labels, rows = [], [], []
        seen = {}
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != width + 2:
                raise InputError(
                    f"line {lineno}: expected {width + 2} fields, got {len(record)}"
                )
            try:
                sample_id = int(record[0])
                label = int(record[1])
                values = [float(v) for v in record[2:]]
            except ValueError as exc:
                raise InputError(f"line {lineno}: {exc}") from exc
            if sample_id < 0:
                raise InputError(f"line {lineno}: id must be non-negative")
            if label < 0:
                raise InputError(f"line {lineno}: label must be non-negative")
            if sample_id in seen:
                raise InputError(
                    f"line {lineno}: duplicate id {sample_id} "
                    f"(first seen on line {seen[sample_id]})"
                )
            seen[sample_id] = lineno
            ids.append(sample_id)
            labels.append(label)
            rows.append(values)
    n_classes = (max(labels) + 1 if labels else 0) if class_count is None else class_count
    if labels and max(labels) >= n_classes:
        raise InputError(
            f"label {max(labels)} out of range for class_count {n_classes}"
        )
    values = np.array(rows) if rows else np.zeros((0, width))
    if prefix == "x":
        return RawDataset(np.array(ids, dtype=np.int64), values, labels, n_classes)
    return EncodedDataset.from_features(
        np.array(ids, dtype=np.int64), values, labels, n_classes
    )
