"""Request-stream driver: learn phases, forget phases, timing, verification.

A run starts from the empty-state pair (W = 0, T = (gamma I)^(-1)) or from a
restored snapshot, absorbs the learn batches in order, then processes the
forget batches in order, timing only the update calls (verification is
oracle overhead and is excluded).  The harness adds no mathematics of its
own: every request is exactly one tracking update plus one weight update
from the core module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_GAMMA,
    AnalyticModel,
    FeatureBatch,
    TrackingMatrix,
    joint_fit,
    learn_update,
    unlearn_model,
    unlearn_tracking,
)
from .errors import (
    ContractViolation,
    InputError,
    RidgeForgetError,
    RunAbortedError,
)
from .features import EncodedDataset, FeatureExtractor
from .verify import GapReport, SampleLedger, gap_report


@dataclass(frozen=True)
class StreamMeta:
    seed: int
    learn_chunks: int
    forget_requests: int
    forget_total: int
    learn_sizes: tuple
    forget_sizes: tuple


@dataclass(frozen=True)
class RequestStream:
    """Ordered learn batches followed by ordered forget batches."""

    learn_requests: tuple
    forget_requests: tuple
    meta: StreamMeta | None = None

    def __post_init__(self):
        object.__setattr__(self, "learn_requests", tuple(self.learn_requests))
        object.__setattr__(self, "forget_requests", tuple(self.forget_requests))

    def batch_dims(self):
        """(feature_dim, class_count) shared by every batch, or None if the
        stream has no batches."""
        dims = None
        for batch in self.learn_requests + self.forget_requests:
            here = (batch.feature_dim, batch.class_count)
            if dims is None:
                dims = here
            elif here != dims:
                raise ContractViolation(
                    f"batches disagree on dimensions: {dims} vs {here}"
                )
        return dims

    def validate(self, already_learned=frozenset()) -> None:
        """Enforce stream invariants before any request executes."""
        self.batch_dims()
        learned = set(int(i) for i in already_learned)
        for batch in self.learn_requests:
            ids = set(batch.sample_ids.tolist())
            overlap = ids & learned
            if overlap:
                raise ContractViolation(
                    f"learn batches repeat ids: {sorted(overlap)[:5]}"
                )
            learned |= ids
        forgotten = set()
        for batch in self.forget_requests:
            ids = set(batch.sample_ids.tolist())
            overlap = ids & forgotten
            if overlap:
                raise ContractViolation(
                    f"forget batches overlap: {sorted(overlap)[:5]}"
                )
            unlearned_ids = ids - learned
            if unlearned_ids:
                raise ContractViolation(
                    f"forget ids never learned: {sorted(unlearned_ids)[:5]}"
                )
            forgotten |= ids


@dataclass(frozen=True)
class RequestRecord:
    kind: str  # "learn" | "forget"
    request_index: int  # 1-based within its kind
    batch_size: int
    wall_time_seconds: float
    report: GapReport | None = None


@dataclass
class RunRecord:
    per_request: list = field(default_factory=list)
    cumulative_time_seconds: float = 0.0
    config: dict = field(default_factory=dict)

    def reports(self):
        return [r.report for r in self.per_request if r.report is not None]

    def forget_time_seconds(self) -> float:
        return sum(
            r.wall_time_seconds for r in self.per_request if r.kind == "forget"
        )


@dataclass(frozen=True)
class RunOptions:
    verify_every: int = 0
    collect_timing: bool = True


@dataclass
class EngineState:
    """Everything a run needs to continue: model, tracking matrix, ledger,
    and the extractor recipe (if features come from raw inputs)."""

    model: AnalyticModel
    tracking: TrackingMatrix
    ledger: SampleLedger
    extractor: FeatureExtractor | None = None

    def __post_init__(self):
        if self.model.gamma != self.tracking.gamma:
            raise ContractViolation("model and tracking gamma must match")
        if self.model.feature_dim != self.tracking.feature_dim:
            raise ContractViolation("model and tracking dimensions must match")

    @property
    def gamma(self) -> float:
        return self.model.gamma

    @classmethod
    def fresh(
        cls,
        feature_dim: int,
        class_count: int,
        gamma: float = DEFAULT_GAMMA,
        extractor: FeatureExtractor | None = None,
    ) -> "EngineState":
        if class_count <= 0:
            raise ContractViolation(f"class_count must be > 0, got {class_count}")
        model = AnalyticModel(np.zeros((feature_dim, class_count)), gamma)
        return cls(model, TrackingMatrix.fresh(feature_dim, gamma),
                   SampleLedger(), extractor)


def build_stream(
    dataset: EncodedDataset,
    learn_chunks: int,
    forget_total: int,
    forget_requests: int,
    seed: int,
) -> RequestStream:
    """Partition the dataset into learn chunks, then sample a forget pool
    and split it into disjoint forget batches.

    Both partitions are deterministic under `seed`.  Uneven splits give
    their remainder to the earliest batches.
    """
    if learn_chunks < 1:
        raise InputError(f"learn_chunks must be >= 1, got {learn_chunks}")
    if forget_requests < 1:
        raise InputError(f"forget_requests must be >= 1, got {forget_requests}")
    if forget_total < 0 or forget_total > len(dataset):
        raise InputError(
            f"forget_total must lie in [0, {len(dataset)}], got {forget_total}"
        )
    rng_learn = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(0,))
    )
    order = rng_learn.permutation(len(dataset))
    learn_batches = [
        dataset.subset(chunk).to_batch()
        for chunk in np.array_split(order, learn_chunks)
    ]
    rng_forget = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(1,))
    )
    pool = rng_forget.choice(len(dataset), size=forget_total, replace=False)
    forget_batches = [
        dataset.subset(part).to_batch()
        for part in np.array_split(pool, forget_requests)
    ]
    meta = StreamMeta(
        seed=seed,
        learn_chunks=learn_chunks,
        forget_requests=forget_requests,
        forget_total=forget_total,
        learn_sizes=tuple(len(b) for b in learn_batches),
        forget_sizes=tuple(len(b) for b in forget_batches),
    )
    return RequestStream(tuple(learn_batches), tuple(forget_batches), meta)


def build_forget_stream(
    dataset: EncodedDataset,
    eligible_ids,
    forget_total: int,
    forget_requests: int,
    seed: int,
) -> RequestStream:
    """Forget-only stream drawn from `eligible_ids` (resume path)."""
    eligible = np.array(sorted(int(i) for i in eligible_ids), dtype=np.int64)
    if forget_requests < 1:
        raise InputError(f"forget_requests must be >= 1, got {forget_requests}")
    if forget_total < 0 or forget_total > eligible.size:
        raise InputError(
            f"forget_total must lie in [0, {eligible.size}], got {forget_total}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    pool = rng.choice(eligible, size=forget_total, replace=False)
    forget_batches = [
        dataset.subset_by_ids(part).to_batch()
        for part in np.array_split(pool, forget_requests)
    ]
    meta = StreamMeta(
        seed=seed,
        learn_chunks=0,
        forget_requests=forget_requests,
        forget_total=forget_total,
        learn_sizes=(),
        forget_sizes=tuple(len(b) for b in forget_batches),
    )
    return RequestStream((), tuple(forget_batches), meta)


def run_stream(
    stream: RequestStream,
    gamma: float = DEFAULT_GAMMA,
    options: RunOptions | None = None,
    *,
    initial_state: EngineState | None = None,
    dataset: EncodedDataset | None = None,
    test_rows: EncodedDataset | None = None,
    feature_dim: int | None = None,
    class_count: int | None = None,
):
    """Execute every learn request, then every forget request, in order.

    Returns (RunRecord, EngineState).  When options.verify_every = v > 0, a
    gap report against the retrained oracle is attached to every v-th
    forget request (requires `dataset` and `test_rows`).  Wall time covers
    only the tracking/weight update calls.  A failing request aborts the
    run with its index; the returned-by-reference state stays at the last
    completed request.
    """
    options = options or RunOptions()
    if options.verify_every < 0:
        raise InputError(f"verify_every must be >= 0, got {options.verify_every}")
    if options.verify_every > 0 and (dataset is None or test_rows is None):
        raise InputError("verification requires dataset and test_rows")
    dims = stream.batch_dims()
    if initial_state is not None:
        if initial_state.gamma != gamma:
            raise ContractViolation(
                f"gamma {gamma!r} does not match state gamma "
                f"{initial_state.gamma!r}"
            )
        state = initial_state
    else:
        if dims is None:
            if feature_dim is None or class_count is None:
                raise ContractViolation(
                    "empty stream needs explicit feature_dim and class_count"
                )
            dims = (feature_dim, class_count)
        state = EngineState.fresh(dims[0], dims[1], gamma)
    if dims is not None and (
        dims[0] != state.model.feature_dim or dims[1] != state.model.class_count
    ):
        raise ContractViolation(
            f"stream dims {dims} do not match state dims "
            f"({state.model.feature_dim}, {state.model.class_count})"
        )
    stream.validate(already_learned=state.ledger.learned_ids)

    record = RunRecord(
        config={
            "gamma": gamma,
            "feature_dim": state.model.feature_dim,
            "class_count": state.model.class_count,
            "learn_requests": len(stream.learn_requests),
            "forget_requests": len(stream.forget_requests),
            "verify_every": options.verify_every,
            "seed": stream.meta.seed if stream.meta else None,
        }
    )

    for index, batch in enumerate(stream.learn_requests, start=1):
        try:
            start = time.perf_counter() if options.collect_timing else 0.0
            new_tracking, new_model = learn_update(state.tracking, state.model, batch)
            elapsed = time.perf_counter() - start if options.collect_timing else 0.0
            state.ledger.record_learn(batch.sample_ids)
        except RidgeForgetError as exc:
            raise RunAbortedError("learn", index, exc) from exc
        state.tracking, state.model = new_tracking, new_model
        record.per_request.append(RequestRecord("learn", index, len(batch), elapsed))
        record.cumulative_time_seconds += elapsed

    for index, batch in enumerate(stream.forget_requests, start=1):
        try:
            start = time.perf_counter() if options.collect_timing else 0.0
            new_tracking = unlearn_tracking(state.tracking, batch)
            new_model = unlearn_model(state.model, new_tracking, batch)
            elapsed = time.perf_counter() - start if options.collect_timing else 0.0
            state.ledger.record_forget(batch.sample_ids)
        except RidgeForgetError as exc:
            raise RunAbortedError("forget", index, exc) from exc
        state.tracking, state.model = new_tracking, new_model
        report = None
        if options.verify_every > 0 and index % options.verify_every == 0:
            report = gap_report(state.model, dataset, state.ledger, test_rows, index)
        record.per_request.append(
            RequestRecord("forget", index, len(batch), elapsed, report)
        )
        record.cumulative_time_seconds += elapsed

    return record, state


@dataclass(frozen=True)
class BenchRow:
    retained_size: int
    forget_size: int
    feature_dim: int
    repeats: int
    mean_seconds: float
    std_seconds: float


def bench_scaling(
    retained_sizes,
    forget_size: int,
    feature_dim: int,
    repeats: int,
    gamma: float = DEFAULT_GAMMA,
    seed: int = 0,
    class_count: int = 2,
):
    """Mean/std wall time of one forget request at several retained sizes.

    Each measurement starts from the same fitted immutable state for its
    size and removes a freshly sampled batch, so the retained size is
    exactly N for every repeat.  Per-request cost must not grow with N:
    the update never touches retained rows.
    """
    if repeats < 0:
        raise InputError(f"repeats must be >= 0, got {repeats}")
    if repeats == 0:
        return []
    if forget_size < 1:
        raise InputError(f"forget_size must be >= 1, got {forget_size}")
    rows = []
    for size in retained_sizes:
        if size < forget_size:
            raise InputError(
                f"retained size {size} is smaller than forget batch {forget_size}"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(int(size),))
        )
        features = rng.standard_normal((size, feature_dim))
        labels = np.zeros((size, class_count))
        labels[np.arange(size), rng.integers(0, class_count, size)] = 1.0
        batch = FeatureBatch(features, labels, np.arange(size, dtype=np.int64))
        model, tracking = joint_fit(batch, gamma)

        def one_request():
            picked = rng.choice(size, size=forget_size, replace=False)
            forget = FeatureBatch(
                features[picked], labels[picked], np.asarray(picked, dtype=np.int64)
            )
            start = time.perf_counter()
            updated = unlearn_tracking(tracking, forget)
            unlearn_model(model, updated, forget)
            return time.perf_counter() - start

        one_request()  # warm up BLAS threads before measuring
        times = np.array([one_request() for _ in range(repeats)])
        rows.append(
            BenchRow(
                retained_size=int(size),
                forget_size=forget_size,
                feature_dim=feature_dim,
                repeats=repeats,
                mean_seconds=float(times.mean()),
                std_seconds=float(times.std()),
            )
        )
    return rows
