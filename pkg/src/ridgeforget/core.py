"""Closed-form ridge classifier with exact recursive learning and removal.

The model is the minimizer of   sum_j ||y_j - f_j W||^2 + gamma ||W||^2
over the currently retained rows.  Alongside the weight matrix W we keep a
tracking matrix T, the inverse of the regularized Gram matrix of the
retained features.  T is the only statistic needed to add or remove a batch
of rows without ever touching the rest of the data:

  add    (F, Y):  T' = T - T F^T (I + F T F^T)^(-1) F T
                  W' = W - T' F^T (F W - Y)
  remove (F, Y):  T' = T + T F^T (I - F T F^T)^(-1) F T
                  W' = (I + T' F^T F) W - T' F^T Y

Both recursions reproduce the joint closed-form fit on the surviving rows
to numerical precision.  All arithmetic is float64; T is re-symmetrized
after every update to bound drift over long request streams.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import (
    LinAlgWarning,
    cho_factor,
    cho_solve,
    get_lapack_funcs,
    lu_factor,
    lu_solve,
)

from .errors import (
    ContractViolation,
    InputError,
    SingularityError,
    StateIntegrityError,
    UnlearnabilityError,
)

# Condition-estimate ceiling for the small cores (I +/- F T F^T) and the
# Woodbury inner system.  Above this the solve is meaningless in float64.
COND_LIMIT = 1e12

# Default ridge strength; any positive value works, this one keeps the
# normal equations comfortably conditioned at desk scale.
DEFAULT_GAMMA = 1e-3

# Allowed relative asymmetry of a tracking matrix.
SYMMETRY_RTOL = 1e-10


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2:
        raise ContractViolation(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AnalyticModel:
    """Weight matrix of the closed-form classifier plus its ridge strength.

    weights has shape (feature_dim, class_count); scores are row_features @
    weights.  gamma > 0 keeps the normal-equations matrix positive definite
    and must match the paired tracking matrix.
    """

    weights: np.ndarray
    gamma: float

    def __post_init__(self):
        weights = _as_matrix(self.weights, "weights")
        if not np.isfinite(weights).all():
            raise ContractViolation("model weights must be finite")
        if not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ContractViolation(f"gamma must be > 0, got {self.gamma!r}")
        object.__setattr__(self, "weights", _freeze(weights))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class TrackingMatrix:
    """Inverse of (retained Gram + gamma I), the statistic driving updates.

    Square, symmetric (enforced to SYMMETRY_RTOL), and positive definite
    whenever it tracks a valid retained set.  gamma must equal the paired
    model's gamma.
    """

    matrix: np.ndarray
    gamma: float

    def __post_init__(self):
        matrix = _as_matrix(self.matrix, "tracking matrix")
        if matrix.shape[0] != matrix.shape[1]:
            raise ContractViolation(
                f"tracking matrix must be square, got {matrix.shape}"
            )
        if not np.isfinite(matrix).all():
            raise ContractViolation("tracking matrix must be finite")
        scale = max(float(np.linalg.norm(matrix)), 1e-300)
        asym = float(np.linalg.norm(matrix - matrix.T)) / scale
        if asym > SYMMETRY_RTOL:
            raise ContractViolation(
                f"tracking matrix asymmetry {asym:.3e} exceeds {SYMMETRY_RTOL:.0e}"
            )
        if not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ContractViolation(f"gamma must be > 0, got {self.gamma!r}")
        object.__setattr__(self, "matrix", _freeze(matrix))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def feature_dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def fresh(cls, feature_dim: int, gamma: float) -> "TrackingMatrix":
        """Tracking matrix of the empty retained set: (gamma I)^(-1)."""
        if feature_dim <= 0:
            raise ContractViolation(f"feature_dim must be > 0, got {feature_dim}")
        if gamma <= 0:
            raise ContractViolation(f"gamma must be > 0, got {gamma!r}")
        return cls(np.eye(feature_dim) / gamma, gamma)


@dataclass(frozen=True)
class FeatureBatch:
    """A stack of (feature row, one-hot label row, sample id) triples.

    Empty batches (n = 0) are legal and act as identity inputs to every
    update.  Ids must be distinct non-negative integers; each label row
    must contain exactly one 1 with all other entries 0.
    """

    features: np.ndarray
    labels: np.ndarray
    sample_ids: np.ndarray

    def __post_init__(self):
        features = _as_matrix(self.features, "features")
        labels = _as_matrix(self.labels, "labels")
        ids = np.array(self.sample_ids, dtype=np.int64, copy=True).reshape(-1)
        n = features.shape[0]
        if labels.shape[0] != n or ids.shape[0] != n:
            raise ContractViolation(
                f"row counts disagree: features {n}, labels {labels.shape[0]}, "
                f"ids {ids.shape[0]}"
            )
        if n > 0:
            is_binary = np.logical_or(labels == 0.0, labels == 1.0).all()
            if not is_binary or not ((labels == 1.0).sum(axis=1) == 1).all():
                raise ContractViolation("each label row must be one-hot")
            if np.unique(ids).size != n:
                raise ContractViolation("sample ids must be distinct within a batch")
            if (ids < 0).any():
                raise ContractViolation("sample ids must be non-negative")
        object.__setattr__(self, "features", _freeze(features))
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "sample_ids", _freeze(ids))

    @classmethod
    def empty(cls, feature_dim: int, class_count: int) -> "FeatureBatch":
        return cls(
            np.zeros((0, feature_dim)),
            np.zeros((0, class_count)),
            np.zeros(0, dtype=np.int64),
        )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        return self.labels.shape[1]

    def permuted(self, order) -> "FeatureBatch":
        """Same batch with rows reordered (contents identical as a set)."""
        order = np.asarray(order)
        return FeatureBatch(
            self.features[order], self.labels[order], self.sample_ids[order]
        )


def _check_batch_dims(batch: FeatureBatch, feature_dim: int, class_count=None):
    if batch.feature_dim != feature_dim:
        raise ContractViolation(
            f"batch feature dim {batch.feature_dim} does not match {feature_dim}"
        )
    if class_count is not None and batch.class_count != class_count:
        raise ContractViolation(
            f"batch class count {batch.class_count} does not match {class_count}"
        )


def _check_pair(tracking: TrackingMatrix, model: AnalyticModel):
    if tracking.feature_dim != model.feature_dim:
        raise ContractViolation(
            f"tracking dim {tracking.feature_dim} does not match model dim "
            f"{model.feature_dim}"
        )
    if tracking.gamma != model.gamma:
        raise ContractViolation(
            f"tracking gamma {tracking.gamma!r} does not match model gamma "
            f"{model.gamma!r}"
        )


def _symmetrized(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def _solve_guarded(
    core: np.ndarray, rhs: np.ndarray, name: str, error_cls, scale_floor: float = 0.0
):
    """Solve core @ X = rhs via pivoted LU with a 1-norm condition estimate.

    Raises error_cls naming `name` when the core is singular or its
    condition estimate exceeds COND_LIMIT.  `scale_floor` anchors the
    estimate: the removal core is I minus a PSD part, so its natural scale
    is 1, and a core that cancelled down to ~eps must count as singular
    even though its own relative conditioning can look perfect.
    """
    anorm = np.linalg.norm(core, 1)
    with warnings.catch_warnings():
        # conditioning is handled explicitly below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu_piv = lu_factor(core, check_finite=False)
    gecon = get_lapack_funcs("gecon", (core,))
    rcond, info = gecon(lu_piv[0], anorm)
    if info == 0 and np.isfinite(rcond) and rcond > 0 and anorm > 0:
        inverse_norm = 1.0 / (rcond * anorm)
        estimate = max(anorm, scale_floor) * inverse_norm
    else:
        estimate = np.inf
    if estimate > COND_LIMIT:
        raise error_cls(
            f"{name} is singular or ill-conditioned "
            f"(condition estimate {estimate:.3e})"
        )
    return lu_solve(lu_piv, rhs, check_finite=False)


def objective_value(model: AnalyticModel, batch: FeatureBatch) -> float:
    """Regularized squared error of `model` on `batch`:
    sum_j ||y_j - f_j W||^2 + gamma ||W||^2."""
    _check_batch_dims(batch, model.feature_dim, model.class_count)
    residual = batch.labels - batch.features @ model.weights
    return float(np.sum(residual * residual) + model.gamma * np.sum(model.weights**2))


def joint_fit(batch: FeatureBatch, gamma: float):
    """Fit the classifier on `batch` from scratch.

    Returns (model, tracking) with
      weights  = (F^T F + gamma I)^(-1) F^T Y
      tracking = (F^T F + gamma I)^(-1)
    the unique global minimizer of objective_value over the batch.
    """
    if not gamma > 0:
        raise ContractViolation(f"gamma must be > 0, got {gamma!r}")
    if not np.isfinite(batch.features).all():
        raise InputError("batch features contain non-finite values")
    d_f = batch.feature_dim
    gram = batch.features.T @ batch.features + gamma * np.eye(d_f)
    factor = cho_factor(gram, check_finite=False)
    tracking = _symmetrized(cho_solve(factor, np.eye(d_f), check_finite=False))
    weights = cho_solve(factor, batch.features.T @ batch.labels, check_finite=False)
    return AnalyticModel(weights, gamma), TrackingMatrix(tracking, gamma)


def woodbury_update(
    a_inv: np.ndarray, b: np.ndarray, c: np.ndarray, d_mat: np.ndarray
) -> np.ndarray:
    """(A + B C D)^(-1) from A^(-1), without ever forming A.

    Computes A^(-1) - A^(-1) B (C^(-1) + D A^(-1) B)^(-1) D A^(-1).  The
    m x m inner system is factorized and condition-checked; a singular or
    ill-conditioned sub-matrix raises SingularityError naming it.
    """
    a_inv = np.asarray(a_inv, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d_mat = np.asarray(d_mat, dtype=np.float64)
    d = a_inv.shape[0]
    m = c.shape[0]
    if a_inv.shape != (d, d) or c.shape != (m, m):
        raise ContractViolation("A^(-1) and C must be square")
    if b.shape != (d, m) or d_mat.shape != (m, d):
        raise ContractViolation(
            f"B must be {d}x{m} and D {m}x{d}, got {b.shape} and {d_mat.shape}"
        )
    c_inv = _solve_guarded(c, np.eye(m), "C", SingularityError)
    a_inv_b = a_inv @ b
    core = c_inv + d_mat @ a_inv_b
    correction = a_inv_b @ _solve_guarded(
        core, d_mat @ a_inv, "core (C^-1 + D A^-1 B)", SingularityError
    )
    return a_inv - correction


def learn_update(tracking: TrackingMatrix, model: AnalyticModel, batch: FeatureBatch):
    """Absorb a batch of new rows into (tracking, model).

    T' = T - T F^T (I + F T F^T)^(-1) F T
    W' = W - T' F^T (F W - Y)

    and (T', W') equal the joint fit over everything learned so far.  An
    empty batch is the identity.  Callers must guarantee the batch ids were
    never learned before (the harness ledger enforces this).
    """
    _check_pair(tracking, model)
    _check_batch_dims(batch, model.feature_dim, model.class_count)
    if len(batch) == 0:
        return tracking, model
    f = batch.features
    try:
        if len(batch) >= model.feature_dim:
            # Dual form of the same update, T' = L (I + L^T F^T F L)^(-1) L^T
            # with T = L L^T.  The core is a sum of PSD terms, so tall
            # batches avoid the cancellation the n x n form suffers when T
            # is still close to its (gamma I)^(-1) start; it is also the
            # smaller system.
            chol = np.linalg.cholesky(tracking.matrix)
            core = np.eye(model.feature_dim) + chol.T @ (f.T @ f) @ chol
            factor = cho_factor(core, check_finite=False)
            new_t = _symmetrized(chol @ cho_solve(factor, chol.T, check_finite=False))
        else:
            t_ft = tracking.matrix @ f.T
            core = np.eye(len(batch)) + f @ t_ft
            factor = cho_factor(core, check_finite=False)
            new_t = _symmetrized(
                tracking.matrix
                - t_ft @ cho_solve(factor, t_ft.T, check_finite=False)
            )
    except np.linalg.LinAlgError as exc:
        # I plus a PSD matrix (and PD T) cannot fail for valid state.
        raise StateIntegrityError(
            f"learn core failed to factorize: {exc}"
        ) from exc
    new_tracking = TrackingMatrix(new_t, tracking.gamma)
    new_w = model.weights - new_t @ f.T @ (f @ model.weights - batch.labels)
    return new_tracking, AnalyticModel(new_w, model.gamma)


def unlearn_tracking(tracking: TrackingMatrix, forget: FeatureBatch) -> TrackingMatrix:
    """Remove a batch of previously learned rows from the tracking matrix.

    T' = T + T F^T (I - F T F^T)^(-1) F T, which equals the inverse of the
    regularized Gram over the surviving rows.  An empty batch is the
    identity.  A singular or ill-conditioned removal core means the rows
    were not in the tracked Gram (or cancellation won); nothing is mutated
    in that case.
    """
    _check_batch_dims(forget, tracking.feature_dim)
    if len(forget) == 0:
        return tracking
    f = forget.features
    t_ft = tracking.matrix @ f.T
    core = np.eye(len(forget)) - f @ t_ft
    solved = _solve_guarded(
        core, t_ft.T, "removal core (I - F T F^T)", UnlearnabilityError,
        scale_floor=1.0,
    )
    new_t = _symmetrized(tracking.matrix + t_ft @ solved)
    return TrackingMatrix(new_t, tracking.gamma)


def unlearn_model(
    model: AnalyticModel, tracking_after: TrackingMatrix, forget: FeatureBatch
) -> AnalyticModel:
    """Remove a batch's influence from the weights.

    W' = (I + T' F^T F) W - T' F^T Y, with T' the tracking matrix ALREADY
    updated for this forget batch.  The first term amplifies what the
    surviving rows contributed; the second subtracts what the forgotten
    rows contributed.  W' equals the joint fit on the surviving rows.
    """
    _check_pair(tracking_after, model)
    _check_batch_dims(forget, model.feature_dim, model.class_count)
    if len(forget) == 0:
        return model
    f = forget.features
    amplified = model.weights + tracking_after.matrix @ (f.T @ (f @ model.weights))
    removed = tracking_after.matrix @ (f.T @ forget.labels)
    return AnalyticModel(amplified - removed, model.gamma)


def predict(model: AnalyticModel, features: np.ndarray):
    """Scores (features @ W) and argmax classes, ties to the lowest index."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ContractViolation(
            f"features must be n x {model.feature_dim}, got {features.shape}"
        )
    scores = features @ model.weights
    classes = np.argmax(scores, axis=1)
    return scores, classes
