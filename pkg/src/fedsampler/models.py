"""Local client objectives and the plain SGD stepping primitive.

Two model families are supported:

* ``regression`` -- the log-quadratic regression loss
  ``(y - log((A*x - b)^2 / 2))^2`` with fixed per-client constants
  ``(A, b)`` and learnable parameter vector ``x`` (scalar by default,
  applied elementwise for d > 1).
* ``logistic`` -- multinomial logistic regression with bias terms and
  standard cross-entropy.

All functions are pure.  Batch reductions run in a canonical sample
order (lexicographic over target then features) so results are
bit-identical under batch permutation and caller parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SINGULARITY_EPS = 1e-12

REGRESSION = "regression"
LOGISTIC = "logistic"


class SingularModelError(ValueError):
    """Raised when A*x - b is within SINGULARITY_EPS of zero (log of zero)."""


@dataclass(frozen=True)
class ModelSpec:
    """Model family descriptor.

    ``dimension`` is the parameter dimension for regression and the
    feature dimension for logistic models.
    """

    kind: str
    dimension: int = 1
    n_classes: int = 0

    def __post_init__(self):
        if self.kind not in (REGRESSION, LOGISTIC):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == LOGISTIC and self.n_classes < 2:
            raise ValueError("logistic model needs n_classes >= 2")

    @property
    def param_dim(self) -> int:
        if self.kind == REGRESSION:
            return self.dimension
        return self.n_classes * (self.dimension + 1)

    def init_params(self) -> np.ndarray:
        return np.zeros(self.param_dim)


def _canonical_order(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Permutation that sorts samples lexicographically (target first)."""
    if features.size == 0 or features.shape[1] == 0:
        return np.argsort(targets, kind="stable")
    keys = tuple(features[:, j] for j in reversed(range(features.shape[1]))) + (targets,)
    return np.lexsort(keys)


def _check_batch(features: np.ndarray, targets: np.ndarray):
    if len(targets) == 0:
        raise ValueError("batch must be nonempty")
    if features.shape[0] != targets.shape[0]:
        raise ValueError("features/targets length mismatch")


def _regression_predictions(params, a, b):
    core = a * params - b
    if np.any(np.abs(core) < SINGULARITY_EPS):
        raise SingularModelError(f"A*x - b within {SINGULARITY_EPS} of zero")
    return np.log(core * core / 2.0)


def _split_logistic(params, spec):
    d, c = spec.dimension, spec.n_classes
    w = params[: c * d].reshape(c, d)
    bias = params[c * d :]
    return w, bias


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(model: ModelSpec, params: np.ndarray, features: np.ndarray,
         targets: np.ndarray, constants: tuple[float, float] | None = None) -> float:
    """Mean loss over a batch.

    For regression, ``constants`` must carry the client's (A, b).
    """
    _check_batch(features, targets)
    params = np.asarray(params, dtype=float)
    if params.shape[0] != model.param_dim:
        raise ValueError("parameter dimension mismatch")
    order = _canonical_order(features, targets)
    if model.kind == REGRESSION:
        a, b = constants
        preds = _regression_predictions(params, a, b)
        resid = targets[order, None] - preds[None, :]
        per_sample = (resid * resid).sum(axis=1)
    else:
        w, bias = _split_logistic(params, model)
        logits = features[order] @ w.T + bias
        logp = _log_softmax(logits)
        labels = targets[order].astype(int)
        per_sample = -logp[np.arange(len(labels)), labels]
    value = float(per_sample.sum() / len(targets))
    if not np.isfinite(value):
        raise FloatingPointError("non-finite loss")
    return value


def grad(model: ModelSpec, params: np.ndarray, features: np.ndarray,
         targets: np.ndarray, constants: tuple[float, float] | None = None) -> np.ndarray:
    """Analytic mean gradient of :func:`loss` over a batch."""
    _check_batch(features, targets)
    params = np.asarray(params, dtype=float)
    if params.shape[0] != model.param_dim:
        raise ValueError("parameter dimension mismatch")
    order = _canonical_order(features, targets)
    n = len(targets)
    if model.kind == REGRESSION:
        a, b = constants
        preds = _regression_predictions(params, a, b)
        # d/dx_k log((A x_k - b)^2 / 2) = 2A / (A x_k - b)
        resid = targets[order, None] - preds[None, :]
        g = (-2.0 * resid * (2.0 * a / (a * params - b))[None, :]).sum(axis=0) / n
    else:
        w, bias = _split_logistic(params, model)
        x = features[order]
        logits = x @ w.T + bias
        probs = np.exp(_log_softmax(logits))
        labels = targets[order].astype(int)
        probs[np.arange(n), labels] -= 1.0
        gw = probs.T @ x / n
        gb = probs.sum(axis=0) / n
        g = np.concatenate([gw.ravel(), gb])
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    return g


def sgd_step(params: np.ndarray, g: np.ndarray, lr: float) -> np.ndarray:
    """One plain SGD update: ``params - lr * g``."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(g, dtype=float)
    if params.shape != g.shape:
        raise ValueError("parameter/gradient dimension mismatch")
    if lr <= 0:
        raise ValueError("lr must be positive")
    return params - lr * g
