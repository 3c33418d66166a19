"""Feature standardization and a soft-margin SVM trained by SMO.

The dual problem

    max_a  sum(a) - 1/2 a^T Q a,   Q_ij = y_i y_j k(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum(a_i y_i) = 0

is solved by two-coordinate updates on the maximal violating pair with
second-order pair selection (Fan, Chen & Lin, JMLR 2005). Every step
maximizes the dual exactly along its feasible direction, so the
objective never decreases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import CamidError

log = logging.getLogger(__name__)

TAU = 1e-12


class SvmError(CamidError):
    pass


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise SvmError(f"expected {self.mean.shape[0]} feature columns, got shape {X.shape}")
        return (X - self.mean) / self.std


def fit_standardizer(X) -> Standardizer:
    """Column mean and population std; near-constant columns get std 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise SvmError("standardizer needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(mean, std)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise SvmError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and (self.gamma is None or not self.gamma > 0):
            raise SvmError("rbf kernel requires gamma > 0")


def scale_gamma(X) -> float:
    """Default RBF width ``1 / (n_features * X.var())``."""
    X = np.asarray(X, dtype=np.float64)
    v = X.var()
    return 1.0 / (X.shape[1] * v) if v > 0 else 1.0


def kernel_eval(a, b, spec: KernelSpec) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SvmError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if spec.kind == "linear":
        return float(a @ b)
    d = a - b
    return float(np.exp(-spec.gamma * (d @ d)))


def kernel_matrix(A, B, spec: KernelSpec) -> np.ndarray:
    """Kernel values between rows of A and B; ``B=None`` gives the Gram matrix of A.

    The Gram matrix is exactly symmetric, with an RBF diagonal of exactly 1.
    """
    A = np.asarray(A, dtype=np.float64)
    gram = B is None
    B = A if gram else np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise SvmError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    G = A @ B.T
    if gram:
        G = (G + G.T) / 2
    if spec.kind == "linear":
        return G
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * G
    sq = np.maximum(sq, 0.0)
    if gram:
        sq = (sq + sq.T) / 2
        np.fill_diagonal(sq, 0.0)
    return np.exp(-spec.gamma * sq)


@dataclass(frozen=True, eq=False)
class BinarySvm:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    kernel: KernelSpec
    C: float
    n_iter: int = 0
    converged: bool = True
    alpha: np.ndarray | None = None  # full alpha over the training rows
    objective_trace: list = field(default_factory=list, repr=False)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise SvmError("decision_function expects a 2-D array")
        if X.shape[0] == 0:
            return np.zeros(0)
        if len(self.dual_coef) == 0:
            return np.full(X.shape[0], self.bias)
        return kernel_matrix(X, self.support_vectors, self.kernel) @ self.dual_coef + self.bias


def _dual_objective(alpha, y, K):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def train_binary_svm(
    X,
    y,
    kernel: KernelSpec,
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    record_objective: bool = False,
) -> BinarySvm:
    """Train a binary soft-margin SVM on labels in {-1, +1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise SvmError("X must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise SvmError("non-finite features")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("binary labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SvmError("both classes must be present")
    if not C > 0:
        raise SvmError("C must be positive")

    n = X.shape[0]
    K = kernel_matrix(X, None, kernel)
    Q = K * y[:, None] * y[None, :]
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the minimization form 1/2 a^T Q a - sum(a)
    trace = [_dual_objective(alpha, y, K)] if record_objective else []

    it = 0
    converged = False
    while it < max_iter:
        # I_up / I_low membership per the standard SMO bookkeeping
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        if len(up_idx) == 0 or len(low_idx) == 0:
            converged = True
            break
        i = up_idx[np.argmax(score[up_idx])]
        g_max = score[i]
        g_min = np.min(score[low_idx])
        if g_max - g_min < tol:
            converged = True
            break

        # second-order choice of j among violating low-set members
        b = g_max - score[low_idx]
        cand = b > 0
        lj = low_idx[cand]
        bj = b[cand]
        a = diag[i] + diag[lj] - 2 * y[i] * y[lj] * Q[i, lj]
        a = np.where(a > 0, a, TAU)
        j = lj[np.argmax(bj * bj / a)]  # argmax returns the first max: fixed tie order

        # two-variable subproblem (LIBSVM solver, generalized to y_i != y_j)
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            quad = diag[i] + diag[j] - 2 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            else:
                if ai < 0:
                    ai, aj = 0.0, total

        d_i, d_j = ai - ai_old, aj - aj_old
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * d_i + Q[:, j] * d_j
        it += 1
        if record_objective:
            trace.append(_dual_objective(alpha, y, K))

    if not converged:
        log.warning("SMO hit the iteration cap (%d) before reaching tol=%g", max_iter, tol)

    bias = _bias(alpha, y, grad, C)
    sv = alpha > 0
    return BinarySvm(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=bias,
        kernel=kernel,
        C=C,
        n_iter=it,
        converged=converged,
        alpha=alpha,
        objective_trace=trace,
    )


def _bias(alpha, y, grad, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(-yg[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    # -y*grad on I_up bounds b from below, on I_low from above
    lo = np.max(-yg[up]) if np.any(up) else -np.inf
    hi = np.min(-yg[low]) if np.any(low) else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return float((lo + hi) / 2)
    return float(lo if np.isfinite(lo) else hi)


@dataclass(frozen=True, eq=False)
class MulticlassSvm:
    """One-vs-rest ensemble; prediction is the argmax of decision values."""

    models: tuple[BinarySvm, ...]
    n_features: int

    @property
    def n_classes(self) -> int:
        return len(self.models)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SvmError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        if self.n_classes == 2 and self.models[1] is None:
            f = self.models[0].decision_function(X)
            return np.stack([f, -f], axis=1)
        return np.stack([m.decision_function(X) for m in self.models], axis=1)

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return np.argmax(scores, axis=1).astype(np.int64) if len(scores) else np.zeros(0, np.int64)


def train_multiclass(X, labels, kernel: KernelSpec, C: float = 1.0, n_classes: int | None = None,
                     **solver_kw) -> MulticlassSvm:
    """One-vs-rest training; class ``c`` is the positive side of model ``c``.

    With exactly two classes a single binary model is trained and its
    decision value is mirrored, so predictions match that binary model.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(n_classes if n_classes is not None else labels.max() + 1)
    present = np.unique(labels)
    if len(present) < 2:
        raise SvmError("at least two classes are required")
    if k == 2:
        m = train_binary_svm(X, np.where(labels == 0, 1.0, -1.0), kernel, C, **solver_kw)
        return MulticlassSvm((m, None), X.shape[1])
    models = []
    for c in range(k):
        if c not in present:
            raise SvmError(f"class {c} has no training rows")
        models.append(train_binary_svm(X, np.where(labels == c, 1.0, -1.0), kernel, C, **solver_kw))
    return MulticlassSvm(tuple(models), X.shape[1])


def predict(model: MulticlassSvm, X) -> np.ndarray:
    return model.predict(X)
