"""Squared-exponential ARD kernel, kernel matrix assembly, and weighted distances.

The kernel between feature vectors ``a`` and ``b`` is

    k(a, b) = exp(-sum_j (a_j - b_j)**2 / theta_j),

with one positive lengthscale ``theta_j`` per input dimension.  Lengthscales
carry units of *squared* feature units: the kernel divides squared
differences by ``theta_j``, not by ``theta_j**2``.  Under this convention the
weighted distance

    d(a, b) = sqrt(sum_j (a_j - b_j)**2 / theta_j)

satisfies k(a, b) = exp(-d(a, b)**2) exactly, which is the identity the
detection-bound analysis relies on.

Kernel matrices get a small diagonal nugget ("jitter") so the Cholesky
factorization succeeds in finite precision.  The jitter starts tiny and is
escalated geometrically only when factorization fails; the value actually
used is always reported back to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, KernelConditionError

# Nugget escalation schedule: 1e-8, 1e-7, ..., up to 1e-2.
DEFAULT_JITTER_INITIAL = 1e-8
DEFAULT_JITTER_FACTOR = 10.0
DEFAULT_JITTER_MAX = 1e-2

# Soft cap on the number of float64 elements materialized per broadcast
# block when assembling pairwise distances.
_BLOCK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal nugget escalation schedule for kernel matrices."""

    initial: float = DEFAULT_JITTER_INITIAL
    factor: float = DEFAULT_JITTER_FACTOR
    maximum: float = DEFAULT_JITTER_MAX

    def __post_init__(self):
        if not (0.0 < self.initial <= self.maximum):
            raise ValueError("jitter policy requires 0 < initial <= maximum")
        if self.factor <= 1.0:
            raise ValueError("jitter escalation factor must exceed 1")


DEFAULT_JITTER_POLICY = JitterPolicy()


@dataclass(frozen=True)
class Lengthscales:
    """Per-dimension ARD lengthscales, strictly positive and finite.

    Parameters
    ----------
    theta : array_like, shape (p,)
        Lengthscale for each feature dimension, in squared feature units.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if theta.ndim != 1:
            raise DimensionError("lengthscales must be a 1-d vector")
        if theta.size == 0:
            raise DimensionError("lengthscales must be non-empty")
        if not np.all(np.isfinite(theta)) or not np.all(theta > 0.0):
            raise ValueError("lengthscales must be finite and strictly positive")
        object.__setattr__(self, "theta", theta)

    @property
    def p(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class KernelMatrix:
    """A jittered SE kernel matrix together with its Cholesky factor.

    ``m`` is symmetric positive definite with diagonal ``1 + jitter_applied``;
    ``chol`` is the lower-triangular factor of ``m``.
    """

    m: np.ndarray
    jitter_applied: float
    chol: np.ndarray

    @property
    def n(self) -> int:
        return self.m.shape[0]


def _as_matrix(X, p: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError("feature collections must be 2-d (n, p)")
    if p is not None and X.shape[1] != p:
        raise DimensionError(
            f"feature dimension mismatch: got {X.shape[1]}, expected {p}"
        )
    return X


def weighted_sq_distances(A, B, ls: Lengthscales) -> np.ndarray:
    """Pairwise lengthscale-weighted squared distances between two point sets.

    Entry (i, j) is sum_j (A_i - B_j)**2 / theta, evaluated with the same
    elementwise arithmetic as :func:`kernel_value` so matrix assembly agrees
    bitwise with individual kernel evaluations.
    """
    A = _as_matrix(A, ls.p)
    B = _as_matrix(B, ls.p)
    theta = ls.theta
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _BLOCK_ELEMENTS // max(1, B.shape[0] * ls.p))
    for i0 in range(0, A.shape[0], step):
        diff = A[i0 : i0 + step, None, :] - B[None, :, :]
        out[i0 : i0 + step] = (diff * diff / theta).sum(axis=-1)
    return out


def kernel_value(a, b, ls: Lengthscales) -> float:
    """SE kernel value exp(-sum_j (a_j - b_j)**2 / theta_j), in (0, 1].

    Parameters
    ----------
    a, b : array_like, shape (p,)
        Feature vectors.
    ls : Lengthscales
        ARD lengthscales of matching dimension.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (ls.p,) or b.shape != (ls.p,):
        raise DimensionError(
            f"kernel_value expects two vectors of length {ls.p}, "
            f"got shapes {a.shape} and {b.shape}"
        )
    diff = a - b
    return float(np.exp(-(diff * diff / ls.theta).sum()))


def jittered_cholesky(
    K: np.ndarray, policy: JitterPolicy = DEFAULT_JITTER_POLICY
) -> tuple[np.ndarray, float]:
    """Cholesky-factor ``K + jitter*I``, escalating jitter until it succeeds.

    Returns the lower-triangular factor and the jitter actually applied.
    Raises :class:`KernelConditionError` if the factorization still fails at
    the policy's maximum jitter.
    """
    n = K.shape[0]
    eye = np.eye(n)
    jitter = policy.initial
    while True:
        try:
            chol = np.linalg.cholesky(K + jitter * eye)
            return chol, jitter
        except np.linalg.LinAlgError:
            if jitter >= policy.maximum:
                eigs = np.linalg.eigvalsh(K)
                raise KernelConditionError(
                    f"Cholesky failed at maximum jitter {policy.maximum:g}: "
                    f"n={n}, eigenvalue range [{eigs[0]:.3e}, {eigs[-1]:.3e}]"
                ) from None
            jitter = min(jitter * policy.factor, policy.maximum)


def kernel_matrix(
    X, ls: Lengthscales, jitter_policy: JitterPolicy = DEFAULT_JITTER_POLICY
) -> KernelMatrix:
    """Assemble the jittered SE kernel matrix for a point set.

    Entry (i, j) equals ``kernel_value(X_i, X_j, ls)`` plus
    ``jitter * delta_ij``.  The jitter starts at ``jitter_policy.initial``
    and escalates per the policy until the Cholesky factorization succeeds.
    """
    X = _as_matrix(X, ls.p)
    if X.shape[0] < 1:
        raise DimensionError("kernel_matrix needs at least one point")
    K = np.exp(-weighted_sq_distances(X, X, ls))
    chol, jitter = jittered_cholesky(K, jitter_policy)
    return KernelMatrix(m=K + jitter * np.eye(X.shape[0]), jitter_applied=jitter, chol=chol)


def cross_kernel(A, B, ls: Lengthscales) -> np.ndarray:
    """Cross-kernel matrix between two point sets; no jitter.

    Entry (i, j) is ``kernel_value(A_i, B_j, ls)``.
    """
    return np.exp(-weighted_sq_distances(A, B, ls))


def weighted_min_distance(q, X, ls: Lengthscales) -> float:
    """Minimum lengthscale-weighted distance from ``q`` to the rows of ``X``.

    Returns min over x in X of sqrt(sum_j (x_j - q_j)**2 / theta_j), the
    distance ``d`` for which the kernel satisfies k = exp(-d**2).
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (ls.p,):
        raise DimensionError(f"query must have length {ls.p}, got shape {q.shape}")
    X = _as_matrix(X, ls.p)
    if X.shape[0] == 0:
        raise DimensionError("weighted_min_distance needs a non-empty point set")
    d2 = weighted_sq_distances(q[None, :], X, ls)[0]
    return float(np.sqrt(d2.min()))
