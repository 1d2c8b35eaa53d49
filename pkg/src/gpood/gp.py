"""Per-class GP regression: fit, posterior prediction, profile log-likelihood.

One GP is fit per class, regressing that class's unconstrained score onto
the feature vectors of its own training rows.  The model is a zero-mean GP
with SE-ARD kernel and a scale hyperparameter ``tau2`` whose maximum
likelihood estimate is available in closed form once the lengthscales are
fixed:

    tau2_hat = z' Phi^{-1} z / m.

Plugging the MLE back into the Gaussian log-likelihood leaves a profile
objective in the lengthscales alone (additive constant dropped):

    ll(theta) = -(m/2) * log(z' Phi^{-1} z) - (1/2) * log|Phi|.

All linear algebra goes through a single Cholesky factorization of the
jittered kernel matrix; no explicit inverse is formed on the fit/predict
paths.  (The analytic gradient of the profile objective needs the inverse
elementwise for its trace term, so that one routine assembles it from the
factor, in the usual way for marginal-likelihood gradients.)

Posterior prediction at a query q:

    mu(q)   = k(q, X) Phi^{-1} z
    var(q)  = tau2 * (1 - k(q, X) Phi^{-1} k(X, q))

Exact interpolation makes var(q) collapse to zero at training points, and
downstream scoring divides by variances and takes their logs, so variances
are clamped to [VAR_FLOOR_FRAC * tau2, tau2] and tau2 itself is floored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DimensionError
from .kernel import (
    DEFAULT_JITTER_POLICY,
    JitterPolicy,
    Lengthscales,
    cross_kernel,
    kernel_matrix,
    weighted_sq_distances,
)

# Floors keeping logs and divisions of variances well defined.
TAU2_FLOOR = 1e-12
VAR_FLOOR_FRAC = 1e-12


@dataclass(frozen=True)
class PredictiveDistribution:
    """Gaussian posterior (mean, variance) of one class score at one point."""

    mu: float
    var: float


@dataclass(frozen=True)
class ClassGP:
    """A fitted per-class GP.

    Fields
    ------
    class_k : class index this GP belongs to
    X_gp : (m, p) training feature vectors
    z : (m,) training scores for this class
    ls : fitted lengthscales
    tau2 : closed-form scale MLE, floored at TAU2_FLOOR
    chol : lower Cholesky factor of the jittered kernel matrix
    solve_z : (Phi + jitter*I)^{-1} z, precomputed via two triangular solves
    jitter_applied : diagonal nugget actually used
    """

    class_k: int
    X_gp: np.ndarray
    z: np.ndarray
    ls: Lengthscales
    tau2: float
    chol: np.ndarray
    solve_z: np.ndarray
    jitter_applied: float

    @property
    def m(self) -> int:
        return self.X_gp.shape[0]

    @property
    def p(self) -> int:
        return self.X_gp.shape[1]


def fit_gp(
    class_k: int,
    X_gp,
    z,
    ls: Lengthscales,
    jitter_policy: JitterPolicy = DEFAULT_JITTER_POLICY,
) -> ClassGP:
    """Fit the per-class GP at fixed lengthscales.

    Factorizes the jittered kernel matrix, precomputes ``Phi^{-1} z``, and
    evaluates the closed-form scale MLE ``tau2 = z' Phi^{-1} z / m``.
    """
    X_gp = np.asarray(X_gp, dtype=float)
    z = np.asarray(z, dtype=float)
    if X_gp.ndim != 2:
        raise DimensionError("X_gp must be 2-d (m, p)")
    m = X_gp.shape[0]
    if m < 2:
        raise DimensionError(f"fit_gp needs at least 2 points, got {m}")
    if z.shape != (m,):
        raise DimensionError(f"z must have shape ({m},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite values")

    km = kernel_matrix(X_gp, ls, jitter_policy)
    w = solve_triangular(km.chol, z, lower=True)
    solve_z = solve_triangular(km.chol.T, w, lower=False)
    tau2 = max(float(w @ w) / m, TAU2_FLOOR)
    return ClassGP(
        class_k=class_k,
        X_gp=X_gp,
        z=z,
        ls=ls,
        tau2=tau2,
        chol=km.chol,
        solve_z=solve_z,
        jitter_applied=km.jitter_applied,
    )


def rebuild_gp(
    class_k: int, X_gp, z, ls: Lengthscales, tau2: float, jitter: float
) -> ClassGP:
    """Reconstruct a fitted GP at a known jitter (no escalation).

    Used when reloading persisted models: the stored jitter is applied
    verbatim so the factorization matches the one recorded at save time.
    """
    X_gp = np.asarray(X_gp, dtype=float)
    z = np.asarray(z, dtype=float)
    K = np.exp(-weighted_sq_distances(X_gp, X_gp, ls)) + jitter * np.eye(len(z))
    chol = np.linalg.cholesky(K)
    w = solve_triangular(chol, z, lower=True)
    solve_z = solve_triangular(chol.T, w, lower=False)
    return ClassGP(
        class_k=class_k,
        X_gp=X_gp,
        z=z,
        ls=ls,
        tau2=tau2,
        chol=chol,
        solve_z=solve_z,
        jitter_applied=jitter,
    )


def predict(gp: ClassGP, q) -> PredictiveDistribution:
    """Posterior mean and variance of the class score at a single point."""
    q = np.asarray(q, dtype=float)
    if q.shape != (gp.p,):
        raise DimensionError(f"query must have length {gp.p}, got shape {q.shape}")
    mu, var = predict_many(gp, q[None, :])
    return PredictiveDistribution(mu=float(mu[0]), var=float(var[0]))


def predict_many(gp: ClassGP, Q) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior over the rows of ``Q``; returns (mu, var) arrays."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != gp.p:
        raise DimensionError(f"queries must be (n, {gp.p}), got {Q.shape}")
    kx = cross_kernel(Q, gp.X_gp, gp.ls)
    mu = kx @ gp.solve_z
    v = solve_triangular(gp.chol, kx.T, lower=True)
    var = gp.tau2 * (1.0 - np.einsum("ij,ij->j", v, v))
    np.clip(var, VAR_FLOOR_FRAC * gp.tau2, gp.tau2, out=var)
    return mu, var


def profile_log_likelihood(
    X_gp,
    z,
    ls: Lengthscales,
    jitter_policy: JitterPolicy = DEFAULT_JITTER_POLICY,
) -> float:
    """Profile log-likelihood of the lengthscales (additive constant dropped).

    Computed through the Cholesky factor of the jittered kernel matrix:
    ``-(m/2) log(z' Phi^{-1} z) - sum(log(diag(chol)))``.
    """
    ll, _ = _profile_ll_and_gradient(X_gp, z, ls, jitter_policy, want_gradient=False)
    return ll


def profile_ll_gradient(
    X_gp,
    z,
    ls: Lengthscales,
    jitter_policy: JitterPolicy = DEFAULT_JITTER_POLICY,
) -> np.ndarray:
    """Gradient of the profile log-likelihood with respect to log(theta_j)."""
    _, grad = _profile_ll_and_gradient(X_gp, z, ls, jitter_policy, want_gradient=True)
    return grad


def _profile_ll_and_gradient(
    X_gp,
    z,
    ls: Lengthscales,
    jitter_policy: JitterPolicy = DEFAULT_JITTER_POLICY,
    want_gradient: bool = True,
) -> tuple[float, np.ndarray | None]:
    """Shared objective/gradient evaluation: one factorization per call.

    The gradient uses d(Phi_ab)/d(theta_j) = Phi_ab * (X_aj - X_bj)^2 /
    theta_j^2 (the jitter term is theta-independent and the kernel's own
    diagonal has zero squared differences, so the jittered matrix can be
    used throughout).  In log-lengthscale coordinates,

        d ll / d log theta_j
            = (1/theta_j) * sum_ab M_ab * (X_aj - X_bj)^2,
        M = (m / (2 z'Phi^{-1}z)) * (Phi^{-1}z)(Phi^{-1}z)' - Phi^{-1}/2,
        M elementwise-multiplied by Phi,

    and the pairwise-squared-difference contraction expands into two O(m^2 p)
    matrix products, so no (m, m, p) tensor is ever materialized.
    """
    X_gp = np.asarray(X_gp, dtype=float)
    z = np.asarray(z, dtype=float)
    m = X_gp.shape[0]
    if m < 2:
        raise DimensionError(f"need at least 2 points, got {m}")
    if z.shape != (m,):
        raise DimensionError(f"z must have shape ({m},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite values")

    km = kernel_matrix(X_gp, ls, jitter_policy)
    w = solve_triangular(km.chol, z, lower=True)
    quad = max(float(w @ w), 1e-300)
    ll = -(m / 2.0) * np.log(quad) - float(np.log(np.diag(km.chol)).sum())
    if not want_gradient:
        return float(ll), None

    alpha = solve_triangular(km.chol.T, w, lower=False)
    phi_inv = cho_solve((km.chol, True), np.eye(m))
    M = ((m / (2.0 * quad)) * np.outer(alpha, alpha) - 0.5 * phi_inv) * km.m
    # sum_ab M_ab (X_aj - X_bj)^2 = 2 [ (X^2)' M 1 - diag(X' M X) ]_j
    row = M.sum(axis=1)
    t1 = (X_gp * X_gp).T @ row
    t2 = np.einsum("aj,aj->j", M @ X_gp, X_gp)
    grad = 2.0 * (t1 - t2) / ls.theta
    return float(ll), grad
