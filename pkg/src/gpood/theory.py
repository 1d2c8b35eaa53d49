"""Executable detection bound: when is a point provably flagged as OOD?

For a fitted class GP, a sufficient condition for detection can be computed
from the fitted quantities alone.  With

    a_k      = gamma_k - mean over validation x of log(var(x) / tau2),
    lambda_m = smallest eigenvalue of the (jittered) kernel matrix,
    m        = number of GP training rows,

a sample routed to class k is guaranteed to score above gamma_k whenever its
squared lengthscale-weighted minimum distance to the class's in-distribution
points (GP rows and validation rows together) exceeds

    rhs = -(1/2) * log(2 * a_k * lambda_m / m).

When the log argument is at least 1 the right-hand side is reported as
-infinity: any positive separation already implies detection.  The
implication is one-directional; the detector can, and does, flag points the
bound says nothing about.

Everything here is read-only over a fitted model: the hyperparameters are
taken as frozen, never refit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .detector import ClassValidation, DetectorModel, detect
from .errors import DimensionError
from .gp import ClassGP
from .interchange import Sample
from .kernel import weighted_min_distance, weighted_sq_distances

# Bracket clamp keeping the log of the variance ratio finite and negative.
_BRACKET_MIN = 1e-300
_BRACKET_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class BoundReport:
    """Bound evaluation for one sample at its routed class."""

    class_k: int
    a_k: float
    lambda_min: float
    rhs: float
    d_min_sq: float
    implied_ood: bool
    detector_ood: bool


def compute_a_k(gp: ClassGP, valid_set: ClassValidation, gamma: float) -> float:
    """Threshold offset a_k = gamma - mean log(sigma^2 / tau2) over validation.

    The variance ratio is the cached validation variance divided by the
    fitted scale, clamped into [1e-300, 1) before the log.
    """
    if valid_set.m == 0:
        raise DimensionError("validation set is empty")
    bracket = np.clip(valid_set.var / gp.tau2, _BRACKET_MIN, _BRACKET_MAX)
    return float(gamma - np.log(bracket).mean())


def min_eigenvalue(gp: ClassGP) -> float:
    """Smallest eigenvalue of the jittered kernel matrix of a fitted class."""
    K = np.exp(-weighted_sq_distances(gp.X_gp, gp.X_gp, gp.ls))
    K += gp.jitter_applied * np.eye(gp.m)
    eigs = scipy.linalg.eigvalsh(K)
    return float(eigs[0])


def bound_rhs(a_k: float, lambda_min: float, m_gp: int) -> float:
    """Right-hand side of the detection bound; -inf when the log argument >= 1."""
    arg = 2.0 * a_k * lambda_min / m_gp
    if arg >= 1.0:
        return float("-inf")
    return float(-0.5 * np.log(arg))


@dataclass(frozen=True)
class ClassBound:
    """Per-class bound ingredients, computed once and reused across samples."""

    a_k: float
    lambda_min: float
    rhs: float
    ind_points: np.ndarray


def class_bounds(model: DetectorModel) -> list[ClassBound]:
    """Precompute a_k, lambda_min, and the bound for every class."""
    out = []
    for k in range(model.K):
        gp, valid = model.gps[k], model.valid_sets[k]
        a_k = compute_a_k(gp, valid, float(model.gammas[k]))
        lam = min_eigenvalue(gp)
        out.append(
            ClassBound(
                a_k=a_k,
                lambda_min=lam,
                rhs=bound_rhs(a_k, lam, gp.m),
                ind_points=np.vstack([gp.X_gp, valid.features]),
            )
        )
    return out


def theorem_check(
    model: DetectorModel,
    sample: Sample,
    precomputed: list[ClassBound] | None = None,
) -> BoundReport:
    """Evaluate the detection bound for one sample and compare with detect.

    The minimum distance runs over the routed class's GP rows plus its
    validation rows, weighted by the fitted lengthscales.
    """
    scores = np.asarray(sample.scores, dtype=float)
    k = int(np.argmax(scores))
    cb = precomputed[k] if precomputed is not None else class_bounds(model)[k]
    gp = model.gps[k]
    d_min = weighted_min_distance(np.asarray(sample.features, float), cb.ind_points, gp.ls)
    d_min_sq = d_min * d_min
    result = detect(model, sample)
    return BoundReport(
        class_k=k,
        a_k=cb.a_k,
        lambda_min=cb.lambda_min,
        rhs=cb.rhs,
        d_min_sq=d_min_sq,
        implied_ood=d_min_sq > cb.rhs,
        detector_ood=result.is_ood,
    )
