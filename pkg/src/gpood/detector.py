"""End-to-end detector: split, fit K GPs, score by KL divergence, calibrate.

The detector routes a test point through the class with the largest score
vector entry, compares the GP posterior there against the posteriors cached
at that class's held-out validation points, and flags the point when the
average divergence exceeds a per-class threshold calibrated from
in-distribution data alone.

The divergence between the test posterior (mu', var') and a validation
posterior (mu, var) is

    d = log(var / var') + (var' + (mu' - mu)^2) / (2 var) - 1/2,

the form the detection-bound analysis is built on.  (It differs from the
textbook Gaussian KL in the log term's factor; it is used verbatim, and can
be negative when var' << var.)

Per-class thresholds are empirical quantiles: score every validation point
against its own class (each point's zero self-term included), sort, and take
the value at 1-based index ceil((1 - alpha) * m), clamped to [1, m].
Detection is strict: a point scoring exactly at the threshold stays
in-distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DimensionError, FitError, GpoodError
from .gp import (
    ClassGP,
    PredictiveDistribution,
    fit_gp,
    predict,
    predict_many,
    rebuild_gp,
)
from .hyperfit import OptimizerConfig, optimize_lengthscales
from .interchange import Dataset, Sample, split_per_class
from .kernel import Lengthscales

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassValidation:
    """A class's validation features with cached posterior (mu, var)."""

    features: np.ndarray
    mu: np.ndarray
    var: np.ndarray

    @property
    def m(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class DetectionResult:
    """Verdict for one sample at its routed class."""

    predicted_class: int
    score: float
    threshold: float
    is_ood: bool
    margin: float


@dataclass(frozen=True)
class DetectorConfig:
    """Fitting configuration: calibration level, split, optimizer, caps."""

    alpha: float = 0.05
    gp_fraction: float = 0.8
    split_seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    max_gp_points: int | None = 1000
    leave_one_out_calibration: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if not 0.0 < self.gp_fraction < 1.0:
            raise ValueError("gp_fraction must lie strictly between 0 and 1")
        if self.max_gp_points is not None and self.max_gp_points < 2:
            raise ValueError("max_gp_points must be >= 2")


@dataclass(frozen=True)
class DetectorModel:
    """K fitted class GPs, their cached validation posteriors, and thresholds."""

    gps: list[ClassGP]
    valid_sets: list[ClassValidation]
    gammas: np.ndarray
    config: DetectorConfig

    @property
    def K(self) -> int:
        return len(self.gps)

    @property
    def p(self) -> int:
        return self.gps[0].p


def kl_score_pair(pprime: PredictiveDistribution, pref: PredictiveDistribution) -> float:
    """Divergence of the test posterior ``pprime`` from the reference ``pref``."""
    for pd in (pprime, pref):
        if not (math.isfinite(pd.mu) and math.isfinite(pd.var)) or pd.var <= 0.0:
            raise ValueError("predictive distributions must be finite with var > 0")
    return (
        math.log(pref.var / pprime.var)
        + (pprime.var + (pprime.mu - pref.mu) ** 2) / (2.0 * pref.var)
        - 0.5
    )


def _kl_to_validation(mu: np.ndarray, var: np.ndarray, valid: ClassValidation) -> np.ndarray:
    """Mean divergence of each (mu, var) posterior against the cached set."""
    dmu = mu[:, None] - valid.mu[None, :]
    terms = (
        np.log(valid.var)[None, :]
        - np.log(var)[:, None]
        + (var[:, None] + dmu * dmu) / (2.0 * valid.var[None, :])
        - 0.5
    )
    return terms.mean(axis=1)


def detection_score(gp: ClassGP, valid_set: ClassValidation, q) -> float:
    """Average divergence between the posterior at ``q`` and the cached
    validation posteriors of the GP's class."""
    if valid_set.m == 0:
        raise DimensionError("validation set is empty")
    pd = predict(gp, q)
    return float(
        _kl_to_validation(np.array([pd.mu]), np.array([pd.var]), valid_set)[0]
    )


def quantile_index(alpha: float, m: int) -> int:
    """1-based order-statistic index ceil((1 - alpha) * m), clamped to [1, m].

    The tiny slack absorbs float representation error when the real product
    is an exact integer.
    """
    idx = math.ceil((1.0 - alpha) * m - 1e-9)
    return min(max(idx, 1), m)


def threshold_from_scores(scores, alpha: float) -> float:
    """The (1 - alpha) empirical quantile as the stated order statistic.

    Sorts ascending and returns the value at 1-based index
    ceil((1 - alpha) * m), clamped into [1, m].
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise DimensionError("threshold_from_scores needs a non-empty 1-d array")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    order = np.sort(scores)
    return float(order[quantile_index(alpha, scores.size) - 1])


def calibrate_thresholds(
    gps: list[ClassGP],
    valid_sets: list[ClassValidation],
    alpha: float,
    leave_one_out: bool = False,
) -> np.ndarray:
    """Per-class thresholds: the (1 - alpha) empirical quantile of validation
    scores, scored within each class.

    Every validation point is scored against the full validation set of its
    class, which includes its own zero divergence term; ``leave_one_out``
    drops that self term instead.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    gammas = np.empty(len(gps))
    for k, (gp, valid) in enumerate(zip(gps, valid_sets)):
        m = valid.m
        if m == 0:
            raise DimensionError(f"class {k}: validation set is empty")
        scores = _kl_to_validation(valid.mu, valid.var, valid)
        if leave_one_out:
            if m < 2:
                raise DimensionError(
                    f"class {k}: leave-one-out calibration needs >= 2 points"
                )
            # Each row's self term is exactly zero; remove it from the mean.
            scores = scores * m / (m - 1)
        gammas[k] = threshold_from_scores(scores, alpha)
    return gammas


def fit_detector(ind: Dataset, config: DetectorConfig = DetectorConfig()) -> DetectorModel:
    """Run the full pipeline on labeled in-distribution data.

    Splits each class, optionally subsamples the GP portion, optimizes
    lengthscales per class, fits the class GPs, caches validation
    posteriors, and calibrates thresholds.  Fails atomically: any per-class
    error aborts the whole fit with the class named.
    """
    counts = ind.class_counts()
    for k, c in enumerate(counts):
        if c < 3:
            raise FitError(f"class {k} has {c} labeled samples; need at least 3")

    split = split_per_class(ind, config.gp_fraction, config.split_seed)
    gps: list[ClassGP] = []
    valid_sets: list[ClassValidation] = []
    for k in range(ind.K):
        try:
            idx = split.gp_idx[k]
            if config.max_gp_points is not None and idx.size > config.max_gp_points:
                rng = np.random.Generator(
                    np.random.Philox(np.random.SeedSequence((config.split_seed, k, 1)))
                )
                keep = rng.choice(idx.size, size=config.max_gp_points, replace=False)
                idx = np.sort(idx[keep])
            X_gp = ind.features[idx]
            z = ind.scores[idx, k]
            ls, _, _ = optimize_lengthscales(X_gp, z, config.optimizer)
            gp = fit_gp(k, X_gp, z, ls)
            v_feats = ind.features[split.valid_idx[k]]
            v_mu, v_var = predict_many(gp, v_feats)
            gps.append(gp)
            valid_sets.append(ClassValidation(features=v_feats, mu=v_mu, var=v_var))
        except GpoodError as e:
            raise FitError(f"class {k}: {e}") from e
    gammas = calibrate_thresholds(
        gps, valid_sets, config.alpha, config.leave_one_out_calibration
    )
    return DetectorModel(gps=gps, valid_sets=valid_sets, gammas=gammas, config=config)


def detect(model: DetectorModel, sample: Sample) -> DetectionResult:
    """Classify one sample as in-distribution or OOD.

    Routes through k = argmax of the score vector (lowest index wins ties)
    and flags OOD strictly above the class threshold.
    """
    scores = np.asarray(sample.scores, dtype=float)
    features = np.asarray(sample.features, dtype=float)
    if scores.shape != (model.K,):
        raise DimensionError(f"sample has {scores.shape} scores, model expects {model.K}")
    if features.shape != (model.p,):
        raise DimensionError(
            f"sample has {features.shape} features, model expects {model.p}"
        )
    k = int(np.argmax(scores))
    s = detection_score(model.gps[k], model.valid_sets[k], features)
    gamma = float(model.gammas[k])
    return DetectionResult(
        predicted_class=k,
        score=s,
        threshold=gamma,
        is_ood=s > gamma,
        margin=s - gamma,
    )


def detect_batch(model: DetectorModel, ds: Dataset) -> list[DetectionResult]:
    """Vectorized :func:`detect` over a dataset, grouped by routed class."""
    if ds.K != model.K or ds.p != model.p:
        raise DimensionError(
            f"dataset shape (K={ds.K}, p={ds.p}) does not match model "
            f"(K={model.K}, p={model.p})"
        )
    assigned = np.argmax(ds.scores, axis=1)
    results: list[DetectionResult | None] = [None] * ds.n
    for k in range(model.K):
        rows = np.flatnonzero(assigned == k)
        if rows.size == 0:
            continue
        mu, var = predict_many(model.gps[k], ds.features[rows])
        scores_k = _kl_to_validation(mu, var, model.valid_sets[k])
        gamma = float(model.gammas[k])
        for i, s in zip(rows, scores_k):
            s = float(s)
            results[i] = DetectionResult(
                predicted_class=k,
                score=s,
                threshold=gamma,
                is_ood=s > gamma,
                margin=s - gamma,
            )
    return results  # type: ignore[return-value]


def _optimizer_to_dict(cfg: OptimizerConfig) -> dict:
    return {
        "max_iters": cfg.max_iters,
        "grad_tol": cfg.grad_tol,
        "log_theta_bounds": list(cfg.log_theta_bounds),
        "n_restarts": cfg.n_restarts,
        "seed": cfg.seed,
    }


def _optimizer_from_dict(d: dict) -> OptimizerConfig:
    return OptimizerConfig(
        max_iters=int(d["max_iters"]),
        grad_tol=float(d["grad_tol"]),
        log_theta_bounds=(float(d["log_theta_bounds"][0]), float(d["log_theta_bounds"][1])),
        n_restarts=int(d["n_restarts"]),
        seed=int(d["seed"]),
    )


def save_model(model: DetectorModel, path) -> None:
    """Serialize the fitted detector to a single JSON text file.

    Stores per class the lengthscales, scale, jitter, GP rows and targets,
    validation rows with their cached posteriors, and the threshold; floats
    round-trip exactly, so reloading reproduces detect outputs bit for bit.
    """
    cfg = model.config
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "K": model.K,
        "p": model.p,
        "alpha": cfg.alpha,
        "gp_fraction": cfg.gp_fraction,
        "split_seed": cfg.split_seed,
        "max_gp_points": cfg.max_gp_points,
        "leave_one_out_calibration": cfg.leave_one_out_calibration,
        "optimizer": _optimizer_to_dict(cfg.optimizer),
        "classes": [
            {
                "class_k": gp.class_k,
                "theta": gp.ls.theta.tolist(),
                "tau2": gp.tau2,
                "jitter_applied": gp.jitter_applied,
                "gamma": float(model.gammas[k]),
                "X_gp": gp.X_gp.tolist(),
                "z": gp.z.tolist(),
                "X_valid": valid.features.tolist(),
                "valid_mu": valid.mu.tolist(),
                "valid_var": valid.var.tolist(),
            }
            for k, (gp, valid) in enumerate(zip(model.gps, model.valid_sets))
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path) -> DetectorModel:
    """Reload a detector saved by :func:`save_model`.

    The kernel matrix is re-factorized at the recorded jitter (no
    escalation); cached validation posteriors are taken from the file, so
    detection reproduces the original model's outputs exactly.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"model file {path}: invalid JSON ({e})") from None
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataFormatError(
            f"model file {path}: format_version {version!r}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    config = DetectorConfig(
        alpha=float(doc["alpha"]),
        gp_fraction=float(doc["gp_fraction"]),
        split_seed=int(doc["split_seed"]),
        optimizer=_optimizer_from_dict(doc["optimizer"]),
        max_gp_points=doc["max_gp_points"],
        leave_one_out_calibration=bool(doc.get("leave_one_out_calibration", False)),
    )
    gps, valid_sets, gammas = [], [], []
    for entry in doc["classes"]:
        try:
            gp = rebuild_gp(
                class_k=int(entry["class_k"]),
                X_gp=np.asarray(entry["X_gp"], dtype=float),
                z=np.asarray(entry["z"], dtype=float),
                ls=Lengthscales(np.asarray(entry["theta"], dtype=float)),
                tau2=float(entry["tau2"]),
                jitter=float(entry["jitter_applied"]),
            )
        except np.linalg.LinAlgError:
            raise DataFormatError(
                f"model file {path}: class {entry['class_k']} kernel matrix "
                f"not factorizable at recorded jitter"
            ) from None
        gps.append(gp)
        valid_sets.append(
            ClassValidation(
                features=np.asarray(entry["X_valid"], dtype=float),
                mu=np.asarray(entry["valid_mu"], dtype=float),
                var=np.asarray(entry["valid_var"], dtype=float),
            )
        )
        gammas.append(float(entry["gamma"]))
    return DetectorModel(
        gps=gps, valid_sets=valid_sets, gammas=np.asarray(gammas), config=config
    )
