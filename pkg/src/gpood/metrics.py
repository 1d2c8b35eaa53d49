"""Detector evaluation: TPR, TNR, and AUROC over labeled test sets.

Detection scores live on per-class scales, so samples are pooled on the
calibrated margin score - threshold: at margin 0 every class sits exactly at
its own calibrated operating point, making the pooled numbers comparable.
AUROC treats OOD as the positive class and uses the rank (Mann-Whitney)
statistic with half credit for ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .detector import DetectorModel, detect_batch
from .errors import DimensionError
from .interchange import Dataset


@dataclass(frozen=True)
class EvalReport:
    """Aggregate rates plus the per-sample table they were computed from.

    ``margins`` is score - threshold per sample, ``truth`` is True for OOD
    rows, ``verdict`` is True where the detector flagged OOD.
    """

    tpr: float
    tnr: float
    auroc: float
    n_ind: int
    n_ood: int
    margins: np.ndarray
    truth: np.ndarray
    verdict: np.ndarray


def auroc_from_margins(margins: np.ndarray, truth: np.ndarray) -> float:
    """Mann-Whitney AUROC of the margins, ties counted half."""
    margins = np.asarray(margins, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DimensionError("AUROC needs both positive and negative samples")
    ranks = rankdata(margins)
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(model: DetectorModel, ind_test: Dataset, ood_test: Dataset) -> EvalReport:
    """Run the detector over both test sets and summarize.

    TPR is the fraction of in-distribution rows kept; TNR the fraction of
    OOD rows flagged; AUROC is computed on the pooled margins.
    """
    ind_results = detect_batch(model, ind_test)
    ood_results = detect_batch(model, ood_test)
    ind_flagged = np.array([r.is_ood for r in ind_results], dtype=bool)
    ood_flagged = np.array([r.is_ood for r in ood_results], dtype=bool)
    margins = np.array([r.margin for r in ind_results + ood_results])
    truth = np.concatenate(
        [np.zeros(len(ind_results), dtype=bool), np.ones(len(ood_results), dtype=bool)]
    )
    verdict = np.concatenate([ind_flagged, ood_flagged])
    return EvalReport(
        tpr=float(1.0 - ind_flagged.mean()),
        tnr=float(ood_flagged.mean()),
        auroc=auroc_from_margins(margins, truth),
        n_ind=len(ind_results),
        n_ood=len(ood_results),
        margins=margins,
        truth=truth,
        verdict=verdict,
    )


def roc_curve(report: EvalReport) -> list[tuple[float, float]]:
    """ROC points from a threshold sweep over the report's unique margins.

    Returns (false positive rate, true positive rate) pairs from (0, 0) to
    (1, 1); the trapezoidal integral equals the Mann-Whitney AUROC.
    """
    margins, truth = report.margins, report.truth
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DimensionError("ROC needs both positive and negative samples")
    points = [(0.0, 0.0)]
    for v in np.unique(margins)[::-1]:
        flagged = margins >= v
        fp = int((flagged & ~truth).sum())
        tp = int((flagged & truth).sum())
        points.append((fp / n_neg, tp / n_pos))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def roc_auc_trapezoid(points: list[tuple[float, float]]) -> float:
    """Trapezoidal area under an ROC polyline."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area
