"""AUROC rank statistic, ROC sweep, and detector evaluation."""

import numpy as np
import pytest

from gpood import (
    DetectorConfig,
    EvalReport,
    OptimizerConfig,
    SynthConfig,
    auroc_from_margins,
    evaluate,
    fit_detector,
    roc_curve,
    synthesize,
)
from gpood.metrics import roc_auc_trapezoid


def auroc_bruteforce(margins, truth):
    """Quadratic pairwise oracle: wins plus half ties over all pairs."""
    pos = margins[truth]
    neg = margins[~truth]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def report_from(margins, truth):
    margins = np.asarray(margins, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    verdict = margins > 0
    return EvalReport(
        tpr=float(1 - verdict[~truth].mean()),
        tnr=float(verdict[truth].mean()),
        auroc=auroc_from_margins(margins, truth),
        n_ind=int((~truth).sum()),
        n_ood=int(truth.sum()),
        margins=margins,
        truth=truth,
        verdict=verdict,
    )


class TestAuroc:
    def test_perfect_separation(self):
        margins = np.array([-3.0, -1.0, 1.0, 2.0])
        truth = np.array([False, False, True, True])
        assert auroc_from_margins(margins, truth) == 1.0

    def test_all_tied_is_half(self):
        margins = np.zeros(10)
        truth = np.array([True] * 5 + [False] * 5)
        assert auroc_from_margins(margins, truth) == 0.5

    def test_matches_bruteforce_with_ties(self, rng):
        n = 200
        margins = np.round(rng.standard_normal(2 * n), 1)  # force ties
        truth = np.concatenate([np.zeros(n, bool), np.ones(n, bool)])
        got = auroc_from_margins(margins, truth)
        assert got == pytest.approx(auroc_bruteforce(margins, truth), abs=1e-12)

    def test_invariant_under_increasing_transform(self, rng):
        margins = rng.standard_normal(300)
        truth = rng.random(300) < 0.4
        a = auroc_from_margins(margins, truth)
        b = auroc_from_margins(np.exp(margins) * 3 + 7, truth)
        assert a == pytest.approx(b, abs=1e-12)

    def test_complement_symmetry(self, rng):
        margins = rng.standard_normal(150)
        truth = rng.random(150) < 0.5
        if truth.all() or not truth.any():
            truth[0] = ~truth[0]
        a = auroc_from_margins(margins, truth)
        b = auroc_from_margins(-margins, truth)
        assert a + b == pytest.approx(1.0, abs=1e-12)


class TestRocCurve:
    def test_two_point_separated(self):
        report = report_from([-1.0, 1.0], [False, True])
        assert roc_curve(report) == [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]

    def test_endpoints(self, rng):
        report = report_from(rng.standard_normal(60), rng.random(60) < 0.5)
        pts = roc_curve(report)
        assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)

    def test_trapezoid_equals_rank_auroc(self, rng):
        for _ in range(50):
            n = int(rng.integers(5, 60))
            margins = np.round(rng.standard_normal(n), 1)
            truth = rng.random(n) < 0.5
            if truth.all():
                truth[0] = False
            if not truth.any():
                truth[0] = True
            report = report_from(margins, truth)
            area = roc_auc_trapezoid(roc_curve(report))
            assert area == pytest.approx(report.auroc, abs=1e-12)


class TestEvaluate:
    @pytest.fixture(scope="class")
    @staticmethod
    def pieces():
        ind, ood = synthesize(
            SynthConfig(K=2, p=3, n_per_class=60, ood_offset=40.0, seed=21)
        )
        cfg = DetectorConfig(
            alpha=0.05, optimizer=OptimizerConfig(seed=0, n_restarts=1, max_iters=60)
        )
        model = fit_detector(ind, cfg)
        fresh_ind, fresh_ood = synthesize(
            SynthConfig(K=2, p=3, n_per_class=60, ood_offset=40.0, seed=22)
        )
        return model, fresh_ind, fresh_ood

    def test_counts_and_ranges(self, pieces):
        model, ind, ood = pieces
        report = evaluate(model, ind, ood)
        assert report.n_ind == ind.n and report.n_ood == ood.n
        assert 0.0 <= report.tpr <= 1.0
        assert 0.0 <= report.tnr <= 1.0
        assert 0.0 <= report.auroc <= 1.0
        assert report.margins.shape == (ind.n + ood.n,)

    def test_tpr_complements_flagged_ind(self, pieces):
        model, ind, ood = pieces
        report = evaluate(model, ind, ood)
        flagged_ind = report.verdict[~report.truth].mean()
        assert report.tpr == pytest.approx(1.0 - flagged_ind, abs=1e-15)

    def test_far_ood_separates(self, pieces):
        model, ind, ood = pieces
        report = evaluate(model, ind, ood)
        assert report.tnr == 1.0
        assert report.auroc >= 0.99

    def test_verdict_consistent_with_margin(self, pieces):
        model, ind, ood = pieces
        report = evaluate(model, ind, ood)
        np.testing.assert_array_equal(report.verdict, report.margins > 0)
