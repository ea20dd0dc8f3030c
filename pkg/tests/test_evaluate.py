import numpy as np
import pytest

from dauc.categorize import Category, ScoreTable, categorize
from dauc.data import DataError, LatentDataset
from dauc.evaluate import (
    category_report,
    format_category_table,
    pr_curve,
    prf,
    save_pr_curve_csv,
)


class TestPrf:
    def test_perfect_predictor(self):
        mask = np.array([True, False, True])
        m = prf(mask, mask)
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_no_positives_predicted(self):
        m = prf(np.array([False, False]), np.array([True, False]))
        assert m.precision is None
        assert m.recall == 0.0
        assert m.f1 is None

    def test_no_gold_positives(self):
        m = prf(np.array([True, False]), np.array([False, False]))
        assert m.recall is None

    def test_hand_count(self):
        pred = np.array([True, True, True, False])
        gold = np.array([True, True, False, True])
        m = prf(pred, gold)
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)

    def test_recount_oracle_random(self):
        rng = np.random.Generator(np.random.PCG64(0))
        for _ in range(50):
            n = int(rng.integers(1, 40))
            pred = rng.random(n) < 0.5
            gold = rng.random(n) < 0.5
            m = prf(pred, gold)
            tp = sum(int(p and g) for p, g in zip(pred, gold))
            fp = sum(int(p and not g) for p, g in zip(pred, gold))
            fn = sum(int(g and not p) for p, g in zip(pred, gold))
            assert (m.tp, m.fp, m.fn) == (tp, fp, fn)
            if tp + fp:
                assert m.precision == tp / (tp + fp)
            if tp + fn:
                assert m.recall == tp / (tp + fn)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            prf(np.array([True]), np.array([True, False]))


class TestPrCurve:
    def test_separable_scores_reach_perfect_point(self):
        scores = np.arange(10.0)
        gold = scores >= 5  # gold = top-5 by score
        curve = pr_curve(scores, gold, 9)
        assert any(p == 1.0 and r == 1.0 for _, p, r in curve.points)

    def test_matches_direct_recomputation(self):
        rng = np.random.Generator(np.random.PCG64(1))
        scores = rng.random(60)
        gold = rng.random(60) < 0.3
        curve = pr_curve(scores, gold, 7)
        from dauc.categorize import quantile_threshold

        for q, p, r in curve.points:
            tau = quantile_threshold(scores, q)
            m = prf(scores > tau, gold)
            assert (p, r) == (m.precision, m.recall)

    def test_recall_non_increasing_in_q(self):
        rng = np.random.Generator(np.random.PCG64(2))
        scores = rng.random(80)
        gold = rng.random(80) < 0.4
        curve = pr_curve(scores, gold, 15)
        recalls = [r for _, _, r in curve.points if r is not None]
        assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_constant_scores_degenerate(self):
        curve = pr_curve(np.ones(10), np.zeros(10, dtype=bool), 5)
        assert curve.degenerate
        assert all(p is None for _, p, _ in curve.points)

    def test_csv_output(self, tmp_path):
        curve = pr_curve(np.arange(6.0), np.arange(6) >= 3, 4)
        save_pr_curve_csv(curve, tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "q,precision,recall"
        assert len(lines) == 5

    def test_n_points_domain(self):
        with pytest.raises(DataError):
            pr_curve(np.arange(3.0), np.zeros(3, dtype=bool), 1)


def small_report(categories, y_true):
    n = len(categories)
    table = ScoreTable(
        ids=tuple(f"e{i}" for i in range(n)),
        y_pred=np.zeros(n, dtype=np.int64),
        t_ood=np.where([c is Category.OOD for c in categories], 100.0, 1.0),
        t_bnd=np.zeros(n),
        t_idm=np.zeros(n),
        tau_ood=50.0,
        tau_bnd=1.0,
        tau_idm=1.0,
        q_bnd=0.8,
        q_idm=0.8,
    )
    report = categorize(table)
    gold = LatentDataset(
        ids=report.ids,
        latents=np.zeros((n, 1)),
        y_true=y_true,
        y_pred=np.zeros(n, dtype=np.int64),
        num_classes=2,
    )
    return report, gold


class TestCategoryReport:
    def test_perfect_ood_row(self):
        report, gold = small_report(
            [Category.OOD, Category.OTHER, Category.OOD], [-1, 0, -1]
        )
        summary = category_report(report, gold)
        ood = summary["metrics"]["OOD"]
        assert (ood["precision"], ood["recall"], ood["f1"]) == (1.0, 1.0, 1.0)

    def test_counts_only_without_masks(self):
        report, gold = small_report([Category.OTHER, Category.OTHER], [0, 1])
        summary = category_report(report, gold)
        assert set(summary["metrics"].keys()) == {"OOD"}
        assert summary["counts"]["Other"] == 2

    def test_external_masks(self):
        report, gold = small_report([Category.OTHER, Category.OTHER], [0, 1])
        summary = category_report(
            report, gold, gold_masks={"IDM": np.array([True, False])}
        )
        idm = summary["metrics"]["IDM"]
        assert idm["precision"] is None  # nothing predicted IDM
        assert idm["recall"] == 0.0

    def test_id_mismatch(self):
        report, gold = small_report([Category.OTHER], [0])
        other = LatentDataset(
            ids=("zzz",), latents=np.zeros((1, 1)), y_true=[0], y_pred=[0], num_classes=2
        )
        with pytest.raises(DataError):
            category_report(report, other)

    def test_table_format(self):
        report, gold = small_report([Category.OOD, Category.OTHER], [-1, 0])
        text = format_category_table(category_report(report, gold))
        assert "category" in text.splitlines()[0]
        assert any("OOD" in line for line in text.splitlines())
