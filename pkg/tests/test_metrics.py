import numpy as np
import pytest

from repotopical.errors import ValidationError
from repotopical.metrics import (
    EvalReport,
    apply_thresholds,
    evaluate_scores,
    lrap,
    micro_f1,
    optimize_thresholds,
)


def brute_force_lrap(y, f):
    """Straight-from-the-definition oracle: explicit L_ij and rank_ij sets."""
    y = np.asarray(y)
    f = np.asarray(f, dtype=float)
    per_sample = []
    for i in range(y.shape[0]):
        true_js = [j for j in range(y.shape[1]) if y[i, j] == 1]
        acc = 0.0
        for j in true_js:
            L_ij = {k for k in range(y.shape[1]) if y[i, k] == 1 and f[i, k] >= f[i, j]}
            rank_ij = len({k for k in range(y.shape[1]) if f[i, k] >= f[i, j]})
            acc += len(L_ij) / rank_ij
        per_sample.append(acc / len(true_js))
    return sum(per_sample) / len(per_sample)


class TestLrap:
    def test_perfect_ranking(self):
        y = np.array([[1, 1, 0, 0], [0, 1, 0, 0]])
        f = np.array([[0.9, 0.8, 0.2, 0.1], [0.1, 0.9, 0.3, 0.2]])
        assert lrap(y, f) == pytest.approx(1.0)

    def test_worked_example(self):
        # (1/2) * (1/1 + 2/3) = 5/6
        assert lrap([[1, 0, 1]], [[0.8, 0.5, 0.3]]) == pytest.approx(5.0 / 6.0)

    def test_random_suite_matches_brute_force(self):
        rng = np.random.default_rng(40)
        for _ in range(1000):
            samples = int(rng.integers(1, 17))
            labels = int(rng.integers(2, 9))
            y = (rng.random((samples, labels)) > 0.6).astype(int)
            for row in y:
                if not row.any():
                    row[rng.integers(labels)] = 1
            f = np.round(rng.random((samples, labels)), 2)  # rounding forces ties
            assert abs(lrap(y, f) - brute_force_lrap(y, f)) < 1e-12

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(41)
        y = (rng.random((20, 6)) > 0.5).astype(int)
        for row in y:
            if not row.any():
                row[0] = 1
        f = rng.random((20, 6))
        base = lrap(y, f)
        assert lrap(y, 3.0 * f + 2.0) == pytest.approx(base, abs=1e-12)
        assert lrap(y, np.exp(f)) == pytest.approx(base, abs=1e-12)

    def test_row_without_positive_rejected(self):
        with pytest.raises(ValidationError):
            lrap([[0, 0]], [[0.5, 0.5]])

    def test_result_in_unit_interval(self):
        rng = np.random.default_rng(42)
        y = np.eye(5, dtype=int)
        f = rng.random((5, 5))
        value = lrap(y, f)
        assert 0.0 < value <= 1.0


class TestMicroF1:
    def test_exact_match_gives_one(self):
        y = np.array([[1, 0], [0, 1], [1, 1]])
        f1, precision, recall = micro_f1(y, y)
        assert (f1, precision, recall) == (1.0, 1.0, 1.0)

    def test_all_zero_predictions(self):
        y = np.array([[1, 0], [0, 1]])
        f1, precision, recall = micro_f1(y, np.zeros_like(y))
        assert f1 == 0.0 and recall == 0.0 and precision == 0.0

    def test_hand_counted(self):
        # TP=2, FP=1, FN=1 -> P = R = F1 = 2/3
        y = np.array([[1, 1, 0, 1]])
        pred = np.array([[1, 1, 1, 0]])
        f1, precision, recall = micro_f1(y, pred)
        assert precision == pytest.approx(2 / 3)
        assert recall == pytest.approx(2 / 3)
        assert f1 == pytest.approx(2 / 3)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            micro_f1(np.ones((2, 2), dtype=int), np.ones((2, 3), dtype=int))


def column_f1(truth, scores, threshold):
    pred = scores >= threshold
    tp = int(np.sum(pred & (truth == 1)))
    fp = int(np.sum(pred & (truth == 0)))
    fn = int(np.sum(~pred & (truth == 1)))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


class TestOptimizeThresholds:
    def test_worked_example_midpoint_selected(self):
        y = np.array([[1], [1], [0]])
        f = np.array([[0.9], [0.8], [0.2]])
        thresholds = optimize_thresholds(y, f)
        assert thresholds[0] == pytest.approx(0.5)

    def test_all_positive_truth_gives_zero(self):
        y = np.ones((4, 1), dtype=int)
        f = np.array([[0.3], [0.7], [0.9], [0.5]])
        assert optimize_thresholds(y, f)[0] == 0.0

    def test_all_negative_column_degenerate_guard(self):
        y = np.array([[0], [0]])
        f = np.array([[0.4], [0.9]])
        assert optimize_thresholds(y, f)[0] == 1.0

    def test_beats_or_matches_exhaustive_sweep(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            rows = int(rng.integers(2, 30))
            y = (rng.random((rows, 3)) > 0.5).astype(int)
            f = np.round(rng.random((rows, 3)), 2)
            thresholds = optimize_thresholds(y, f)
            for j in range(3):
                if not y[:, j].any():
                    continue
                ours = column_f1(y[:, j], f[:, j], thresholds[j])
                dense = np.linspace(0, 1, 201)
                best_dense = max(column_f1(y[:, j], f[:, j], t) for t in dense)
                assert ours >= best_dense - 1e-12

    def test_at_least_as_good_as_half(self):
        rng = np.random.default_rng(44)
        y = (rng.random((30, 4)) > 0.5).astype(int)
        f = rng.random((30, 4))
        thresholds = optimize_thresholds(y, f)
        for j in range(4):
            if not y[:, j].any():
                continue
            assert column_f1(y[:, j], f[:, j], thresholds[j]) >= column_f1(
                y[:, j], f[:, j], 0.5
            )

    def test_tie_break_smallest_candidate(self):
        # Both candidate 0 and the low midpoint give F1=1; 0 must win.
        y = np.array([[1], [1]])
        f = np.array([[0.6], [0.9]])
        assert optimize_thresholds(y, f)[0] == 0.0


class TestEvaluateScores:
    def test_report_fields_and_ranges(self):
        rng = np.random.default_rng(45)
        y_val = (rng.random((10, 3)) > 0.5).astype(int)
        y_test = (rng.random((12, 3)) > 0.5).astype(int)
        for m in (y_val, y_test):
            for row in m:
                if not row.any():
                    row[0] = 1
        report = evaluate_scores(
            y_val, rng.random((10, 3)), y_test, rng.random((12, 3)),
            config={"model": "x"}, split_sizes={"val": 10, "test": 12},
        )
        data = report.to_dict()
        for key in ("lrap", "micro_f1", "precision", "recall"):
            assert 0.0 <= data[key] <= 1.0
        assert len(data["per_topic_thresholds"]) == 3
        assert data["config"] == {"model": "x"}
        assert "mean_threshold" in data

    def test_apply_thresholds(self):
        scores = np.array([[0.5, 0.2], [0.1, 0.9]])
        pred = apply_thresholds(scores, [0.5, 0.5])
        assert pred.tolist() == [[1, 0], [0, 1]]

    def test_json_round_trip(self):
        report = EvalReport(0.5, 0.6, 0.7, 0.8, [0.1, 0.2])
        import json

        assert json.loads(report.to_json())["micro_f1"] == 0.6
