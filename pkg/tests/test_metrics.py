import numpy as np
import pytest

from bevseg.bevraster import BevGrid, BevMap
from bevseg.errors import InvalidInputError, UndefinedMetricError
from bevseg.metrics import (
    ConfusionMatrix,
    class_iou,
    confuse,
    format_report,
    mean_iou,
    per_class_iou,
    report_data,
)

VOID = 255
C = 9


def bev(cells):
    cells = np.asarray(cells, np.uint8)
    return BevMap(BevGrid(cells.shape[0], float(cells.shape[0])), cells, void_id=VOID)


def random_semantic_bev(rng, size=8):
    return bev(rng.integers(0, C, (size, size)).astype(np.uint8))


class TestConfuse:
    def test_perfect_prediction_is_diagonal(self):
        m = bev(np.full((2, 2), 2, np.uint8))
        cm = confuse(m, m, C)
        assert cm.counts[2, 2] == 4
        assert cm.total == 4

    def test_hand_counted_toy(self):
        gt = bev([[0, 0], [1, 1]])
        pred = bev([[0, 1], [1, 1]])
        cm = confuse(pred, gt, C)
        assert cm.counts[0, 0] == 1
        assert cm.counts[0, 1] == 1
        assert cm.counts[1, 1] == 2
        assert cm.total == 4

    def test_total_conserved_without_ignore(self):
        rng = np.random.default_rng(0)
        cells = rng.integers(0, C, (8, 8)).astype(np.uint8)
        cells[rng.random((8, 8)) < 0.4] = VOID
        gt = bev(cells)
        pred = random_semantic_bev(rng)
        cm = confuse(pred, gt, C, ignore_gt_void=False)
        assert cm.total == 64

    def test_gt_void_skipped_by_default(self):
        gt = bev([[VOID, 3], [3, VOID]])
        pred = bev([[5, 3], [3, 5]])
        cm = confuse(pred, gt, C)
        assert cm.total == 2
        assert cm.counts[3, 3] == 2

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            confuse(bev(np.zeros((2, 2))), bev(np.zeros((3, 3))), C)

    def test_tiling_accumulates(self):
        rng = np.random.default_rng(1)
        cells_gt = rng.integers(0, C, (16, 16)).astype(np.uint8)
        cells_pr = rng.integers(0, C, (16, 16)).astype(np.uint8)
        whole = confuse(bev(cells_pr), bev(cells_gt), C)
        total = np.zeros_like(whole.counts)
        for r in (slice(0, 8), slice(8, 16)):
            for c in (slice(0, 8), slice(8, 16)):
                tile = confuse(bev(cells_pr[r, c]), bev(cells_gt[r, c]), C)
                total = total + tile.counts
        np.testing.assert_array_equal(total, whole.counts)


class TestClassIou:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(2)
        m = random_semantic_bev(rng)
        cm = confuse(m, m, C)
        for k in np.unique(m.cells):
            assert class_iou(cm, int(k)) == 1.0

    def test_disjoint_prediction_is_zero(self):
        gt = bev([[0, 0], [0, 0]])
        pred = bev([[1, 1], [1, 1]])
        cm = confuse(pred, gt, C)
        assert class_iou(cm, 0) == 0.0
        assert class_iou(cm, 1) == 0.0

    def test_toy_value(self):
        gt = bev([[0, 0], [1, 1]])
        pred = bev([[0, 1], [1, 1]])
        cm = confuse(pred, gt, C)
        assert class_iou(cm, 0) == 0.5      # tp=1, fn=1, fp=0
        assert class_iou(cm, 1) == 2 / 3    # tp=2, fp=1, fn=0

    def test_absent_class_is_undefined(self):
        m = bev(np.full((2, 2), 3, np.uint8))
        cm = confuse(m, m, C)
        assert class_iou(cm, 7) is None

    def test_out_of_range_rejected(self):
        cm = ConfusionMatrix(np.zeros((C + 1, C + 1), np.int64), C)
        with pytest.raises(InvalidInputError):
            class_iou(cm, C)
        with pytest.raises(InvalidInputError):
            class_iou(cm, -1)


class TestMeanIou:
    def test_perfect_over_all_classes(self):
        cells = np.arange(C, dtype=np.uint8).reshape(3, 3)
        m = bev(cells)
        assert mean_iou(confuse(m, m, C)) == 1.0

    def test_mean_over_defined_classes_only(self):
        # class 0: iou 0.5 (1 tp, 1 fn); class 1: iou 1.0; others absent
        gt = bev([[0, 0], [1, 1]])
        pred = bev([[0, 2], [1, 1]])
        cm = confuse(pred, gt, C)
        # class 2 got a false positive, so it is defined with iou 0
        ious = per_class_iou(cm)
        assert ious[0] == 0.5 and ious[1] == 1.0 and ious[2] == 0.0
        assert mean_iou(cm) == pytest.approx((0.5 + 1.0 + 0.0) / 3)

    def test_two_class_example(self):
        # arrange exactly: class 0 iou 0.5, class 1 iou 1.0, nothing else
        counts = np.zeros((C + 1, C + 1), np.int64)
        counts[0, 0] = 1
        counts[0, C] = 1   # miss into void keeps class 1 untouched
        counts[1, 1] = 3
        cm = ConfusionMatrix(counts, C)
        assert class_iou(cm, 0) == 0.5
        assert class_iou(cm, 1) == 1.0
        assert mean_iou(cm) == 0.75

    def test_strict_mean_divides_by_all_classes(self):
        counts = np.zeros((C + 1, C + 1), np.int64)
        counts[0, 0] = 1
        counts[0, C] = 1
        counts[1, 1] = 3
        cm = ConfusionMatrix(counts, C)
        assert mean_iou(cm, strict=True) == pytest.approx(1.5 / C)

    def test_all_void_gt_is_undefined(self):
        gt = bev(np.full((2, 2), VOID, np.uint8))
        pred = bev(np.full((2, 2), 5, np.uint8))
        cm = confuse(pred, gt, C)
        with pytest.raises(UndefinedMetricError):
            mean_iou(cm)

    def test_self_comparison_is_always_perfect(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            m = random_semantic_bev(rng)
            cm = confuse(m, m, C)
            assert (cm.counts == np.diag(np.diag(cm.counts))).all()
            assert mean_iou(cm) == 1.0

    def test_corrupting_one_cell_never_helps(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            m = random_semantic_bev(rng)
            base = [class_iou(confuse(m, m, C), k) for k in range(C)]
            cells = m.cells.copy()
            r, c = rng.integers(0, cells.shape[0], 2)
            cells[r, c] = (cells[r, c] + 1 + rng.integers(0, C - 1)) % C
            worse = confuse(bev(cells), m, C)
            for k in range(C):
                after = class_iou(worse, k)
                if base[k] is not None and after is not None:
                    assert after <= base[k]


class TestReport:
    def test_report_data_and_table(self):
        gt = bev([[0, 0], [1, 1]])
        pred = bev([[0, 1], [1, 1]])
        cm = confuse(pred, gt, C)
        names = [f"class{k}" for k in range(C)]
        data = report_data(cm, names)
        assert data["cells_compared"] == 4
        assert data["per_class"][0]["iou"] == 0.5
        assert data["per_class"][8]["iou"] is None
        text = format_report(data)
        assert "class0" in text and "mean IoU" in text
