import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from litriage import evaluation as ev
from litriage.errors import ValidationError


def brute_force(pred, gold):
    tp = sum(1 for p, g in zip(pred, gold) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(pred, gold) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(pred, gold) if p == 0 and g == 1)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return 100 * prec, 100 * rec, 100 * f1


def pairs(labels):
    return [(str(i), "positive" if y else "negative") for i, y in enumerate(labels)]


class TestConfusion:
    def test_identical(self):
        c = ev.confusion(pairs([1, 0, 1, 0]), pairs([1, 0, 1, 0]))
        assert (c.fp, c.fn) == (0, 0)

    def test_all_flipped(self):
        c = ev.confusion(pairs([0, 1, 0, 1]), pairs([1, 0, 1, 0]))
        assert (c.tp, c.tn) == (0, 0)

    def test_hand_count(self):
        c = ev.confusion(pairs([1, 1, 0, 0]), pairs([1, 0, 1, 0]))
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)

    def test_integer_labels(self):
        c = ev.confusion([("a", 1), ("b", 0)], [("a", 1), ("b", 1)])
        assert (c.tp, c.fn) == (1, 1)

    def test_alignment_error_lists_offenders(self):
        with pytest.raises(ValidationError, match=r"\['x'\].*\['y'\]"):
            ev.confusion([("a", 1), ("x", 1)], [("a", 1), ("y", 0)])


class TestMetrics:
    def test_hand_case(self):
        m = ev.precision_recall_f1(ev.ConfusionCounts(tp=3, fp=1, fn=1))
        assert m.formatted() == ("75.000", "75.000", "75.000")

    def test_degenerate(self):
        m = ev.precision_recall_f1(ev.ConfusionCounts())
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)

    def test_perfect(self):
        m = ev.precision_recall_f1(ev.ConfusionCounts(tp=5, tn=5))
        assert m.formatted() == ("100.000", "100.000", "100.000")

    def test_negative_counts(self):
        with pytest.raises(ValidationError):
            ev.ConfusionCounts(tp=-1)

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=60))
    def test_brute_force_and_harmonic_mean(self, rows):
        pred = [p for p, _ in rows]
        gold = [g for _, g in rows]
        m = ev.precision_recall_f1(ev.confusion(pairs(pred), pairs(gold)))
        assert (m.precision, m.recall, m.f1) == brute_force(pred, gold)
        if m.precision + m.recall:
            hm = 2 * m.precision * m.recall / (m.precision + m.recall)
            assert abs(hm - m.f1) < 1e-9


class TestReport:
    def test_two_by_two(self):
        runs = {
            "kmcnn": {"A": ev.Metrics(90.0, 80.0, 84.70588), "B": ev.Metrics(1.0, 2.0, 1.3333)},
            "mcnn": {"A": ev.Metrics(50.0, 50.0, 50.0)},
        }
        r = ev.ablation_report(runs)
        assert r.rows("f1") == [["", "A", "B"], ["KMCNN", "84.706", "1.333"], ["MCNN", "50.000", "—"]]
        assert r.to_csv("precision").splitlines() == [",A,B", "KMCNN,90.000,1.000", "MCNN,50.000,—"]
        text = r.to_text()
        assert text.splitlines()[0].split() == ["A", "B"]
        assert set(text.splitlines()[1]) == {"-"}

    def test_empty(self):
        r = ev.ablation_report({}, datasets=["A"])
        assert r.rows() == [["", "A"]]

    def test_unknown_metric(self):
        with pytest.raises(ValidationError):
            ev.ablation_report({}).rows("accuracy")

    def test_reference_fixture(self):
        ref = ev.reference_tables()
        assert ref.variants == ["Lee et al.(2018)", "MCNN", "KCNN", "KMCNN"]
        assert len(ref.datasets) == 5
        assert ref.rows("f1")[4] == ["KMCNN", "93.243", "99.401", "63.302", "96.500", "77.560"]
        assert ref.value("KMCNN", "UniProtKB/Swiss-Prot", "precision") == 91.820
        assert ref.value("KCNN", "GWAS Catalog 2019(b)", "recall") == 95.347
        assert all(m.f1 > 0 for m in ref.cells.values())
        assert len(ref.cells) == 20


def test_thousand_random_pairs():
    rng = np.random.default_rng(0)
    pred, gold = rng.integers(2, size=1000), rng.integers(2, size=1000)
    m = ev.precision_recall_f1(ev.confusion(pairs(pred), pairs(gold)))
    assert (m.precision, m.recall, m.f1) == brute_force(pred.tolist(), gold.tolist())
