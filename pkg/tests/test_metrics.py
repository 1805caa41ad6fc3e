import random

import pytest

from tlagent.agent import InvocationRecord, rules_from_dict
from tlagent.errors import MetricError
from tlagent.metrics import (PRF, format_table, frame_f1, search_metrics, search_report, span_f1,
                             span_iou, tool_call_accuracy, tool_report)
from tlagent.traces import GroundTruthInvocation


def frames_of(spans):
    return {t for s, e in spans for t in range(s, e + 1)}


def oracle_frame(pred, gt):
    p, g = frames_of(pred), frames_of(gt)
    tp, fp, fn = len(p & g), len(p - g), len(g - p)
    prec = tp / (tp + fp) if tp + fp else float(fn == 0)
    rec = tp / (tp + fn) if tp + fn else float(fp == 0)
    return prec, rec


def random_spans(rng, T, n):
    out = []
    for _ in range(n):
        s = rng.randrange(T)
        out.append((s, min(T - 1, s + rng.randint(0, 6))))
    return out


def test_frame_examples():
    assert frame_f1([[5, 7]], [[5, 7]], 10).f1 == 1.0
    m = frame_f1([[5, 9]], [[5, 7]], 10)
    assert (m.tp, m.fp, m.fn) == (3, 2, 0)
    assert (m.precision, m.recall, m.f1) == (0.6, 1.0, 0.75)
    assert frame_f1([], [[5, 7]], 10).f1 == 0.0
    assert frame_f1([], [], 10).f1 == 1.0


def test_span_examples():
    assert span_iou((5, 9), (5, 7)) == 0.6
    assert span_f1([[5, 9]], [[5, 7]], 0.5).f1 == 1.0
    assert span_f1([[5, 9]], [[5, 7]], 0.7).f1 == 0.0
    assert span_f1([[1, 2], [5, 8]], [[1, 2], [5, 8]]).f1 == 1.0


def test_metric_errors():
    with pytest.raises(MetricError):
        frame_f1([[5, 10]], [], 10)
    with pytest.raises(MetricError):
        frame_f1([[7, 5]], [], 10)
    with pytest.raises(MetricError):
        span_f1([], [], 0.0)
    with pytest.raises(MetricError):
        tool_call_accuracy([], [], tol=-1)


def test_frame_f1_against_set_oracle():
    rng = random.Random(61)
    for _ in range(500):
        T = rng.randint(1, 40)
        pred, gt = random_spans(rng, T, rng.randint(0, 4)), random_spans(rng, T, rng.randint(0, 4))
        m = frame_f1(pred, gt, T)
        p, r = oracle_frame(pred, gt)
        assert m.precision == pytest.approx(p) and m.recall == pytest.approx(r)
        assert m.f1 == pytest.approx(2 * p * r / (p + r) if p + r else 0.0)
        assert all(0.0 <= x <= 1.0 for x in (m.precision, m.recall, m.f1))
        assert frame_f1(pred, pred, T).f1 == 1.0
        assert frame_f1(pred[::-1], gt[::-1], T) == m


def test_enlarging_pred_never_raises_precision():
    rng = random.Random(62)
    for _ in range(300):
        T = 50
        gt = random_spans(rng, T, rng.randint(1, 3))
        pred = random_spans(rng, T, rng.randint(1, 3))
        grown = [(max(0, s - rng.randint(0, 3)), min(T - 1, e + rng.randint(0, 3))) for s, e in pred]
        if frames_of(pred) <= frames_of(gt):
            continue
        # only growth outside gt is a pure FP increase
        if (frames_of(grown) - frames_of(pred)) & frames_of(gt):
            continue
        assert frame_f1(grown, gt, T).precision <= frame_f1(pred, gt, T).precision + 1e-12


def test_span_matching_is_one_to_one_and_order_free():
    rng = random.Random(63)
    for _ in range(300):
        pred, gt = random_spans(rng, 30, rng.randint(0, 5)), random_spans(rng, 30, rng.randint(0, 5))
        m = span_f1(pred, gt, 0.3)
        assert m.tp <= min(len(pred), len(gt))
        assert m.tp + m.fp == len(pred) and m.tp + m.fn == len(gt)
        shuffled_p, shuffled_g = pred[:], gt[:]
        rng.shuffle(shuffled_p)
        rng.shuffle(shuffled_g)
        assert span_f1(shuffled_p, shuffled_g, 0.3) == m
    # one wide prediction covers at most one of two ground-truth spans
    assert span_f1([[0, 9]], [[0, 4], [5, 9]], 0.5).tp == 1
    assert span_f1([[0, 4], [0, 4]], [[0, 4]]).tp == 1


def rec(tool, frame, args=None, status="ok", window=None, rule=None):
    return InvocationRecord(rule or tool, tool, args or {}, (frame, frame), frame,
                            window or (frame, frame), status, "", "")


def gt(tool, frame, args=None):
    return GroundTruthInvocation(frame, tool, args or {})


def test_tool_examples():
    truth = [gt("notify", 57, {"recipient": "owner", "clip": "12-57"})]
    exact = [rec("notify", 57, {"recipient": "owner", "clip": "12-57"})]
    m = tool_call_accuracy(exact, truth)
    assert (m.selection, m.arguments, m.alignment) == (1.0, 1.0, 1.0)
    partial = [rec("notify", 57, {"recipient": "neighbor", "clip": "12-57"})]
    m = tool_call_accuracy(partial, truth)
    assert (m.selection, m.arguments) == (1.0, 0.5)
    late = [rec("notify", 67, {"recipient": "owner", "clip": "12-57"})]
    assert tool_call_accuracy(late, truth, tol=5).selection == 0.0
    assert tool_call_accuracy(late, truth, tol=10).selection == 1.0


def test_tool_matching_details():
    truth = [gt("a", 10), gt("a", 12)]
    log = [rec("a", 11), rec("a", 13), rec("a", 12, status="failed")]
    m = tool_call_accuracy(log, truth, tol=1)
    assert (m.matched, m.executed) == (2, 2)
    # nearest record wins; the same record is never matched twice
    assert tool_call_accuracy([rec("a", 11)], truth, tol=1).matched == 1
    assert tool_call_accuracy([rec("b", 10)], [gt("a", 10)]).selection == 0.0
    # dry-run counts as executed
    assert tool_call_accuracy([rec("a", 10, status="dry-run")], [gt("a", 10)]).selection == 1.0
    assert tool_call_accuracy([], []).selection == 1.0
    assert tool_call_accuracy([rec("a", 1)], []).selection == 0.0


def test_alignment_checks_window_and_ordering():
    rules = rules_from_dict({
        "tools": [{"id": "n", "kind": "log"}, {"id": "c", "kind": "log"}],
        "rules": [{"id": "notify", "spec": "F p", "tool": "n"},
                  {"id": "close", "spec": "F q", "tool": "c", "after": ["notify"]}]})
    truth = [gt("n", 5), gt("c", 8)]
    good = [rec("n", 5, rule="notify"), rec("c", 8, rule="close")]
    assert tool_call_accuracy(good, truth, rules=rules).alignment == 1.0
    swapped = good[::-1]
    assert tool_call_accuracy(swapped, truth, rules=rules).alignment == 0.5
    assert tool_call_accuracy(swapped, truth).alignment == 1.0
    outside = [rec("n", 5, rule="notify", window=(0, 3)), good[1]]
    assert tool_call_accuracy(outside, truth, rules=rules).alignment == 0.5


def test_tool_metrics_invariant_under_record_reordering():
    rng = random.Random(64)
    for _ in range(200):
        truth = [gt(rng.choice("ab"), rng.randint(0, 20), {"x": rng.choice("uv")}) for _ in range(4)]
        log = [rec(rng.choice("ab"), rng.randint(0, 20), {"x": rng.choice("uv")}) for _ in range(4)]
        m = tool_call_accuracy(log, truth, tol=3)
        # matching picks nearest, then earliest frame; reordering only changes ties at equal frames
        log.sort(key=lambda r: r.frame)
        m2 = tool_call_accuracy(sorted(log, key=lambda r: (r.frame, r.tool)), truth[::-1], tol=3)
        assert (m.selection, m.matched) == (m2.selection, m2.matched)
        assert all(0.0 <= v <= 1.0 for v in (m.selection, m.arguments, m.alignment))


def test_prf_zero_division():
    assert PRF.from_counts(0, 0, 0).f1 == 1.0
    assert PRF.from_counts(0, 3, 0).f1 == 0.0
    assert PRF.from_counts(0, 0, 3).f1 == 0.0


def test_reports_aggregate():
    recs = search_report([("v1", search_metrics([[0, 1]], [[0, 1]], 5)),
                          ("v2", search_metrics([[0, 3]], [[0, 1]], 5))])
    agg = recs[-1]
    assert agg["aggregate"] and agg["frame"]["micro"]["precision"] == pytest.approx(4 / 6)
    assert agg["frame"]["macro"]["precision"] == pytest.approx(0.75)
    tools = tool_report([("v", tool_call_accuracy([rec("a", 1)], [gt("a", 1)], tol=t)) for t in (0, 5)])
    assert [r["tol"] for r in tools if r.get("aggregate")] == [0, 5]
    assert "aggregate" in format_table(recs)
