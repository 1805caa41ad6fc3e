import random

import numpy as np
import pytest

from tlagent.automaton import compile_dfa
from tlagent.errors import SearchError, UniverseMismatchError
from tlagent.logic import evaluate_trace
from tlagent.parser import parse_formula as P
from tlagent.probability import satisfaction_probability
from tlagent.search import (Monitor, SearchConfig, find_spans, merge_spans, minimal_spans,
                            monitor_step, threshold_trace)
from tlagent.traces import FrameTrace

from _gen import oracle_merge, oracle_minimal_spans, random_formula, random_frame_trace


def tr(props, columns, T):
    conf = np.zeros((T, len(props)))
    for i, p in enumerate(props):
        for s, e in columns.get(p, ()):
            conf[s:e + 1, i] = 1.0
    return FrameTrace("t", tuple(props), conf)


DELIVERY = tr(("person", "package"), {"person": [(5, 7)], "package": [(5, 7)]}, 10)


def test_threshold_examples():
    t = FrameTrace("t", ("p",), np.array([[0.8], [0.3]]))
    assert [set(a) for a in threshold_trace(t, 0.5).frames] == [{"p"}, set()]
    assert all(a == {"p"} for a in threshold_trace(t, 0.0).frames)
    assert all(not a for a in threshold_trace(t, 1.0).frames)


def test_delivery_clip():
    spans = find_spans(P("F (person & package)"), DELIVERY, SearchConfig("boolean", tau=0.5))
    assert [(s.start, s.end) for s in spans] == [(5, 7)]
    assert spans[0].probability == 1.0
    assert minimal_spans(P("F (person & package)"), DELIVERY) == [(5, 5), (6, 6), (7, 7)]


def test_until_clip():
    t = tr(("p", "q"), {"p": [(0, 3)], "q": [(4, 4)]}, 8)
    assert [(s.start, s.end) for s in find_spans(P("p U q"), t)] == [(0, 4)]
    cfg = SearchConfig("probabilistic", rho=0.9)
    assert [(s.start, s.end) for s in find_spans(P("p U q"), t, cfg)] == [(0, 4)]


def test_never_satisfied():
    t = tr(("p",), {}, 6)
    assert find_spans(P("F p"), t) == []


def test_clip_probability_is_over_the_clip():
    t = FrameTrace("t", ("p",), np.array([[0.1], [0.8], [0.9], [0.2]]))
    (clip,) = find_spans(P("F p"), t)
    assert (clip.start, clip.end) == (1, 2)
    d = compile_dfa(P("F p"))
    assert clip.probability == pytest.approx(satisfaction_probability(d, t.window(1, 2)))
    assert clip.probability == pytest.approx(1 - 0.2 * 0.1)


def test_merge_spans():
    assert merge_spans([(6, 6), (5, 5), (7, 7)]) == [(5, 7)]
    assert merge_spans([(0, 2), (4, 5)]) == [(0, 2), (4, 5)]
    assert merge_spans([(0, 4), (1, 2), (5, 9)]) == [(0, 9)]


def test_config_validation():
    for kw in (dict(mode="x"), dict(tau=1.5), dict(rho=-0.1), dict(max_window=0),
               dict(suppression="all"), dict(max_window=2.5)):
        with pytest.raises(SearchError):
            SearchConfig(**kw)


def test_max_window_limits_spans():
    t = tr(("p", "q"), {"p": [(0, 8)], "q": [(9, 9)]}, 10)
    assert [(s.start, s.end) for s in find_spans(P("p U q"), t, SearchConfig(max_window=3))] == [(7, 9)]


def test_minimal_spans_match_semantic_oracle():
    rng = random.Random(41)
    for _ in range(300):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 3))
        t = random_frame_trace(rng, ["p", "q"], rng.randint(1, 10))
        L = rng.choice([1, 2, 4, 600])
        w = t.threshold(0.5)
        got = minimal_spans(f, t, SearchConfig(max_window=L))
        assert got == oracle_minimal_spans(f, w, L), str(f)
        clips = [(s.start, s.end) for s in find_spans(f, t, SearchConfig(max_window=L))]
        assert clips == oracle_merge(got)


def test_soundness_minimality_disjointness():
    rng = random.Random(42)
    for _ in range(200):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 3))
        t = random_frame_trace(rng, ["p", "q"], rng.randint(1, 12))
        w = t.threshold(0.5)
        for i, j in minimal_spans(f, t):
            assert evaluate_trace(f, w.window(i, j))
            assert not any(evaluate_trace(f, w.window(i, k)) for k in range(i, j))
        clips = find_spans(f, t)
        for a, b in zip(clips, clips[1:]):
            assert a.end + 1 < b.start
        for c in clips:
            assert 0 <= c.start <= c.end < len(t) and 0.0 <= c.probability <= 1.0


def test_probabilistic_agrees_on_degenerate_traces():
    rng = random.Random(43)
    for _ in range(200):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 3))
        t = random_frame_trace(rng, ["p", "q"], rng.randint(1, 10), extremes=1.0)
        boolean = minimal_spans(f, t)
        for rho in (0.05, 0.5, 1.0):
            assert minimal_spans(f, t, SearchConfig("probabilistic", rho=rho)) == boolean


def test_probabilistic_threshold():
    t = FrameTrace("t", ("p",), np.array([[0.0], [0.6], [0.6], [0.0]]))
    # one frame at 0.6 reaches rho=0.5; two frames give 0.84 for rho=0.8
    assert [(s.start, s.end) for s in find_spans(P("F p"), t, SearchConfig("probabilistic", rho=0.5))] == [(1, 2)]
    assert minimal_spans(P("F p"), t, SearchConfig("probabilistic", rho=0.8)) == [(1, 2)]
    assert minimal_spans(P("F p"), t, SearchConfig("probabilistic", rho=0.9)) == []


def stream(mon, t):
    events = []
    for k in range(len(t)):
        events.extend(mon.step(t.frame(k)))
    return events


def test_monitor_examples():
    mon = Monitor(P("F (person & package)"), suppression="span")
    assert [(e.start, e.end) for e in stream(mon, DELIVERY)] == [(5, 5)]
    mon = Monitor(P("F (person & package)"), suppression="none")
    events = stream(mon, DELIVERY)
    assert [e.frame for e in events] == [5, 6, 7]


def test_monitor_idle_keeps_bounded_runs():
    mon = Monitor(P("F p"), max_window=7)
    assert stream(mon, tr(("p",), {}, 50)) == []
    assert len(mon.runs) <= 7


def test_monitor_universe_mismatch():
    mon = Monitor("F p")
    with pytest.raises(UniverseMismatchError):
        mon.step({"q": 1.0})


def test_monitor_step_functional_form():
    mon = Monitor("F p", spec_id="s")
    state, events = monitor_step(mon, {"p": 1.0})
    assert state is mon and [e.to_record() for e in events] == [
        {"spec": "s", "start": 0, "end": 0, "frame": 0}]


def test_offline_online_consistency():
    rng = random.Random(44)
    for _ in range(200):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 3))
        t = random_frame_trace(rng, ["p", "q"], rng.randint(1, 15))
        L = rng.choice([2, 5, 600])
        mon = Monitor(compile_dfa(f), max_window=L, suppression="none")
        online = merge_spans((e.start, e.end) for e in stream(mon, t))
        offline = [(s.start, s.end) for s in find_spans(f, t, SearchConfig(max_window=L))]
        assert online == offline, str(f)


def test_span_suppression_reports_first_of_each_clip():
    rng = random.Random(45)
    for _ in range(200):
        f = random_formula(rng, ["p", "q"], rng.randint(0, 3))
        t = random_frame_trace(rng, ["p", "q"], rng.randint(1, 15))
        events = stream(Monitor(compile_dfa(f), suppression="span"), t)
        clips = find_spans(f, t)
        starts = {c.start for c in clips}
        for e in events:
            assert e.start in starts
        assert len(events) <= len(clips)
