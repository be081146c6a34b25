import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_matches
from spos_gebd.evaluation import (
    THRESHOLDS,
    AnnotationError,
    AnnotationSet,
    EvaluationError,
    count_matches,
    evaluate,
    extract_boundaries,
    match_f1,
)


def test_worked_example():
    p, r, f = match_f1([22, 90], [20, 60], 100, 0.05)
    assert (p, r, f) == (0.5, 0.5, 0.5)


def test_duplicate_detections_only_match_once():
    p, r, f = match_f1([10, 11], [10], 100, 0.05)
    assert (p, r) == (0.5, 1.0)
    assert f == pytest.approx(2 / 3)


def test_empty_cases():
    assert match_f1([], [], 100, 0.05) == (1.0, 1.0, 1.0)
    assert match_f1([5], [], 100, 0.05) == (0.0, 0.0, 0.0)
    assert match_f1([], [5], 100, 0.05) == (0.0, 0.0, 0.0)


def test_threshold_must_be_positive():
    with pytest.raises(EvaluationError):
        match_f1([1], [1], 10, 0.0)


def test_matching_equals_brute_force_500_trials():
    rng = np.random.default_rng(0)
    for _ in range(500):
        length = int(rng.integers(10, 200))
        dets = list(rng.integers(0, length, int(rng.integers(0, 7))))
        gts = list(rng.integers(0, length, int(rng.integers(0, 7))))
        thr = float(rng.choice(THRESHOLDS))
        assert count_matches(dets, gts, length, thr) == brute_force_matches(dets, gts, length, thr)


def test_greedy_not_fooled_by_crossing_candidates():
    # nearest-first would pair 12 with 10 and leave 5 unmatched
    assert count_matches([5, 12], [10, 16], 100, 0.05) == 2


@given(
    st.lists(st.integers(0, 99), max_size=6),
    st.lists(st.integers(0, 99), max_size=6),
)
def test_f1_monotone_in_threshold(dets, gts):
    f1 = [match_f1(dets, gts, 100, t)[2] for t in THRESHOLDS]
    assert all(a <= b for a, b in zip(f1, f1[1:]))


@given(
    st.lists(st.integers(0, 80), max_size=6),
    st.lists(st.integers(0, 80), max_size=6),
    st.integers(0, 19),
)
def test_shift_invariance(dets, gts, shift):
    a = count_matches(dets, gts, 100, 0.1)
    b = count_matches([d + shift for d in dets], [g + shift for g in gts], 100, 0.1)
    assert a == b


def test_peak_extraction():
    assert extract_boundaries([0.1, 0.9, 0.2, 0.3, 0.7, 0.1], tau=0.5, radius=1) == [1, 4]
    assert extract_boundaries([0.1, 0.9, 0.95, 0.1], tau=0.5, radius=1) == [2]
    assert extract_boundaries([0.4, 0.3], tau=0.5) == []


def test_plateau_emits_first_index():
    assert extract_boundaries([0.0, 0.8, 0.8, 0.0], tau=0.5, radius=1) == [1]


def test_peaks_respect_radius():
    s = np.zeros(20)
    s[[5, 7, 15]] = [0.9, 0.8, 0.7]
    assert extract_boundaries(s, 0.5, radius=2) == [5, 15]
    assert extract_boundaries(s, 0.5, radius=1) == [5, 7, 15]


def _annos(**raters):
    return {vid: AnnotationSet(vid, 100, rs) for vid, rs in raters.items()}


def test_rater_max_per_video():
    annos = _annos(a=[[50], [20, 80]])
    report = evaluate({"a": [20, 80]}, annos)
    assert report.f1 == [1.0] * 10


def test_report_has_ten_thresholds_and_average():
    report = evaluate({"a": [22, 90]}, _annos(a=[[20, 60]]))
    assert report.thresholds == THRESHOLDS == (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    assert report.f1_at(0.05) == 0.5
    assert report.avg_f1 == pytest.approx(np.mean(report.f1))
    assert report.to_table().splitlines()[0].split()[-1] == "avg"
    assert len(report.to_record()["f1"]) == 10


def test_video_mean_vs_corpus_pool():
    annos = _annos(a=[[10]], b=[[10, 30, 50, 70]])
    preds = {"a": [10], "b": [90]}
    mean = evaluate(preds, annos, aggregate="video-mean")
    pool = evaluate(preds, annos, aggregate="corpus-pool")
    assert mean.f1_at(0.05) == pytest.approx(0.5)
    # pooled: tp=1, det=2, gt=5
    assert pool.precision[0] == 0.5 and pool.recall[0] == pytest.approx(0.2)


def test_missing_annotation_is_error():
    with pytest.raises(EvaluationError, match="ghost"):
        evaluate({"ghost": [1]}, _annos(a=[[1]]))
    with pytest.raises(EvaluationError):
        evaluate({}, _annos(a=[[1]]))
    with pytest.raises(EvaluationError):
        evaluate({"a": [1]}, _annos(a=[[1]]), aggregate="median")


def test_annotation_validation():
    with pytest.raises(AnnotationError, match="v1"):
        AnnotationSet("v1", 100, [[100]])
    with pytest.raises(AnnotationError):
        AnnotationSet("v1", 100, [])
    with pytest.raises(AnnotationError):
        AnnotationSet("v1", 0, [[0]])
