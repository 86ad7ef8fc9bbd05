import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trackscope.clustering import ClusterParams
from trackscope.core import Dataset, DayRecord, SceneConfig, Track
from trackscope.synthetic import default_spec, generate_synthetic_dataset
from trackscope.trajectory import (
    ETA_CAP,
    ClusterStat,
    UndecidableDayError,
    classify_track,
    fit_cluster_stats,
    fit_window_model,
    likelihood,
    predict_day,
    schedule_windows,
    track_distance,
)

from oracles import classify_bruteforce, track_distance_loop

REP = Track.from_xy("rep", [(0, 0), (0, -500)])
D0 = dt.date(2012, 1, 2)  # a Monday


def _track(xy, tid="t"):
    return Track.from_xy(tid, xy)


def test_distance_identity_and_example():
    assert track_distance(REP, REP) == 0.0
    assert track_distance([(0, 0), (1, 0)], [(0, 1)]) == 1.5


def test_distance_asymmetric():
    p, q = [(0, 0), (10, 0)], [(0, 0)]
    assert track_distance(q, p) == 0.0
    assert track_distance(p, q) == 50.0


def test_distance_empty_rejected():
    with pytest.raises(ValueError):
        track_distance(np.empty((0, 2)), [(0, 0)])


def test_distance_matches_loop():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = rng.uniform(0, 640, size=(rng.integers(1, 51), 2))
        q = rng.uniform(0, 640, size=(rng.integers(1, 51), 2))
        assert track_distance(p, q) == pytest.approx(track_distance_loop(p.tolist(), q.tolist()), rel=1e-12)


def test_likelihood_values():
    stat = ClusterStat(REP, 0.001, math.exp(-1), 3, -1.0)
    assert likelihood(REP, stat) == 1.0
    assert likelihood(_track([(30, 10), (-30, 10)]), stat) == pytest.approx(0.36787944117144233, rel=1e-12)


def test_fit_three_members():
    members = [_track([(30, 10), (-30, 10)], str(i)) for i in range(3)]
    stat = fit_cluster_stats(REP, members)
    assert stat.eta == pytest.approx(0.001, abs=1e-12)
    assert stat.gamma_threshold == pytest.approx(math.exp(-1), abs=1e-12)
    assert stat.training_count == 3


def test_fit_coincident_member():
    stat = fit_cluster_stats(REP, [REP])
    assert stat.eta == ETA_CAP and stat.gamma_threshold == 1.0


def test_fit_farther_member_sets_threshold():
    near = _track([(10, 20), (20, 10)], "near")
    far = _track([(30, 10), (40, 20)], "far")
    assert track_distance(near, REP) == 500.0
    assert track_distance(far, REP) == 1500.0
    stat = fit_cluster_stats(REP, [near, far])
    assert stat.eta == pytest.approx(0.001, abs=1e-15)
    assert stat.gamma_threshold == pytest.approx(math.exp(-1.5), abs=1e-12)


def test_fit_empty_members():
    with pytest.raises(ValueError):
        fit_cluster_stats(REP, [])


@given(st.lists(st.tuples(st.floats(-300, 300), st.floats(-300, 300)), min_size=1, max_size=8))
def test_fit_members_clear_threshold(offsets):
    members = [_track([(dx, dy), (dx, dy - 400)], str(i)) for i, (dx, dy) in enumerate(offsets)]
    stat = fit_cluster_stats(REP, members)
    dists = [track_distance(m, REP) for m in members]
    if sum(dists) > 0:
        assert np.mean(dists) == pytest.approx(1 / stat.eta, rel=1e-9)
    for m in members:
        assert -stat.eta * track_distance(m, REP) >= stat.log_gamma - 1e-12


def test_classify_representative_is_normal():
    stat = fit_cluster_stats(REP, [_track([(30, 10), (-30, 10)])])
    d = classify_track(REP, [stat])
    assert not d.anomalous and d.likelihood == 1.0


def test_classify_distance_guard():
    stat = ClusterStat(REP, 1.0, 0.5, 1, math.log(0.5))
    track = _track([(30, 0), (30, -500)])
    d = classify_track(track, [stat], delta=1000)
    assert d.distance == 900.0
    assert d.likelihood < stat.gamma_threshold
    assert not d.anomalous


def test_classify_tie_goes_to_first():
    stat = ClusterStat(REP, 0.001, 0.5, 1, math.log(0.5))
    assert classify_track(_track([(5, 5), (5, 0)]), [stat, stat]).cluster == 0


def test_classify_empty_model():
    with pytest.raises(ValueError):
        classify_track(REP, [])


def test_classify_matches_bruteforce():
    rng = np.random.default_rng(5)
    reps = [rng.uniform(0, 640, size=(rng.integers(2, 12), 2)) for _ in range(4)]
    model = []
    for k, rep in enumerate(reps):
        members = [rep + rng.normal(0, 20, size=rep.shape) for _ in range(3)]
        model.append(fit_cluster_stats(Track.from_xy(f"r{k}", rep), [Track.from_xy(str(i), m) for i, m in enumerate(members)]))
    etas = [m.eta for m in model]
    gammas = [m.gamma_threshold for m in model]
    for _ in range(300):
        xy = rng.uniform(0, 640, size=(rng.integers(2, 20), 2))
        if rng.random() < 0.5:
            base = reps[rng.integers(4)]
            xy = base + rng.normal(0, rng.choice([5.0, 40.0]), size=base.shape)
        want = classify_bruteforce(xy.tolist(), [r.tolist() for r in reps], etas, gammas, 1000.0)
        got = classify_track(xy, model, 1000.0)
        assert (got.anomalous, got.cluster) == want


def _day(n_total, n_far, date=D0):
    tracks = [Track.from_xy(str(i), [(0, 0), (0, -500)]) for i in range(n_total - n_far)]
    tracks += [Track.from_xy(f"f{i}", [(400, 300), (420, 300)]) for i in range(n_far)]
    return DayRecord(date, tuple(tracks))


MODEL = [ClusterStat(REP, 0.001, math.exp(-1), 3, -1.0)]


def test_predict_day_all_normal():
    p = predict_day(_day(10, 0), MODEL)
    assert (p.psi, p.predicted) == (0.0, 0)


def test_predict_day_boundary_inclusive():
    p = predict_day(_day(100, 1), MODEL, lam=0.01)
    assert p.anomalous_tracks == 1 and p.psi == 0.01 and p.predicted == 1


def test_predict_day_empty():
    with pytest.raises(UndecidableDayError):
        predict_day(DayRecord(D0), MODEL)


@given(st.integers(1, 60), st.integers(0, 60), st.floats(0, 1), st.floats(0, 1))
def test_predict_day_monotone_in_lambda(n, k, l1, l2):
    k = min(k, n)
    lo, hi = sorted((l1, l2))
    day = _day(n, k)
    assert predict_day(day, MODEL, lam=hi).predicted <= predict_day(day, MODEL, lam=lo).predicted


@given(st.floats(0, 5e5), st.floats(0, 5e5))
def test_classify_monotone_in_delta(d1, d2):
    lo, hi = sorted((d1, d2))
    track = _track([(400, 300), (420, 300)])
    assert classify_track(track, MODEL, hi).anomalous <= classify_track(track, MODEL, lo).anomalous


def test_planted_day_detected():
    spec = default_spec(4, anomaly_days=(3,), kind="offlane", magnitude=1 / 3)
    ds = generate_synthetic_dataset(spec, 3)
    model = fit_window_model(ds.days[:3], ClusterParams())
    assert len(model) == 2
    assert predict_day(ds.days[3], model).predicted == 1
    assert predict_day(ds.days[2], model).psi < 0.01


SCENE = SceneConfig(640, 480)


def _dates_ds(dates):
    return Dataset(SCENE, tuple(DayRecord(d) for d in dates))


def test_windows_four_mondays():
    ds = _dates_ds([D0 + dt.timedelta(weeks=i) for i in range(4)])
    w = schedule_windows(ds)
    assert len(w) == 1
    assert w[0].test_date == D0 + dt.timedelta(weeks=3)


def test_windows_five_mondays():
    ds = _dates_ds([D0 + dt.timedelta(weeks=i) for i in range(5)])
    w = schedule_windows(ds)
    assert len(w) == 2
    assert w[0].training_dates[1:] == w[1].training_dates[:2]


def test_windows_with_gaps():
    rng = np.random.default_rng(0)
    all_dates = [D0 + dt.timedelta(days=i) for i in range(228)]
    keep = [d for d in all_dates if rng.random() > 0.07]
    ds = _dates_ds(keep)
    present = set(keep)
    windows = schedule_windows(ds)
    assert windows
    for w in windows:
        dates = (*w.training_dates, w.test_date)
        assert all(d in present for d in dates)
        assert len({d.weekday() for d in dates}) == 1
        assert all((b - a).days == 7 for a, b in zip(dates, dates[1:]))
    expected = [d for d in keep if all(d - dt.timedelta(weeks=k) in present for k in (1, 2, 3))]
    assert [w.test_date for w in windows] == expected
