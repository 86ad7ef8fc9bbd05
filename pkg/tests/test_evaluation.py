import datetime as dt

import pytest
from hypothesis import given, strategies as st

from trackscope.core import ParseError
from trackscope.evaluation import (
    ConfusionMatrix,
    confusion,
    format_report,
    metrics,
    read_prediction_csv,
    round_half_away,
)

D0 = dt.date(2012, 1, 2)
DATES = [D0 + dt.timedelta(days=i) for i in range(10)]
TRUTH = {d: int(i < 4) for i, d in enumerate(DATES)}


def test_perfect_predictor():
    assert confusion(TRUTH, TRUTH) == ConfusionMatrix(tp=4, fp=0, fn=0, tn=6)


def test_all_negative_predictor():
    cm = confusion({d: 0 for d in DATES}, TRUTH)
    assert cm == ConfusionMatrix(tp=0, fp=0, fn=4, tn=6)
    assert metrics(cm).rounded() == (0.0, 0.0, 0.0)


def test_reference_matrix_metrics():
    m = metrics(ConfusionMatrix(tp=50, fp=110, fn=7, tn=46))
    assert m.precision == 0.3125
    assert m.rounded(2) == (0.31, 0.88, 0.46)


def test_degenerate_and_perfect_metrics():
    assert metrics(ConfusionMatrix(tn=10)).rounded() == (0.0, 0.0, 0.0)
    assert metrics(ConfusionMatrix(tp=1)).rounded() == (1.0, 1.0, 1.0)


def test_empty_intersection():
    with pytest.raises(ValueError):
        confusion({D0: 1}, {D0 + dt.timedelta(days=1): 1})


def test_unlabelled_days_excluded():
    preds = {d: 1 for d in DATES}
    truth = {d: TRUTH[d] for d in DATES[:5]}
    assert confusion(preds, truth).total == 5


@pytest.mark.parametrize("x, want", [(0.125, 0.13), (0.135, 0.14), (-0.125, -0.13), (0.3125, 0.31), (0.005, 0.01)])
def test_round_half_away(x, want):
    assert round_half_away(x, 2) == want


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_permutation_invariant(pairs, rnd):
    dates = [D0 + dt.timedelta(days=i) for i in range(len(pairs))]
    shuffled = list(range(len(pairs)))
    rnd.shuffle(shuffled)
    p1 = {dates[i]: int(pairs[i][0]) for i in range(len(pairs))}
    t1 = {dates[i]: int(pairs[i][1]) for i in range(len(pairs))}
    p2 = {dates[j]: int(pairs[i][0]) for j, i in enumerate(shuffled)}
    t2 = {dates[j]: int(pairs[i][1]) for j, i in enumerate(shuffled)}
    assert metrics(confusion(p1, t1)) == metrics(confusion(p2, t2))


@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_metrics_bounded(tp, fp, fn, tn):
    m = metrics(ConfusionMatrix(tp, fp, fn, tn))
    for v in (m.precision, m.recall, m.f1):
        assert 0.0 <= v <= 1.0
    assert m.f1 <= max(m.precision, m.recall) + 1e-12


def test_read_prediction_csv():
    preds, labels = read_prediction_csv("date,predicted,label\n2012-01-02,1,1\n2012-01-03,0,\n")
    assert preds == {D0: 1, D0 + dt.timedelta(days=1): 0}
    assert labels == {D0: 1}


def test_read_prediction_csv_errors():
    with pytest.raises(ParseError):
        read_prediction_csv("date,label\n2012-01-02,1\n")
    with pytest.raises(ParseError) as exc:
        read_prediction_csv("date,predicted\n2012-01-02,1\n2012-01-03,2\n")
    assert exc.value.line == 3


def test_report_lines():
    cm = ConfusionMatrix(50, 110, 7, 46)
    text = format_report(cm, metrics(cm))
    assert "precision 0.31" in text and "recall 0.88" in text and "f1 0.46" in text
