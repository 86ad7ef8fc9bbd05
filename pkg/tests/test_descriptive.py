import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trackscope.core import ConfigError, Dataset, DayRecord, SceneConfig, Track
from trackscope.descriptive import (
    HeatmapGrid,
    accumulate_heatmap,
    compute_footmap,
    jet,
    log_intensity,
    render_footmap,
    render_heatmap_log,
)
from trackscope.ioutil import decode_ppm, encode_ppm
from trackscope.synthetic import default_spec

D0 = dt.date(2012, 1, 2)
SMALL = SceneConfig(160, 160, patch_size=80)


def _ds(*tracks_per_day, scene=SMALL):
    days = tuple(
        DayRecord(D0 + dt.timedelta(days=i), tuple(Track.from_xy(str(k), xy) for k, xy in enumerate(tr)))
        for i, tr in enumerate(tracks_per_day)
    )
    return Dataset(scene, days)


def test_empty_dataset_heatmap():
    grid = accumulate_heatmap(Dataset(SMALL, ()))
    assert grid.counts.shape == (160, 160)
    assert grid.total == 0


def test_floor_binning():
    grid = accumulate_heatmap(_ds([[(5.2, 7.9)] * 3]))
    assert grid.counts[7, 5] == 3
    assert grid.total == 3


def test_out_of_bounds_skipped():
    grid = accumulate_heatmap(_ds([[(5, 5), (160, 5), (-0.1, 3)]]))
    assert grid.total == 1
    assert grid.out_of_bounds == 2


def _dist_to_polyline(px, py, waypoints):
    best = math.inf
    for (ax, ay), (bx, by) in zip(waypoints, waypoints[1:]):
        vx, vy = bx - ax, by - ay
        t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy)))
        best = min(best, math.hypot(px - ax - t * vx, py - ay - t * vy))
    return best


def test_lane_corridor_mass(two_lane_triple):
    spec = default_spec(3)
    grid = accumulate_heatmap(two_lane_triple)
    rows, cols = np.nonzero(grid.counts)
    on = 0
    for r, c in zip(rows, cols):
        d = min(_dist_to_polyline(c + 0.5, r + 0.5, lane.waypoints) for lane in spec.lanes)
        if d <= 4 * spec.lanes[0].sigma + 1:
            on += grid.counts[r, c]
    assert on / grid.total >= 0.99


def test_log_intensity_fixture():
    out = log_intensity(np.array([[0, 2, 20]]))
    assert out[0, 0] == 0.0
    assert out[0, 1] == pytest.approx(math.log(3) / math.log(21), abs=1e-15)
    assert out[0, 2] == 1.0


def test_zero_grid_renders_min_colour():
    img = render_heatmap_log(HeatmapGrid(4, 3, np.zeros((3, 4), dtype=np.int64)))
    assert img.shape == (3, 4, 3)
    assert (img == [0, 0, 255]).all()


def test_jet_knots():
    assert jet(np.array([0.0, 0.5, 1.0])).tolist() == [[0, 0, 255], [0, 255, 0], [255, 0, 0]]


@given(st.lists(st.integers(0, 10_000), min_size=2, max_size=40))
def test_argmax_is_unique_red(values):
    counts = np.array(values, dtype=np.int64).reshape(1, -1)
    top = counts.max()
    if top == 0 or (counts == top).sum() > 1:
        return
    intensity = log_intensity(counts)[0]
    img = jet(intensity)
    assert np.flatnonzero(intensity == 1.0).tolist() == [int(counts.argmax())]
    assert img[counts.argmax()].tolist() == [255, 0, 0]
    # other cells only render pure red when within one 8-bit step of the top
    red = (img == [255, 0, 0]).all(axis=1)
    assert (intensity[red] > 1 - 1 / (2 * 255 * 4)).all()


def test_argmax_unique_red_when_separated():
    img = jet(log_intensity(np.array([[0, 3, 40, 900, 1000]])))[0]
    assert [i for i, px in enumerate(img.tolist()) if px == [255, 0, 0]] == [4]


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=40))
def test_log_intensity_preserves_order(values):
    c = np.array(values)
    out = log_intensity(c)
    for i in range(len(c)):
        for j in range(len(c)):
            if c[i] < c[j]:
                assert out[i] < out[j]


def test_footmap_empty():
    fm = compute_footmap(Dataset(SMALL, ()))
    assert fm.values.shape == (4, 0)


def test_footmap_top_right_pool():
    fm = compute_footmap(_ds([[(85, 10), (85, 10.5)]]))
    assert fm.values[:, 0].tolist() == [0, 2, 0, 0]


def test_footmap_indivisible_patch():
    with pytest.raises(ConfigError):
        SceneConfig(170, 160, patch_size=80)


def test_mass_conservation(month):
    grid = accumulate_heatmap(month)
    fm = compute_footmap(month)
    for j, day in enumerate(month.days):
        n = sum(1 for t in day.tracks for p in t.points if 0 <= p.x < 640 and 0 <= p.y < 480)
        assert fm.values[:, j].sum() == n
    assert grid.total == fm.values.sum()


@given(st.permutations(range(5)))
def test_footmap_day_permutation(perm):
    tracks = [[(10 + 30 * i, 10 + 20 * i), (90, 120 - 10 * i)] for i in range(5)]
    a = compute_footmap(_ds(*[[t] for t in tracks]))
    b = compute_footmap(_ds(*[[tracks[p]] for p in perm]))
    assert a.values.sum(axis=1).tolist() == b.values.sum(axis=1).tolist()
    assert b.values.tolist() == a.values[:, list(perm)].tolist()


def test_footmap_render_shape(month):
    img = render_footmap(compute_footmap(month))
    assert img.shape == (48, 28, 3)


def test_ppm_round_trip():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(7, 5, 3), dtype=np.uint8)
    blob = encode_ppm(img)
    assert blob.startswith(b"P6\n5 7\n255\n")
    assert (decode_ppm(blob) == img).all()
