"""Per-day active-track count series and banded-DTW nearest-neighbour labelling."""
from __future__ import annotations

import bisect
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .core import ConfigError, DayRecord


@dataclass(frozen=True)
class CountSeries:
    date: dt.date
    theta: int
    counts: tuple[int, ...]
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    def __len__(self):
        return len(self.counts)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)


@dataclass(frozen=True)
class NNConfig:
    k: int = 1
    band_radius: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.band_radius < 0:
            raise ValueError(f"band_radius must be >= 0, got {self.band_radius}")


@dataclass(frozen=True)
class NNResult:
    label: int
    neighbours: tuple[int, ...]  # training indices, nearest first
    distances: tuple[float, ...]
    dtw_evaluations: int = 0
    pruned: int = field(default=0)


def series_length(theta: int, duration_minutes: int) -> int:
    if theta <= 0 or (duration_minutes * 60) % theta:
        raise ConfigError(f"theta={theta}s does not divide {duration_minutes} minutes")
    return duration_minutes * 60 // theta


def count_series(day: DayRecord, theta: int = 15, frame_rate: float = 1.0, duration: int = 30) -> CountSeries:
    """``counts[s]`` = distinct tracks with a point in frames ``[theta*s*fps, theta*(s+1)*fps)``.

    Points past the nominal duration are ignored.
    """
    if not frame_rate > 0:
        raise ConfigError(f"frame_rate must be positive, got {frame_rate}")
    n = series_length(theta, duration)
    frames_per_bin = theta * frame_rate
    counts = np.zeros(n, dtype=np.int64)
    for track in day.tracks:
        bins = np.unique(np.floor(track.frames / frames_per_bin).astype(np.int64))
        bins = bins[bins < n]
        counts[bins] += 1
    return CountSeries(day.date, theta, tuple(counts.tolist()), day.label)


def _as_array(x) -> np.ndarray:
    return x.values if isinstance(x, CountSeries) else np.asarray(x, dtype=float)


def dtw_distance(a, b, r: int, abandon_above: float | None = None) -> float:
    """DTW with squared-difference cost inside a Sakoe-Chiba band ``|i-j| <= r``; returns sqrt of the cost.

    With ``abandon_above`` set, returns ``inf`` as soon as a whole row of the
    cost matrix exceeds it, which only happens when the true distance does.
    """
    x, y = _as_array(a), _as_array(b)
    n = len(x)
    if len(y) != n:
        raise ValueError(f"length mismatch: {n} vs {len(y)}")
    if r < 0:
        raise ValueError("band radius must be >= 0")
    if n == 0:
        return 0.0
    r = min(r, n - 1)
    xs, ys = x.tolist(), y.tolist()
    inf = math.inf
    # small relative margin keeps the abandon decision safe against rounding
    limit = inf if abandon_above is None else abandon_above * abandon_above * (1 + 1e-12)
    prev = [inf] * (n + 1)  # prev[j + 1] holds row i-1, column j; prev[0] is a sentinel
    prev[1] = (xs[0] - ys[0]) ** 2
    for j in range(1, min(n - 1, r) + 1):
        d = xs[0] - ys[j]
        prev[j + 1] = prev[j] + d * d
    for i in range(1, n):
        cur = [inf] * (n + 1)
        xi = xs[i]
        left = row_min = inf
        for j in range(max(0, i - r), min(n - 1, i + r) + 1):
            d = xi - ys[j]
            best = prev[j + 1]
            diag = prev[j]
            if diag < best:
                best = diag
            if left < best:
                best = left
            left = best + d * d
            cur[j + 1] = left
            if left < row_min:
                row_min = left
        if row_min > limit:
            return inf
        prev = cur
    return math.sqrt(prev[n])


def envelope(series, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper/lower running max/min over ``[i-r, i+r]`` clipped at the ends."""
    c = _as_array(series)
    size = 2 * r + 1
    return (
        maximum_filter1d(c, size=size, mode="nearest"),
        minimum_filter1d(c, size=size, mode="nearest"),
    )


def lb_keogh(query, candidate, r: int, env: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    q = _as_array(query)
    c = _as_array(candidate)
    if len(q) != len(c):
        raise ValueError(f"length mismatch: {len(q)} vs {len(c)}")
    if r < 0:
        raise ValueError("band radius must be >= 0")
    upper, lower = envelope(c, r) if env is None else env
    gap = np.maximum(q - upper, 0.0) + np.maximum(lower - q, 0.0)
    return math.sqrt(float(gap @ gap))


def _majority(labels: Sequence[int]) -> int:
    """Most common label; ties go to the label of the nearest neighbour."""
    counts: dict[int, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    top = max(counts.values())
    return next(lab for lab in labels if counts[lab] == top)


def knn_predict(test, training: Sequence[CountSeries], config: NNConfig = NNConfig(), prune: bool = True, envelopes=None) -> NNResult:
    """k-NN label under banded DTW, skipping candidates whose LB_Keogh exceeds the current k-th best.

    Candidates are ranked by ``(distance, index)`` so equal distances go to
    the earlier training series, with or without pruning.
    """
    if not training:
        raise ValueError("knn_predict needs a non-empty training set")
    if any(s.label is None for s in training):
        raise ValueError("knn_predict needs labelled training series")
    q = _as_array(test)
    r = config.band_radius
    best: list[tuple[float, int]] = []
    evaluated = pruned = 0
    for idx, cand in enumerate(training):
        if len(cand) != len(q):
            raise ValueError(f"length mismatch with training series {idx}")
        if prune and len(best) == config.k:
            env = envelopes[idx] if envelopes is not None else None
            if lb_keogh(q, cand, r, env) > best[-1][0]:
                pruned += 1
                continue
        cutoff = best[-1][0] if prune and len(best) == config.k else None
        d = dtw_distance(q, cand, r, cutoff)
        evaluated += 1
        item = (d, idx)
        if len(best) < config.k:
            bisect.insort(best, item)
        elif item < best[-1]:
            bisect.insort(best, item)
            best.pop()
    labels = [training[i].label for _, i in best]
    return NNResult(
        _majority(labels),
        tuple(i for _, i in best),
        tuple(d for d, _ in best),
        evaluated,
        pruned,
    )


def split_half(series: Sequence[CountSeries]):
    """Chronological split: first ``ceil(n/2)`` train, the rest test."""
    if len(series) < 2:
        raise ValueError("split_half needs at least 2 series")
    ordered = sorted(series, key=lambda s: s.date)
    cut = math.ceil(len(ordered) / 2)
    return ordered[:cut], ordered[cut:]


@dataclass(frozen=True)
class TSPrediction:
    date: dt.date
    predicted: int
    label: int | None
    nn_date: dt.date
    nn_distance: float


def run_timeseries_pipeline(series: Sequence[CountSeries], config: NNConfig = NNConfig()) -> list[TSPrediction]:
    """Chronological half split; unlabelled days in the first half cannot vote and are left out."""
    train, test = split_half(series)
    train = [s for s in train if s.label is not None]
    if not train:
        raise ValueError("no labelled day in the training half")
    envs = [envelope(s, config.band_radius) for s in train]
    out = []
    for s in test:
        res = knn_predict(s, train, config, envelopes=envs)
        nn = res.neighbours[0]
        out.append(TSPrediction(s.date, res.label, s.label, train[nn].date, res.distances[0]))
    return out
