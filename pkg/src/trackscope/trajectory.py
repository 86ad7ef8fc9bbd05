"""Cluster-statistical anomaly prediction at track and day level.

Per weekday, three consecutive same-weekday days train a cluster model and the
following same-weekday day is tested. A test track is scored against every
cluster representative with an exponential likelihood; a day is anomalous
when the share of anomalous tracks reaches ``lam``.
"""
from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import ClusterParams, Segment, SegmentCluster, group_segments, partition_track
from .core import Dataset, DayRecord, Track

log = logging.getLogger(__name__)

ETA_CAP = 1e6  # px^-2, used when every training track sits on the representative
DEFAULT_DELTA = 1000.0
DEFAULT_LAMBDA = 0.01


class UndecidableDayError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterStat:
    representative: Track
    eta: float
    gamma_threshold: float
    training_count: int
    log_gamma: float  # -eta * max training distance, kept to avoid exp underflow

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0 <= self.gamma_threshold <= 1:
            raise ValueError(f"gamma_threshold outside (0, 1]: {self.gamma_threshold}")


@dataclass(frozen=True)
class TrackDecision:
    anomalous: bool
    cluster: int  # j*
    likelihood: float
    distance: float


@dataclass(frozen=True)
class DayPrediction:
    date: dt.date
    anomalous_tracks: int
    total_tracks: int
    psi: float
    predicted: int
    track_decisions: tuple[tuple[str, TrackDecision], ...] = field(default=(), compare=False, repr=False)

    @property
    def weekday(self) -> str:
        from .core import WEEKDAYS

        return WEEKDAYS[self.date.weekday()]


@dataclass(frozen=True)
class TimeScaleWindow:
    training_dates: tuple[dt.date, dt.date, dt.date]
    test_date: dt.date


def _as_points(track) -> np.ndarray:
    if isinstance(track, Track):
        return track.coords
    pts = np.asarray(track, dtype=float).reshape(-1, 2)
    return pts


def track_distance(p, q) -> float:
    """Mean over points of ``p`` of the squared distance to the nearest point of ``q``.

    Not symmetric. Accepts tracks or ``(n, 2)`` coordinate arrays.
    """
    a, b = _as_points(p), _as_points(q)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("track_distance needs non-empty tracks")
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return float(sq.min(axis=1).mean())


def likelihood(track, cluster: ClusterStat) -> float:
    return math.exp(-cluster.eta * track_distance(track, cluster.representative))


def fit_cluster_stats(cluster: SegmentCluster | Track, member_tracks: Sequence[Track], eta_cap: float = ETA_CAP) -> ClusterStat:
    """Rate = K / sum of member distances; threshold = least member likelihood."""
    rep = cluster.representative if isinstance(cluster, SegmentCluster) else cluster
    if not member_tracks:
        raise ValueError("fit_cluster_stats needs at least one member track")
    dists = np.array([track_distance(t, rep) for t in member_tracks])
    total = float(dists.sum())
    if total == 0.0:
        return ClusterStat(rep, eta_cap, 1.0, len(dists), 0.0)
    eta = len(dists) / total
    log_gamma = -eta * float(dists.max())
    return ClusterStat(rep, eta, math.exp(log_gamma), len(dists), log_gamma)


def classify_track(track, model: Sequence[ClusterStat], delta: float = DEFAULT_DELTA) -> TrackDecision:
    if not model:
        raise ValueError("classify_track needs a non-empty model")
    dists = [track_distance(track, c.representative) for c in model]
    log_lik = [-c.eta * d for c, d in zip(model, dists)]
    best = max(range(len(model)), key=lambda j: (log_lik[j], -j))
    anomalous = log_lik[best] < model[best].log_gamma and dists[best] > delta
    return TrackDecision(bool(anomalous), best, math.exp(log_lik[best]), dists[best])


def predict_day(day: DayRecord, model: Sequence[ClusterStat], delta: float = DEFAULT_DELTA, lam: float = DEFAULT_LAMBDA) -> DayPrediction:
    """Day is anomalous iff ``n_anomalous / n_total >= lam``."""
    if not day.tracks:
        raise UndecidableDayError(f"{day.date}: no tracks")
    decisions = tuple((t.id, classify_track(t, model, delta)) for t in day.tracks)
    n_ano = sum(d.anomalous for _, d in decisions)
    n_total = len(decisions)
    psi = n_ano / n_total
    return DayPrediction(day.date, n_ano, n_total, psi, int(psi >= lam), decisions)


def schedule_windows(dataset: Dataset, omega: int = 28, epsilon: int = 7) -> list[TimeScaleWindow]:
    """Three same-weekday training days followed by the test day.

    A window is emitted only when all three earlier dates are present.
    """
    if omega % epsilon:
        raise ValueError("omega must be a multiple of epsilon")
    n_train = omega // epsilon - 1
    present = {d.date for d in dataset.days}
    step = dt.timedelta(days=epsilon)
    windows = []
    for day in dataset.days:
        train = tuple(day.date - step * k for k in range(n_train, 0, -1))
        if all(d in present for d in train):
            windows.append(TimeScaleWindow(train, day.date))
    return windows


def fit_window_model(days: Sequence[DayRecord], params: ClusterParams, segment_cache: dict | None = None) -> list[ClusterStat]:
    """Cluster the training days' tracks and fit one ClusterStat per cluster.

    A cluster's members are the tracks owning at least one of its segments;
    tracks left entirely in the noise set contribute to no cluster.
    """
    segments: list[Segment] = []
    tracks = {}
    for day in days:
        if segment_cache is not None and day.date in segment_cache:
            segs = segment_cache[day.date]
        else:
            segs = [s for t in day.tracks for s in partition_track(t, params.mdl_partition, (day.date, t.id))]
            if segment_cache is not None:
                segment_cache[day.date] = segs
        segments.extend(segs)
        tracks.update({(day.date, t.id): t for t in day.tracks})
    model = []
    for cluster in group_segments(segments, params):
        members = [tracks[o] for o in cluster.owners]
        model.append(fit_cluster_stats(cluster, members))
    return model


@dataclass
class TrajectoryRun:
    predictions: list[DayPrediction]
    skipped: list[tuple[dt.date, str]]
    cluster_counts: dict[dt.date, int]


def run_trajectory_pipeline(
    dataset: Dataset,
    params: ClusterParams = ClusterParams(),
    delta: float = DEFAULT_DELTA,
    lam: float = DEFAULT_LAMBDA,
    omega: int = 28,
    epsilon: int = 7,
) -> TrajectoryRun:
    """Predict every schedulable test day. Windows with no clusters or an empty test day are skipped."""
    by_date = dataset.by_date()
    cache: dict = {}
    run = TrajectoryRun([], [], {})
    for window in schedule_windows(dataset, omega, epsilon):
        model = fit_window_model([by_date[d] for d in window.training_dates], params, cache)
        run.cluster_counts[window.test_date] = len(model)
        if not model:
            run.skipped.append((window.test_date, "no clusters in training days"))
            log.info("%s: skipped, no clusters", window.test_date)
            continue
        try:
            run.predictions.append(predict_day(by_date[window.test_date], model, delta, lam))
        except UndecidableDayError as exc:
            run.skipped.append((window.test_date, str(exc)))
    return run
