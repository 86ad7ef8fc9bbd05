"""Seeded synthetic scenes with lanes and planted anomalous days.

Each lane is a polyline corridor. A normal track walks the full corridor at a
constant speed, offset laterally by a per-track Gaussian draw (std ``sigma``)
plus a small per-point jitter (``sigma * POINT_JITTER``). Planted anomalies
either swap tracks onto an off-corridor lane, change the day's track count,
or both (``event``).
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DayRecord, Dataset, SceneConfig, Track, TrackPoint

POINT_JITTER = 0.2
ANOMALY_KINDS = ("offlane", "surge", "drop", "event")


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class LaneSpec:
    waypoints: tuple[tuple[float, float], ...]
    mean_count: float = 20.0
    sigma: float = 4.0
    speed: float = 10.0  # pixels per frame
    weekdays: tuple[int, ...] = (0, 1, 2, 3, 4, 5, 6)

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple((float(x), float(y)) for x, y in self.waypoints))
        object.__setattr__(self, "weekdays", tuple(self.weekdays))
        if len(self.waypoints) < 2:
            raise InvalidSpecError("a lane needs at least two waypoints")
        if self.speed <= 0 or self.sigma < 0 or self.mean_count < 0:
            raise InvalidSpecError(f"bad lane parameters: {self}")


@dataclass(frozen=True)
class PlantedAnomaly:
    day_index: int
    kind: str = "event"
    # offlane: fraction of tracks moved off-corridor; surge/drop: count
    # multiplier; event: extra off-corridor tracks as a multiple of the normal count
    magnitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise InvalidSpecError(f"unknown anomaly kind {self.kind!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 640
    height: int = 480
    n_days: int = 28
    start_date: dt.date = dt.date(2012, 1, 2)
    lanes: tuple[LaneSpec, ...] = ()
    off_lane: LaneSpec | None = None
    anomalies: tuple[PlantedAnomaly, ...] = ()
    duration_minutes: int = 30
    frame_rate: float = 1.0
    patch_size: int = 80

    def __post_init__(self):
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "anomalies", tuple(self.anomalies))

    def validate(self) -> None:
        if not self.lanes:
            raise InvalidSpecError("spec has zero lanes")
        if self.n_days <= 0:
            raise InvalidSpecError("spec has zero days")
        for a in self.anomalies:
            if not 0 <= a.day_index < self.n_days:
                raise InvalidSpecError(f"anomaly day {a.day_index} outside 0..{self.n_days - 1}")
            if a.kind in ("offlane", "event") and self.off_lane is None:
                raise InvalidSpecError(f"anomaly kind {a.kind!r} needs an off_lane")
        if len({a.day_index for a in self.anomalies}) != len(self.anomalies):
            raise InvalidSpecError("two anomalies planted on the same day")

    @property
    def scene(self) -> SceneConfig:
        return SceneConfig(self.width, self.height, self.duration_minutes, self.patch_size, self.frame_rate)

    def to_json(self) -> str:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        d = json.loads(text)
        if "start_date" in d:
            d["start_date"] = dt.date.fromisoformat(d["start_date"])
        d["lanes"] = tuple(LaneSpec(**lane) for lane in d.get("lanes", ()))
        if d.get("off_lane") is not None:
            d["off_lane"] = LaneSpec(**d["off_lane"])
        d["anomalies"] = tuple(PlantedAnomaly(**a) for a in d.get("anomalies", ()))
        return cls(**d)


def default_spec(n_days: int = 28, anomaly_days=(), kind: str = "event", magnitude: float = 2.0) -> SyntheticSpec:
    """Two-lane 640x480 plaza with a diagonal off-corridor path."""
    return SyntheticSpec(
        n_days=n_days,
        lanes=(
            LaneSpec(((40.0, 120.0), (600.0, 120.0)), mean_count=25, sigma=4.0),
            LaneSpec(((580.0, 380.0), (60.0, 380.0)), mean_count=20, sigma=4.0),
        ),
        off_lane=LaneSpec(((100.0, 440.0), (540.0, 40.0)), sigma=4.0),
        anomalies=tuple(PlantedAnomaly(i, kind, magnitude) for i in anomaly_days),
    )


BENCHMARK_ANOMALY_DAYS = (30, 50, 75, 110, 140, 165)


def benchmark_spec(n_days: int = 182) -> SyntheticSpec:
    """26 weeks of the two-lane plaza with six event days spread over both halves.

    Shorter runs keep the planted days that fall inside them.
    """
    return default_spec(n_days, tuple(d for d in BENCHMARK_ANOMALY_DAYS if d < n_days), "event", 2.0)


def four_lane_spec(n_days: int = 3) -> SyntheticSpec:
    """Four corridors with distinct positions and headings."""
    return SyntheticSpec(
        n_days=n_days,
        lanes=(
            LaneSpec(((40.0, 80.0), (600.0, 80.0)), mean_count=15, sigma=4.0),
            LaneSpec(((600.0, 240.0), (40.0, 240.0)), mean_count=15, sigma=4.0),
            LaneSpec(((600.0, 300.0), (600.0, 460.0)), mean_count=15, sigma=4.0),
            LaneSpec(((40.0, 460.0), (440.0, 300.0)), mean_count=15, sigma=4.0),
        ),
    )


def lane_samples(lane: LaneSpec):
    """Arc-length positions along the lane: centerline points and unit normals.

    Positions are ``0, speed, 2*speed, ...`` plus the final endpoint, so every
    track of a lane shares the same centerline samples.
    """
    wp = np.asarray(lane.waypoints, dtype=float)
    seg = np.diff(wp, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 0
    wp = np.vstack([wp[:1], wp[1:][keep]])
    seg, seg_len = seg[keep], seg_len[keep]
    if len(seg) == 0:
        raise InvalidSpecError("lane has zero length")
    total = seg_len.sum()
    n = int(np.floor(total / lane.speed))
    s = lane.speed * np.arange(n + 1)
    if total - s[-1] > 1e-9:
        s = np.append(s, total)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    centre = wp[idx] + seg[idx] * frac[:, None]
    unit = seg[idx] / seg_len[idx][:, None]
    normal = np.stack([-unit[:, 1], unit[:, 0]], axis=1)
    return centre, normal


def _make_track(track_id: str, lane: LaneSpec, rng: np.random.Generator, total_frames: int) -> Track:
    centre, normal = lane_samples(lane)
    n = len(centre)
    if lane.sigma > 0:
        offset = rng.normal(0.0, lane.sigma)
        jitter = rng.normal(0.0, lane.sigma * POINT_JITTER, size=centre.shape)
    else:
        offset, jitter = 0.0, np.zeros_like(centre)
    xy = centre + offset * normal + jitter
    start = int(rng.integers(0, max(total_frames - n, 0) + 1))
    return Track(
        track_id,
        tuple(TrackPoint(start + i, float(x), float(y)) for i, (x, y) in enumerate(xy)),
    )


def generate_synthetic_dataset(spec: SyntheticSpec, seed: int) -> Dataset:
    """Deterministic function of ``(spec, seed)``.

    Each day draws from its own generator seeded by ``(seed, day_index)`` so
    a day's content does not depend on how many days precede it.
    """
    spec.validate()
    scene = spec.scene
    total_frames = int(round(spec.duration_minutes * 60 * spec.frame_rate))
    planted = {a.day_index: a for a in spec.anomalies}
    days = []
    for i in range(spec.n_days):
        date = spec.start_date + dt.timedelta(days=i)
        rng = np.random.default_rng([seed, i])
        anomaly = planted.get(i)
        lanes = [lane for lane in spec.lanes if date.weekday() in lane.weekdays]
        counts = [int(rng.poisson(lane.mean_count)) for lane in lanes]
        if anomaly is not None and anomaly.kind in ("surge", "drop"):
            counts = [int(round(c * anomaly.magnitude)) for c in counts]

        chosen: list[LaneSpec] = [lane for lane, c in zip(lanes, counts) for _ in range(c)]
        if anomaly is not None and anomaly.kind == "offlane":
            n_off = int(round(len(chosen) * anomaly.magnitude))
            moved = set(rng.choice(len(chosen), size=n_off, replace=False).tolist()) if n_off else set()
            chosen = [spec.off_lane if k in moved else lane for k, lane in enumerate(chosen)]
        if anomaly is not None and anomaly.kind == "event":
            chosen += [spec.off_lane] * int(round(sum(counts) * anomaly.magnitude))

        tracks = tuple(_make_track(str(k + 1), lane, rng, total_frames) for k, lane in enumerate(chosen))
        days.append(DayRecord(date, tracks, label=1 if anomaly is not None else 0))
    return Dataset(scene, tuple(days))
