"""Domain types and file ingestion for per-day trajectory data.

A dataset on disk is a directory holding one ``YYYY-MM-DD.csv`` file per day
(``track_id,frame,x,y`` per line, no header), a ``scene.toml`` with the scene
geometry and, optionally, a ``labels.csv`` annotation file.
"""
from __future__ import annotations

import datetime as dt
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
DAY_FILE_RE = re.compile(r"^(\d{4}-\d{2}-\d{2})\.csv$")


class ParseError(ValueError):
    """Malformed input text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrackPoint:
    frame: int
    x: float
    y: float

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x}, {self.y})")


@dataclass(frozen=True)
class Track:
    id: str
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise ValueError(f"track {self.id!r} has {len(self.points)} point(s), need >= 2")
        frames = [p.frame for p in self.points]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"track {self.id!r}: frame indices not strictly increasing")

    def __len__(self):
        return len(self.points)

    @cached_property
    def coords(self) -> np.ndarray:
        """Read-only ``(n, 2)`` array of (x, y)."""
        arr = np.array([(p.x, p.y) for p in self.points], dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def frames(self) -> np.ndarray:
        return np.array([p.frame for p in self.points], dtype=np.int64)

    @classmethod
    def from_xy(cls, track_id: str, coords, frames: Iterable[int] | None = None) -> "Track":
        coords = [(float(x), float(y)) for x, y in coords]
        if frames is None:
            frames = range(len(coords))
        return cls(track_id, tuple(TrackPoint(int(f), x, y) for f, (x, y) in zip(frames, coords)))


@dataclass(frozen=True)
class SceneConfig:
    width: int
    height: int
    video_duration_minutes: int = 30
    patch_size: int = 80
    frame_rate: float = 1.0

    def __post_init__(self):
        for name in ("width", "height", "video_duration_minutes", "patch_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.frame_rate > 0:
            raise ConfigError(f"frame_rate must be positive, got {self.frame_rate!r}")
        if self.width % self.patch_size or self.height % self.patch_size:
            raise ConfigError(
                f"patch_size {self.patch_size} does not divide scene {self.width}x{self.height}"
            )

    @property
    def pools_x(self) -> int:
        return self.width // self.patch_size

    @property
    def pools_y(self) -> int:
        return self.height // self.patch_size

    @property
    def pool_count(self) -> int:
        return self.pools_x * self.pools_y

    def in_bounds(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class DayRecord:
    date: dt.date
    tracks: tuple[Track, ...] = ()
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def weekday(self) -> str:
        return WEEKDAYS[self.date.weekday()]

    @property
    def n_points(self) -> int:
        return sum(len(t) for t in self.tracks)


@dataclass(frozen=True)
class Dataset:
    scene: SceneConfig
    days: tuple[DayRecord, ...] = ()

    def __post_init__(self):
        days = tuple(sorted(self.days, key=lambda d: d.date))
        dates = [d.date for d in days]
        if len(set(dates)) != len(dates):
            dup = [d for d, c in Counter(dates).items() if c > 1]
            raise ValueError(f"duplicate dates in dataset: {dup[:3]}")
        object.__setattr__(self, "days", days)

    def __len__(self):
        return len(self.days)

    def by_date(self) -> dict[dt.date, DayRecord]:
        return {d.date: d for d in self.days}

    def labels(self) -> dict[dt.date, int]:
        return {d.date: d.label for d in self.days if d.label is not None}


@dataclass
class ParseDiagnostics:
    dropped_short_tracks: int = 0
    out_of_bounds_points: int = 0
    notes: list[str] = field(default_factory=list)


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def parse_day_file(raw_text: str, date: dt.date, source: str | None = None):
    """Parse one day of ``track_id,frame,x,y`` lines.

    Returns ``(DayRecord, ParseDiagnostics)``. Tracks shorter than two points
    are dropped and tallied; points are sorted by frame within each track.
    """
    points: dict[str, dict[int, TrackPoint]] = {}
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", lineno, source)
        track_id, frame_s, x_s, y_s = (f.strip() for f in fields)
        if not track_id:
            raise ParseError("empty track id", lineno, source)
        if not (frame_s.isascii() and frame_s.isdigit()):
            raise ParseError(f"frame {frame_s!r} is not a non-negative integer", lineno, source)
        try:
            x, y = float(x_s), float(y_s)
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {line!r}", lineno, source) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"non-finite coordinate in {line!r}", lineno, source)
        frame = int(frame_s)
        per_track = points.setdefault(track_id, {})
        if frame in per_track:
            raise ParseError(f"duplicate (track_id, frame) = ({track_id}, {frame})", lineno, source)
        per_track[frame] = TrackPoint(frame, x, y)

    diag = ParseDiagnostics()
    tracks = []
    for track_id, per_track in points.items():
        if len(per_track) < 2:
            diag.dropped_short_tracks += 1
            continue
        tracks.append(Track(track_id, tuple(per_track[f] for f in sorted(per_track))))
    return DayRecord(date, tuple(tracks)), diag


def format_day_file(day: DayRecord) -> str:
    """Inverse of :func:`parse_day_file`; floats are written with ``repr`` so they round-trip."""
    lines = []
    for track in day.tracks:
        for p in track.points:
            lines.append(f"{track.id},{p.frame},{p.x!r},{p.y!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_annotations(raw_text: str, source: str | None = None) -> dict[dt.date, int]:
    labels: dict[dt.date, int] = {}
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise ParseError(f"expected 'YYYY-MM-DD,label', got {line!r}", lineno, source)
        try:
            date = parse_date(fields[0])
        except ValueError:
            raise ParseError(f"unparseable date {fields[0]!r}", lineno, source) from None
        if fields[1] not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {fields[1]!r}", lineno, source)
        labels[date] = int(fields[1])
    return labels


def format_annotations(labels: Mapping[dt.date, int]) -> str:
    return "".join(f"{d.isoformat()},{labels[d]}\n" for d in sorted(labels))


def apply_labels(dataset: Dataset, labels: Mapping[dt.date, int]) -> Dataset:
    days = tuple(replace(d, label=labels.get(d.date, d.label)) for d in dataset.days)
    return Dataset(dataset.scene, days)


def filter_days(dataset: Dataset, exclusion: Iterable[dt.date]) -> Dataset:
    excluded = set(exclusion)
    return Dataset(dataset.scene, tuple(d for d in dataset.days if d.date not in excluded))


def count_out_of_bounds(dataset: Dataset) -> int:
    scene = dataset.scene
    return sum(
        1
        for day in dataset.days
        for t in day.tracks
        for p in t.points
        if not scene.in_bounds(p.x, p.y)
    )


# -- scene config ----------------------------------------------------------

SCENE_KEYS = ("width", "height", "duration_minutes", "patch_size")


def parse_scene_config(raw_text: str, source: str | None = None) -> SceneConfig:
    try:
        data = tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source or 'scene config'}: {exc}") from None
    missing = [k for k in ("width", "height") if k not in data]
    if missing:
        raise ConfigError(f"{source or 'scene config'}: missing key(s) {missing}")
    unknown = set(data) - set(SCENE_KEYS) - {"frame_rate"}
    if unknown:
        raise ConfigError(f"{source or 'scene config'}: unknown key(s) {sorted(unknown)}")
    return SceneConfig(
        width=data["width"],
        height=data["height"],
        video_duration_minutes=data.get("duration_minutes", 30),
        patch_size=data.get("patch_size", 80),
        frame_rate=float(data.get("frame_rate", 1.0)),
    )


def format_scene_config(scene: SceneConfig) -> str:
    return (
        f"width = {scene.width}\n"
        f"height = {scene.height}\n"
        f"duration_minutes = {scene.video_duration_minutes}\n"
        f"patch_size = {scene.patch_size}\n"
        f"frame_rate = {float(scene.frame_rate)!r}\n"
    )


# -- dataset directories ---------------------------------------------------


def load_dataset(directory: str | Path, labels_path: str | Path | None = None):
    """Read a dataset directory. Returns ``(Dataset, ParseDiagnostics)``.

    Labels come from ``labels_path`` when given, else from ``labels.csv``
    inside the directory if present.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    scene_path = directory / "scene.toml"
    if not scene_path.exists():
        raise FileNotFoundError(f"missing scene config: {scene_path}")
    scene = parse_scene_config(scene_path.read_text(encoding="utf-8"), str(scene_path))

    day_files = sorted(p for p in directory.iterdir() if DAY_FILE_RE.match(p.name))
    if not day_files:
        raise FileNotFoundError(f"no day files found in {directory}")

    diag = ParseDiagnostics()
    days = []
    for path in day_files:
        date = parse_date(DAY_FILE_RE.match(path.name).group(1))
        day, d = parse_day_file(path.read_text(encoding="utf-8"), date, str(path))
        diag.dropped_short_tracks += d.dropped_short_tracks
        days.append(day)
    dataset = Dataset(scene, tuple(days))
    diag.out_of_bounds_points = count_out_of_bounds(dataset)

    if labels_path is None and (directory / "labels.csv").exists():
        labels_path = directory / "labels.csv"
    if labels_path is not None:
        labels_path = Path(labels_path)
        labels = load_annotations(labels_path.read_text(encoding="utf-8"), str(labels_path))
        dataset = apply_labels(dataset, labels)
    return dataset, diag


def load_exclusions(raw_text: str, source: str | None = None) -> set[dt.date]:
    """One ``YYYY-MM-DD`` per line; blank lines and ``#`` comments ignored."""
    out = set()
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.add(parse_date(line.split(",")[0]))
        except ValueError:
            raise ParseError(f"unparseable date {line!r}", lineno, source) from None
    return out


def write_dataset(dataset: Dataset, directory: str | Path, with_labels: bool = True) -> None:
    from .ioutil import atomic_write_text

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write_text(directory / "scene.toml", format_scene_config(dataset.scene))
    for day in dataset.days:
        atomic_write_text(directory / f"{day.date.isoformat()}.csv", format_day_file(day))
    if with_labels:
        atomic_write_text(directory / "labels.csv", format_annotations(dataset.labels()))
