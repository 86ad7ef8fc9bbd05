"""Heatmap and footmap accumulation plus log-scaled jet rendering."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .core import Dataset, DayRecord, SceneConfig

# blue -> cyan -> green -> yellow -> red, evenly spaced knots
JET_KNOTS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
JET_COLORS = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class HeatmapGrid:
    width: int
    height: int
    counts: np.ndarray  # (height, width) int64, indexed [y, x]
    out_of_bounds: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Footmap:
    pool_count: int
    day_dates: tuple[dt.date, ...]
    values: np.ndarray  # (pool_count, n_days) int64


def _day_points(day: DayRecord) -> np.ndarray:
    if not day.tracks:
        return np.empty((0, 2))
    return np.concatenate([t.coords for t in day.tracks])


def _in_bounds(xy: np.ndarray, scene: SceneConfig) -> np.ndarray:
    return (xy[:, 0] >= 0) & (xy[:, 0] < scene.width) & (xy[:, 1] >= 0) & (xy[:, 1] < scene.height)


def day_heatmap(day: DayRecord, scene: SceneConfig) -> tuple[np.ndarray, int]:
    """Partial grid for one day and its out-of-bounds tally."""
    xy = _day_points(day)
    mask = _in_bounds(xy, scene)
    cols = np.floor(xy[mask, 0]).astype(np.int64)
    rows = np.floor(xy[mask, 1]).astype(np.int64)
    grid = np.zeros((scene.height, scene.width), dtype=np.int64)
    np.add.at(grid, (rows, cols), 1)
    return grid, int((~mask).sum())


def accumulate_heatmap(dataset: Dataset) -> HeatmapGrid:
    scene = dataset.scene
    total = np.zeros((scene.height, scene.width), dtype=np.int64)
    skipped = 0
    for day in dataset.days:
        grid, oob = day_heatmap(day, scene)
        total += grid
        skipped += oob
    return HeatmapGrid(scene.width, scene.height, total, skipped)


def pool_index(x: np.ndarray, y: np.ndarray, scene: SceneConfig) -> np.ndarray:
    """Row-major patch index: left to right, then top to bottom."""
    px = np.floor(x).astype(np.int64) // scene.patch_size
    py = np.floor(y).astype(np.int64) // scene.patch_size
    return py * scene.pools_x + px


def compute_footmap(dataset: Dataset) -> Footmap:
    scene = dataset.scene
    values = np.zeros((scene.pool_count, len(dataset.days)), dtype=np.int64)
    for j, day in enumerate(dataset.days):
        xy = _day_points(day)
        xy = xy[_in_bounds(xy, scene)]
        idx = pool_index(xy[:, 0], xy[:, 1], scene)
        values[:, j] = np.bincount(idx, minlength=scene.pool_count)
    return Footmap(scene.pool_count, tuple(d.date for d in dataset.days), values)


def log_intensity(counts: np.ndarray) -> np.ndarray:
    """``ln(1+c) / ln(1+max)``; all zeros when the max is zero."""
    counts = np.asarray(counts, dtype=float)
    peak = counts.max() if counts.size else 0.0
    if peak <= 0:
        return np.zeros_like(counts)
    return np.log1p(counts) / np.log1p(peak)


def jet(intensity: np.ndarray) -> np.ndarray:
    """Map intensities in [0, 1] to uint8 RGB triples."""
    t = np.clip(np.asarray(intensity, dtype=float), 0.0, 1.0)
    rgb = np.stack([np.interp(t, JET_KNOTS, JET_COLORS[:, c]) for c in range(3)], axis=-1)
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


def render_heatmap_log(grid: HeatmapGrid) -> np.ndarray:
    """``(height, width, 3)`` uint8 image."""
    return jet(log_intensity(grid.counts))


def render_footmap(footmap: Footmap) -> np.ndarray:
    """``(pool_count, n_days, 3)`` uint8 image, one pixel per pool/day cell."""
    return jet(log_intensity(footmap.values))
