"""Partition-and-group trajectory clustering (TraClus).

Tracks are cut into line segments at MDL characteristic points, segments are
grouped by density under the three-part TraClus segment distance, and each
group is summarised by a representative track obtained with a sweep line.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .core import Track


class DegenerateSegmentError(ValueError):
    pass


class DirectionDegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    start: tuple[float, float]
    end: tuple[float, float]
    owner: Hashable = None  # (day, track id) of the source track
    index: int = 0  # position within the source track's partition

    @property
    def array(self) -> np.ndarray:
        return np.array([*self.start, *self.end], dtype=float)

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    def sort_key(self):
        return (_owner_key(self.owner), self.index, self.start, self.end)


def _owner_key(owner) -> tuple[str, ...]:
    parts = owner if isinstance(owner, tuple) else (owner,)
    return tuple(str(p) for p in parts)


@dataclass(frozen=True)
class ClusterParams:
    eps: float = 25.0
    min_lines: int = 3
    mdl_partition: bool = True
    smoothing_gamma: float | None = None  # None -> eps / 2
    w_perp: float = 1.0
    w_par: float = 1.0
    w_theta: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_lines < 1:
            raise ValueError(f"min_lines must be >= 1, got {self.min_lines}")
        if self.smoothing_gamma is not None and self.smoothing_gamma < 0:
            raise ValueError("smoothing_gamma must be non-negative")

    @property
    def gamma(self) -> float:
        return self.eps / 2 if self.smoothing_gamma is None else self.smoothing_gamma


@dataclass(frozen=True)
class SegmentCluster:
    members: tuple[Segment, ...]
    representative: Track

    @property
    def owners(self) -> tuple:
        return tuple(sorted({s.owner for s in self.members}, key=_owner_key))


# -- segment distance ------------------------------------------------------


def _components_ordered(base: np.ndarray, other: np.ndarray):
    """(d_perp, d_par, d_theta) projecting ``other``'s endpoints onto ``base``.

    Arrays are ``(..., 4)`` as ``(x0, y0, x1, y1)``. A zero-length base
    projects everything onto its start point.
    """
    si, ei = base[..., 0:2], base[..., 2:4]
    sj, ej = other[..., 0:2], other[..., 2:4]
    v = ei - si
    vv = np.einsum("...k,...k->...", v, v)
    base_len = np.sqrt(vv)
    safe = vv > 0
    denom = np.where(safe, vv, 1.0)
    u1 = np.where(safe, np.einsum("...k,...k->...", sj - si, v) / denom, 0.0)
    u2 = np.where(safe, np.einsum("...k,...k->...", ej - si, v) / denom, 0.0)
    ps = si + u1[..., None] * v
    pe = si + u2[..., None] * v

    lp1 = np.hypot(*np.moveaxis(sj - ps, -1, 0))
    lp2 = np.hypot(*np.moveaxis(ej - pe, -1, 0))
    lsum = lp1 + lp2
    d_perp = np.where(lsum > 0, (lp1 * lp1 + lp2 * lp2) / np.where(lsum > 0, lsum, 1.0), 0.0)

    lpar1 = base_len * np.minimum(np.abs(u1), np.abs(u1 - 1.0))
    lpar2 = base_len * np.minimum(np.abs(u2), np.abs(u2 - 1.0))
    d_par = np.minimum(lpar1, lpar2)

    w = ej - sj
    other_len = np.hypot(w[..., 0], w[..., 1])
    cross = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
    dot = np.einsum("...k,...k->...", v, w)
    norm = base_len * other_len
    sin = np.where(norm > 0, np.abs(cross) / np.where(norm > 0, norm, 1.0), 0.0)
    d_theta = np.where(dot >= 0, other_len * np.minimum(sin, 1.0), other_len)
    return d_perp, d_par, d_theta


def _lex_le(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise lexicographic ``a <= b`` over the last axis."""
    result = np.ones(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]), dtype=bool)
    decided = np.zeros_like(result)
    for k in range(a.shape[-1]):
        lt = a[..., k] < b[..., k]
        gt = a[..., k] > b[..., k]
        result = np.where(~decided & gt, False, result)
        decided = decided | lt | gt
    return result


def pairwise_components(a: np.ndarray, b: np.ndarray):
    """Symmetric components: the longer segment is always the base.

    Equal lengths are broken by lexicographic order of the coordinates so
    ``f(a, b) == f(b, a)`` holds bit for bit.
    """
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    la = np.hypot(a[..., 2] - a[..., 0], a[..., 3] - a[..., 1])
    lb = np.hypot(b[..., 2] - b[..., 0], b[..., 3] - b[..., 1])
    a_base = (la > lb) | ((la == lb) & _lex_le(a, b))
    base = np.where(a_base[..., None], a, b)
    other = np.where(a_base[..., None], b, a)
    return _components_ordered(base, other)


def _weighted(components, params: ClusterParams | None):
    d_perp, d_par, d_theta = components
    if params is None:
        return d_perp + d_par + d_theta
    return params.w_perp * d_perp + params.w_par * d_par + params.w_theta * d_theta


def segment_distance(a: Segment, b: Segment, params: ClusterParams | None = None) -> float:
    """Weighted TraClus distance ``w_perp*d_perp + w_par*d_par + w_theta*d_theta``."""
    for s in (a, b):
        if s.start == s.end:
            raise DegenerateSegmentError(f"zero-length segment {s}")
    return float(_weighted(pairwise_components(a.array, b.array), params))


# -- partitioning ----------------------------------------------------------


def _log2p(x):
    return np.log2(1.0 + x)


def _mdl_costs(xy: np.ndarray, subsegs: np.ndarray, start: int, curr: int) -> tuple[float, float]:
    hyp = np.concatenate([xy[start], xy[curr]])
    span = subsegs[start:curr]
    d_perp, _, d_theta = _components_ordered(np.broadcast_to(hyp, span.shape), span)
    hyp_len = math.hypot(*(xy[curr] - xy[start]))
    cost_par = float(_log2p(hyp_len) + _log2p(d_perp).sum() + _log2p(d_theta).sum())
    sub_len = np.hypot(span[:, 2] - span[:, 0], span[:, 3] - span[:, 1])
    cost_nopar = float(_log2p(sub_len).sum())
    return cost_par, cost_nopar


def _first_partition(xy: np.ndarray, subsegs: np.ndarray, start: int) -> int | None:
    """Smallest ``curr > start + 1`` with MDL_par(start, curr) > MDL_nopar(start, curr), or None.

    Evaluates a block of candidate end points at once; equivalent to
    growing the span one point at a time. A one-step span encodes exactly
    as itself, so it is never a cut even when rounding says otherwise.
    """
    n = len(xy)
    sub_len = np.hypot(subsegs[:, 2] - subsegs[:, 0], subsegs[:, 3] - subsegs[:, 1])
    nopar_cum = np.cumsum(_log2p(sub_len[start:]))  # [m] -> span start..start+m
    lo, block = start + 2, 8
    while lo < n:
        currs = np.arange(lo, min(lo + block, n))
        lo, block = currs[-1] + 1, min(block * 2, 512)
        width = currs[-1] - start
        hyp = np.hstack([np.broadcast_to(xy[start], (len(currs), 2)), xy[currs]])
        span = subsegs[start:start + width]
        base = np.broadcast_to(hyp[:, None, :], (len(currs), width, 4))
        other = np.broadcast_to(span[None, :, :], (len(currs), width, 4))
        d_perp, _, d_theta = _components_ordered(base, other)
        mask = np.arange(width)[None, :] < (currs - start)[:, None]
        data_cost = np.where(mask, _log2p(d_perp) + _log2p(d_theta), 0.0).sum(axis=1)
        hyp_len = np.hypot(hyp[:, 2] - hyp[:, 0], hyp[:, 3] - hyp[:, 1])
        cost_par = _log2p(hyp_len) + data_cost
        cost_nopar = nopar_cum[currs - start - 1]
        hit = np.flatnonzero(cost_par > cost_nopar)
        if len(hit):
            return int(currs[hit[0]])
    return None


def characteristic_points(xy: np.ndarray, mdl: bool = True) -> list[int]:
    """Indices of characteristic points (approximate MDL partitioning).

    The span from the last characteristic point grows until encoding it as
    one segment costs more than keeping the original points; the point
    before the one that broke it becomes characteristic.
    """
    n = len(xy)
    if not mdl or n <= 2:
        return list(range(n))
    subsegs = np.hstack([xy[:-1], xy[1:]])
    cps = [0]
    start = 0
    while True:
        curr = _first_partition(xy, subsegs, start)
        if curr is None:
            break
        cps.append(curr - 1)
        start = curr - 1
    cps.append(n - 1)
    return cps


def _characteristic_points_stepwise(xy: np.ndarray) -> list[int]:
    # one span at a time; kept as the reference for the blocked search
    n = len(xy)
    if n <= 2:
        return list(range(n))
    subsegs = np.hstack([xy[:-1], xy[1:]])
    cps = [0]
    start, length = 0, 2
    while start + length < n:
        curr = start + length
        cost_par, cost_nopar = _mdl_costs(xy, subsegs, start, curr)
        if cost_par > cost_nopar:
            cps.append(curr - 1)
            start, length = curr - 1, 2
        else:
            length += 1
    cps.append(n - 1)
    return cps


def partition_track(track: Track, mdl: bool = True, owner: Hashable = None) -> list[Segment]:
    xy = track.coords
    owner = track.id if owner is None else owner
    cps = characteristic_points(xy, mdl)
    segments = []
    for a, b in zip(cps, cps[1:]):
        start, end = tuple(map(float, xy[a])), tuple(map(float, xy[b]))
        if start == end:
            continue
        segments.append(Segment(start, end, owner, len(segments)))
    return segments


# -- grouping --------------------------------------------------------------


def neighbourhoods(segments: Sequence[Segment], params: ClusterParams, block: int = 128) -> list[np.ndarray]:
    """Indices within ``eps`` of each segment (itself included)."""
    arr = np.array([s.array for s in segments], dtype=float).reshape(-1, 4)
    out = []
    for lo in range(0, len(arr), block):
        rows = arr[lo:lo + block, None, :]
        d = _weighted(pairwise_components(rows, arr[None, :, :]), params)
        out.extend(np.flatnonzero(row <= params.eps) for row in d)
    return out


def cluster_segments(segments: Sequence[Segment], params: ClusterParams):
    """Density-based grouping of segments.

    Returns ``(clusters, noise)``: ``clusters`` is a list of segment tuples
    ordered by their smallest member key, ``noise`` the leftover segments.
    Every input segment lands in exactly one of them. Core segments join
    through core-to-core reachability; a border segment goes to the cluster
    of its smallest-key core neighbour, which keeps the result independent
    of the input order.
    """
    segments = list(segments)
    n = len(segments)
    if n == 0:
        return [], []
    for s in segments:
        if s.start == s.end:
            raise DegenerateSegmentError(f"zero-length segment {s}")
    keys = [s.sort_key() for s in segments]
    rank = np.empty(n, dtype=np.int64)
    rank[sorted(range(n), key=keys.__getitem__)] = np.arange(n)

    nbrs = neighbourhoods(segments, params)
    core = np.array([len(nb) >= params.min_lines for nb in nbrs], dtype=bool)

    comp = np.full(n, -1, dtype=np.int64)
    n_comp = 0
    for i in sorted(np.flatnonzero(core), key=lambda i: rank[i]):
        if comp[i] >= 0:
            continue
        comp[i] = n_comp
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in nbrs[j]:
                if core[k] and comp[k] < 0:
                    comp[k] = n_comp
                    queue.append(k)
        n_comp += 1

    assign = comp.copy()
    for i in np.flatnonzero(~core):
        cores = [k for k in nbrs[i] if core[k]]
        if cores:
            assign[i] = comp[min(cores, key=lambda k: rank[k])]

    groups: list[list[int]] = [[] for _ in range(n_comp)]
    for i in sorted(range(n), key=lambda i: rank[i]):
        if assign[i] >= 0:
            groups[assign[i]].append(i)

    clusters, noise_idx = [], [i for i in range(n) if assign[i] < 0]
    for g in groups:
        if len({segments[i].owner for i in g}) < params.min_lines:
            noise_idx.extend(g)
        else:
            clusters.append(tuple(segments[i] for i in g))
    clusters.sort(key=lambda c: c[0].sort_key())
    noise = [segments[i] for i in sorted(noise_idx, key=lambda i: rank[i])]
    return clusters, noise


# -- representative --------------------------------------------------------


def representative_points(segments: Sequence[Segment], gamma: float, min_lines: int) -> np.ndarray:
    """Sweep-line average of the member segments, as an ``(m, 2)`` array."""
    if not segments:
        raise ValueError("empty cluster")
    arr = np.array([s.array for s in segments], dtype=float)
    direction = (arr[:, 2:4] - arr[:, 0:2]).mean(axis=0)
    norm = math.hypot(*direction)
    scale = np.hypot(arr[:, 2] - arr[:, 0], arr[:, 3] - arr[:, 1]).mean()
    if not norm > 1e-12 * max(scale, 1.0):
        raise DirectionDegenerateError("member directions cancel out")
    c, s = direction / norm
    rot = np.array([[c, s], [-s, c]])  # world -> sweep frame
    p0 = arr[:, 0:2] @ rot.T
    p1 = arr[:, 2:4] @ rot.T
    lo_x = np.minimum(p0[:, 0], p1[:, 0])
    hi_x = np.maximum(p0[:, 0], p1[:, 0])
    lo, hi = float(lo_x.min()), float(hi_x.max())
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))

    if gamma > 0:
        steps = int(math.floor((hi - lo) / gamma + 1e-9))
        positions = [lo + k * gamma for k in range(steps + 1)]
        if hi - positions[-1] > tol:
            positions.append(hi)
    else:
        positions = sorted(set(np.concatenate([p0[:, 0], p1[:, 0]]).tolist()))

    dx = p1[:, 0] - p0[:, 0]
    dy = p1[:, 1] - p0[:, 1]
    out = []
    for x in positions:
        hit = (lo_x - tol <= x) & (x <= hi_x + tol)
        if hit.sum() < min_lines:
            continue
        flat = np.abs(dx[hit]) <= tol
        t = np.where(flat, 0.5, (x - p0[hit, 0]) / np.where(flat, 1.0, dx[hit]))
        y = float(np.mean(p0[hit, 1] + np.clip(t, 0.0, 1.0) * dy[hit]))
        out.append((x, y))
    if not out:
        return np.empty((0, 2))
    return np.array(out) @ rot  # back to world frame


def representative_track(segments: Sequence[Segment], gamma: float, min_lines: int = 1, track_id: str = "rep") -> Track:
    pts = representative_points(segments, gamma, min_lines)
    if len(pts) < 2:
        raise ValueError(f"sweep produced {len(pts)} point(s); a representative needs >= 2")
    return Track.from_xy(track_id, pts)


def group_segments(segments: Sequence[Segment], params: ClusterParams) -> list[SegmentCluster]:
    """Cluster segments and attach representatives.

    Clusters whose sweep cannot yield a two-point representative are dropped.
    """
    groups, _ = cluster_segments(segments, params)
    out = []
    for members in groups:
        try:
            rep = representative_track(members, params.gamma, params.min_lines, f"rep-{len(out)}")
        except (ValueError, DirectionDegenerateError):
            continue
        out.append(SegmentCluster(members, rep))
    return out


def cluster_tracks(tracks: Sequence[Track], params: ClusterParams = ClusterParams(), owners: Sequence[Hashable] | None = None) -> list[SegmentCluster]:
    """Partition every track, pool the segments and group them.

    ``owners`` identifies each track for the trajectory-cardinality check;
    pass ``(date, track_id)`` pairs when tracks come from several days.
    """
    if owners is None:
        owners = [t.id for t in tracks]
    segments = []
    for track, owner in zip(tracks, owners):
        segments.extend(partition_track(track, params.mdl_partition, owner))
    return group_segments(segments, params)
