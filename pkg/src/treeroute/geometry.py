"""Planar point configurations, windows, grid partitions and neighbour queries.

Points live in a square window.  All neighbour and pair queries go through a
uniform grid-bucket index whose bucket side is chosen per query radius, so the
expected work per point is O(1) on Poisson data.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .seeds import rng_for

__all__ = [
    "Window",
    "PointSet",
    "GridIndex",
    "GridPartition",
    "PairSample",
    "sample_poisson",
    "pairs_within",
    "nearest",
    "cell_counts",
    "save_points_csv",
    "load_points_csv",
]


class EmptyPointSetError(ValueError):
    pass


@dataclass(frozen=True)
class Window:
    x0: float
    y0: float
    side: float
    margin: float = 0.0

    def __post_init__(self):
        if not self.side >= 0:
            raise ValueError(f"window side must be non-negative, got {self.side}")
        if self.side > 0 and not (0 <= self.margin < self.side / 2):
            raise ValueError(f"margin {self.margin} outside [0, side/2)")

    @property
    def area(self) -> float:
        return self.side * self.side

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return (
            (xy[:, 0] >= self.x0)
            & (xy[:, 0] < self.x0 + self.side)
            & (xy[:, 1] >= self.y0)
            & (xy[:, 1] < self.y0 + self.side)
        )

    def inner_mask(self, xy: np.ndarray, margin: float | None = None) -> np.ndarray:
        """Points at distance >= margin from every side of the window."""
        m = self.margin if margin is None else margin
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return (
            (xy[:, 0] >= self.x0 + m)
            & (xy[:, 0] <= self.x0 + self.side - m)
            & (xy[:, 1] >= self.y0 + m)
            & (xy[:, 1] <= self.y0 + self.side - m)
        )

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "side": self.side, "margin": self.margin}


# ---------------------------------------------------------------------------
# grid-bucket kernels


@njit(cache=True, nogil=True)
def _bucket_keys(xy, x0, y0, s, ncx, ncy):
    n = xy.shape[0]
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        cx = int(math.floor((xy[i, 0] - x0) / s))
        cy = int(math.floor((xy[i, 1] - y0) / s))
        cx = min(max(cx, 0), ncx - 1)
        cy = min(max(cy, 0), ncy - 1)
        keys[i] = cy * ncx + cx
    return keys


@njit(cache=True, nogil=True)
def _bin_of(d2, edges2):
    nb = edges2.shape[0] - 1
    if d2 < edges2[0] or d2 > edges2[nb]:
        return -1
    if d2 == edges2[nb]:
        return nb - 1
    lo = 0
    hi = nb
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if d2 >= edges2[mid]:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def _pair_walk(xy, order, start, ncx, ncy, edges2, mask, need, ranks, offsets, collect, out):
    """Enumerate unordered pairs with squared distance in [edges2[0], edges2[-1]].

    The walk order is fixed (cells row-major, points by id inside a cell, then
    the forward neighbour cells E, NW, N, NE).  With ``collect`` false it only
    counts per bin; otherwise it writes pairs whose within-bin rank appears in
    ``ranks[offsets[b]:offsets[b+1]]`` (sorted) into ``out``.
    """
    nb = edges2.shape[0] - 1
    counts = np.zeros(nb, dtype=np.int64)
    ptr = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        ptr[b] = offsets[b]
    nout = 0
    dxs = np.array([0, 1, -1, 0, 1])
    dys = np.array([0, 0, 1, 1, 1])
    for cy in range(ncy):
        for cx in range(ncx):
            c = cy * ncx + cx
            for ia in range(start[c], start[c + 1]):
                a = order[ia]
                ma = mask[a]
                if need == 2 and not ma:
                    continue
                ax = xy[a, 0]
                ay = xy[a, 1]
                for t in range(5):
                    nx = cx + dxs[t]
                    ny = cy + dys[t]
                    if nx < 0 or nx >= ncx or ny >= ncy:
                        continue
                    c2 = ny * ncx + nx
                    jb0 = start[c2]
                    if t == 0:
                        jb0 = ia + 1
                    for jb in range(jb0, start[c2 + 1]):
                        bpt = order[jb]
                        mb = mask[bpt]
                        if need == 2 and not mb:
                            continue
                        if need == 1 and not (ma or mb):
                            continue
                        ddx = xy[bpt, 0] - ax
                        ddy = xy[bpt, 1] - ay
                        d2 = ddx * ddx + ddy * ddy
                        k = _bin_of(d2, edges2)
                        if k < 0:
                            continue
                        if collect:
                            if ptr[k] < offsets[k + 1] and ranks[ptr[k]] == counts[k]:
                                if a < bpt:
                                    out[nout, 0] = a
                                    out[nout, 1] = bpt
                                else:
                                    out[nout, 0] = bpt
                                    out[nout, 1] = a
                                out[nout, 2] = k
                                nout += 1
                                ptr[k] += 1
                        counts[k] += 1
    return counts, nout


@njit(cache=True, nogil=True)
def _nearest_kernel(xy, order, start, ncx, ncy, x0, y0, s, qx, qy, exclude):
    cx = min(max(int(math.floor((qx - x0) / s)), 0), ncx - 1)
    cy = min(max(int(math.floor((qy - y0) / s)), 0), ncy - 1)
    best = -1
    bestd = np.inf
    maxring = max(ncx, ncy)
    for ring in range(maxring + 1):
        for yy in range(cy - ring, cy + ring + 1):
            if yy < 0 or yy >= ncy:
                continue
            edge_row = yy == cy - ring or yy == cy + ring
            step = 1 if edge_row else 2 * ring
            xx = cx - ring
            while xx <= cx + ring:
                if 0 <= xx < ncx:
                    c = yy * ncx + xx
                    for j in range(start[c], start[c + 1]):
                        p = order[j]
                        if p == exclude:
                            continue
                        dx = xy[p, 0] - qx
                        dy = xy[p, 1] - qy
                        d2 = dx * dx + dy * dy
                        if d2 < bestd or (d2 == bestd and p < best):
                            bestd = d2
                            best = p
                xx += step
        if best >= 0:
            # distance from q to the outside of the scanned block
            lo_x = x0 + (cx - ring) * s
            hi_x = x0 + (cx + ring + 1) * s
            lo_y = y0 + (cy - ring) * s
            hi_y = y0 + (cy + ring + 1) * s
            bound = min(qx - lo_x, hi_x - qx, qy - lo_y, hi_y - qy)
            if bound > 0 and bound * bound > bestd:
                break
    return best


@njit(cache=True, nogil=True)
def _disc_kernel(xy, order, start, ncx, ncy, x0, y0, s, qx, qy, r):
    w = int(math.ceil(r / s))
    cx = int(math.floor((qx - x0) / s))
    cy = int(math.floor((qy - y0) / s))
    r2 = r * r
    out = []
    for yy in range(max(cy - w, 0), min(cy + w, ncy - 1) + 1):
        for xx in range(max(cx - w, 0), min(cx + w, ncx - 1) + 1):
            c = yy * ncx + xx
            for j in range(start[c], start[c + 1]):
                p = order[j]
                dx = xy[p, 0] - qx
                dy = xy[p, 1] - qy
                if dx * dx + dy * dy <= r2:
                    out.append(p)
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridIndex:
    """CSR grid buckets: points of cell c are ``order[start[c]:start[c+1]]``."""

    x0: float
    y0: float
    s: float
    ncx: int
    ncy: int
    order: np.ndarray
    start: np.ndarray

    @classmethod
    def build(cls, xy: np.ndarray, window: Window, s: float) -> "GridIndex":
        side = window.side
        s = float(s)
        if side <= 0 or s <= 0:
            ncx = ncy = 1
            s = max(s, 1.0)
        else:
            ncx = ncy = max(1, int(math.ceil(side / s)))
        n = xy.shape[0]
        if n:
            keys = _bucket_keys(xy, window.x0, window.y0, s, ncx, ncy)
            order = np.argsort(keys, kind="stable").astype(np.int64)
            counts = np.bincount(keys, minlength=ncx * ncy)
        else:
            order = np.zeros(0, dtype=np.int64)
            counts = np.zeros(ncx * ncy, dtype=np.int64)
        start = np.zeros(ncx * ncy + 1, dtype=np.int64)
        np.cumsum(counts, out=start[1:])
        return cls(window.x0, window.y0, s, ncx, ncy, order, start)


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite point configuration inside a window, with cached grid indexes."""

    points: np.ndarray
    window: Window
    _grids: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def default_bucket(self) -> float:
        n = len(self)
        if n == 0 or self.window.side == 0:
            return 1.0
        return self.window.side / math.sqrt(n)

    def grid(self, s: float | None = None) -> GridIndex:
        """Grid index with bucket side ``s`` (bounded below to keep <= ~4n cells)."""
        n = len(self)
        floor_s = self.window.side / math.sqrt(4 * n + 16) if self.window.side > 0 else 1.0
        s = max(float(s) if s is not None else self.default_bucket, floor_s)
        g = self._grids.get(s)
        if g is None:
            g = GridIndex.build(self.points, self.window, s)
            self._grids[s] = g
        return g

    def query_disc(self, center, r: float) -> np.ndarray:
        """Ids of points in the closed disc, sorted."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        g = self.grid(max(r, self.default_bucket))
        hits = _disc_kernel(self.points, g.order, g.start, g.ncx, g.ncy, g.x0, g.y0, g.s,
                            float(center[0]), float(center[1]), float(r))
        return np.sort(np.array(hits, dtype=np.int64))

    def subset(self, ids) -> "PointSet":
        return PointSet(self.points[np.asarray(ids, dtype=np.int64)], self.window)


def sample_poisson(intensity: float, window: Window, seed) -> PointSet:
    """Rate-``intensity`` Poisson process in ``window``; deterministic for a fixed seed.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    rng = rng_for(seed)
    n = int(rng.poisson(intensity * window.area)) if window.side > 0 else 0
    u = rng.random((n, 2))
    pts = np.empty((n, 2))
    pts[:, 0] = window.x0 + window.side * u[:, 0]
    pts[:, 1] = window.y0 + window.side * u[:, 1]
    return PointSet(pts, window)


def _ranks_for(counts: np.ndarray, cap: int | None, rng) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin sorted ranks to keep: all if ``count <= cap``, else a uniform subsample."""
    chunks = []
    for c in counts:
        c = int(c)
        if cap is None or c <= cap:
            chunks.append(np.arange(c, dtype=np.int64))
        else:
            chunks.append(np.sort(rng.choice(c, size=cap, replace=False)).astype(np.int64))
    offsets = np.zeros(len(counts) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(ch) for ch in chunks])
    ranks = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return ranks, offsets


@dataclass(frozen=True)
class PairSample:
    pairs: np.ndarray  # (m, 2) ids, i < j, sorted lexicographically
    total: int
    bins: np.ndarray | None = None  # bin index per pair, binned queries only

    def __len__(self) -> int:
        return self.pairs.shape[0]


def binned_pairs(ps: PointSet, edges, cap: int | None = None, seed=0, mask=None,
                 need: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs whose separation falls in each bin ``[edges[b], edges[b+1])``.

    Returns ``(pairs, bin_of_pair, total_per_bin)``; at most ``cap`` pairs are
    kept per bin (uniformly without replacement).  ``mask`` restricts
    endpoints: ``need=2`` requires both endpoints in the mask, ``need=1`` at
    least one.
    """
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ValueError("edges must be increasing and non-negative")
    n = len(ps)
    nb = len(edges) - 1
    if n < 2:
        return np.zeros((0, 2), np.int64), np.zeros(0, np.int64), np.zeros(nb, np.int64)
    if mask is None:
        mask = np.ones(n, dtype=np.bool_)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    g = ps.grid(edges[-1])
    edges2 = edges * edges
    dummy = np.zeros((0, 3), dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)
    counts, _ = _pair_walk(ps.points, g.order, g.start, g.ncx, g.ncy, edges2, mask, need,
                           empty, np.zeros(nb + 1, np.int64), False, dummy)
    rng = rng_for(seed)
    ranks, offsets = _ranks_for(counts, cap, rng)
    out = np.empty((len(ranks), 3), dtype=np.int64)
    _, nout = _pair_walk(ps.points, g.order, g.start, g.ncx, g.ncy, edges2, mask, need,
                         ranks, offsets, True, out)
    out = out[:nout]
    idx = np.lexsort((out[:, 1], out[:, 0], out[:, 2]))
    out = out[idx]
    return out[:, :2].copy(), out[:, 2].copy(), counts


def pairs_within(ps: PointSet, r: float, cap: int | None = None, seed=0, mask=None,
                 need: int = 2) -> PairSample:
    """Unordered pairs at separation <= r; uniform subsample of size ``cap`` if there are more."""
    if not r > 0:
        raise ValueError("r must be positive")
    pairs, _, counts = binned_pairs(ps, [0.0, r], cap=cap, seed=seed, mask=mask, need=need)
    return PairSample(pairs, int(counts[0]) if len(counts) else 0)


def nearest(ps: PointSet, q, exclude: int | None = None) -> int:
    """Id of the point closest to ``q`` (ties to the smaller id)."""
    n = len(ps)
    if n == 0 or (n == 1 and exclude == 0):
        raise EmptyPointSetError("no candidate points")
    g = ps.grid()
    ex = -1 if exclude is None else int(exclude)
    return int(_nearest_kernel(ps.points, g.order, g.start, g.ncx, g.ncy, g.x0, g.y0, g.s,
                               float(q[0]), float(q[1]), ex))


@dataclass(frozen=True)
class GridPartition:
    """Partition of a square window into k x k natural subsquares of side m."""

    window: Window
    m: float
    k: int

    def __post_init__(self):
        if self.k < 1 or self.m <= 0:
            raise ValueError("need k >= 1 and m > 0")
        if not math.isclose(self.k * self.m, self.window.side, rel_tol=1e-12):
            raise ValueError(f"k*m = {self.k * self.m} does not equal window side {self.window.side}")

    def cell_of(self, xy: np.ndarray) -> np.ndarray:
        """(n, 2) integer cell coordinates (column, row), half-open cells."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        c = np.floor((xy - [self.window.x0, self.window.y0]) / self.m).astype(np.int64)
        return np.clip(c, 0, self.k - 1)


def cell_counts(ps: PointSet, gp: GridPartition) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell counts ``(k, k)`` indexed ``[col, row]`` and strip counts ``(k, k, 10)``.

    Strip slots 0-4 are the vertical strips (width m/5, full height) from
    left to right, slots 5-9 the horizontal strips from bottom to top.
    Only points inside the partitioned window are counted.
    """
    k = gp.k
    counts = np.zeros((k, k), dtype=np.int64)
    strips = np.zeros((k, k, 10), dtype=np.int64)
    if len(ps) == 0:
        return counts, strips
    inside = gp.window.contains(ps.points)
    xy = ps.points[inside]
    rel = (xy - [gp.window.x0, gp.window.y0]) / gp.m
    cell = np.clip(np.floor(rel).astype(np.int64), 0, k - 1)
    frac = rel - cell
    sub = np.clip(np.floor(frac * 5).astype(np.int64), 0, 4)
    np.add.at(counts, (cell[:, 0], cell[:, 1]), 1)
    np.add.at(strips, (cell[:, 0], cell[:, 1], sub[:, 0]), 1)
    np.add.at(strips, (cell[:, 0], cell[:, 1], 5 + sub[:, 1]), 1)
    return counts, strips


def save_points_csv(ps: PointSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(ps.points):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}"])


def load_points_csv(path, window: Window) -> PointSet:
    rows = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["id", "x", "y"]:
            raise ValueError(f"{path}: expected header id,x,y, got {r.fieldnames}")
        for row in r:
            rows.append((int(row["id"]), float(row["x"]), float(row["y"])))
    rows.sort()
    if [i for i, _, _ in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: ids must be 0..n-1")
    pts = np.array([(x, y) for _, x, y in rows], dtype=float).reshape(-1, 2)
    return PointSet(pts, window)
