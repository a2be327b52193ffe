"""Network models over point sets: MST, Poisson rain, grid comb, Gabriel graph, RGG."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import PointSet, Window, pairs_within, sample_poisson
from .network import Network, TreeNetwork, _uf_find, validate_tree
from .seeds import rng_for


@njit(cache=True, nogil=True)
def _kruskal(parent, rank, ei, ej, order, comps):
    accepted = np.empty(order.shape[0], dtype=np.int64)
    na = 0
    for t in range(order.shape[0]):
        e = order[t]
        a = _uf_find(parent, ei[e])
        b = _uf_find(parent, ej[e])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        accepted[na] = e
        na += 1
        comps -= 1
        if comps == 1:
            break
    return accepted[:na], comps


@njit(cache=True, nogil=True)
def _roots(parent):
    out = np.empty(parent.shape[0], dtype=np.int64)
    for i in range(parent.shape[0]):
        out[i] = _uf_find(parent, i)
    return out


def build_mst(ps: PointSet, initial_radius: float | None = None) -> TreeNetwork:
    """Euclidean MST by Kruskal over neighbour graphs of doubling radius.

    Round one takes every pair within the initial radius (1/sqrt(intensity)
    by default); later rounds only add pairs that still join different
    components, found from the points outside the largest component.
    """
    n = len(ps)
    if n == 0:
        raise ValueError("MST of an empty point set")
    xy = ps.points
    if n == 1:
        return TreeNetwork._build(xy, np.ones(1, bool), np.zeros((0, 2), np.int64),
                                  np.zeros(0), ps.window)
    if initial_radius is None:
        area = ps.window.area if ps.window.area > 0 else 1.0
        initial_radius = math.sqrt(area / n)
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)
    comps = n
    R = float(initial_radius)
    chosen = []
    first = True
    while comps > 1:
        if first:
            cand = pairs_within(ps, R).pairs
            first = False
        else:
            roots = _roots(parent)
            giant = np.bincount(roots).argmax()
            cand = pairs_within(ps, R, mask=roots != giant, need=1).pairs
            if len(cand):
                keep = roots[cand[:, 0]] != roots[cand[:, 1]]
                cand = cand[keep]
        if len(cand):
            ln = np.hypot(*(xy[cand[:, 0]] - xy[cand[:, 1]]).T)
            order = np.lexsort((cand[:, 1], cand[:, 0], ln))
            acc, comps = _kruskal(parent, rank, cand[:, 0].copy(), cand[:, 1].copy(),
                                  order, comps)
            chosen.append(cand[acc])
        R *= 2.0
    edges = np.concatenate(chosen)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    net = Network.from_edges(xy, edges, window=ps.window)
    return validate_tree(net)


@njit(cache=True, nogil=True)
def _rain_parents(xy, arrival_order, x0, y0, s, ncx, ncy):
    n = xy.shape[0]
    head = np.full(ncx * ncy, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    maxring = max(ncx, ncy)
    for k in range(n):
        p = arrival_order[k]
        qx = xy[p, 0]
        qy = xy[p, 1]
        cx = min(max(int(math.floor((qx - x0) / s)), 0), ncx - 1)
        cy = min(max(int(math.floor((qy - y0) / s)), 0), ncy - 1)
        if k > 0:
            best = -1
            bestd = np.inf
            for ring in range(maxring + 1):
                for yy in range(max(cy - ring, 0), min(cy + ring, ncy - 1) + 1):
                    edge_row = yy == cy - ring or yy == cy + ring
                    if edge_row:
                        xa = max(cx - ring, 0)
                        xb = min(cx + ring, ncx - 1)
                        step = 1
                    else:
                        xa = cx - ring
                        xb = cx + ring
                        step = 2 * ring
                    xx = xa
                    while xx <= xb:
                        if 0 <= xx < ncx:
                            j = head[yy * ncx + xx]
                            while j >= 0:
                                dx = xy[j, 0] - qx
                                dy = xy[j, 1] - qy
                                d2 = dx * dx + dy * dy
                                if d2 < bestd or (d2 == bestd and j < best):
                                    bestd = d2
                                    best = j
                                j = nxt[j]
                        xx += step
                if best >= 0:
                    bound = min(qx - (x0 + (cx - ring) * s), x0 + (cx + ring + 1) * s - qx,
                                qy - (y0 + (cy - ring) * s), y0 + (cy + ring + 1) * s - qy)
                    if bound > 0 and bound * bound > bestd:
                        break
            parent[p] = best
        c = cy * ncx + cx
        nxt[p] = head[c]
        head[c] = p
    return parent


def poisson_rain_tree(ps: PointSet, arrival) -> TreeNetwork:
    """Each point, in arrival order, attaches to its nearest earlier point."""
    n = len(ps)
    if n == 0:
        raise ValueError("no points")
    arrival = np.asarray(arrival, dtype=float)
    order = np.argsort(arrival, kind="stable").astype(np.int64)
    w = ps.window
    side = w.side if w.side > 0 else 1.0
    s = max(side / math.sqrt(n), 1e-12)
    nc = max(1, int(math.ceil(side / s)))
    parent = _rain_parents(ps.points, order, w.x0, w.y0, side / nc, nc, nc)
    t = TreeNetwork.from_parents(ps.points, parent, window=w)
    t.arrival = arrival
    return t


def build_poisson_rain(intensity: float, window: Window, seed) -> TreeNetwork:
    """Poisson rain: i.i.d. uniform (0, 1] arrival marks on a Poisson sample."""
    rng = rng_for(seed)
    ps = sample_poisson(intensity, window, rng)
    arrival = 1.0 - rng.random(len(ps))
    return poisson_rain_tree(ps, arrival)


def build_grid_comb(window: Window, spacing: float = 1.0) -> TreeNetwork:
    """Spine-and-teeth tree on the cell-centred lattice of the window.

    Off-spine sites link horizontally toward the central column; spine sites
    link vertically toward the central root.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    m = max(1, int(math.floor(window.side / spacing + 1e-9)))
    c = (m - 1) // 2
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    pos = np.stack([window.x0 + (ii + 0.5) * spacing, window.y0 + (jj + 0.5) * spacing], axis=1)
    pi = np.where(ii != c, ii - np.sign(ii - c), ii)
    pj = np.where(ii != c, jj, jj - np.sign(jj - c))
    parent = pj * m + pi
    parent[(ii == c) & (jj == c)] = -1
    return TreeNetwork.from_parents(pos, parent, window=window)


@njit(cache=True, nogil=True)
def _gabriel_filter(xy, ei, ej, order, start, ncx, ncy, x0, y0, s):
    keep = np.ones(ei.shape[0], dtype=np.bool_)
    for e in range(ei.shape[0]):
        u = ei[e]
        v = ej[e]
        mx = 0.5 * (xy[u, 0] + xy[v, 0])
        my = 0.5 * (xy[u, 1] + xy[v, 1])
        dx = xy[u, 0] - xy[v, 0]
        dy = xy[u, 1] - xy[v, 1]
        r = 0.5 * math.sqrt(dx * dx + dy * dy)
        # pad the scanned block by one cell so boundary points are never missed
        w = int(math.ceil(r / s)) + 1
        cx = int(math.floor((mx - x0) / s))
        cy = int(math.floor((my - y0) / s))
        blocked = False
        for yy in range(max(cy - w, 0), min(cy + w, ncy - 1) + 1):
            if blocked:
                break
            for xx in range(max(cx - w, 0), min(cx + w, ncx - 1) + 1):
                if blocked:
                    break
                c = yy * ncx + xx
                for j in range(start[c], start[c + 1]):
                    p = order[j]
                    if p == u or p == v:
                        continue
                    # closed diametral disc: (p-u).(p-v) <= 0
                    a = (xy[p, 0] - xy[u, 0]) * (xy[p, 0] - xy[v, 0])
                    b = (xy[p, 1] - xy[u, 1]) * (xy[p, 1] - xy[v, 1])
                    if a + b <= 0.0:
                        blocked = True
                        break
        keep[e] = not blocked
    return keep


def _delaunay_edges(xy: np.ndarray) -> np.ndarray:
    from scipy.spatial import Delaunay, QhullError

    try:
        tri = Delaunay(xy)
    except QhullError:
        return None
    s = tri.simplices
    e = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0).astype(np.int64)


def build_gabriel(ps: PointSet) -> Network:
    """Gabriel graph: uv is an edge iff the closed disc on diameter uv holds no other point.

    Candidates come from the Delaunay triangulation (which contains every
    Gabriel edge); each candidate is then certified against the definition
    with a grid-bucket disc scan.  Degenerate inputs fall back to all pairs.
    """
    n = len(ps)
    if n < 2:
        raise ValueError("Gabriel graph needs at least two points")
    xy = ps.points
    cand = _delaunay_edges(xy) if n >= 4 else None
    if cand is None:
        if n > 5000:
            raise ValueError("degenerate configuration too large for all-pairs fallback")
        iu, ju = np.triu_indices(n, 1)
        cand = np.stack([iu, ju], axis=1).astype(np.int64)
    g = ps.grid()
    keep = _gabriel_filter(xy, cand[:, 0].copy(), cand[:, 1].copy(), g.order, g.start,
                           g.ncx, g.ncy, g.x0, g.y0, g.s)
    edges = cand[keep]
    return Network.from_edges(xy, edges, window=ps.window)


@dataclass
class RggComponents:
    r0: float
    labels: np.ndarray  # component id per point, ordered by smallest member
    sizes: np.ndarray  # size per component
    point_sizes: np.ndarray  # N(v, r0) per point

    @property
    def histogram(self) -> dict:
        vals, cnt = np.unique(self.sizes, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    def moments(self, orders=(1, 2, 3, 4)) -> dict:
        """Point-averaged moments E[N(v, r0)^p]."""
        ns = self.point_sizes.astype(float)
        return {p: float(np.mean(ns**p)) if len(ns) else float("nan") for p in orders}


@njit(cache=True, nogil=True)
def _union_pairs(n, pairs):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    for e in range(pairs.shape[0]):
        a = _uf_find(parent, pairs[e, 0])
        b = _uf_find(parent, pairs[e, 1])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
    return parent


def rgg_components(ps: PointSet, r0: float) -> RggComponents:
    n = len(ps)
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if n == 0:
        e = np.zeros(0, dtype=np.int64)
        return RggComponents(r0, e, e, e)
    pairs = pairs_within(ps, r0).pairs
    parent = _union_pairs(n, pairs)
    roots = _roots(parent)
    # relabel so component ids follow their smallest member
    _, first_idx, inv = np.unique(roots, return_index=True, return_inverse=True)
    rank_of = np.argsort(np.argsort(first_idx))
    labels = rank_of[inv].astype(np.int64)
    sizes = np.bincount(labels)
    return RggComponents(r0, labels, sizes, sizes[labels])
