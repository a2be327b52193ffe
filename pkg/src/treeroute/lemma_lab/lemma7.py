"""Concrete run of the centroid / bipartition / subsquare-census argument on a finite tree."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..geometry import GridPartition, PointSet, Window, _ranks_for, cell_counts
from ..network import Bipartition, TreeNetwork, bipartition, centroid, spanned_subtree
from ..seeds import rng_for
from .balance import strip_band
from .contours import GridColoring

GREEN_FRACTION = 0.1
CENSUS_LO = 0.09
CENSUS_HI = 0.89
ROUTE_FACTOR = 0.001


@njit(cache=True, nogil=True)
def _cross_long_pairs(xy, order, start, ncx, ncy, r2, side, vid, depth, first, tour, tdepth,
                      table, logt, thr, ranks, collect, out):
    """Count (or collect by rank) B x B^c pairs within sqrt(r2) whose route is >= thr."""
    dxs = np.array([0, 1, -1, 0, 1])
    dys = np.array([0, 0, 1, 1, 1])
    cnt = 0
    nout = 0
    rp = 0
    for cy in range(ncy):
        for cx in range(ncx):
            c = cy * ncx + cx
            for ia in range(start[c], start[c + 1]):
                a = order[ia]
                if side[a] < 0:
                    continue
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
                        b = order[jb]
                        if side[b] < 0 or side[b] == side[a]:
                            continue
                        ddx = xy[b, 0] - xy[a, 0]
                        ddy = xy[b, 1] - xy[a, 1]
                        if ddx * ddx + ddy * ddy > r2:
                            continue
                        va = vid[a]
                        vb = vid[b]
                        lo = first[va]
                        hi = first[vb]
                        if lo > hi:
                            lo, hi = hi, lo
                        j = logt[hi - lo + 1]
                        p = table[j, lo]
                        q = table[j, hi - (1 << j) + 1]
                        w = tour[p] if tdepth[p] <= tdepth[q] else tour[q]
                        d = depth[va] + depth[vb] - 2.0 * depth[w]
                        if d < thr:
                            continue
                        if collect:
                            while rp < ranks.shape[0] and ranks[rp] == cnt:
                                if side[a] == 1:
                                    out[nout, 0] = a
                                    out[nout, 1] = b
                                else:
                                    out[nout, 0] = b
                                    out[nout, 1] = a
                                nout += 1
                                rp += 1
                        cnt += 1
    return cnt, nout


@dataclass
class Census:
    S: int  # balanced squares with 0.09 m^2 <= b <= 0.89 m^2
    S_lo: int  # balanced squares with b < 0.09 m^2
    S_hi: int  # balanced squares with b > 0.89 m^2
    unbalanced: int
    implication: str  # "holds", "violated", "vacuous" or "premises-unmet"
    psi: float = 0.0  # fraction of m^2 k^2 made of points in unbalanced squares
    blue_total: int = 0
    red_total: int = 0

    @property
    def total(self) -> int:
        return self.S + self.S_lo + self.S_hi + self.unbalanced


@dataclass
class Lemma7Result:
    m: float
    k: int
    threshold: float  # long-route cut-off 0.001 m k
    n_terminals: int
    centroid: int  # vertex id in the original tree
    split: Bipartition
    blue_counts: np.ndarray  # b_sigma = complement points per square, indexed [col, row]
    cell_counts: np.ndarray
    balanced: np.ndarray
    coloring: GridColoring  # green where b >= 0.1 m^2, removed where not balanced
    census: Census
    long_pairs: int
    reported: np.ndarray  # (n, 2) original-tree ids, B endpoint first
    subtree: TreeNetwork = field(repr=False, default=None)
    notes: list = field(default_factory=list)


# Largest unbalanced mass for which S <= 0.005 k^2 forces min(S<, S>) >= k^2 / 4
# deterministically: 0.24 - 0.8 * 0.005 - psi >= 0.93 / 4.
PSI_MAX = 0.24 - 0.8 * 0.005 - 0.93 / 4


def census_from_counts(blue: np.ndarray, balanced: np.ndarray, m: float, k: int,
                       counts: np.ndarray | None = None) -> Census:
    """Census of balanced squares by blue count, and the small-S implication.

    The implication is asserted only when its premises hold on the realised
    data: each colour has at least 0.33 m^2 k^2 points and at most
    ``PSI_MAX * m^2 k^2`` points lie in unbalanced squares.
    """
    lo, hi = CENSUS_LO * m * m, CENSUS_HI * m * m
    S = int(np.sum(balanced & (blue >= lo) & (blue <= hi)))
    S_lo = int(np.sum(balanced & (blue < lo)))
    S_hi = int(np.sum(balanced & (blue > hi)))
    unb = int(np.sum(~balanced))
    counts = blue if counts is None else counts
    area = m * m * k * k
    psi = float(counts[~balanced].sum()) / area
    nb = int(blue.sum())
    nr = int(counts.sum()) - nb
    premises = nb >= 0.33 * area and nr >= 0.33 * area and psi <= PSI_MAX
    if S > 0.005 * k * k:
        implication = "vacuous"
    elif not premises:
        implication = "premises-unmet"
    else:
        implication = "holds" if min(S_lo, S_hi) >= k * k / 4 else "violated"
    return Census(S, S_lo, S_hi, unb, implication, psi, nb, nr)


def lemma7_pipeline(tree: TreeNetwork, window: Window, m: float, k: int, report_cap: int = 1000,
                    seed=0) -> Lemma7Result:
    """Spanned subtree, centroid, bipartition, per-square census and long cross-route count.

    The tree should be built over a window containing ``window`` so that
    routes between its points are not truncated.  Pairs are counted between
    B and B^c terminals inside the window at distance <= sqrt(2) m whose route
    is at least 0.001 m k.
    """
    if not math.isclose(m * k, window.side, rel_tol=1e-12):
        raise ValueError("window side must equal m * k")
    pos = tree.positions
    term = tree.terminal_ids
    inside = term[window.contains(pos[term])]
    if len(inside) == 0:
        raise ValueError("no terminals inside the window")
    sub = spanned_subtree(tree, inside)
    vstar = centroid(sub)
    split = bipartition(sub, vstar)
    notes = ["finite-window spanned subtree stands in for the restriction of the infinite tree",
             "centroid is a vertex of the finite subtree"]

    # local ids of the window terminals in the subtree
    local = sub.local_ids(inside)
    side = np.full(len(inside), -1, dtype=np.int64)
    in_b = np.zeros(sub.n_vertices, dtype=bool)
    in_b[np.asarray(split.B, dtype=np.int64)] = True
    in_bc = np.zeros(sub.n_vertices, dtype=bool)
    in_bc[np.asarray(split.Bc, dtype=np.int64)] = True
    side[in_bc[local]] = 0
    side[in_b[local]] = 1

    gp = GridPartition(window, m, k)
    ps_all = PointSet(pos[inside], window)
    counts, strips = cell_counts(ps_all, gp)
    # B is coloured red and its complement blue
    blue, _ = cell_counts(PointSet(pos[inside][side == 0], window), gp)
    slo, shi = strip_band(m)
    balanced = np.all((strips >= slo) & (strips <= shi), axis=2)
    coloring = GridColoring(blue >= GREEN_FRACTION * m * m, ~balanced)
    census = census_from_counts(blue, balanced, m, k, counts)

    thr = ROUTE_FACTOR * m * k
    r = math.sqrt(2.0) * m
    g = ps_all.grid(r)
    first, tour, tdepth, table, logt = sub.lca_arrays
    args = (ps_all.points, g.order, g.start, g.ncx, g.ncy, r * r, side, local, sub.depth, first,
            tour, tdepth, table, logt, thr)
    none = np.zeros(0, dtype=np.int64)
    total, _ = _cross_long_pairs(*args, none, False, np.zeros((0, 2), dtype=np.int64))
    ranks, _ = _ranks_for(np.array([total]), report_cap, rng_for(seed))
    out = np.zeros((len(ranks), 2), dtype=np.int64)
    _, nout = _cross_long_pairs(*args, ranks.astype(np.int64), True, out)
    reported = inside[out[:nout]]
    return Lemma7Result(m, k, thr, len(inside), int(sub.origin[vstar]), split, blue, counts, balanced,
                        coloring, census, int(total), reported, sub, notes)
