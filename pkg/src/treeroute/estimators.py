"""Route-length statistics: mean route length by distance bin, the tail chi(r, d),
log-log tail fits and window-scaling studies.

Pairs are terminal pairs with both endpoints at least ``margin`` from the
window boundary.  With ``cap=None`` tree statistics are exact over every
qualifying pair (streamed, never materialised); otherwise each bin keeps a
uniform subsample of ``cap`` pairs.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .geometry import PointSet, Window, _bin_of, binned_pairs
from .network import Network, TreeNetwork

DEFAULT_CAP = 100_000
D_RATIO = 2 ** 0.25


class InsufficientPairsWarning(UserWarning):
    pass


class InsufficientPointsError(ValueError):
    pass


def wilson_interval(k, n, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion (vectorised)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = k / n
        den = 1 + z * z / n
        centre = (p + z * z / (2 * n)) / den
        half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = np.where(n > 0, np.clip(centre - half, 0, 1), np.nan)
    hi = np.where(n > 0, np.clip(centre + half, 0, 1), np.nan)
    return lo, hi


def geometric_grid(start: float, stop: float, ratio: float = D_RATIO) -> np.ndarray:
    if not (start > 0 and stop >= start):
        raise ValueError("need 0 < start <= stop")
    n = int(math.floor(math.log(stop / start) / math.log(ratio) + 1e-9)) + 1
    return start * ratio ** np.arange(n)


# ---------------------------------------------------------------------------
# streaming tree kernel


@njit(cache=True, nogil=True)
def _tree_pair_stats(xy, order, start, ncx, ncy, edges2, mask, vid, depth,
                     first, tour, tdepth, table, logt, dgrid):
    nb = edges2.shape[0] - 1
    nd = dgrid.shape[0]
    cnt = np.zeros(nb, dtype=np.int64)
    s1 = np.zeros(nb)
    s2 = np.zeros(nb)
    surv = np.zeros((nb, nd), dtype=np.int64)
    dxs = np.array([0, 1, -1, 0, 1])
    dys = np.array([0, 0, 1, 1, 1])
    for cy in range(ncy):
        for cx in range(ncx):
            c = cy * ncx + cx
            for ia in range(start[c], start[c + 1]):
                a = order[ia]
                if not mask[a]:
                    continue
                ax = xy[a, 0]
                ay = xy[a, 1]
                va = vid[a]
                fa = first[va]
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
                        if not mask[b]:
                            continue
                        ddx = xy[b, 0] - ax
                        ddy = xy[b, 1] - ay
                        k = _bin_of(ddx * ddx + ddy * ddy, edges2)
                        if k < 0:
                            continue
                        vb = vid[b]
                        lo = fa
                        hi = first[vb]
                        if lo > hi:
                            lo, hi = hi, lo
                        j = logt[hi - lo + 1]
                        p = table[j, lo]
                        q = table[j, hi - (1 << j) + 1]
                        w = tour[p] if tdepth[p] <= tdepth[q] else tour[q]
                        d = depth[va] + depth[vb] - 2.0 * depth[w]
                        cnt[k] += 1
                        s1[k] += d
                        s2[k] += d * d
                        # dgrid ascending: count thresholds <= d
                        lo2 = 0
                        hi2 = nd
                        while lo2 < hi2:
                            mid = (lo2 + hi2) // 2
                            if dgrid[mid] <= d:
                                lo2 = mid + 1
                            else:
                                hi2 = mid
                        for g in range(lo2):
                            surv[k, g] += 1
    return cnt, s1, s2, surv


# ---------------------------------------------------------------------------
# shortest paths on general networks


@njit(cache=True, nogil=True)
def _heap_push(hk, hv, size, key, val):
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        par = (i - 1) // 2
        if hk[par] <= hk[i]:
            break
        hk[i], hk[par] = hk[par], hk[i]
        hv[i], hv[par] = hv[par], hv[i]
        i = par
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hk, hv, size):
    key = hk[0]
    val = hv[0]
    size -= 1
    hk[0] = hk[size]
    hv[0] = hv[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < size and hk[l] < hk[m]:
            m = l
        if r < size and hk[r] < hk[m]:
            m = r
        if m == i:
            break
        hk[i], hk[m] = hk[m], hk[i]
        hv[i], hv[m] = hv[m], hv[i]
        i = m
    return key, val, size


@njit(cache=True, nogil=True)
def _dijkstra_targets(indptr, indices, weights, srcs, tgt_ptr, tgts):
    """Exact shortest-path lengths from each source to its targets.

    Each search stops as soon as all of its targets are settled.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    want = np.zeros(n, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    cap = indices.shape[0] + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    out = np.full(tgts.shape[0], np.inf)
    for si in range(srcs.shape[0]):
        s = srcs[si]
        remaining = 0
        for t in range(tgt_ptr[si], tgt_ptr[si + 1]):
            if want[tgts[t]] == 0:
                remaining += 1
            want[tgts[t]] += 1
        nt = 0
        dist[s] = 0.0
        touched[nt] = s
        nt += 1
        size = _heap_push(hk, hv, 0, 0.0, s)
        while size > 0 and remaining > 0:
            d, u, size = _heap_pop(hk, hv, size)
            if done[u] or d > dist[u]:
                continue
            done[u] = True
            if want[u] > 0:
                remaining -= 1
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                nd = d + weights[j]
                if nd < dist[v]:
                    if dist[v] == np.inf:
                        touched[nt] = v
                        nt += 1
                    dist[v] = nd
                    if size >= cap:
                        break
                    size = _heap_push(hk, hv, size, nd, v)
        for t in range(tgt_ptr[si], tgt_ptr[si + 1]):
            out[t] = dist[tgts[t]]
            want[tgts[t]] = 0
        for i in range(nt):
            dist[touched[i]] = np.inf
            done[touched[i]] = False
    return out


def network_routes(net: Network, u, v) -> np.ndarray:
    """Shortest-path route lengths for vertex pairs of a general network."""
    from .network import _csr

    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if isinstance(net, TreeNetwork):
        return net.distance(u, v)
    indptr, indices, w = _csr(net.n_vertices, net.edges, net.lengths)
    order = np.lexsort((v, u))
    su, sv = u[order], v[order]
    srcs, starts = np.unique(su, return_index=True)
    tgt_ptr = np.append(starts, len(su)).astype(np.int64)
    d = _dijkstra_targets(indptr, indices, w, srcs.astype(np.int64), tgt_ptr, sv)
    out = np.empty_like(d)
    out[order] = d
    return out


# ---------------------------------------------------------------------------


def _terminal_pointset(net: Network, window: Window | None) -> tuple[PointSet, np.ndarray]:
    window = window or net.window
    if window is None:
        raise ValueError("network has no window; pass one explicitly")
    vid = net.terminal_ids.astype(np.int64)
    return PointSet(net.positions[vid], window), vid


def _margin(window: Window, margin: float | None) -> float:
    if margin is None:
        return 0.1 * window.side
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return float(margin)


@dataclass
class PairRoutes:
    """Per-bin route statistics; ``routes`` is populated only in sampled mode."""

    edges: np.ndarray
    counts: np.ndarray  # pairs used per bin
    totals: np.ndarray  # qualifying pairs per bin
    sums: np.ndarray
    sumsq: np.ndarray
    survival: np.ndarray | None  # (bins, len(dgrid)) pairs with route >= d
    routes: list | None = None
    separations: list | None = None


def pair_route_stats(net: Network, edges, cap: int | None = DEFAULT_CAP, margin: float | None = None,
                     seed=0, dgrid=None, window: Window | None = None) -> PairRoutes:
    ps, vid = _terminal_pointset(net, window)
    m = _margin(ps.window, margin)
    mask = ps.window.inner_mask(ps.points, m)
    edges = np.asarray(edges, dtype=float)
    dgrid = np.zeros(0) if dgrid is None else np.asarray(dgrid, dtype=float)
    if len(ps) >= 2 and cap is None and isinstance(net, TreeNetwork):
        g = ps.grid(edges[-1])
        first, tour, tdepth, table, logt = net.lca_arrays
        cnt, s1, s2, surv = _tree_pair_stats(ps.points, g.order, g.start, g.ncx, g.ncy,
                                             edges * edges, mask, vid, net.depth, first, tour,
                                             tdepth, table, logt, dgrid)
        return PairRoutes(edges, cnt, cnt.copy(), s1, s2, surv)
    pairs, bins, totals = binned_pairs(ps, edges, cap=cap, seed=seed, mask=mask)
    nb = len(edges) - 1
    u, v = vid[pairs[:, 0]], vid[pairs[:, 1]]
    d = network_routes(net, u, v) if len(pairs) else np.zeros(0)
    sep = np.hypot(*(ps.points[pairs[:, 0]] - ps.points[pairs[:, 1]]).T) if len(pairs) else np.zeros(0)
    counts = np.bincount(bins, minlength=nb)
    sums = np.bincount(bins, weights=d, minlength=nb)
    sumsq = np.bincount(bins, weights=d * d, minlength=nb)
    surv = np.zeros((nb, len(dgrid)), dtype=np.int64)
    routes, seps = [], []
    for b in range(nb):
        db = np.sort(d[bins == b])
        routes.append(db)
        seps.append(sep[bins == b])
        if len(dgrid):
            surv[b] = len(db) - np.searchsorted(db, dgrid, side="left")
    return PairRoutes(edges, counts, totals, sums, sumsq, surv, routes, seps)


@dataclass
class RhoCurve:
    edges: np.ndarray
    centers: np.ndarray
    mean: np.ndarray  # nan where a bin has no pairs
    pairs: np.ndarray
    se: np.ndarray
    totals: np.ndarray

    def rows(self):
        for c, m, n, s in zip(self.centers, self.mean, self.pairs, self.se):
            yield c, m, int(n), s


def _mean_se(n, s1, s2):
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, s1 / n, np.nan)
        var = np.where(n > 1, (s2 - n * mean * mean) / (n - 1), np.nan)
        se = np.sqrt(np.maximum(var, 0) / n)
    return mean, se


def estimate_rho(net: Network, bins, cap: int | None = DEFAULT_CAP, margin: float | None = None,
                 seed=0, window: Window | None = None) -> RhoCurve:
    """Mean route length per separation bin ``[edges[b], edges[b+1])``."""
    edges = np.asarray(bins, dtype=float)
    pr = pair_route_stats(net, edges, cap=cap, margin=margin, seed=seed, window=window)
    mean, se = _mean_se(pr.counts, pr.sums, pr.sumsq)
    return RhoCurve(edges, 0.5 * (edges[:-1] + edges[1:]), mean, pr.counts, se, pr.totals)


@dataclass
class TailEstimate:
    r: float
    d: np.ndarray
    chi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    pairs: int  # pairs used
    total: int  # qualifying pairs
    mean_route: float
    se_route: float
    side: float
    model: str = ""
    seed: object = None
    margin: float = 0.0
    exceed: np.ndarray = field(default=None, repr=False)  # pairs with route >= d


def tail_from_counts(r, d, exceed, n, total, s1, s2, side, model="", seed=None, margin=0.0):
    d = np.asarray(d, dtype=float)
    exceed = np.asarray(exceed, dtype=np.int64)
    chi = exceed / n if n else np.full(len(d), np.nan)
    lo, hi = wilson_interval(exceed, np.full(len(d), n))
    mean, se = _mean_se(np.array([n]), np.array([s1]), np.array([s2]))
    return TailEstimate(float(r), d, chi, lo, hi, int(n), int(total), float(mean[0]), float(se[0]),
                        float(side), model, seed, float(margin), exceed)


def estimate_tail(net: Network, r: float, d_grid=None, cap: int | None = DEFAULT_CAP,
                  margin: float | None = None, seed=0, model: str = "",
                  window: Window | None = None) -> TailEstimate:
    """Empirical survival chi(r, d) of route length over pairs at separation <= r."""
    if not r > 0:
        raise ValueError("r must be positive")
    window = window or net.window
    if d_grid is None:
        d_grid = geometric_grid(r, max(r, window.side))
    d_grid = np.asarray(d_grid, dtype=float)
    if np.any(np.diff(d_grid) <= 0):
        raise ValueError("d_grid must be increasing")
    m = _margin(window, margin)
    pr = pair_route_stats(net, [0.0, r], cap=cap, margin=m, seed=seed, dgrid=d_grid, window=window)
    n = int(pr.counts[0])
    if n < 100:
        warnings.warn(f"only {n} qualifying pairs at r={r}", InsufficientPairsWarning, stacklevel=2)
    return tail_from_counts(r, d_grid, pr.survival[0], n, int(pr.totals[0]), pr.sums[0],
                            pr.sumsq[0], window.side, model, seed, m)


@dataclass
class TailFit:
    slope: float
    intercept: float
    se: float
    r2: float
    npoints: int


def fit_tail_exponent(te: TailEstimate, d_range) -> TailFit:
    """Least squares of log chi on log d over grid points inside ``d_range``."""
    lo, hi = d_range
    d = np.asarray(te.d, dtype=float)
    chi = np.asarray(te.chi, dtype=float)
    sel = (d >= lo * (1 - 1e-12)) & (d <= hi * (1 + 1e-12)) & (chi > 0) & (chi < 1)
    if sel.sum() < 4:
        raise InsufficientPointsError(f"{int(sel.sum())} usable grid points in {d_range}, need 4")
    x, y = np.log(d[sel]), np.log(chi[sel])
    res = stats.linregress(x, y)
    return TailFit(float(res.slope), float(res.intercept), float(res.stderr),
                   float(res.rvalue ** 2), int(sel.sum()))


# ---------------------------------------------------------------------------
# window scaling


@dataclass
class ScalingRow:
    side: float
    mean: float
    ci_lo: float
    ci_hi: float
    sd: float
    replicates: int
    pairs: int
    replicate_means: list


@dataclass
class ScalingResult:
    model: str
    r: float
    rows: list
    tails: dict  # side -> pooled TailEstimate
    seeds: dict  # (side, replicate) -> seed

    def means(self) -> np.ndarray:
        return np.array([row.mean for row in self.rows])


def t_interval(values, level: float = 0.95):
    """Student-t interval for the mean of replicate values."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if len(v) < 2:
        return mean, mean, mean, 0.0
    sd = float(v.std(ddof=1))
    half = stats.t.ppf(0.5 + level / 2, len(v) - 1) * sd / math.sqrt(len(v))
    return mean, mean - half, mean + half, sd


def build_model(model: str, side: float, seed, intensity: float = 1.0) -> Network:
    from .builders import build_gabriel, build_grid_comb, build_mst, build_poisson_rain
    from .geometry import sample_poisson

    w = Window(0.0, 0.0, float(side))
    if model == "mst":
        return build_mst(sample_poisson(intensity, w, seed))
    if model == "rain":
        return build_poisson_rain(intensity, w, seed)
    if model == "comb":
        return build_grid_comb(w, 1.0 / math.sqrt(intensity))
    if model == "gabriel":
        return build_gabriel(sample_poisson(intensity, w, seed))
    raise ValueError(f"unknown model {model!r}")


def window_scaling_study(model: str, r: float, sides, replicates: int, seed, cap: int | None = None,
                         margin_frac: float = 0.1, intensity: float = 1.0, d_grid=None,
                         threads: int = 1, seed_fn=None) -> ScalingResult:
    """Mean D_r per window side over independent replicates.

    ``seed_fn(side, replicate)`` derives the replicate seed (the default
    hashes the root seed with the model, side and replicate index).
    ``cap=None`` means exact over all pairs for trees; general networks need
    a finite cap.
    """
    from .seeds import derive_seed

    sides = [float(s) for s in sides]
    if any(b <= a for a, b in zip(sides, sides[1:])):
        raise ValueError("sides must be increasing")
    if seed_fn is None:
        seed_fn = lambda side, rep: derive_seed(seed, "scaling", model, side, rep)  # noqa: E731
    if model == "comb":
        replicates = 1
    max_side = max(sides)
    if d_grid is None:
        d_grid = geometric_grid(r, max_side)
    d_grid = np.asarray(d_grid, dtype=float)

    def task(key):
        side, rep = key
        s = seed_fn(side, rep)
        net = build_model(model, side, s, intensity)
        te = estimate_tail(net, r, d_grid=d_grid, cap=cap, margin=margin_frac * side, seed=s,
                           model=model)
        return key, s, te

    keys = [(side, rep) for side in sides for rep in range(replicates)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(task, keys))
    else:
        results = [task(k) for k in keys]
    by_key = {k: (s, te) for k, s, te in results}
    rows, tails, seeds = [], {}, {}
    for side in sides:
        tes = [by_key[(side, rep)][1] for rep in range(replicates)]
        for rep in range(replicates):
            seeds[(side, rep)] = by_key[(side, rep)][0]
        means = [te.mean_route for te in tes]
        mean, lo, hi, sd = t_interval(means)
        n = sum(te.pairs for te in tes)
        rows.append(ScalingRow(side, mean, lo, hi, sd, replicates, n, means))
        exceed = np.sum([te.exceed for te in tes], axis=0)
        s1 = sum(te.mean_route * te.pairs for te in tes)
        s2 = sum((te.se_route ** 2 * te.pairs * (te.pairs - 1) + te.pairs * te.mean_route ** 2)
                 for te in tes)
        tails[side] = tail_from_counts(r, d_grid, exceed, n, sum(te.total for te in tes), s1, s2,
                                       side, model, seed, margin_frac * side)
    return ScalingResult(model, float(r), rows, tails, seeds)
