"""Minimum admissible boundary cost c(Xi) on the k x k grid, and Monte Carlo around it.

A colouring is admissible when each colour covers at least k^2/4 cells.  Its
cost against a removed set Xi is the number of unlike adjacent cell pairs with
neither cell in Xi.

Cells are numbered ``x * k + y``; bit ``x * k + y`` of a colouring index is
the cell's colour (1 = green).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import ndimage

from ..estimators import wilson_interval
from ..seeds import derive_seed, rng_for
from .contours import extract_dual_contours

MAX_EXACT_K = 4


class GridTooLargeError(ValueError):
    pass


def ell(k: int) -> int:
    """Short/long contour cut-off: ceil(ln k)."""
    return int(math.ceil(math.log(k)))


def min_color_count(k: int) -> int:
    return int(math.ceil(k * k / 4))


def _active_masks(removed: np.ndarray) -> tuple[int, int]:
    """Bit masks of E pairs (bit of the left cell) and N pairs (bit of the lower cell)."""
    k = removed.shape[0]
    me = mn = 0
    for x in range(k):
        for y in range(k):
            b = x * k + y
            if x + 1 < k and not removed[x, y] and not removed[x + 1, y]:
                me |= 1 << b
            if y + 1 < k and not removed[x, y] and not removed[x, y + 1]:
                mn |= 1 << b
    return me, mn


@njit(cache=True, nogil=True)
def _popcount(v):
    n = 0
    while v:
        v &= v - 1
        n += 1
    return n


@njit(cache=True, nogil=True)
def _exhaustive_min(k, me, mn, lo_count, hi_count, c0, c1):
    best = 1 << 30
    arg = -1
    for c in range(c0, c1):
        g = _popcount(c)
        if g < lo_count or g > hi_count:
            continue
        cost = _popcount((c ^ (c >> k)) & me) + _popcount((c ^ (c >> 1)) & mn)
        if cost < best:
            best = cost
            arg = c
    return best, arg


def decode(index: int, k: int) -> np.ndarray:
    bits = (int(index) >> np.arange(k * k)) & 1
    return bits.reshape(k, k).astype(bool)


def encode(green: np.ndarray) -> int:
    k = green.shape[0]
    return int(sum(1 << (x * k + y) for x, y in zip(*np.nonzero(green))))


@dataclass
class ExactResult:
    value: int
    witness: np.ndarray
    index: int


def c_exact(removed, k: int | None = None, allow_k5: bool = False, threads: int = 1) -> ExactResult:
    """Exhaustive minimum over all 2^(k^2) colourings (k <= 4, or 5 with ``allow_k5``)."""
    removed = np.asarray(removed, dtype=bool)
    k = removed.shape[0] if k is None else k
    if removed.shape != (k, k):
        raise ValueError("removed set must be k x k")
    if k > 5 or (k == 5 and not allow_k5):
        raise GridTooLargeError(f"exhaustive search is limited to k <= {5 if allow_k5 else 4}")
    me, mn = _active_masks(removed)
    lo = min_color_count(k)
    hi = k * k - lo
    total = 1 << (k * k)
    nchunk = max(1, threads)
    bounds = np.linspace(0, total, nchunk + 1).astype(np.int64)
    chunks = list(zip(bounds[:-1], bounds[1:]))
    run = lambda ab: _exhaustive_min(k, me, mn, lo, hi, int(ab[0]), int(ab[1]))  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(ab) for ab in chunks]
    value, index = min((int(b), int(a)) for b, a in parts if a >= 0)
    return ExactResult(value, decode(index, k), index)


@lru_cache(maxsize=None)
def _contour_edge_table(k: int):
    """For every admissible colouring, the contour edges as (E bits, N bits)."""
    lo = min_color_count(k)
    hi = k * k - lo
    idx, ebits, nbits = [], [], []
    for c in range(1 << (k * k)):
        g = bin(c).count("1")
        if g < lo or g > hi:
            continue
        cs = extract_dual_contours(decode(c, k))
        e = n = 0
        for cont in cs.contours:
            for x, y, d in cont.edges:
                if d == "E":
                    e |= 1 << (x * k + y)
                else:
                    n |= 1 << (x * k + y)
        idx.append(c)
        ebits.append(e)
        nbits.append(n)
    return (np.array(idx, dtype=np.int64), np.array(ebits, dtype=np.uint64),
            np.array(nbits, dtype=np.uint64))


def _popcount_vec(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64)
    return np.unpackbits(v.view(np.uint8).reshape(-1, 8), axis=1).sum(axis=1)


def c_via_contours(removed, k: int | None = None) -> ExactResult:
    """Independent formulation: minimise the summed contour costs over admissible colourings.

    Contours are extracted once per colouring (they do not depend on Xi) and
    each contour edge is charged unless one of its cells is removed.
    """
    removed = np.asarray(removed, dtype=bool)
    k = removed.shape[0] if k is None else k
    if k > MAX_EXACT_K:
        raise GridTooLargeError("contour enumeration is limited to k <= 4")
    idx, ebits, nbits = _contour_edge_table(k)
    me, mn = _active_masks(removed)
    cost = _popcount_vec(ebits & np.uint64(me)) + _popcount_vec(nbits & np.uint64(mn))
    j = int(np.argmin(cost))
    return ExactResult(int(cost[j]), decode(int(idx[j]), k), int(idx[j]))


# ---------------------------------------------------------------------------
# surrogate upper bound for large k


def coloring_cost(green: np.ndarray, removed: np.ndarray) -> int:
    act = ~removed
    e = (green[1:, :] != green[:-1, :]) & act[1:, :] & act[:-1, :]
    n = (green[:, 1:] != green[:, :-1]) & act[:, 1:] & act[:, :-1]
    return int(e.sum() + n.sum())


def admissible(green: np.ndarray) -> bool:
    k = green.shape[0]
    g = int(green.sum())
    return min_color_count(k) <= g <= k * k - min_color_count(k)


def zero_cost_coloring(removed: np.ndarray):
    """An admissible zero-cost colouring, or None when none exists (exact).

    Cost zero means every component of kept cells is monochrome; removed
    cells are free to pad the green count.
    """
    k = removed.shape[0]
    lo, hi = min_color_count(k), k * k - min_color_count(k)
    lab, n = ndimage.label(~removed)
    sizes = np.bincount(lab.ravel(), minlength=n + 1)[1:]
    free = int(removed.sum())
    # subset sums with back-pointers, smallest components first
    order = np.argsort(sizes, kind="stable")
    reach = {0: None}
    for ci in order:
        s = int(sizes[ci])
        for t in sorted(reach, reverse=True):
            if t + s not in reach:
                reach[t + s] = (t, int(ci))
    feasible = [t for t in sorted(reach) if t <= hi and t + free >= lo]
    if not feasible:
        return None
    t = feasible[0]
    green = np.zeros((k, k), dtype=bool)
    while reach[t] is not None:
        prev, ci = reach[t]
        green |= lab == ci + 1
        t = prev
    need = lo - int(green.sum())
    if need > 0:
        rx, ry = np.nonzero(removed)
        green[rx[:need], ry[:need]] = True
    return green


@njit(cache=True, nogil=True)
def _greedy_improve(green, removed, lo, hi, max_sweeps):
    k = green.shape[0]
    g = 0
    for x in range(k):
        for y in range(k):
            if green[x, y]:
                g += 1
    for _ in range(max_sweeps):
        improved = False
        for x in range(k):
            for y in range(k):
                if removed[x, y]:
                    continue
                ng = g - 1 if green[x, y] else g + 1
                if ng < lo or ng > hi:
                    continue
                delta = 0
                for t in range(4):
                    xx = x + (1, -1, 0, 0)[t]
                    yy = y + (0, 0, 1, -1)[t]
                    if xx < 0 or yy < 0 or xx >= k or yy >= k or removed[xx, yy]:
                        continue
                    delta += 1 if green[xx, yy] == green[x, y] else -1
                if delta < 0:
                    green[x, y] = not green[x, y]
                    g = ng
                    improved = True
        if not improved:
            break
    return green


def portfolio_colorings(k: int):
    """Stripe, half-plane, diagonal and corner-blob colourings that are admissible."""
    lo, hi = min_color_count(k), k * k - min_color_count(k)
    xs, ys = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    rank_col = xs * k + ys  # column-major fill
    rank_row = ys * k + xs
    out = []
    for g in range(lo, hi + 1, max(1, k // 4)):
        out.append(("fill-cols", rank_col < g))
        out.append(("fill-rows", rank_row < g))
    for s in range(0, 2 * k):
        out.append(("diag", xs + ys < s))
        out.append(("anti", xs - ys < s - k + 1))
    for a in range(1, k + 1):
        for b in range(1, k + 1):
            if lo <= a * b <= hi and (a == b or abs(a - b) == 1):
                for cx, cy in ((0, 0), (k - a, 0), (0, k - b), (k - a, k - b)):
                    m = np.zeros((k, k), dtype=bool)
                    m[cx:cx + a, cy:cy + b] = True
                    out.append(("corner", m))
    for r2 in range(1, 2 * k * k):
        m = xs * xs + ys * ys < r2
        if lo <= m.sum() <= hi:
            out.append(("quarter-disc", m))
    return [(name, m) for name, m in out if lo <= m.sum() <= hi]


@lru_cache(maxsize=16)
def _portfolio_cached(k: int):
    return portfolio_colorings(k)


@dataclass
class BoundResult:
    value: int
    witness: np.ndarray
    member: str


def c_portfolio(removed, k: int | None = None, polish: int = 3) -> BoundResult:
    """Upper bound on c(Xi): best portfolio colouring, then greedy single-cell flips."""
    removed = np.asarray(removed, dtype=bool)
    k = removed.shape[0] if k is None else k
    z = zero_cost_coloring(removed)
    if z is not None:
        return BoundResult(0, z, "component-packing")
    lo, hi = min_color_count(k), k * k - min_color_count(k)
    scored = sorted(((coloring_cost(m, removed), i, name, m)
                     for i, (name, m) in enumerate(_portfolio_cached(k))), key=lambda t: (t[0], t[1]))
    best = scored[0]
    result = BoundResult(best[0], best[3].copy(), best[2])
    for cost, _, name, m in scored[:polish]:
        g = _greedy_improve(m.copy(), removed, lo, hi, 4 * k)
        c = coloring_cost(g, removed)
        if c < result.value:
            result = BoundResult(c, g, name + "+greedy")
    return result


# ---------------------------------------------------------------------------
# Monte Carlo


def _exclusion_box(k: int, rng) -> tuple[int, int, int]:
    side = max(1, int(math.ceil(0.001 * k)))
    x = int(rng.integers(0, k - side + 1))
    y = int(rng.integers(0, k - side + 1))
    return x, y, side


@dataclass
class GreenTrial:
    value: int
    method: str
    failure: bool
    zero_cost: bool
    removed_count: int


@dataclass
class GreenResult:
    q: float
    k: int
    trials: int
    failures: int
    p_hat: float
    lo: float
    hi: float
    method: str
    zero_cost_failures: int  # trials where c = 0 exactly (decides failure when k <= 400)
    values: list = field(repr=False, default_factory=list)
    seeds: list = field(repr=False, default_factory=list)


def green_trial(q: float, k: int, seed, exclude_box: bool = False, allow_k5: bool = False) -> GreenTrial:
    rng = rng_for(seed)
    removed = rng.random((k, k)) < q
    if exclude_box:
        x, y, s = _exclusion_box(k, rng)
        removed[x:x + s, y:y + s] = True
    if k <= MAX_EXACT_K or (k == 5 and allow_k5):
        res = c_exact(removed, k, allow_k5=allow_k5)
        value, method = res.value, "exact"
    else:
        res = c_portfolio(removed, k)
        value, method = res.value, "portfolio"
    zero = zero_cost_coloring(removed) is not None
    return GreenTrial(value, method, value < k / 400, zero, int(removed.sum()))


def mc_lemma_green(q: float, k: int, trials: int, seed, exclude_box: bool = False,
                   allow_k5: bool = False, threads: int = 1) -> GreenResult:
    """Empirical Pr(c(Xi) < k/400) with Xi ~ Bernoulli(q) per cell.

    For k > 4 the value used is the portfolio upper bound on c.  Since the
    bound is at least c, the reported failure rate is at most the true one.
    """
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    seeds = [derive_seed(seed, "lemma-green", float(q), k, t) for t in range(trials)]
    run = lambda s: green_trial(q, k, s, exclude_box, allow_k5)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(run, seeds))
    else:
        res = [run(s) for s in seeds]
    fails = sum(r.failure for r in res)
    lo, hi = wilson_interval(fails, trials)
    return GreenResult(q, k, trials, int(fails), fails / trials if trials else float("nan"),
                       float(lo), float(hi), res[0].method if res else "", sum(r.zero_cost for r in res),
                       [r.value for r in res], seeds)


@njit(cache=True, nogil=True)
def _zero_cost_circuit(removed, max_len):
    """True when a zero-cost dual circuit of length <= max_len encloses the centre cell.

    Breadth-first search on the two-sheeted cover of the zero-cost dual graph;
    the sheet flips on crossing the ray from the centre cell towards +x.  A
    closed walk that returns on the other sheet winds around the centre an
    odd number of times and contains such a circuit.
    """
    L = removed.shape[0]
    o = L // 2
    nv = (L + 1) * (L + 1)
    dist = np.full(2 * nv, -1, dtype=np.int64)
    queue = np.empty(2 * nv, dtype=np.int64)
    for s in range(o + 1, L):
        src = s * (L + 1) + o
        dist[:] = -1
        dist[src] = 0
        head = 0
        tail = 1
        queue[0] = src
        while head < tail:
            node = queue[head]
            head += 1
            d = dist[node]
            if d >= max_len:
                break
            sheet = node // nv
            v = node % nv
            a = v // (L + 1)
            b = v % (L + 1)
            for t in range(4):
                # vertical dual edges are E edges of cell (a-1, y); horizontal are N edges of (x, b-1)
                if t == 0 or t == 1:
                    y = b if t == 0 else b - 1
                    if a < 1 or a > L - 1 or y < 0 or y > L - 1:
                        continue
                    if not (removed[a - 1, y] or removed[a, y]):
                        continue
                    na, nb = a, (b + 1 if t == 0 else b - 1)
                    cross = y == o and a - 1 >= o
                else:
                    x = a if t == 2 else a - 1
                    if b < 1 or b > L - 1 or x < 0 or x > L - 1:
                        continue
                    if not (removed[x, b - 1] or removed[x, b]):
                        continue
                    na, nb = (a + 1 if t == 2 else a - 1), b
                    cross = False
                nsheet = 1 - sheet if cross else sheet
                w = nsheet * nv + na * (L + 1) + nb
                if dist[w] < 0:
                    dist[w] = d + 1
                    if w == nv + src:
                        return True
                    queue[tail] = w
                    tail += 1
    return False


@dataclass
class ZeroCostResult:
    q: float
    max_len: int
    trials: int
    hits: int
    p_hat: float
    lo: float
    hi: float


def zero_cost_circuit_mc(q: float, max_len: int, trials: int, seed, threads: int = 1) -> ZeroCostResult:
    """Probability that a zero-cost circuit of length <= max_len surrounds the origin cell."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    if max_len < 4:
        raise ValueError("max_len must be at least 4")

    def run(t):
        rng = rng_for(derive_seed(seed, "zero-cost", float(q), max_len, t))
        return bool(_zero_cost_circuit(rng.random((max_len, max_len)) < q, max_len))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            hits = sum(ex.map(run, range(trials)))
    else:
        hits = sum(run(t) for t in range(trials))
    lo, hi = wilson_interval(hits, trials)
    return ZeroCostResult(q, max_len, trials, int(hits), hits / trials, float(lo), float(hi))
