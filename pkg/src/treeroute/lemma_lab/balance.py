"""Balanced squares, bichromatic pair counts and the sliding-square witness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..geometry import PointSet, Window, pairs_within
from ..seeds import rng_for

STRIP_LO = 0.98
STRIP_HI = 1.02


def strip_counts(points, m: float, x0: float = 0.0, y0: float = 0.0) -> np.ndarray:
    """Counts in the five vertical then five horizontal strips of [x0, x0+m) x [y0, y0+m)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    u = (p[:, 0] - x0) / m
    v = (p[:, 1] - y0) / m
    inside = (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
    iu = np.minimum((u[inside] * 5).astype(np.int64), 4)
    iv = np.minimum((v[inside] * 5).astype(np.int64), 4)
    return np.concatenate([np.bincount(iu, minlength=5), np.bincount(iv, minlength=5)])


def strip_band(m: float) -> tuple[float, float]:
    return STRIP_LO * m * m / 5, STRIP_HI * m * m / 5


@dataclass
class BalanceReport:
    m: float
    strips: np.ndarray
    lo: float
    hi: float
    balanced: bool
    total: int
    size_ok: bool  # 0.98 m^2 <= total <= 1.02 m^2


def _report(m, strips, total) -> BalanceReport:
    lo, hi = strip_band(m)
    bal = bool(np.all((strips >= lo) & (strips <= hi)))
    size_ok = STRIP_LO * m * m <= total <= STRIP_HI * m * m
    return BalanceReport(m, strips, lo, hi, bal, int(total), bool(size_ok))


def is_balanced(points, m: float, x0: float = 0.0, y0: float = 0.0) -> BalanceReport:
    """Every strip of the m-square holds between 0.98 m^2/5 and 1.02 m^2/5 points."""
    if not m > 0:
        raise ValueError("m must be positive")
    s = strip_counts(points, m, x0, y0)
    return _report(m, s, int(s[:5].sum()))


def balance_from_strips(strips: np.ndarray, m: float) -> BalanceReport:
    return _report(m, np.asarray(strips), int(np.asarray(strips)[:5].sum()))


def count_bichromatic_pairs(points, blue, threshold: float) -> int:
    """Number of (blue, red) pairs at distance at most ``threshold`` (all pairs, not a matching)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    blue = np.asarray(blue, dtype=bool)
    if len(p) < 2:
        return 0
    lo = p.min(axis=0)
    side = float((p.max(axis=0) - lo).max()) * (1 + 1e-12) + 1e-9
    ps = PointSet(p, Window(float(lo[0]), float(lo[1]), side))
    pr = pairs_within(ps, threshold).pairs
    return int(np.count_nonzero(blue[pr[:, 0]] != blue[pr[:, 1]]))


@dataclass
class Witness:
    i: int
    blue: int
    total: int
    x0: float


def sliding_square_witness(points, blue, m: float, x0: float = 0.0, y0: float = 0.0):
    """First translate [x0 + i m/5, x0 + m + i m/5) x [y0, y0 + m), i = 0..5, whose blue
    count lies in [0.1 m^2, 0.88 m^2]; None when no translate qualifies."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    blue = np.asarray(blue, dtype=bool)
    lo, hi = 0.1 * m * m, 0.88 * m * m
    iny = (p[:, 1] >= y0) & (p[:, 1] < y0 + m)
    for i in range(6):
        a = x0 + i * m / 5
        sel = iny & (p[:, 0] >= a) & (p[:, 0] < a + m)
        b = int(np.count_nonzero(blue & sel))
        if lo <= b <= hi:
            return Witness(i, b, int(sel.sum()), a)
    return None


def lemma_red_hypothesis(points, blue, m: float, x0: float = 0.0, y0: float = 0.0) -> bool:
    """True unless both squares hold < 0.1 m^2 blue, or both hold > 0.88 m^2 blue."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    blue = np.asarray(blue, dtype=bool)
    iny = (p[:, 1] >= y0) & (p[:, 1] < y0 + m)
    s1 = iny & (p[:, 0] >= x0) & (p[:, 0] < x0 + m)
    s2 = iny & (p[:, 0] >= x0 + m) & (p[:, 0] < x0 + 2 * m)
    b1, b2 = int((blue & s1).sum()), int((blue & s2).sum())
    cond_a = b1 < 0.1 * m * m and b2 < 0.1 * m * m
    cond_b = b1 > 0.88 * m * m and b2 > 0.88 * m * m
    return not (cond_a or cond_b)


# ---------------------------------------------------------------------------
# Poisson configurations conditioned on balance


@njit(cache=True)
def _balanced_chain(table, lam, lo, hi, steps, u):
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    for t in range(steps):
        r = u[t]
        if r[0] < 0.5:
            i = int(r[1] * 5)
            j = int(r[2] * 5)
            if r[3] < 0.5:
                if rows[i] + 1 > hi or cols[j] + 1 > hi:
                    continue
                if r[4] < lam / (table[i, j] + 1):
                    table[i, j] += 1
                    rows[i] += 1
                    cols[j] += 1
            else:
                if table[i, j] == 0 or rows[i] - 1 < lo or cols[j] - 1 < lo:
                    continue
                if r[4] < table[i, j] / lam:
                    table[i, j] -= 1
                    rows[i] -= 1
                    cols[j] -= 1
        else:
            # +1 at (i, j) and (i2, j2), -1 at (i, j2) and (i2, j): margins unchanged
            i = int(r[1] * 5)
            j = int(r[2] * 5)
            i2 = (i + 1 + int(r[3] * 4)) % 5
            j2 = (j + 1 + int(r[4] * 4)) % 5
            a = table[i, j2]
            b = table[i2, j]
            if a == 0 or b == 0:
                continue
            ratio = a * b / ((table[i, j] + 1.0) * (table[i2, j2] + 1.0))
            if r[5] < ratio:
                table[i, j] += 1
                table[i2, j2] += 1
                table[i, j2] -= 1
                table[i2, j] -= 1
    return table


def balanced_table(m: float, rng, sweeps: int = 400) -> np.ndarray:
    """5 x 5 sub-cell counts of a Poisson(1) m-square conditioned on balance (Metropolis)."""
    lo = int(math.ceil(STRIP_LO * m * m / 5 - 1e-9))
    hi = int(math.floor(STRIP_HI * m * m / 5 + 1e-9))
    if lo > hi:
        raise ValueError(f"no balanced configuration exists for m={m}")
    t = int(round(m * m / 5))
    t = min(max(t, lo), hi)
    q, rem = divmod(t, 5)
    table = np.full((5, 5), q, dtype=np.int64)
    for i in range(5):
        for j in range(5):
            if (j - i) % 5 < rem:
                table[i, j] += 1
    steps = sweeps * 25
    u = rng.random((steps, 6))
    return _balanced_chain(table, m * m / 25, lo, hi, steps, u)


def sample_balanced(m: float, seed, x0: float = 0.0, y0: float = 0.0, sweeps: int = 400) -> np.ndarray:
    """Points of a balanced configuration in [x0, x0+m) x [y0, y0+m).

    Given the sub-cell counts, positions are i.i.d. uniform in each sub-cell,
    which is the Poisson law conditioned on those counts.
    """
    rng = rng_for(seed)
    table = balanced_table(m, rng, sweeps)
    h = m / 5
    out = []
    for i in range(5):
        for j in range(5):
            n = int(table[i, j])
            u = rng.random((n, 2))
            out.append(np.column_stack([x0 + (i + u[:, 0]) * h, y0 + (j + u[:, 1]) * h]))
    pts = np.concatenate(out)
    # guard against the measure-zero case of a point landing on the far edge
    pts[:, 0] = np.minimum(pts[:, 0], np.nextafter(x0 + m, -np.inf))
    pts[:, 1] = np.minimum(pts[:, 1], np.nextafter(y0 + m, -np.inf))
    return pts


def adversarial_coloring(points, m: float, rng, x0: float = 0.0, y0: float = 0.0) -> tuple[np.ndarray, str]:
    """A random colouring of S1 u S2 drawn from families that keep blue and red apart."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0] - x0, p[:, 1] - y0
    kind = int(rng.integers(0, 6))
    if kind == 0:
        t = rng.uniform(0, 2 * m)
        return (x < t) if rng.random() < 0.5 else (x >= t), "vertical-cut"
    if kind == 1:
        ang = rng.uniform(0, 2 * np.pi)
        c = rng.uniform(-m, m)
        return (x - m) * np.cos(ang) + (y - m / 2) * np.sin(ang) < c, "half-plane"
    if kind == 2:
        cx, cy, r = rng.uniform(0, 2 * m), rng.uniform(0, m), rng.uniform(0.1 * m, m)
        return (x - cx) ** 2 + (y - cy) ** 2 < r * r, "disc"
    if kind == 3:
        return rng.random(len(p)) < rng.uniform(0, 1), "bernoulli"
    if kind == 4:
        # exactly ceil(0.1 m^2) blue points, the leftmost of S1: the band's lower edge
        b = int(math.ceil(0.1 * m * m))
        idx = np.argsort(x, kind="stable")[:b]
        blue = np.zeros(len(p), dtype=bool)
        blue[idx] = True
        return blue, "edge-low"
    # S1 nearly red, S2 nearly blue: forces the sliding-square case
    t1 = rng.uniform(0, 0.1) * m
    t2 = m + rng.uniform(0, 0.12) * m
    return ((x < t1) | (x >= t2)), "split"
