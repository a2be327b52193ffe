import numpy as np
import pytest

from treeroute.builders import (build_gabriel, build_grid_comb, build_mst, build_poisson_rain,
                                poisson_rain_tree, rgg_components)
from treeroute.geometry import PointSet, Window, sample_poisson
from treeroute.network import route_length

from conftest import random_points


def kruskal_complete(xy):
    """Kruskal over the complete graph; returns the set of sorted edge tuples."""
    n = len(xy)
    iu, ju = np.triu_indices(n, 1)
    w = np.hypot(*(xy[iu] - xy[ju]).T)
    order = np.lexsort((ju, iu, w))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    out = set()
    for e in order:
        a, b = find(int(iu[e])), find(int(ju[e]))
        if a != b:
            parent[a] = b
            out.add((int(iu[e]), int(ju[e])))
            if len(out) == n - 1:
                break
    return out


def edge_set(net):
    return {tuple(sorted(map(int, e))) for e in net.edges}


def gabriel_scan(xy):
    """Definition scan: uv kept iff no other point lies in the closed diameter disc."""
    n = len(xy)
    out = set()
    iu, ju = np.triu_indices(n, 1)
    for start in range(0, len(iu), 20_000):
        a, b = iu[start:start + 20_000], ju[start:start + 20_000]
        mid = 0.5 * (xy[a] + xy[b])
        rad2 = 0.25 * ((xy[a] - xy[b]) ** 2).sum(axis=1)
        d2 = ((xy[None, :, :] - mid[:, None, :]) ** 2).sum(axis=2)
        d2[np.arange(len(a)), a] = np.inf
        d2[np.arange(len(a)), b] = np.inf
        ok = d2.min(axis=1) > rad2
        out |= set(zip(a[ok].tolist(), b[ok].tolist()))
    return out


class TestMST:
    def test_two_points(self):
        t = build_mst(PointSet([[0, 0], [1, 1]], Window(0, 0, 2)))
        assert edge_set(t) == {(0, 1)}

    def test_collinear_hand_example(self):
        t = build_mst(PointSet([[0, 0], [1, 0], [3, 0]], Window(0, 0, 4)))
        assert edge_set(t) == {(0, 1), (1, 2)} and t.lengths.sum() == pytest.approx(3)

    def test_single_point(self):
        t = build_mst(PointSet([[0.5, 0.5]], Window(0, 0, 1)))
        assert t.n_vertices == 1 and len(t.edges) == 0

    def test_equals_complete_kruskal_1500(self):
        ps = random_points(1500, np.sqrt(1500), 1)
        assert edge_set(build_mst(ps)) == kruskal_complete(ps.points)

    def test_clustered_input_needs_escalation(self):
        rng = np.random.default_rng(2)
        xy = np.concatenate([rng.random((200, 2)), rng.random((200, 2)) + [40, 40]])
        ps = PointSet(xy, Window(0, 0, 42))
        assert edge_set(build_mst(ps)) == kruskal_complete(xy)

    def test_tiny_initial_radius(self):
        ps = random_points(300, 10.0, 3)
        assert edge_set(build_mst(ps, initial_radius=1e-3)) == kruskal_complete(ps.points)


class TestRain:
    def test_one_point(self):
        t = poisson_rain_tree(PointSet([[1, 1]], Window(0, 0, 2)), [0.5])
        assert t.n_vertices == 1

    def test_hand_example(self):
        ps = PointSet([[0, 0], [10, 0], [10, 1]], Window(0, 0, 11))
        t = poisson_rain_tree(ps, [0.1, 0.2, 0.3])
        assert t.parent[2] == 1 and t.parent[1] == 0

    def test_parents_are_nearest_earlier(self):
        t = build_poisson_rain(1.0, Window(0, 0, np.sqrt(1000)), 4)
        order = np.argsort(t.arrival)
        xy = t.positions
        for k in range(1, len(order)):
            p = order[k]
            prev = order[:k]
            d = np.hypot(*(xy[prev] - xy[p]).T)
            assert t.parent[p] == prev[np.argmin(d)]

    def test_arrival_monotone_along_root_paths(self):
        t = build_poisson_rain(1.0, Window(0, 0, 40), 5)
        nr = t.parent >= 0
        assert np.all(t.arrival[t.parent[nr]] < t.arrival[nr])
        assert np.all((t.arrival > 0) & (t.arrival <= 1))


class TestComb:
    def test_single_site(self):
        assert build_grid_comb(Window(0, 0, 1)).n_vertices == 1

    def test_three_by_three(self):
        t = build_grid_comb(Window(0, 0, 3))
        assert len(t.edges) == 8 and np.allclose(t.lengths, 1.0)

    @staticmethod
    def comb_routes(m):
        c = (m - 1) // 2
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
        i, j = i.ravel(), j.ravel()
        iu, ju = np.triu_indices(m * m, 1)
        same_row_side = (j[iu] == j[ju]) & (np.sign(i[iu] - c) * np.sign(i[ju] - c) > 0)
        via = np.abs(i[iu] - c) + np.abs(i[ju] - c) + np.abs(j[iu] - j[ju])
        return iu, ju, np.where(same_row_side, np.abs(i[iu] - i[ju]), via)

    def test_routes_match_closed_form(self):
        m = 9
        t = build_grid_comb(Window(0, 0, m))
        iu, ju, d = self.comb_routes(m)
        assert np.allclose(route_length(t, iu, ju), d)

    def test_mean_route_grows_linearly(self):
        means = {m: self.comb_routes(m)[2].mean() for m in (16, 32, 64)}
        s1 = (means[32] - means[16]) / 16
        s2 = (means[64] - means[32]) / 32
        assert abs(s2 - s1) / s1 < 0.2
        t = build_grid_comb(Window(0, 0, 16))
        iu, ju, d = self.comb_routes(16)
        assert route_length(t, iu, ju).mean() == pytest.approx(means[16], rel=1e-12)

    def test_rejects_bad_spacing(self):
        with pytest.raises(ValueError):
            build_grid_comb(Window(0, 0, 3), 0)


class TestGabriel:
    def test_two_points(self):
        g = build_gabriel(PointSet([[0, 0], [1, 0]], Window(0, 0, 2)))
        assert edge_set(g) == {(0, 1)}

    def test_right_triangle_drops_hypotenuse(self):
        g = build_gabriel(PointSet([[0, 0], [1, 0], [0, 1]], Window(0, 0, 2)))
        assert edge_set(g) == {(0, 1), (0, 2)}

    def test_equals_definition_scan_800(self):
        ps = random_points(800, np.sqrt(800), 6)
        assert edge_set(build_gabriel(ps)) == gabriel_scan(ps.points)

    def test_contains_mst(self):
        ps = random_points(2000, np.sqrt(2000), 7)
        assert edge_set(build_mst(ps)) <= edge_set(build_gabriel(ps))

    def test_cocircular_square(self):
        # four cocircular points: both diagonals have the other corners on their disc boundary
        g = build_gabriel(PointSet([[0, 0], [1, 0], [1, 1], [0, 1]], Window(0, 0, 2)))
        assert edge_set(g) == {(0, 1), (1, 2), (2, 3), (0, 3)}


def bfs_components(xy, r0):
    n = len(xy)
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    lab = np.full(n, -1)
    c = 0
    for s in range(n):
        if lab[s] >= 0:
            continue
        lab[s] = c
        q = [s]
        while q:
            x = q.pop()
            for y in np.flatnonzero((d[x] <= r0) & (lab < 0)):
                lab[y] = c
                q.append(y)
        c += 1
    return lab


class TestRGG:
    def test_all_singletons(self):
        ps = PointSet([[0, 0], [1, 0], [3, 0]], Window(0, 0, 4))
        comp = rgg_components(ps, 0.5)
        assert comp.sizes.tolist() == [1, 1, 1] and comp.histogram == {1: 3}

    def test_two_clusters(self):
        xy = np.array([[0, 0], [0.1, 0], [0, 0.1], [5, 5], [5.1, 5]])
        comp = rgg_components(PointSet(xy, Window(0, 0, 6)), 0.5)
        assert sorted(comp.sizes.tolist()) == [2, 3]

    def test_matches_bfs(self):
        ps = random_points(600, 15.0, 8)
        comp = rgg_components(ps, 0.6)
        assert np.array_equal(comp.labels, bfs_components(ps.points, 0.6))
        assert np.array_equal(comp.point_sizes, comp.sizes[comp.labels])

    def test_mst_route_bound_exhaustive_50(self):
        ps = sample_poisson(1.0, Window(0, 0, 50), 9)
        r0 = 0.5
        comp = rgg_components(ps, r0)
        t = build_mst(ps)
        checked = 0
        for lab in np.flatnonzero(comp.sizes > 1):
            mem = np.flatnonzero(comp.labels == lab)
            iu, ju = np.triu_indices(len(mem), 1)
            d = route_length(t, mem[iu], mem[ju])
            assert np.all(d <= r0 * comp.sizes[lab] * (1 + 1e-12))
            checked += len(d)
        assert checked > 0

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            rgg_components(random_points(5), 0)
