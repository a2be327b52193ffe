import json
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from treeroute.lemma_lab.contours import (ContourSet, GridColoring, contour_cost, count_self_avoiding,
                                          count_unlike_pairs, extract_dual_contours, is_self_avoiding,
                                          maximal_decomposition)

FIGURE_SOURCE = Path(__file__).resolve().parents[1] / "paper.md"


def adjacent_unlike_scan(green):
    k = green.shape[0]
    n = 0
    for x in range(k):
        for y in range(k):
            if x + 1 < k and green[x, y] != green[x + 1, y]:
                n += 1
            if y + 1 < k and green[x, y] != green[x, y + 1]:
                n += 1
    return n


def grids(k_min=2, k_max=9):
    return st.integers(k_min, k_max).flatmap(lambda k: arrays(bool, (k, k)))


class TestExtraction:
    def test_monochromatic_is_empty(self):
        cs = extract_dual_contours(np.ones((5, 5), bool))
        assert cs.contours == []

    def test_single_green_cell(self):
        g = np.zeros((5, 5), bool)
        g[2, 2] = True
        cs = extract_dual_contours(g)
        assert len(cs.circuits) == 1 and not cs.paths and cs.circuits[0].length == 4
        info = maximal_decomposition(cs, g)[0]
        assert info.interior.sum() == 1 and info.interior[2, 2]

    def test_half_split_is_one_path(self):
        g = np.zeros((6, 6), bool)
        g[:3] = True
        cs = extract_dual_contours(g)
        assert len(cs.paths) == 1 and cs.total_length == 6

    def test_checkerboard_corner_turns_left(self):
        # two green cells touching at a corner: the left-turn rule gives two unit circuits
        g = np.zeros((4, 4), bool)
        g[1, 1] = g[2, 2] = True
        cs = extract_dual_contours(g)
        assert sorted(c.length for c in cs.circuits) == [4, 4]

    def test_conservation_random(self):
        rng = np.random.default_rng(1)
        for k in (4, 8, 16):
            for _ in range(200):
                gc = GridColoring.random(k, rng)
                cs = extract_dual_contours(gc)
                assert cs.total_length == adjacent_unlike_scan(gc.green) == count_unlike_pairs(gc.green)

    @settings(max_examples=150, deadline=None)
    @given(grids())
    def test_property_conservation_and_self_avoidance(self, g):
        cs = extract_dual_contours(g)
        assert cs.total_length == adjacent_unlike_scan(g)
        assert all(is_self_avoiding(c) for c in cs.contours)
        seen = [e for c in cs.contours for e in c.edges]
        assert len(seen) == len(set(seen))

    @settings(max_examples=80, deadline=None)
    @given(grids(2, 8))
    def test_property_maximal_interiors_disjoint(self, g):
        infos = maximal_decomposition(extract_dual_contours(g), g)
        acc = np.zeros(g.shape, int)
        for i in infos:
            if i.maximal:
                acc += i.interior
        assert acc.max(initial=0) <= 1

    def test_paths_end_on_frame(self):
        rng = np.random.default_rng(2)
        k = 10
        for _ in range(50):
            cs = extract_dual_contours(GridColoring.random(k, rng))
            for p in cs.paths:
                for v in (p.vertices[0], p.vertices[-1]):
                    assert v[0] in (0, k) or v[1] in (0, k)
            for c in cs.circuits:
                assert c.vertices[0] == c.vertices[-1]

    def test_json_round_trip(self):
        rng = np.random.default_rng(3)
        cs = extract_dual_contours(GridColoring.random(8, rng))
        obj = json.loads(cs.to_json())
        assert set(obj) == {"k", "circuits", "paths"}
        assert all(d in ("N", "E") for c in obj["circuits"] + obj["paths"] for _, _, d in c)
        back = ContourSet.from_json(cs.to_json())
        assert sorted(map(sorted, (c.edges for c in back.contours))) == sorted(
            map(sorted, (c.edges for c in cs.contours)))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            GridColoring(np.zeros((3, 4), bool))


class TestMaximal:
    def test_nested_circuit_not_maximal(self):
        g = np.zeros((7, 7), bool)
        g[1:6, 1:6] = True
        g[2:5, 2:5] = False
        g[3, 3] = True
        infos = maximal_decomposition(extract_dual_contours(g), g)
        circ = sorted((i for i in infos), key=lambda i: i.size)
        assert [i.maximal for i in circ] == [False, False, True]
        assert circ[0].parent >= 0

    def test_ambiguity_flag_on_even_split(self):
        g = np.zeros((6, 6), bool)
        g[:3] = True
        (info,) = maximal_decomposition(extract_dual_contours(g), g)
        assert info.ambiguous and info.interior_on_left and info.size == 18

    def test_maximal_ring_checks_random(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            gc = GridColoring.random(12, rng)
            for i in maximal_decomposition(extract_dual_contours(gc), gc):
                if i.maximal:
                    assert i.inside_uniform and i.outside_uniform


def parse_figure_one():
    """Left-panel colouring and segment sets of both panels from the LaTeX picture."""
    txt = FIGURE_SOURCE.read_text()
    start = txt.index("\\begin{picture}(30,15)(-5,0)")
    body = txt[start:txt.index("\\end{picture}", start)]
    g = np.full((12, 12), -1)
    for x, y, star in re.findall(r"\\put\((\d+),(\d+)\)\{\\circle(\*?)\{", body):
        if int(x) < 12:
            g[int(x), int(y)] = 1 if star else 0
    segs = set()
    for x, y, dx, dy, L in re.findall(r"\\put\(([-\d.]+),([-\d.]+)\)\{\\line\(([-\d ]+),([-\d ]+)\)\{([\d.]+)\}", body):
        x, y, L = float(x), float(y), int(float(L))
        dx, dy = int(dx.replace(" ", "")), int(dy.replace(" ", ""))
        for t in range(L):
            a, b = (x + dx * t, y + dy * t), (x + dx * (t + 1), y + dy * (t + 1))
            segs.add((a, b) if a < b else (b, a))
    left = {s for s in segs if max(s[0][0], s[1][0]) <= 11.5}
    right = {((a[0] - 16, a[1]), (b[0] - 16, b[1])) for a, b in segs if min(a[0], b[0]) >= 11.5}
    return g, left, right


def as_segments(edges):
    # figure coordinates put cell centres on integers
    out = set()
    for x, y, d in edges:
        out.add(((x + 0.5, y - 0.5), (x + 0.5, y + 0.5)) if d == "E" else ((x - 0.5, y + 0.5), (x + 0.5, y + 0.5)))
    return out


@pytest.mark.skipif(not FIGURE_SOURCE.exists(), reason="figure source not available")
class TestFigureOne:
    def test_left_panel_contours(self):
        g, left, _ = parse_figure_one()
        assert (g >= 0).all()
        cs = extract_dual_contours(g.astype(bool))
        assert as_segments(e for c in cs.contours for e in c.edges) == left

    def test_five_maximal_paths_one_circuit(self):
        g, _, right = parse_figure_one()
        cs = extract_dual_contours(g.astype(bool))
        mx = [i for i in maximal_decomposition(cs, g.astype(bool)) if i.maximal]
        assert sum(i.contour.kind == "path" for i in mx) == 5
        assert sum(i.contour.kind == "circuit" for i in mx) == 1
        assert as_segments(e for i in mx for e in i.contour.edges) == right


class TestCost:
    def test_all_removed(self):
        rng = np.random.default_rng(5)
        cs = extract_dual_contours(GridColoring.random(6, rng))
        assert all(contour_cost(c, np.ones((6, 6), bool)) == 0 for c in cs.contours)

    def test_none_removed(self):
        rng = np.random.default_rng(6)
        cs = extract_dual_contours(GridColoring.random(6, rng))
        assert all(contour_cost(c, np.zeros((6, 6), bool)) == c.length for c in cs.contours)

    def test_edge_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            gc = GridColoring.random(8, rng, q=0.3)
            for c in extract_dual_contours(gc).contours:
                e, n = c.edge_masks(8)
                r = gc.removed
                free_e = ~r[:-1, :] & ~r[1:, :]
                free_n = ~r[:, :-1] & ~r[:, 1:]
                assert contour_cost(c, r) == int((e & free_e).sum() + (n & free_n).sum())


class TestPathCounts:
    def test_plus_shape(self):
        # k=2: the dual graph is four edges meeting at the centre
        assert count_self_avoiding(2, 2) == (6, 0)
        assert count_self_avoiding(2, 1) == (4, 0)

    def test_unit_squares(self):
        # k=3: circuits of length 4 are the boundaries of the single interior dual square
        assert count_self_avoiding(3, 4)[1] == 1
        assert count_self_avoiding(4, 4)[1] == 4

    @pytest.mark.parametrize("length", [4, 5, 6])
    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_bound(self, k, length):
        paths, _ = count_self_avoiding(k, length)
        assert 2 * paths <= 4 * k * k * 3 ** (length - 1)
