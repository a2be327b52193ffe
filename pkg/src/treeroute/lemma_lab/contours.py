"""Dual-lattice contours of a two-coloured k x k grid.

Cell (x, y) is the unit square [x, x+1] x [y, y+1]; dual vertices are the
integer points (a, b) with 0 <= a, b <= k.  A dual edge is named by a cell and
a direction: ``(x, y, "E")`` separates (x, y) from (x+1, y) and ``(x, y, "N")``
separates (x, y) from (x, y+1).

Every boundary edge is oriented with the green cell on its left.  At a dual
vertex where four boundary edges meet (a checkerboard corner) the contour
turns left, so it wraps tightly around the green cell.  Traced trails are then
split at repeated vertices so every circuit and path is self-avoiding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# headings: 0 east, 1 north, 2 west, 3 south
_STEP = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass
class GridColoring:
    """``green[x, y]`` is True for green cells; ``removed[x, y]`` marks the set Xi."""

    green: np.ndarray
    removed: np.ndarray = None

    def __post_init__(self):
        self.green = np.asarray(self.green, dtype=bool)
        k = self.green.shape[0]
        if self.green.ndim != 2 or self.green.shape != (k, k) or k < 2:
            raise ValueError("coloring must be a k x k array with k >= 2")
        if self.removed is None:
            self.removed = np.zeros((k, k), dtype=bool)
        self.removed = np.asarray(self.removed, dtype=bool)
        if self.removed.shape != (k, k):
            raise ValueError("removed set must have the grid's shape")

    @property
    def k(self) -> int:
        return self.green.shape[0]

    @classmethod
    def random(cls, k: int, rng, p_green: float = 0.5, q: float = 0.0) -> "GridColoring":
        return cls(rng.random((k, k)) < p_green, rng.random((k, k)) < q)


def unlike_pairs(green: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Masks of E and N dual edges separating unlike colours, shapes (k-1, k) and (k, k-1)."""
    g = np.asarray(green, dtype=bool)
    return g[1:, :] != g[:-1, :], g[:, 1:] != g[:, :-1]


def count_unlike_pairs(green: np.ndarray) -> int:
    e, n = unlike_pairs(green)
    return int(e.sum() + n.sum())


@dataclass
class Contour:
    kind: str  # "circuit" or "path"
    vertices: list  # dual points; circuits repeat the first vertex at the end
    edges: list  # (x, y, "E" | "N")
    headings: list = field(repr=False, default_factory=list)

    @property
    def length(self) -> int:
        return len(self.edges)

    def edge_masks(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        e = np.zeros((k - 1, k), dtype=bool)
        n = np.zeros((k, k - 1), dtype=bool)
        for x, y, d in self.edges:
            if d == "E":
                e[x, y] = True
            else:
                n[x, y] = True
        return e, n


@dataclass
class ContourSet:
    k: int
    contours: list

    @property
    def circuits(self) -> list:
        return [c for c in self.contours if c.kind == "circuit"]

    @property
    def paths(self) -> list:
        return [c for c in self.contours if c.kind == "path"]

    @property
    def total_length(self) -> int:
        return sum(c.length for c in self.contours)

    def to_json(self) -> str:
        enc = lambda c: [[int(x), int(y), d] for x, y, d in c.edges]  # noqa: E731
        return json.dumps({"k": self.k, "circuits": [enc(c) for c in self.circuits],
                           "paths": [enc(c) for c in self.paths]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ContourSet":
        obj = json.loads(text)
        k = obj["k"]
        out = []
        for kind, key in (("circuit", "circuits"), ("path", "paths")):
            for edges in obj[key]:
                out.append(Contour(kind, [], [(int(x), int(y), d) for x, y, d in edges]))
        return cls(k, out)


def _directed_edges(green: np.ndarray) -> list:
    """Boundary edges as (tail, head, heading, code), green on the left."""
    g = green
    k = g.shape[0]
    out = []
    xs, ys = np.nonzero(g[1:, :] != g[:-1, :])
    for x, y in zip(xs.tolist(), ys.tolist()):
        lo, hi = (x + 1, y), (x + 1, y + 1)
        if g[x, y]:
            out.append((lo, hi, 1, (x, y, "E")))
        else:
            out.append((hi, lo, 3, (x, y, "E")))
    xs, ys = np.nonzero(g[:, 1:] != g[:, :-1])
    for x, y in zip(xs.tolist(), ys.tolist()):
        a, b = (x, y + 1), (x + 1, y + 1)
        if g[x, y + 1]:
            out.append((a, b, 0, (x, y, "N")))
        else:
            out.append((b, a, 2, (x, y, "N")))
    out.sort(key=lambda t: (t[3][2], t[3][0], t[3][1]))
    return out


def _split_simple(verts, edges, heads, closed):
    """Split a trail at repeated vertices into self-avoiding pieces."""
    pieces = []
    stack_v = [verts[0]]
    stack_e, stack_h = [], []
    pos = {verts[0]: 0}
    for w, e, h in zip(verts[1:], edges, heads):
        stack_e.append(e)
        stack_h.append(h)
        if w in pos:
            p = pos[w]
            cyc_v = stack_v[p:] + [w]
            cyc_e = stack_e[p:]
            cyc_h = stack_h[p:]
            for v in stack_v[p + 1:]:
                del pos[v]
            del stack_v[p + 1:]
            del stack_e[p:]
            del stack_h[p:]
            pieces.append(Contour("circuit", cyc_v, cyc_e, cyc_h))
        else:
            pos[w] = len(stack_v)
            stack_v.append(w)
    if stack_e:
        # a closed trail always ends back at its start and empties the stack
        assert not closed
        pieces.append(Contour("path", stack_v, stack_e, stack_h))
    return pieces


def extract_dual_contours(gc: GridColoring | np.ndarray) -> ContourSet:
    green = gc.green if isinstance(gc, GridColoring) else np.asarray(gc, dtype=bool)
    k = green.shape[0]
    directed = _directed_edges(green)
    out_of: dict = {}
    for idx, (tail, _, h, _) in enumerate(directed):
        out_of.setdefault(tail, []).append(idx)
    used = [False] * len(directed)

    def successor(idx):
        _, head, h, _ = directed[idx]
        cand = [j for j in out_of.get(head, ()) if not used[j]]
        if not cand:
            return None
        if len(out_of[head]) == 2:
            want = (h + 1) % 4
            for j in out_of[head]:
                if directed[j][2] == want:
                    return j if not used[j] else None
        return cand[0]

    def trace(start):
        verts = [directed[start][0]]
        edges, heads = [], []
        j = start
        while j is not None and not used[j]:
            used[j] = True
            verts.append(directed[j][1])
            edges.append(directed[j][3])
            heads.append(directed[j][2])
            j = successor(j)
        return verts, edges, heads

    contours = []
    on_frame = lambda v: v[0] in (0, k) or v[1] in (0, k)  # noqa: E731
    for idx, (tail, _, _, _) in enumerate(directed):
        if not used[idx] and on_frame(tail):
            verts, edges, heads = trace(idx)
            contours.extend(_split_simple(verts, edges, heads, closed=False))
    for idx in range(len(directed)):
        if not used[idx]:
            verts, edges, heads = trace(idx)
            if verts[0] != verts[-1]:
                raise AssertionError("open trail away from the frame")
            contours.extend(_split_simple(verts, edges, heads, closed=True))
    return ContourSet(k, contours)


def contour_cost(contour: Contour, removed: np.ndarray) -> int:
    """Number of the contour's edges whose two cells are both outside the removed set."""
    removed = np.asarray(removed, dtype=bool)
    cost = 0
    for x, y, d in contour.edges:
        other = removed[x + 1, y] if d == "E" else removed[x, y + 1]
        if not removed[x, y] and not other:
            cost += 1
    return cost


def contour_regions(contour: Contour, k: int) -> tuple[np.ndarray, int]:
    """Label the cell regions cut out by one contour (labels 1..n)."""
    e, nmask = contour.edge_masks(k)
    img = np.zeros((2 * k - 1, 2 * k - 1), dtype=bool)
    img[::2, ::2] = True
    img[1::2, ::2] = ~e
    img[::2, 1::2] = ~nmask
    lab, n = ndimage.label(img)
    return lab[::2, ::2], n


def _inside_cells(contour: Contour, left: bool):
    """Cells on the left (or right) side of each oriented edge."""
    cells = []
    for (x, y, d), h in zip(contour.edges, contour.headings):
        if d == "E":
            lcell, rcell = ((x, y), (x + 1, y)) if h == 1 else ((x + 1, y), (x, y))
        else:
            lcell, rcell = ((x, y + 1), (x, y)) if h == 0 else ((x, y), (x, y + 1))
        cells.append(lcell if left else rcell)
    return cells


@dataclass
class ContourInfo:
    contour: Contour
    interior: np.ndarray  # bool (k, k)
    size: int
    ambiguous: bool  # path whose two regions differ by at most 1%
    interior_on_left: bool
    parent: int = -1
    maximal: bool = False
    inside_uniform: bool = False
    outside_uniform: bool = False
    inside_connected: bool = False


def contour_interior(contour: Contour, k: int) -> tuple[np.ndarray, bool, bool]:
    """Interior cells, ambiguity flag and whether the interior lies on the left.

    A circuit's interior is the region away from the frame.  A path's interior
    is the smaller of its two regions; ties go to the left (green) side.
    """
    lab, n = contour_regions(contour, k)
    if n != 2:
        raise AssertionError(f"contour cuts the grid into {n} regions")
    lx, ly = _inside_cells(contour, True)[0]
    left_label = lab[lx, ly]
    sizes = {1: int((lab == 1).sum()), 2: int((lab == 2).sum())}
    if contour.kind == "circuit":
        inner = 2 if lab[0, 0] == 1 else 1
        ambiguous = False
    else:
        a, b = sizes[left_label], sizes[3 - left_label]
        inner = left_label if a <= b else 3 - left_label
        ambiguous = abs(a - b) <= 0.01 * max(a, b)
    return lab == inner, ambiguous, inner == left_label


def maximal_decomposition(cs: ContourSet, gc: GridColoring | np.ndarray | None = None) -> list:
    """Containment forest over contours, with maximality and ring checks.

    A contour is inside another when its interior is a subset of the other's
    interior.  Maximal contours have no container.  With a colouring the
    cells immediately inside a maximal contour are checked to share one colour
    and to be connected allowing diagonal steps, and the cells immediately
    outside to share the opposite colour.
    """
    k = cs.k
    infos = []
    for c in cs.contours:
        interior, amb, on_left = contour_interior(c, k)
        infos.append(ContourInfo(c, interior, int(interior.sum()), amb, on_left))
    order = sorted(range(len(infos)), key=lambda i: infos[i].size)
    for pos, i in enumerate(order):
        a = infos[i]
        for j in order[pos + 1:]:
            b = infos[j]
            if b.size > a.size and not np.any(a.interior & ~b.interior):
                a.parent = j
                break
        a.maximal = a.parent < 0
    green = None
    if gc is not None:
        green = gc.green if isinstance(gc, GridColoring) else np.asarray(gc, dtype=bool)
    for a in infos:
        if green is None:
            continue
        inside = _inside_cells(a.contour, a.interior_on_left)
        outside = _inside_cells(a.contour, not a.interior_on_left)
        cin = {bool(green[x, y]) for x, y in inside}
        cout = {bool(green[x, y]) for x, y in outside}
        a.inside_uniform = len(cin) == 1
        a.outside_uniform = len(cout) == 1 and cout != cin
        ring = np.zeros((k, k), dtype=bool)
        for x, y in inside:
            ring[x, y] = True
        _, nlab = ndimage.label(ring, structure=np.ones((3, 3)))
        a.inside_connected = nlab == 1
    return infos


def is_self_avoiding(c: Contour) -> bool:
    vs = c.vertices[:-1] if c.kind == "circuit" else c.vertices
    return len(set(vs)) == len(vs) and (c.kind != "circuit" or c.vertices[0] == c.vertices[-1])


def _dual_graph(k: int) -> dict:
    """Dual vertices joined by edges that separate two cells of the grid."""
    adj: dict = {}

    def add(u, v, code):
        adj.setdefault(u, []).append((v, code))
        adj.setdefault(v, []).append((u, code))

    for x in range(k - 1):
        for y in range(k):
            add((x + 1, y), (x + 1, y + 1), (x, y, "E"))
    for x in range(k):
        for y in range(k - 1):
            add((x, y + 1), (x + 1, y + 1), (x, y, "N"))
    return adj


def count_self_avoiding(k: int, length: int) -> tuple[int, int]:
    """Exhaustive counts of self-avoiding dual paths and circuits with ``length`` edges.

    Paths and circuits are counted as edge sets (direction and starting point
    ignored).
    """
    adj = _dual_graph(k)
    paths = 0
    circuits = set()
    for s in sorted(adj):
        stack = [(s, [s], [])]
        while stack:
            v, verts, codes = stack.pop()
            if len(codes) == length:
                paths += 1
                continue
            for w, code in adj[v]:
                if w == s and len(codes) == length - 1 and length >= 4:
                    circuits.add(frozenset(codes + [code]))
                if w in verts:
                    continue
                stack.append((w, verts + [w], codes + [code]))
    return paths // 2, len(circuits)
