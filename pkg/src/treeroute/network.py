"""Geometric networks, tree validation and within-tree route queries.

A :class:`TreeNetwork` is rooted once and carries Euler-tour / sparse-table
LCA tables, so a route length is ``depth[u] + depth[v] - 2 depth[lca]`` in
O(1).  Vertex ids are dense ``0..V-1``; ``origin`` maps them back to the ids of
whatever object the tree was derived from.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numba import njit
from scipy import sparse

from .geometry import Window


class CycleFound(ValueError):
    def __init__(self, edges):
        self.edges = [tuple(map(int, e)) for e in edges]
        super().__init__(f"network has a cycle through edges {self.edges}")


class Disconnected(ValueError):
    def __init__(self, components: int):
        self.components = components
        super().__init__(f"network is disconnected ({components} components)")


class UnknownVertexError(KeyError):
    pass


class BipartitionError(RuntimeError):
    def __init__(self, sizes, total):
        self.sizes = list(sizes)
        self.total = total
        super().__init__(
            f"no union of branches {self.sizes} has size in [N/3, N/2] for N={total}"
        )


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _first_cycle_edge(n, edges):
    """Index of the first edge closing a cycle (-1 if none), and component count."""
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    comps = n
    bad = -1
    for e in range(edges.shape[0]):
        a = _uf_find(parent, edges[e, 0])
        b = _uf_find(parent, edges[e, 1])
        if a == b:
            if bad < 0:
                bad = e
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        comps -= 1
    return bad, comps


@njit(cache=True, nogil=True)
def _orient(n, indptr, indices, weights, root, depth0, hops0):
    parent = np.full(n, -1, dtype=np.int64)
    plen = np.zeros(n)
    depth = np.zeros(n)
    hops = np.zeros(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.bool_)
    order[0] = root
    seen[root] = True
    depth[root] = depth0
    hops[root] = hops0
    head = 0
    tail = 1
    while head < tail:
        u = order[head]
        head += 1
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if seen[v]:
                continue
            seen[v] = True
            parent[v] = u
            plen[v] = weights[j]
            depth[v] = depth[u] + weights[j]
            hops[v] = hops[u] + 1
            order[tail] = v
            tail += 1
    return parent, plen, depth, hops, order


@njit(cache=True, nogil=True)
def _euler(n, indptr, indices, parent, root):
    m = 2 * n - 1
    tour = np.empty(m, dtype=np.int64)
    first = np.empty(n, dtype=np.int64)
    ptr = np.empty(n, dtype=np.int64)
    for v in range(n):
        ptr[v] = indptr[v]
    stack = np.empty(n, dtype=np.int64)
    sp = 0
    stack[0] = root
    t = 0
    tour[t] = root
    first[root] = 0
    t += 1
    while sp >= 0:
        u = stack[sp]
        advanced = False
        while ptr[u] < indptr[u + 1]:
            v = indices[ptr[u]]
            ptr[u] += 1
            if v == parent[u]:
                continue
            sp += 1
            stack[sp] = v
            first[v] = t
            tour[t] = v
            t += 1
            advanced = True
            break
        if not advanced:
            sp -= 1
            if sp >= 0:
                tour[t] = stack[sp]
                t += 1
    return tour, first


@njit(cache=True, nogil=True)
def _lca_many(us, vs, first, tour, tdepth, table, logt):
    out = np.empty(us.shape[0], dtype=np.int64)
    for i in range(us.shape[0]):
        a = first[us[i]]
        b = first[vs[i]]
        if a > b:
            a, b = b, a
        j = logt[b - a + 1]
        p = table[j, a]
        q = table[j, b - (1 << j) + 1]
        out[i] = tour[p] if tdepth[p] <= tdepth[q] else tour[q]
    return out


@njit(cache=True, nogil=True)
def _subtree_sums(order, parent, w):
    s = w.astype(np.float64).copy()
    for i in range(order.shape[0] - 1, 0, -1):
        v = order[i]
        s[parent[v]] += s[v]
    return s


@njit(cache=True, nogil=True)
def _branch_labels(n, indptr, indices, src):
    """label[v] = neighbour of src through which v is reached (-1 for src)."""
    label = np.full(n, -2, dtype=np.int64)
    label[src] = -1
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for j in range(indptr[src], indptr[src + 1]):
        v = indices[j]
        label[v] = v
        queue[tail] = v
        tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if label[v] == -2:
                label[v] = label[u]
                queue[tail] = v
                tail += 1
    return label


def _csr(n: int, edges: np.ndarray, lengths: np.ndarray):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    w = np.concatenate([lengths, lengths])
    idx = np.lexsort((dst, src))
    src, dst, w = src[idx], dst[idx], w[idx]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64), w.astype(np.float64)


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Network:
    """Straight-segment geometric graph over terminal and Steiner vertices."""

    positions: np.ndarray
    terminal: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    window: Window | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.terminal = np.asarray(self.terminal, dtype=np.bool_).reshape(-1)
        self.edges = np.ascontiguousarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.lengths = np.asarray(self.lengths, dtype=np.float64).reshape(-1)
        if self.terminal.shape[0] != self.positions.shape[0]:
            raise ValueError("terminal flags must match vertices")
        if self.lengths.shape[0] != self.edges.shape[0]:
            raise ValueError("one length per edge")

    @classmethod
    def from_edges(cls, positions, edges, terminal=None, window=None) -> "Network":
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.hypot(*(positions[edges[:, 0]] - positions[edges[:, 1]]).T)
        if terminal is None:
            terminal = np.ones(len(positions), dtype=bool)
        return cls(positions, terminal, edges, lengths, window)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def terminal_ids(self) -> np.ndarray:
        return np.flatnonzero(self.terminal)

    def check(self) -> None:
        """Raise ValueError on self-loops, duplicate edges or wrong lengths."""
        e = self.edges
        if len(e) == 0:
            return
        if np.any(e < 0) or np.any(e >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loop")
        key = np.sort(e, axis=1)
        if len(np.unique(key, axis=0)) != len(key):
            raise ValueError("duplicate edge")
        true = np.hypot(*(self.positions[e[:, 0]] - self.positions[e[:, 1]]).T)
        if not np.allclose(self.lengths, true, rtol=1e-9, atol=0):
            raise ValueError("edge length differs from Euclidean distance")

    def csgraph(self) -> sparse.csr_matrix:
        n = self.n_vertices
        e = self.edges
        m = sparse.coo_matrix(
            (np.concatenate([self.lengths, self.lengths]),
             (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        )
        return m.tocsr()


@dataclass(eq=False)
class TreeNetwork(Network):
    """Rooted tree with O(1) LCA.  Build through :func:`validate_tree`."""

    root: int = 0
    origin: np.ndarray | None = None
    parent: np.ndarray = field(default=None, repr=False)
    depth: np.ndarray = field(default=None, repr=False)
    hops: np.ndarray = field(default=None, repr=False)
    order: np.ndarray = field(default=None, repr=False)
    _indptr: np.ndarray = field(default=None, repr=False)
    _indices: np.ndarray = field(default=None, repr=False)
    _tour: np.ndarray = field(default=None, repr=False)
    _first: np.ndarray = field(default=None, repr=False)
    _tdepth: np.ndarray = field(default=None, repr=False)
    _table: np.ndarray = field(default=None, repr=False)
    _log: np.ndarray = field(default=None, repr=False)

    @classmethod
    def _build(cls, positions, terminal, edges, lengths, window=None, root=0, origin=None,
               depth=None, hops=None) -> "TreeNetwork":
        n = len(positions)
        t = cls(positions, terminal, edges, lengths, window, root=int(root))
        t.origin = np.arange(n, dtype=np.int64) if origin is None else np.asarray(origin, np.int64)
        indptr, indices, w = _csr(n, t.edges, t.lengths)
        d0 = 0.0 if depth is None else float(depth[root])
        h0 = 0 if hops is None else int(hops[root])
        parent, _, dep, hp, order = _orient(n, indptr, indices, w, t.root, d0, h0)
        if depth is not None:
            dep = np.asarray(depth, dtype=np.float64).copy()
            hp = np.asarray(hops, dtype=np.int64).copy()
        t.parent, t.depth, t.hops, t.order = parent, dep, hp, order
        t._indptr, t._indices = indptr, indices
        tour, first = _euler(n, indptr, indices, parent, t.root)
        tdepth = hp[tour]
        m = len(tour)
        levels = max(1, int(np.floor(np.log2(m))) + 1)
        dtype = np.int32 if m < 2**31 else np.int64
        table = np.zeros((levels, m), dtype=dtype)
        table[0] = np.arange(m, dtype=dtype)
        for k in range(1, levels):
            half = 1 << (k - 1)
            span = m - (1 << k) + 1
            a = table[k - 1, :span]
            b = table[k - 1, half:half + span]
            table[k, :span] = np.where(tdepth[a] <= tdepth[b], a, b)
        logt = np.zeros(m + 1, dtype=np.int64)
        if m > 1:
            logt[2:] = np.floor(np.log2(np.arange(2, m + 1))).astype(np.int64)
        t._tour, t._first, t._tdepth, t._table, t._log = tour, first, tdepth, table, logt
        return t

    @classmethod
    def from_parents(cls, positions, parent, terminal=None, window=None) -> "TreeNetwork":
        """Tree from a parent array (root has parent -1); lengths are Euclidean."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        parent = np.asarray(parent, dtype=np.int64)
        roots = np.flatnonzero(parent < 0)
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        child = np.flatnonzero(parent >= 0)
        edges = np.stack([child, parent[child]], axis=1)
        net = Network.from_edges(positions, edges, terminal, window)
        return validate_tree(net, root=int(roots[0]))

    # -- queries -----------------------------------------------------------

    def lca(self, u, v):
        us = np.atleast_1d(np.asarray(u, dtype=np.int64))
        vs = np.atleast_1d(np.asarray(v, dtype=np.int64))
        self._check_ids(us)
        self._check_ids(vs)
        out = _lca_many(us, vs, self._first, self._tour, self._tdepth, self._table, self._log)
        return out if np.ndim(u) or np.ndim(v) else int(out[0])

    def distance(self, u, v):
        """Tree path length between arbitrary vertices."""
        w = self.lca(u, v)
        return self.depth[u] + self.depth[v] - 2 * self.depth[w]

    def hop_distance(self, u, v):
        w = self.lca(u, v)
        return self.hops[u] + self.hops[v] - 2 * self.hops[w]

    def _check_ids(self, ids):
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_vertices):
            raise UnknownVertexError(f"vertex id out of range 0..{self.n_vertices - 1}")

    def local_ids(self, origin_ids) -> np.ndarray:
        """Map ids of the source object back to ids in this tree."""
        origin_ids = np.asarray(origin_ids, dtype=np.int64)
        srt = np.argsort(self.origin, kind="stable")
        pos = np.searchsorted(self.origin[srt], origin_ids)
        pos = np.clip(pos, 0, len(srt) - 1)
        found = self.origin[srt][pos] == origin_ids
        if not np.all(found):
            raise UnknownVertexError("ids not present in this tree")
        return srt[pos]

    @property
    def lca_arrays(self):
        return self._first, self._tour, self._tdepth, self._table, self._log

    @property
    def adjacency(self):
        return self._indptr, self._indices


def validate_tree(net: Network, root: int = 0, prune_steiner_leaves: bool = True) -> TreeNetwork:
    """Check acyclicity and connectivity, prune Steiner leaves, build LCA tables.

    Raises :class:`CycleFound` (with the edges of one cycle) or
    :class:`Disconnected` (with the component count).
    """
    n = net.n_vertices
    if n == 0:
        raise Disconnected(0)
    net.check()
    bad, comps = _first_cycle_edge(n, net.edges)
    if bad >= 0:
        raise CycleFound(_cycle_through(net, bad))
    if comps != 1:
        raise Disconnected(int(comps))
    positions, terminal, edges, lengths = net.positions, net.terminal, net.edges, net.lengths
    origin = np.arange(n, dtype=np.int64)
    if prune_steiner_leaves and not terminal.all() and terminal.any():
        keep = _prune_steiner(n, edges, terminal)
        if not keep.all():
            newid = np.cumsum(keep) - 1
            ekeep = keep[edges[:, 0]] & keep[edges[:, 1]]
            edges = newid[edges[ekeep]]
            lengths = lengths[ekeep]
            origin = np.flatnonzero(keep)
            positions, terminal = positions[keep], terminal[keep]
            root = int(newid[root]) if keep[root] else int(np.flatnonzero(terminal)[0])
    return TreeNetwork._build(positions, terminal, edges, lengths, net.window, root=root,
                              origin=origin)


def _prune_steiner(n, edges, terminal) -> np.ndarray:
    deg = np.bincount(edges.ravel(), minlength=n)
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    keep = np.ones(n, dtype=bool)
    queue = deque(int(v) for v in np.flatnonzero((deg <= 1) & ~terminal))
    while queue:
        v = queue.popleft()
        if not keep[v]:
            continue
        keep[v] = False
        for w in adj[v]:
            if keep[w]:
                deg[w] -= 1
                if deg[w] <= 1 and not terminal[w]:
                    queue.append(w)
    return keep


def _cycle_through(net: Network, bad: int) -> list:
    """Edges of the cycle closed by edge ``bad`` against the earlier edges."""
    u, v = (int(x) for x in net.edges[bad])
    adj: dict[int, list] = {}
    for idx in range(bad):
        a, b = (int(x) for x in net.edges[idx])
        adj.setdefault(a, []).append((b, idx))
        adj.setdefault(b, []).append((a, idx))
    prev = {u: (None, None)}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        if x == v:
            break
        for y, idx in adj.get(x, []):
            if y not in prev:
                prev[y] = (x, idx)
                queue.append(y)
    cyc = [tuple(net.edges[bad])]
    x = v
    while prev[x][0] is not None:
        p, idx = prev[x]
        cyc.append(tuple(net.edges[idx]))
        x = p
    return cyc


def _require_terminals(t: TreeNetwork, ids) -> np.ndarray:
    ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
    t._check_ids(ids)
    if not np.all(t.terminal[ids]):
        raise UnknownVertexError("route endpoints must be terminals")
    return ids


def route_length(t: TreeNetwork, u, v):
    """Length of the unique u-v path; vectorised over id arrays."""
    _require_terminals(t, u)
    _require_terminals(t, v)
    return t.distance(u, v)


def route_hops(t: TreeNetwork, u, v):
    _require_terminals(t, u)
    _require_terminals(t, v)
    return t.hop_distance(u, v)


def spanned_subtree(t: TreeNetwork, terminals) -> TreeNetwork:
    """Minimal subtree containing ``terminals``; other kept vertices become Steiner.

    Depth arrays are inherited from ``t`` so route lengths between retained
    terminals are bit-identical to those in ``t``.  ``origin`` holds ids in ``t``.
    """
    ids = np.unique(np.asarray(terminals, dtype=np.int64))
    if ids.size == 0:
        raise ValueError("terminal set is empty")
    _require_terminals(t, ids)
    n = t.n_vertices
    w = np.zeros(n)
    w[ids] = 1.0
    cnt = _subtree_sums(t.order, t.parent, w)
    total = float(len(ids))
    nonroot = t.parent >= 0
    edge_child = np.flatnonzero(nonroot & (cnt > 0) & (cnt < total))
    if edge_child.size == 0:
        kept = ids
    else:
        kept = np.unique(np.concatenate([edge_child, t.parent[edge_child]]))
    newid = np.full(n, -1, dtype=np.int64)
    newid[kept] = np.arange(len(kept))
    edges = np.stack([newid[edge_child], newid[t.parent[edge_child]]], axis=1)
    lengths = np.hypot(*(t.positions[edge_child] - t.positions[t.parent[edge_child]]).T)
    # top vertex: kept vertex whose parent edge is not kept
    has_up = np.zeros(n, dtype=bool)
    has_up[edge_child] = True
    top = kept[~has_up[kept]]
    assert len(top) == 1
    terminal = np.zeros(len(kept), dtype=bool)
    terminal[newid[ids]] = True
    return TreeNetwork._build(t.positions[kept], terminal, edges, lengths, t.window,
                              root=int(newid[top[0]]), origin=kept,
                              depth=t.depth[kept], hops=t.hops[kept])


def _weights(t: TreeNetwork, weights) -> np.ndarray:
    if weights is None:
        return t.terminal.astype(np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (t.n_vertices,):
        raise ValueError("weights must have one entry per vertex")
    return w


def max_branch_sizes(t: TreeNetwork, weights=None) -> np.ndarray:
    """For every vertex, the largest terminal count over the branches at it."""
    w = _weights(t, weights)
    sub = _subtree_sums(t.order, t.parent, w)
    total = sub[t.root]
    best_child = np.zeros(t.n_vertices)
    nonroot = np.flatnonzero(t.parent >= 0)
    np.maximum.at(best_child, t.parent[nonroot], sub[nonroot])
    return np.maximum(best_child, total - sub)


def centroid(t: TreeNetwork, weights=None) -> int:
    """Vertex minimising the largest branch terminal count (smallest id on ties)."""
    w = _weights(t, weights)
    if w.sum() <= 0:
        raise ValueError("tree has no weighted vertices")
    return int(np.argmin(max_branch_sizes(t, w)))


@dataclass
class Bipartition:
    centroid: int
    B: np.ndarray
    Bc: np.ndarray
    branches: list  # (neighbour of centroid, terminal count)
    chosen: list  # neighbours whose branches form B
    method: str

    @property
    def N(self) -> int:
        return len(self.B) + len(self.Bc)


def branch_labels(t: TreeNetwork, v: int) -> np.ndarray:
    """For every vertex, the neighbour of ``v`` heading its branch (-1 at ``v``)."""
    return _branch_labels(t.n_vertices, t._indptr, t._indices, int(v))


def bipartition(t: TreeNetwork, vstar: int, weights=None, exhaustive_limit: int = 20) -> Bipartition:
    """Union of whole branches at ``vstar`` holding between N/3 and N/2 terminals.

    Greedy merge in descending branch size; exhaustive subset search when
    greedy fails and there are at most ``exhaustive_limit`` branches.
    Terminals at ``vstar`` itself go to the complement.
    """
    w = _weights(t, weights) > 0
    label = branch_labels(t, vstar)
    members = np.flatnonzero(w)
    N = len(members)
    nbrs = t._indices[t._indptr[vstar]:t._indptr[vstar + 1]]
    lab_m = label[members]
    sizes = {int(b): 0 for b in nbrs}
    for b, c in zip(*np.unique(lab_m[lab_m >= 0], return_counts=True)):
        sizes[int(b)] = int(c)
    branches = sorted(sizes.items(), key=lambda kv: (-kv[1], kv[0]))
    lo, hi = N / 3, N / 2
    chosen, total = [], 0
    for b, c in branches:
        if total >= lo:
            break
        if c and total + c <= hi:
            chosen.append(b)
            total += c
    method = "greedy"
    if not (lo <= total <= hi):
        nonempty = [(b, c) for b, c in branches if c]
        if len(nonempty) > exhaustive_limit:
            raise BipartitionError([c for _, c in branches], N)
        best = None
        for r in range(1, len(nonempty) + 1):
            for combo in combinations(nonempty, r):
                s = sum(c for _, c in combo)
                if lo <= s <= hi and (best is None or s > best[0]):
                    best = (s, [b for b, _ in combo])
        if best is None:
            raise BipartitionError([c for _, c in branches], N)
        total, chosen = best
        method = "exhaustive"
    in_b = np.isin(lab_m, np.asarray(chosen, dtype=np.int64))
    return Bipartition(int(vstar), members[in_b], members[~in_b], branches, sorted(chosen), method)


# ---------------------------------------------------------------------------
# serialisation


def save_network_csv(net: Network, vertex_path, edge_path) -> None:
    with open(vertex_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "kind"])
        for i, ((x, y), term) in enumerate(zip(net.positions, net.terminal)):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", "terminal" if term else "steiner"])
    with open(edge_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "length"])
        for (a, b), ln in zip(net.edges, net.lengths):
            w.writerow([int(a), int(b), f"{ln:.17g}"])


def load_network_csv(vertex_path, edge_path, window: Window | None = None) -> Network:
    with open(vertex_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["id"]))
    pos = np.array([(float(r["x"]), float(r["y"])) for r in rows]).reshape(-1, 2)
    term = np.array([r["kind"] == "terminal" for r in rows], dtype=bool)
    with open(edge_path, newline="") as fh:
        erows = list(csv.DictReader(fh))
    edges = np.array([(int(r["u"]), int(r["v"])) for r in erows], dtype=np.int64).reshape(-1, 2)
    lengths = np.array([float(r["length"]) for r in erows])
    return Network(pos, term, edges, lengths, window)
