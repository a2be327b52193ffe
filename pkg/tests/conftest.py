import numpy as np
import pytest

from treeroute.geometry import PointSet, Window


def random_points(n, side=10.0, seed=0):
    rng = np.random.default_rng(seed)
    return PointSet(rng.random((n, 2)) * side, Window(0.0, 0.0, side))


def bfs_route(net, u, v):
    """Path length between u and v in a tree by breadth-first search."""
    adj = {}
    for (a, b), w in zip(net.edges, net.lengths):
        adj.setdefault(int(a), []).append((int(b), w))
        adj.setdefault(int(b), []).append((int(a), w))
    dist = {int(u): 0.0}
    hops = {int(u): 0}
    stack = [int(u)]
    while stack:
        x = stack.pop()
        for y, w in adj.get(x, []):
            if y not in dist:
                dist[y] = dist[x] + w
                hops[y] = hops[x] + 1
                stack.append(y)
    return dist[int(v)], hops[int(v)]


def random_tree(n, seed=0):
    """Random recursive tree on uniform points (parent uniform among earlier ids)."""
    from treeroute.network import TreeNetwork

    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2)) * 10
    parent = np.full(n, -1)
    for i in range(1, n):
        parent[i] = rng.integers(0, i)
    return TreeNetwork.from_parents(pos, parent, window=Window(0.0, 0.0, 10.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail, seconds, budget):
    within = budget is None or seconds < budget
    status = "PASS" if ok and within else "FAIL"
    limit = "" if budget is None else f" / budget {budget:.0f}s"
    line = f"criterion {number:>2}: {status}  {detail}  [{seconds:.1f}s{limit}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok and within


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
