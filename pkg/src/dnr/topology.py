"""Spanning-tree machinery: radiality check, random trees, counting, loops."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .network import NetworkCase


class TopologyError(ValueError):
    pass


class DisjointSet:
    """Union-find over 1..n with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n + 1))
        self.size = [1] * (n + 1)
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of *a* and *b*; False if they were already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


@dataclass(frozen=True)
class Configuration:
    """A switch state: the closed branch set and its open complement."""

    closed: frozenset[int]
    open: frozenset[int]

    @classmethod
    def from_closed(cls, case: NetworkCase, closed) -> Configuration:
        closed = frozenset(closed)
        _check_ids(case, closed)
        if len(closed) != case.tree_size:
            raise TopologyError(f"a configuration closes exactly {case.tree_size} branches, got {len(closed)}")
        return cls(closed, frozenset(range(1, case.n_branches + 1)) - closed)

    @classmethod
    def from_open(cls, case: NetworkCase, open_ids) -> Configuration:
        open_ids = frozenset(open_ids)
        _check_ids(case, open_ids)
        return cls.from_closed(case, frozenset(range(1, case.n_branches + 1)) - open_ids)

    @property
    def open_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.open))


def base_configuration(case: NetworkCase) -> Configuration:
    """All tie branches open."""
    return Configuration.from_closed(case, case.base_closed)


def _check_ids(case: NetworkCase, ids) -> None:
    n = case.n_branches
    bad = sorted(i for i in ids if not (isinstance(i, int) and 1 <= i <= n))
    if bad:
        raise TopologyError(f"unknown branch id(s): {', '.join(map(str, bad))}")


def tree_defect(case: NetworkCase, closed) -> str | None:
    """Describe why *closed* is not a spanning tree, or None if it is one.

    Islands are reported before loops; both are named when present.
    """
    closed = set(closed)
    _check_ids(case, closed)
    dsu = DisjointSet(case.n_nodes)
    loop_branches = []
    for bid in sorted(closed):
        b = case.branches[bid - 1]
        if not dsu.union(b.from_node, b.to_node):
            loop_branches.append(case.branches[bid - 1].original)
    problems = []
    if dsu.components != 1:
        root = dsu.find(case.substation_id)
        cut_off = sorted(n.original for n in case.nodes if dsu.find(n.id) != root)
        shown = ", ".join(map(str, cut_off[:10])) + (", ..." if len(cut_off) > 10 else "")
        problems.append(f"island: {len(cut_off)} node(s) cut off from the substation ({shown})")
    if loop_branches:
        problems.append(f"cycle: {len(loop_branches)} loop(s) closed (via branch {', '.join(map(str, loop_branches))})")
    if not problems and len(closed) != case.tree_size:
        problems.append(f"closes {len(closed)} branches, a radial configuration closes {case.tree_size}")
    return "; ".join(problems) or None


def is_spanning_tree(case: NetworkCase, closed) -> bool:
    """True iff the closed branches connect all nodes without a loop."""
    if len(closed) != case.tree_size:
        _check_ids(case, closed)
        return False
    branches = case.branches
    n_branches = len(branches)
    dsu = DisjointSet(case.n_nodes)
    for bid in closed:
        if not (isinstance(bid, int) and 1 <= bid <= n_branches):
            raise TopologyError(f"unknown branch id: {bid}")
        b = branches[bid - 1]
        if not dsu.union(b.from_node, b.to_node):
            return False
    # V-1 successful unions always leave a single component
    return True


def random_spanning_tree(case: NetworkCase, rng) -> Configuration:
    """Randomized Kruskal: shuffle all branches, keep those that join components.

    Not uniform over trees, but every spanning tree can be produced.
    *rng* is a :class:`numpy.random.Generator`.
    """
    order = rng.permutation(case.n_branches) + 1
    dsu = DisjointSet(case.n_nodes)
    closed = []
    for bid in order:
        b = case.branches[bid - 1]
        if dsu.union(b.from_node, b.to_node):
            closed.append(int(bid))
            if len(closed) == case.tree_size:
                break
    if len(closed) != case.tree_size:
        raise TopologyError("network is disconnected")
    return Configuration.from_closed(case, closed)


def bareiss_determinant(matrix: list[list[int]]) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    a = [list(row) for row in matrix]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            pivot = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if pivot is None:
                return 0
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def laplacian(case: NetworkCase) -> list[list[int]]:
    n = case.n_nodes
    lap = [[0] * n for _ in range(n)]
    for b in case.branches:
        i, j = b.from_node - 1, b.to_node - 1
        lap[i][i] += 1
        lap[j][j] += 1
        lap[i][j] -= 1
        lap[j][i] -= 1
    return lap


def count_spanning_trees(case: NetworkCase) -> int:
    """Number of spanning trees (matrix-tree theorem, exact integers).

    Parallel branches count as distinct edges.
    """
    lap = laplacian(case)
    minor = [row[1:] for row in lap[1:]]
    return bareiss_determinant(minor)


def tree_path(case: NetworkCase, closed, start: int, end: int) -> list[int]:
    """Branch ids on the unique path between two nodes of a tree."""
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(1, case.n_nodes + 1)}
    for bid in closed:
        b = case.branches[bid - 1]
        adj[b.from_node].append((b.to_node, bid))
        adj[b.to_node].append((b.from_node, bid))
    via: dict[int, tuple[int, int] | None] = {start: None}
    queue = deque([start])
    while queue and end not in via:
        node = queue.popleft()
        for nxt, bid in adj[node]:
            if nxt not in via:
                via[nxt] = (node, bid)
                queue.append(nxt)
    if end not in via:
        raise TopologyError(f"nodes {start} and {end} are not connected")
    path = []
    node = end
    while via[node] is not None:
        node, bid = via[node]
        path.append(bid)
    return path[::-1]


def fundamental_loops(case: NetworkCase) -> list[frozenset[int]]:
    """One loop per tie branch: the tie plus the tree path between its ends."""
    base = case.base_closed
    if not is_spanning_tree(case, base):
        raise TopologyError("non-tie branches do not form a spanning tree")
    loops = []
    for tie in sorted(case.tie_ids):
        b = case.branches[tie - 1]
        loops.append(frozenset(tree_path(case, base, b.from_node, b.to_node)) | {tie})
    return loops
