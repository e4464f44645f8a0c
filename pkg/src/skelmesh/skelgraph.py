"""Skeleton graphs and morphometry.

A skeleton graph carries ball positions and radii on its nodes and Euclidean
distances on its edges. Neuron length is the weight of the longest simple
path, found by an exact visited-marking depth-first search with a visit
budget; branches peel off the trunk one longest simple path at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExceededError,
    DanglingParentError,
    DuplicateNodeError,
    EmptyInputError,
    ParameterError,
    ParseError,
    ShapeMismatchError,
)
from .skeleton import Skeleton

__all__ = [
    "SkeletonGraph",
    "PathResult",
    "BranchSet",
    "from_mesh",
    "longest_simple_path_from",
    "neuron_length",
    "branches",
    "len_pct",
    "num_pct",
    "load_swc",
]

DEFAULT_BUDGET = 5_000_000


@dataclass(frozen=True)
class SkeletonGraph:
    """Weighted undirected graph over skeleton balls.

    ``positions`` (n, 3), ``radii`` (n,), and ``edges`` as (i, j, weight)
    with i < j; the weight always equals the Euclidean distance between the
    endpoint positions.
    """

    positions: np.ndarray
    radii: np.ndarray
    edges: tuple = ()

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        rad = np.ascontiguousarray(self.radii, dtype=np.float64).reshape(-1)
        if pos.shape[0] != rad.shape[0]:
            raise ShapeMismatchError("positions and radii disagree in length")
        n = pos.shape[0]
        seen = set()
        norm_edges = []
        for i, j, *rest in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ParameterError(f"edge ({i}, {j}) outside node range")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise ParameterError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            w = float(np.linalg.norm(pos[a] - pos[b]))
            if rest and abs(rest[0] - w) > 1e-6:
                raise ParameterError(
                    f"edge ({a}, {b}) weight {rest[0]} does not match distance {w}")
            if w <= 0:
                raise ParameterError(f"edge ({a}, {b}) has zero length")
            norm_edges.append((a, b, w))
        norm_edges.sort()
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "radii", rad)
        object.__setattr__(self, "edges", tuple(norm_edges))

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency_list(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n_nodes)]
        for i, j, w in self.edges:
            adj[i].append((j, w))
            adj[j].append((i, w))
        for row in adj:
            row.sort()
        return adj

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    def components(self) -> list[list[int]]:
        adj = self.adjacency_list()
        seen = np.zeros(self.n_nodes, dtype=bool)
        out = []
        for s in range(self.n_nodes):
            if seen[s]:
                continue
            comp = [s]
            seen[s] = True
            stack = [s]
            while stack:
                u = stack.pop()
                for v, _ in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        comp.append(v)
                        stack.append(v)
            out.append(sorted(comp))
        return out


@dataclass(frozen=True)
class PathResult:
    """A simple path: total weight, node sequence, and exactness flag."""

    length: float
    nodes: tuple
    exact: bool = True

    def validate(self, g: SkeletonGraph) -> None:
        """Re-check the invariants against the graph; raises on violation."""
        nodes = list(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ParameterError("path repeats a node")
        weights = {(i, j): w for i, j, w in g.edges}
        total = 0.0
        for a, b in zip(nodes, nodes[1:]):
            key = (a, b) if a < b else (b, a)
            if key not in weights:
                raise ParameterError(f"path uses missing edge ({a}, {b})")
            total += weights[key]
        if abs(total - self.length) > 1e-6:
            raise ParameterError("path length does not match edge weights")


@dataclass(frozen=True)
class BranchSet:
    trunk: PathResult
    branches: tuple

    @property
    def count(self) -> int:
        return len(self.branches)


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def spend(self) -> bool:
        self.left -= 1
        return self.left >= 0


def from_mesh(skel: Skeleton, adjacency: np.ndarray) -> SkeletonGraph:
    """Build the weighted graph from balls and a symmetric adjacency."""
    adjacency = np.asarray(adjacency, dtype=bool)
    n = len(skel)
    if adjacency.shape != (n, n):
        raise ShapeMismatchError("adjacency does not match ball count")
    if not (adjacency == adjacency.T).all():
        raise ParameterError("adjacency must be symmetric")
    iu, ju = np.triu_indices(n, k=1)
    edges = [(int(i), int(j)) for i, j in zip(iu, ju) if adjacency[i, j]]
    return SkeletonGraph(skel.centers, skel.radii, tuple(edges))


def _search_longest(adj, start: int, blocked: np.ndarray, budget: _Budget):
    """Exact longest-simple-path search from ``start``.

    Visited marking with unmark-on-return, exactly the recursive scheme but
    on an explicit stack so deep paths cannot overflow. Ties between
    equal-length paths break toward the lexicographically smallest node
    sequence. Raises BudgetExceededError carrying the best found so far.
    """
    visited = blocked.copy()
    visited[start] = True
    if not budget.spend():
        raise BudgetExceededError(
            "visit budget exhausted", best=PathResult(0.0, (start,), exact=False))
    best_len, best_path = 0.0, [start]
    path = [start]
    stack = [(start, 0.0, iter(adj[start]))]
    try:
        while stack:
            node, clen, neighbors = stack[-1]
            advanced = False
            for nb, w in neighbors:
                if visited[nb]:
                    continue
                visited[nb] = True
                if not budget.spend():
                    raise BudgetExceededError(
                        "visit budget exhausted",
                        best=PathResult(best_len, tuple(best_path), exact=False))
                path.append(nb)
                nlen = clen + w
                if nlen > best_len or (nlen == best_len and path < best_path):
                    best_len, best_path = nlen, path.copy()
                stack.append((nb, nlen, iter(adj[nb])))
                advanced = True
                break
            if not advanced:
                stack.pop()
                visited[node] = False
                path.pop()
    finally:
        pass
    return best_len, best_path


def longest_simple_path_from(g: SkeletonGraph, start: int,
                             budget: int = DEFAULT_BUDGET) -> PathResult:
    """Longest simple path from one node; exact within the visit budget."""
    if not 0 <= start < g.n_nodes:
        raise ParameterError(f"node {start} outside graph")
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    adj = g.adjacency_list()
    blocked = np.zeros(g.n_nodes, dtype=bool)
    length, nodes = _search_longest(adj, start, blocked, _Budget(budget))
    return PathResult(length, tuple(nodes))


def neuron_length(g: SkeletonGraph, budget: int = DEFAULT_BUDGET) -> tuple[float, PathResult]:
    """Maximum-weight simple path over all start nodes.

    Disconnected graphs are handled per component with the maximum reported.
    The visit budget is shared across all starts; exhaustion raises
    BudgetExceededError carrying the best (non-exact) result.
    """
    if g.n_nodes == 0:
        raise EmptyInputError("empty graph")
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    adj = g.adjacency_list()
    shared = _Budget(budget)
    blocked = np.zeros(g.n_nodes, dtype=bool)
    best_len, best_path = -1.0, None
    for start in range(g.n_nodes):
        try:
            length, nodes = _search_longest(adj, start, blocked, shared)
        except BudgetExceededError as exc:
            cand = exc.best
            if cand.length > best_len or (
                cand.length == best_len and list(cand.nodes) < list(best_path)
            ):
                best_len, best_path = cand.length, list(cand.nodes)
            raise BudgetExceededError(
                "visit budget exhausted",
                best=PathResult(best_len, tuple(best_path), exact=False)) from None
        if length > best_len or (length == best_len and nodes < best_path):
            best_len, best_path = length, nodes
    result = PathResult(best_len, tuple(best_path))
    return best_len, result


def branches(g: SkeletonGraph, min_branch_len: float | None = None,
             budget: int = DEFAULT_BUDGET) -> BranchSet:
    """Trunk plus side branches.

    The trunk is the longest simple path. Branches are peeled off greedily:
    each round finds, over all trunk nodes, the longest simple path that
    avoids every other trunk node and every node already claimed by a
    branch; rounds stop when the best candidate drops below
    ``min_branch_len`` (default: twice the median edge weight).
    """
    _, trunk = neuron_length(g, budget)
    if min_branch_len is None:
        weights = [w for _, _, w in g.edges]
        min_branch_len = 2.0 * float(np.median(weights)) if weights else 0.0
    adj = g.adjacency_list()
    shared = _Budget(budget)
    claimed = np.zeros(g.n_nodes, dtype=bool)
    claimed[list(trunk.nodes)] = True
    found: list[PathResult] = []
    while True:
        best = None
        for start in trunk.nodes:
            blocked = claimed.copy()
            blocked[start] = False
            try:
                length, nodes = _search_longest(adj, start, blocked, shared)
            except BudgetExceededError:
                raise BudgetExceededError(
                    "visit budget exhausted during branch extraction",
                    best=BranchSet(trunk, tuple(found))) from None
            if len(nodes) < 2 or length < min_branch_len:
                continue
            if best is None or length > best[0] or (length == best[0] and nodes < best[1]):
                best = (length, nodes)
        if best is None:
            break
        found.append(PathResult(best[0], tuple(best[1])))
        claimed[list(best[1])] = True
    return BranchSet(trunk, tuple(found))


def len_pct(computed: float, reference: float) -> float:
    """Relative length error |computed - reference| / reference."""
    if reference <= 0:
        raise ParameterError("reference length must be positive")
    return abs(computed - reference) / reference


def num_pct(computed: int, reference: int) -> float:
    """Relative branch-count error |computed - reference| / reference."""
    if reference <= 0:
        raise ParameterError("reference count must be positive")
    return abs(computed - reference) / reference


def load_swc(path) -> SkeletonGraph:
    """Read an SWC skeleton: 'id type x y z radius parent' per line.

    Multiple roots (parent -1) produce a forest. Duplicate ids and parents
    that never appear raise dedicated errors.
    """
    ids: dict[int, int] = {}
    rows: list[tuple[int, float, float, float, float, int]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 7:
                raise ParseError(f"expected 7 fields, got {len(parts)}", line=lineno)
            try:
                nid = int(parts[0])
                x, y, z, radius = (float(v) for v in parts[2:6])
                parent = int(parts[6])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if nid in ids:
                raise DuplicateNodeError(f"duplicate node id {nid} at line {lineno}")
            ids[nid] = len(rows)
            rows.append((nid, x, y, z, radius, parent))
    if not rows:
        raise EmptyInputError(f"{path} contains no samples")
    positions = np.array([[x, y, z] for _, x, y, z, _, _ in rows])
    radii = np.array([r for _, _, _, _, r, _ in rows])
    edges = []
    for _, row in enumerate(rows):
        nid, _, _, _, _, parent = row
        if parent == -1:
            continue
        if parent not in ids:
            raise DanglingParentError(f"node {nid} references missing parent {parent}")
        edges.append((ids[nid], ids[parent]))
    return SkeletonGraph(positions, radii, tuple(edges))
