"""Rooted trees, their matchings, and the component registry of Stage 1."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field

from .board import Board, Edge, Params, edge, iter_bits


class TreeError(ValueError):
    pass


class AugTree:
    """Rooted tree with explicit depths and a maintained leaf set.

    Trees only ever grow by hanging a new vertex under an existing node,
    so depths are assigned on insertion and never recomputed.
    """

    def __init__(self, root: int) -> None:
        self.root = root
        self.parent: dict[int, int | None] = {root: None}
        self.children: dict[int, list[int]] = {root: []}
        self.depth: dict[int, int] = {root: 0}
        self.leaves: set[int] = {root}

    @classmethod
    def from_edges(cls, root: int, edges: Iterable[Edge]) -> AugTree:
        adj: dict[int, list[int]] = {root: []}
        n_edges = 0
        for u, v in edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
            n_edges += 1
        if n_edges != len(adj) - 1:
            raise TreeError(f"{len(adj)} vertices with {n_edges} edges is not a tree")
        t = cls(root)
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in sorted(adj[x]):
                if y == t.parent[x]:
                    continue
                if y in t.depth:
                    raise TreeError(f"cycle through edge {edge(x, y)}")
                t.add_child(x, y)
                queue.append(y)
        if len(t.depth) != len(adj):
            raise TreeError("edge list is disconnected")
        return t

    def add_child(self, parent: int, child: int) -> None:
        if parent not in self.depth:
            raise TreeError(f"{parent} is not in the tree")
        if child in self.depth:
            raise TreeError(f"{child} is already in the tree")
        self.parent[child] = parent
        self.children[child] = []
        self.children[parent].append(child)
        self.depth[child] = self.depth[parent] + 1
        self.leaves.discard(parent)
        self.leaves.add(child)

    @property
    def nodes(self) -> list[int]:
        return list(self.depth)

    def __len__(self) -> int:
        return len(self.depth)

    def __contains__(self, v: int) -> bool:
        return v in self.depth

    def edges(self) -> list[Edge]:
        return sorted(edge(v, p) for v, p in self.parent.items() if p is not None)

    def degree(self, v: int) -> int:
        return len(self.children[v]) + (self.parent[v] is not None)

    def max_degree(self) -> int:
        return max(self.degree(v) for v in self.depth)

    def path_to_root(self, x: int) -> list[int]:
        path = [x]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path

    def adjacency(self) -> dict[int, list[int]]:
        adj = {v: [] for v in sorted(self.depth)}
        for u, v in self.edges():
            adj[u].append(v)
            adj[v].append(u)
        return adj


@dataclass
class MatchableTree:
    root: int
    vertices: frozenset[int]
    edges: list[Edge]
    matching: list[Edge]

    def verify(self) -> bool:
        return _is_perfect_matching_of(self.vertices, self.edges, self.matching)


def _is_perfect_matching_of(vertices: Iterable[int], edges: Iterable[Edge], matching: Iterable[Edge]) -> bool:
    vs = set(vertices)
    es = {edge(*e) for e in edges}
    covered: set[int] = set()
    for u, v in matching:
        if edge(u, v) not in es or u in covered or v in covered:
            return False
        covered.update((u, v))
    return covered == vs


def is_augmenting(t: AugTree) -> bool:
    """Every odd-depth node has exactly one child, and every leaf is at even depth."""
    for v, d in t.depth.items():
        if d % 2 == 1 and len(t.children[v]) != 1:
            return False
    return all(t.depth[x] % 2 == 0 for x in t.leaves)


def canonical_matching(t: AugTree) -> set[Edge]:
    """The matching of an augmenting tree that covers every vertex but the root."""
    if not is_augmenting(t):
        raise TreeError("tree is not augmenting")
    return {edge(v, t.children[v][0]) for v, d in t.depth.items() if d % 2 == 1}


def leaf_swap_matching(t: AugTree, x: int) -> set[Edge]:
    """Toggle the root-to-``x`` path against the canonical matching.

    The result covers every vertex of ``t`` except the leaf ``x``.
    """
    if x not in t.leaves or x not in t:
        raise TreeError(f"{x} is not a leaf of the tree")
    path = t.path_to_root(x)
    path_edges = {edge(a, b) for a, b in zip(path, path[1:])}
    return canonical_matching(t) ^ path_edges


def tree_perfect_matching(vertices: Iterable[int], edges: Iterable[Edge]) -> list[Edge] | None:
    """Perfect matching of a tree, or None if it has none.

    A leaf can only be matched to its neighbour, so peeling leaves is exact.
    """
    vs = set(vertices)
    adj: dict[int, set[int]] = {v: set() for v in vs}
    n_edges = 0
    for u, v in edges:
        if u not in adj or v not in adj:
            raise TreeError(f"edge {(u, v)} leaves the vertex set")
        adj[u].add(v)
        adj[v].add(u)
        n_edges += 1
    if n_edges != len(vs) - 1 or not _connected(adj):
        raise TreeError("input is not a tree")
    if len(vs) % 2:
        return None
    matching = []
    queue = deque(sorted(v for v in vs if len(adj[v]) <= 1))
    alive = set(vs)
    while queue:
        x = queue.popleft()
        if x not in alive:
            continue
        if not adj[x]:
            return None
        (y,) = adj[x]
        matching.append(edge(x, y))
        alive -= {x, y}
        for z in adj[y] - {x}:
            adj[z].discard(y)
            if len(adj[z]) <= 1 and z in alive:
                queue.append(z)
        adj[y].clear()
        adj[x].clear()
    return sorted(matching) if not alive else None


def _connected(adj: dict[int, set[int]]) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(adj)


def is_matchable_tree(vertices: Iterable[int], edges: Iterable[Edge]) -> bool:
    return tree_perfect_matching(vertices, edges) is not None


def tau(board: Board, S: set[int] | frozenset[int], params: Params) -> int:
    """Number of troublesome vertices in the vertex set ``S``."""
    if not isinstance(S, (set, frozenset)):
        raise TypeError(f"tau takes a set of vertices, not {type(S).__name__}")
    thr = params.troublesome_threshold
    return sum(1 for v in S if board.dB[v] > thr)


def is_small(vertices: Iterable[int], board: Board, params: Params) -> bool:
    vs = set(vertices)
    return len(vs) < 4 * (tau(board, vs, params) + params.ell)


def is_nice(t: AugTree, board: Board, params: Params) -> bool:
    """Augmenting, exactly ell leaves (none troublesome), max degree 3, and
    every non-troublesome internal node at even depth has two children."""
    if not is_augmenting(t) or len(t.leaves) != params.ell or t.max_degree() > 3:
        return False
    thr = params.troublesome_threshold
    if any(board.dB[x] > thr for x in t.leaves):
        return False
    for v, d in t.depth.items():
        if d % 2 == 0 and v not in t.leaves and board.dB[v] <= thr and len(t.children[v]) != 2:
            return False
    return True


@dataclass
class ComponentRegistry:
    """Maker's Stage-1 world.

    Vertices are split between the matching ``partner``, the singleton
    bitset, the augmenting trees (keyed by root) and the matchable trees.
    A singleton counts as an augmenting tree whose root is also its leaf.
    """

    n: int
    partner: dict[int, int] = field(default_factory=dict)
    singles: int = 0
    aug_trees: dict[int, AugTree] = field(default_factory=dict)
    matchable: list[MatchableTree] = field(default_factory=list)

    @classmethod
    def fresh(cls, n: int) -> ComponentRegistry:
        return cls(n=n, singles=(1 << n) - 1)

    @property
    def p(self) -> int:
        return self.singles.bit_count() + len(self.aug_trees)

    @property
    def q(self) -> int:
        return len(self.matchable)

    def matching_edges(self) -> list[Edge]:
        return sorted(edge(u, v) for u, v in self.partner.items() if u < v)

    def singletons(self) -> list[int]:
        return list(iter_bits(self.singles))

    def check(self, board: Board | None = None) -> list[str]:
        """Partition and edge-ownership audit; returns the list of violations."""
        problems = []
        owner: dict[int, str] = {}

        def put(v: int, fam: str) -> None:
            if v in owner:
                problems.append(f"vertex {v} in both {owner[v]} and {fam}")
            else:
                owner[v] = fam

        for u, v in self.partner.items():
            if self.partner.get(v) != u:
                problems.append(f"matching partner of {u} is not symmetric")
            put(u, "M")
        for v in iter_bits(self.singles):
            put(v, "singletons")
        container_edges: list[Edge] = list(self.matching_edges())
        for rid, t in self.aug_trees.items():
            if t.root != rid:
                problems.append(f"tree keyed {rid} has root {t.root}")
            for v in t.nodes:
                put(v, f"tree {rid}")
            container_edges.extend(t.edges())
        for i, mt in enumerate(self.matchable):
            for v in mt.vertices:
                put(v, f"matchable {i}")
            container_edges.extend(mt.edges)
            if not mt.verify():
                problems.append(f"matchable tree {mt.root} stores an invalid perfect matching")
        if len(owner) != self.n:
            missing = sorted(set(range(self.n)) - set(owner))
            problems.append(f"vertices in no family: {missing[:10]}")
        if len(set(container_edges)) != len(container_edges):
            problems.append("an edge sits in two containers")
        if board is not None:
            maker = set(board.maker_edges())
            contained = set(container_edges)
            if maker != contained:
                extra = sorted(maker - contained)[:5]
                absent = sorted(contained - maker)[:5]
                problems.append(f"Maker edges outside containers {extra}; container edges not Maker-owned {absent}")
        return problems
