"""Maker's second stage: a Hamilton cycle on the auxiliary multigraph of nice trees.

Every nice tree becomes one auxiliary vertex; the multiplicity between two
auxiliary vertices is the number of unclaimed board edges between their
leaf sets. Phase 1 gives every vertex ``stage2_outdeg`` random out-edges,
always serving the most endangered vertex first. Phase 2 grows a path by
extension and Posa rotations and closes it into a cycle. Alternate edges of
the final Hamilton cycle touch exactly one leaf of every nice tree.
"""

from __future__ import annotations

import random
from collections import deque
from collections.abc import Iterator, Mapping, Sequence, Collection
from dataclasses import dataclass, field
from typing import Any

from .board import Board, ClaimState, Edge, Params, edge, iter_bits, mask_of
from .game import Claim

PHASE1_ISOLATED = "PHASE1_ISOLATED"
PHASE2_STUCK = "PHASE2_STUCK"
CYCLE_NOT_HAMILTONIAN = "CYCLE_NOT_HAMILTONIAN"
BUDGET_EXCEEDED = "BUDGET_EXCEEDED"


class Concession(Exception):
    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class AuxMultigraph:
    """Multigraph over nice trees, kept in step with the live board."""

    def __init__(self, board: Board, leaf_sets: Sequence[Collection[int]], roots: Sequence[int] | None = None) -> None:
        p = len(leaf_sets)
        self.p = p
        self.leaf_sets = [sorted(s) for s in leaf_sets]
        self.roots = list(roots) if roots is not None else list(range(p))
        self.leaf_masks = [mask_of(s) for s in self.leaf_sets]
        self.owner: dict[int, int] = {}
        for i, s in enumerate(self.leaf_sets):
            for x in s:
                if x in self.owner:
                    raise ValueError(f"vertex {x} is a leaf of two trees")
                self.owner[x] = i
        self.mult = [[0] * p for _ in range(p)]
        self.base_claimed = [[0] * p for _ in range(p)]
        for i in range(p):
            for j in range(i + 1, p):
                m = self._count_unclaimed(board, i, j)
                self.mult[i][j] = self.mult[j][i] = m
                pre = len(self.leaf_sets[i]) * len(self.leaf_sets[j]) - m
                self.base_claimed[i][j] = self.base_claimed[j][i] = pre
        self.dB = [0] * p
        self.dM = [0] * p
        self.out_deg = [0] * p
        self.maker_adj: list[set[int]] = [set() for _ in range(p)]
        self.maker_board_edges: dict[tuple[int, int], list[Edge]] = {}
        self.orientation: list[tuple[int, int, Edge]] = []
        self._orient: dict[Edge, int] = {}
        self._seen = len(board.history)

    def _count_unclaimed(self, board: Board, i: int, j: int) -> int:
        mj = self.leaf_masks[j]
        return sum((board.unclaimed_mask(a) & mj).bit_count() for a in self.leaf_sets[i])

    def fresh_mult(self, board: Board, i: int, j: int) -> int:
        return 0 if i == j else self._count_unclaimed(board, i, j)

    def degree(self, i: int) -> int:
        return sum(self.mult[i])

    def unclaimed_edges(self, board: Board, i: int, j: int) -> list[Edge]:
        mj = self.leaf_masks[j]
        out = [edge(a, w) for a in self.leaf_sets[i] for w in iter_bits(board.unclaimed_mask(a) & mj)]
        out.sort()
        return out

    def maker_multiplicity(self, i: int, j: int) -> int:
        return len(self.maker_board_edges.get((min(i, j), max(i, j)), ()))

    def maker_edge(self, i: int, j: int) -> Edge:
        return self.maker_board_edges[(min(i, j), max(i, j))][0]

    def orient(self, e: Edge, tail: int) -> None:
        """Record that Maker's upcoming claim of ``e`` leaves auxiliary vertex ``tail``."""
        self._orient[edge(*e)] = tail

    def sync(self, board: Board) -> None:
        hist = board.history
        owner = self.owner
        for k in range(self._seen, len(hist)):
            u, v, who = hist[k]
            i = owner.get(u)
            j = owner.get(v)
            if i is None or j is None or i == j:
                continue
            self.mult[i][j] -= 1
            self.mult[j][i] -= 1
            if who is ClaimState.BREAKER:
                self.dB[i] += 1
                self.dB[j] += 1
            else:
                self.dM[i] += 1
                self.dM[j] += 1
                self.maker_adj[i].add(j)
                self.maker_adj[j].add(i)
                self.maker_board_edges.setdefault((min(i, j), max(i, j)), []).append((u, v))
                tail = self._orient.pop((u, v), None)
                if tail is not None:
                    self.out_deg[tail] += 1
                    self.orientation.append((tail, j if tail == i else i, (u, v)))
        self._seen = len(hist)

    def snapshot_adjacency(self) -> list[set[int]]:
        return [set(s) for s in self.maker_adj]


def build_aux(s1: Any, board: Board, params: Params) -> tuple[AuxMultigraph, dict[str, Any]]:
    """Auxiliary multigraph for the nice trees of a Stage-1 output, plus diagnostics."""
    aux = AuxMultigraph(board, s1.leaf_sets(), [t.root for t in s1.nice_trees])
    thr = params.troublesome_threshold
    warnings = [f"leaf {x} is troublesome at build time" for s in aux.leaf_sets for x in s if board.dB[x] > thr]
    degrees = [aux.degree(i) for i in range(aux.p)]
    ell = params.ell
    expected = ell * ell * (aux.p - 1) - ell * thr
    diag = {
        "p": aux.p,
        "min_degree": min(degrees) if degrees else 0,
        "min_degree_floor": expected,
        "min_degree_ok": (min(degrees) if degrees else 0) >= expected,
        "warnings": warnings,
    }
    return aux, diag


def danger(aux: AuxMultigraph, v: int, b: int) -> int:
    return aux.dB[v] - 2 * b * aux.out_deg[v]


def select_phase1_vertex(aux: AuxMultigraph, b: int, target: int) -> int | None:
    """Most endangered vertex still below the out-degree target (lowest id on ties)."""
    best = None
    best_danger = 0
    for i in range(aux.p):
        if aux.out_deg[i] >= target:
            continue
        d = danger(aux, i, b)
        if best is None or d > best_danger:
            best, best_danger = i, d
    return best


def sample_incident_edge(aux: AuxMultigraph, board: Board, v: int, rng: random.Random) -> tuple[int, Edge] | None:
    """Uniform draw over the unclaimed board edges leaving ``v``'s leaf set
    towards the other leaf sets."""
    row = aux.mult[v]
    total = sum(row)
    if total == 0:
        return None
    r = rng.randrange(total)
    for j, m in enumerate(row):
        if j == v or m == 0:
            continue
        if r < m:
            edges = aux.unclaimed_edges(board, v, j)
            if len(edges) != m:
                raise AssertionError(f"multiplicity drift between {v} and {j}: {m} != {len(edges)}")
            return j, edges[r]
        r -= m
    raise AssertionError("unreachable: multiplicities do not sum to the total")


@dataclass
class Phase1Choice:
    tail: int
    head: int
    edge: Edge
    danger: int


def phase1_step(aux: AuxMultigraph, board: Board, rng: random.Random, b: int, target: int = 10) -> Phase1Choice | None:
    """Pick the next Phase-1 edge, or None once every out-degree reached ``target``.

    Raises :class:`Concession` if the chosen vertex has no unclaimed edge.
    """
    v = select_phase1_vertex(aux, b, target)
    if v is None:
        return None
    drawn = sample_incident_edge(aux, board, v, rng)
    if drawn is None:
        raise Concession(PHASE1_ISOLATED, f"auxiliary vertex {v} has no unclaimed incident edge")
    j, e = drawn
    aux.orient(e, v)
    return Phase1Choice(v, j, e, danger(aux, v, b))


# -- rotations ---------------------------------------------------------------


def _rotations(adj: Mapping[int, Collection[int]] | Sequence[Collection[int]], q: tuple[int, ...],
               pos: dict[int, int]) -> Iterator[tuple[int, ...]]:
    x = q[-1]
    last = len(q) - 2
    for y in sorted(adj[x]):
        i = pos.get(y)
        if i is None or i >= last:
            continue
        yield q[: i + 1] + q[:i:-1]


def rotation_closure(
    adj: Mapping[int, Collection[int]] | Sequence[Collection[int]],
    path: Sequence[int],
    fixed_end: int,
    exhaustive: bool = True,
) -> dict[int, tuple[int, ...]]:
    """Endpoints reachable from ``path`` by Posa rotations that keep ``fixed_end``.

    Maps each endpoint to one witness path on the same vertex set. The
    exhaustive search walks every distinct rotated path (exponential in the
    worst case, meant for small graphs); ``exhaustive=False`` records only
    the first path found for each endpoint and rotates from it, which is
    polynomial and is what Phase 2 uses.
    """
    q = tuple(path)
    if q[0] != fixed_end:
        if q[-1] != fixed_end:
            raise ValueError(f"{fixed_end} is not an endpoint of the path")
        q = q[::-1]
    if len(set(q)) != len(q):
        raise ValueError("path repeats a vertex")
    found: dict[int, tuple[int, ...]] = {q[-1]: q}
    pos = {v: i for i, v in enumerate(q)}
    limit = len(q) - 1
    if not exhaustive:
        queue = deque([q])
        while queue:
            cur = queue.popleft()
            cur_pos = {v: i for i, v in enumerate(cur)}
            for nq in _rotations(adj, cur, cur_pos):
                if nq[-1] not in found:
                    found[nq[-1]] = nq
                    queue.append(nq)
        return found
    seen = {q}
    stack = [q]
    while stack and len(found) < limit:
        cur = stack.pop()
        cur_pos = {v: i for i, v in enumerate(cur)}
        for nq in _rotations(adj, cur, cur_pos):
            if nq not in seen:
                seen.add(nq)
                stack.append(nq)
                found.setdefault(nq[-1], nq)
    del pos
    return found


def _rotation_stream(adj: Sequence[Collection[int]], q: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """Lazy endpoint-level BFS; yields witness paths in discovery order."""
    seen = {q[-1]}
    queue = deque([q])
    yield q
    while queue:
        cur = queue.popleft()
        cur_pos = {v: i for i, v in enumerate(cur)}
        for nq in _rotations(adj, cur, cur_pos):
            if nq[-1] not in seen:
                seen.add(nq[-1])
                queue.append(nq)
                yield nq


def extend_maximal(adj: Sequence[Collection[int]], path: list[int]) -> list[int]:
    """Grow ``path`` until no endpoint of any rotated version has a neighbour outside it."""
    path = list(path)
    inside = set(path)
    while True:
        grown = False
        for _ in range(2):
            while True:
                outs = adj[path[-1]] - inside if isinstance(adj[path[-1]], set) else set(adj[path[-1]]) - inside
                if not outs:
                    break
                y = min(outs)
                path.append(y)
                inside.add(y)
                grown = True
            path.reverse()
        for _ in range(2):
            for q in _rotation_stream(adj, tuple(path)):
                outs = set(adj[q[-1]]) - inside
                if outs:
                    y = min(outs)
                    path = list(q) + [y]
                    inside.add(y)
                    grown = True
                    break
            if grown:
                break
            path.reverse()
        if not grown:
            return path


def endpoint_pairs(adj: Sequence[Collection[int]], path: Sequence[int], deep: bool = True) -> Iterator[tuple[int, int, tuple[int, ...]]]:
    """Pairs (u, w) that are the ends of a path on V(path), with a witness.

    First one end stays fixed, then the other; with ``deep`` each rotated
    path is then rotated again from its far end.
    """
    q = tuple(path)
    for base in (q, q[::-1]):
        for r in _rotation_stream(adj, base):
            yield r[0], r[-1], r
    if not deep:
        return
    for r in _rotation_stream(adj, q):
        for s in _rotation_stream(adj, r[::-1]):
            yield s[0], s[-1], s


def _closes_cycle(aux: AuxMultigraph, q: tuple[int, ...]) -> bool:
    u, w = q[0], q[-1]
    if len(q) == 2:
        return aux.maker_multiplicity(u, w) >= 2
    return len(q) > 2 and w in aux.maker_adj[u]


def find_cycle(aux: AuxMultigraph, path: Sequence[int]) -> tuple[int, ...] | None:
    for _, _, q in endpoint_pairs(aux.maker_adj, path, deep=False):
        if _closes_cycle(aux, q):
            return q
    return None


def open_cycle(adj: Sequence[Collection[int]], cycle: Sequence[int]) -> list[int] | None:
    """Break a non-spanning cycle at a vertex with an outside neighbour and step out."""
    inside = set(cycle)
    k = len(cycle)
    for idx, c in enumerate(cycle):
        outs = set(adj[c]) - inside
        if outs:
            return list(cycle[idx + 1:]) + list(cycle[: idx + 1]) + [min(outs)]
    del k
    return None


@dataclass
class PathState:
    path: list[int] = field(default_factory=lambda: [0])
    longest: int = 1
    progress: list[tuple[int, bool]] = field(default_factory=list)


@dataclass
class Phase2Claim:
    u: int
    w: int
    edge: Edge


def phase2_step(aux: AuxMultigraph, board: Board, state: PathState) -> Phase2Claim | tuple[int, ...]:
    """One Phase-2 decision: a Hamilton cycle (victory) or the next claim.

    Raises :class:`Concession` when the maximal path closes into a cycle
    that cannot be left, or when no pair of rotated endpoints has an
    unclaimed edge between their leaf sets.
    """
    adj = aux.maker_adj
    while True:
        state.path = extend_maximal(adj, state.path)
        state.longest = max(state.longest, len(state.path))
        cyc = find_cycle(aux, state.path)
        if cyc is None:
            break
        if len(cyc) == aux.p:
            state.progress.append((len(cyc), True))
            return cyc
        opened = open_cycle(adj, cyc)
        if opened is None:
            raise Concession(CYCLE_NOT_HAMILTONIAN, f"Maker's graph has a cycle on a {len(cyc)}-vertex component")
        state.path = opened
    state.progress.append((len(state.path), False))
    for u, w, q in endpoint_pairs(adj, state.path):
        if aux.mult[u][w] > 0:
            e = aux.unclaimed_edges(board, u, w)[0]
            state.path = list(q)
            return Phase2Claim(u, w, e)
    raise Concession(PHASE2_STUCK, f"no claimable edge between rotated endpoints (|P|={len(state.path)})")


def extract_leaf_matching(cycle: Sequence[int], aux: AuxMultigraph) -> list[Edge]:
    """Alternate edges of a Hamilton cycle on the auxiliary graph, as board edges.

    The cycle is read from its lowest vertex towards that vertex's
    lower-numbered neighbour, taking the 1st, 3rd, 5th ... edge.
    """
    p = len(cycle)
    if p % 2:
        raise ValueError(f"cannot alternate an odd cycle (p={p})")
    if sorted(cycle) != list(range(aux.p)):
        raise ValueError("cycle does not visit every auxiliary vertex exactly once")
    k = cycle.index(min(cycle))
    c = list(cycle[k:]) + list(cycle[:k])
    if p > 2 and c[-1] < c[1]:
        c = [c[0]] + c[:0:-1]
    out = []
    for t in range(0, p, 2):
        i, j = c[t], c[t + 1]
        if aux.maker_multiplicity(i, j) == 0:
            raise ValueError(f"cycle edge ({i}, {j}) has no Maker-claimed board edge")
        out.append(aux.maker_edge(i, j))
    return out


def neighbourhood(adj: Sequence[Collection[int]], S: Collection[int]) -> set[int]:
    out: set[int] = set()
    for v in S:
        out.update(adj[v])
    return out - set(S)


def sample_expansion(adj: Sequence[Collection[int]], rng: random.Random, trials: int = 200) -> dict[str, Any]:
    """Random-set check of the expansion of Maker's Phase-1 graph.

    Sets of size up to p/100 must have more than twice their size in
    neighbours, sets up to p/2 must have some neighbour. Sizes are drawn
    from 1 up to those bounds, with the bound raised to 1 on small graphs.
    """
    p = len(adj)
    verts = list(range(p))
    small_cap = max(1, p // 100)
    half_cap = max(1, p // 2)
    fails_small, fails_half = [], []
    for _ in range(trials):
        S = rng.sample(verts, rng.randint(1, small_cap))
        if not len(neighbourhood(adj, S)) > 2 * len(S):
            fails_small.append(sorted(S))
    for _ in range(trials):
        S = rng.sample(verts, rng.randint(1, half_cap))
        if not neighbourhood(adj, S):
            fails_half.append(sorted(S))
    return {
        "p": p,
        "trials": trials,
        "small_cap": small_cap,
        "half_cap": half_cap,
        "small_failures": fails_small,
        "half_failures": fails_half,
    }


class Stage2:
    """Phase 1 then Phase 2 on top of a finished Stage 1."""

    def __init__(self, s1: Any, board: Board, params: Params) -> None:
        self.params = params
        self.aux, self.build_diag = build_aux(s1, board, params)
        self.phase = 1
        self.claims = {1: 0, 2: 0}
        self.path = PathState()
        self.mstar: list[set[int]] | None = None
        self.monitor_events: list[dict[str, Any]] = []
        self.cycle: tuple[int, ...] | None = None
        self._b = board.b
        self.n = board.n

    @property
    def total_claims(self) -> int:
        return self.claims[1] + self.claims[2]

    def _budget(self) -> None:
        budget = self.params.stage2_budget_factor * self.aux.p
        if self.total_claims >= budget:
            raise Concession(BUDGET_EXCEEDED, f"{self.total_claims} stage-2 claims used, budget {budget}")

    def _monitor(self, board: Board) -> None:
        aux = self.aux
        limit = 3 * self.n
        for i in range(aux.p):
            if aux.out_deg[i] < self.params.stage2_outdeg and aux.dB[i] >= limit:
                self.monitor_events.append({"turn": board.turn, "vertex": i, "dB": aux.dB[i]})

    def step(self, board: Board, rng: random.Random) -> Claim | tuple[int, ...]:
        """Next stage-2 claim, or the Hamilton cycle once Maker owns one.

        Raises :class:`Concession` on failure.
        """
        aux = self.aux
        aux.sync(board)
        events: list[dict[str, Any]] = []
        if self.phase == 1:
            self._monitor(board)
            choice = phase1_step(aux, board, rng, self._b, self.params.stage2_outdeg)
            if choice is not None:
                self._budget()
                self.claims[1] += 1
                return Claim(edge=choice.edge, stage=2, case_tag="p1", tree=aux.roots[choice.tail],
                             anchor=_leaf_end(aux, choice.edge, choice.tail))
            self.phase = 2
            self.mstar = aux.snapshot_adjacency()
            events.append({"tag": "p2", "phase1_claims": self.claims[1]})
        result = phase2_step(aux, board, self.path)
        if isinstance(result, tuple):
            self.cycle = result
            return result
        self._budget()
        self.claims[2] += 1
        return Claim(edge=result.edge, stage=2, case_tag="p2", tree=aux.roots[result.u],
                     anchor=_leaf_end(aux, result.edge, result.u), events=events)

    def summary(self) -> dict[str, Any]:
        return {
            "p": self.aux.p,
            "phase": self.phase,
            "phase1_claims": self.claims[1],
            "phase2_claims": self.claims[2],
            "budget": self.params.stage2_budget_factor * self.aux.p,
            "build": self.build_diag,
            "monitor_events": len(self.monitor_events),
            "longest_path": self.path.longest,
            "hamilton_cycle": list(self.cycle) if self.cycle else None,
        }


def _leaf_end(aux: AuxMultigraph, e: Edge, i: int) -> int:
    return e[0] if aux.owner.get(e[0]) == i else e[1]
