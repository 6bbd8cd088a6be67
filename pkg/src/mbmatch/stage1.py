"""Maker's first stage: a large matching plus a forest of small nice trees.

Each Maker turn runs the case analysis below, after first completing any
committed second half of a two-turn growth step:

* a troublesome leaf exists (largest Breaker degree first):
  2a hang a clean matching edge under it, else 2b close its tree with a
  fresh singleton into a matchable tree;
* otherwise 1a pair two singletons while there are more than
  ``pairing_stop`` trees, else 1b grow the tree with the fewest leaves
  (below ``ell``) by two matching edges over two turns, else stop.

A singleton vertex counts as a one-node augmenting tree whose root is its
only leaf. Ties are broken by lowest vertex / tree id throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .board import Board, ClaimState, Edge, Params, edge, iter_bits, lowest_bit
from .forest import (
    AugTree,
    ComponentRegistry,
    MatchableTree,
    is_augmenting,
    is_nice,
    is_small,
    leaf_swap_matching,
)
from .game import Claim

GROWTH_STARVED = "GROWTH_STARVED"
CLOSE_STARVED = "CLOSE_STARVED"
PAIR_STARVED = "PAIR_STARVED"
POSTCONDITION = "STAGE1_POSTCONDITION"


@dataclass
class Stage1Failure:
    code: str
    detail: str
    snapshot: dict[str, Any] = field(default_factory=dict)


@dataclass
class Stage1Output:
    n: int
    M: list[Edge]
    nice_trees: list[AugTree]
    matchable_trees: list[MatchableTree]
    maker_moves_used: int

    @property
    def p(self) -> int:
        return len(self.nice_trees)

    @property
    def q(self) -> int:
        return len(self.matchable_trees)

    @property
    def F(self) -> list[Edge]:
        """Maker's Stage-1 edges outside the matching."""
        out = [e for t in self.nice_trees for e in t.edges()]
        out.extend(e for mt in self.matchable_trees for e in mt.edges)
        return sorted(out)

    def leaf_sets(self) -> list[list[int]]:
        return [sorted(t.leaves) for t in self.nice_trees]

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "q": self.q,
            "M": [list(e) for e in self.M],
            "nice_trees": [
                {
                    "root": t.root,
                    "vertices": sorted(t.nodes),
                    "edges": [list(e) for e in t.edges()],
                    "leaves": sorted(t.leaves),
                    "adjacency": {str(k): v for k, v in t.adjacency().items()},
                }
                for t in self.nice_trees
            ],
            "matchable_trees": [
                {
                    "root": mt.root,
                    "vertices": sorted(mt.vertices),
                    "edges": [list(e) for e in mt.edges],
                    "matching": [list(e) for e in mt.matching],
                }
                for mt in self.matchable_trees
            ],
            "maker_moves_used": self.maker_moves_used,
        }


@dataclass
class _Pending:
    tree: int
    v: int
    planned: int | None


class Stage1:
    """Stateful Stage-1 player; call :meth:`step` once per Maker turn."""

    def __init__(self, n: int, params: Params, check_every_turn: bool = False) -> None:
        self.n = n
        self.params = params
        self.thr = params.troublesome_threshold
        self.reg = ComponentRegistry.fresh(n)
        self.tree_of: dict[int, int] = {}
        self.trouble = 0
        self.matched = 0
        # matched vertices whose edge has no troublesome endpoint
        self.clean_matched = 0
        # leaves of non-singleton augmenting trees
        self.tree_leaves = 0
        self.pending: _Pending | None = None
        self.moves = 0
        self.case_counts: dict[str, int] = {}
        self.check_every_turn = check_every_turn
        self.violations: list[str] = []
        self._seen = 0

    # -- bookkeeping ------------------------------------------------------

    def sync(self, board: Board) -> None:
        """Absorb Breaker claims made since the last call."""
        hist = board.history
        thr = self.thr
        for i in range(self._seen, len(hist)):
            u, v, who = hist[i]
            if who is not ClaimState.BREAKER:
                continue
            for x in (u, v):
                if board.dB[x] > thr and not (self.trouble >> x) & 1:
                    self.trouble |= 1 << x
                    if (self.matched >> x) & 1:
                        y = self.reg.partner[x]
                        self.clean_matched &= ~((1 << x) | (1 << y))
        self._seen = len(hist)

    def is_trouble(self, v: int) -> bool:
        return bool((self.trouble >> v) & 1)

    @property
    def p(self) -> int:
        return self.reg.p

    def leaf_mask(self) -> int:
        return self.reg.singles | self.tree_leaves

    def _tree_for(self, v: int) -> AugTree:
        """Tree holding leaf ``v``, materialising a singleton if needed."""
        if (self.reg.singles >> v) & 1:
            self.reg.singles &= ~(1 << v)
            t = AugTree(v)
            self.reg.aug_trees[v] = t
            self.tree_of[v] = v
            self.tree_leaves |= 1 << v
            return t
        return self.reg.aug_trees[self.tree_of[v]]

    def _take_matching_edge(self, w: int) -> int:
        z = self.reg.partner.pop(w)
        del self.reg.partner[z]
        gone = (1 << w) | (1 << z)
        self.matched &= ~gone
        self.clean_matched &= ~gone
        return z

    def _hang(self, t: AugTree, v: int, w: int) -> int:
        """Move matching edge (w, z) under leaf-or-node ``v`` of ``t``."""
        z = self._take_matching_edge(w)
        t.add_child(v, w)
        t.add_child(w, z)
        self.tree_of[w] = t.root
        self.tree_of[z] = t.root
        self.tree_leaves = (self.tree_leaves & ~(1 << v)) | (1 << z)
        return z

    # -- case queries -----------------------------------------------------

    def select_troublesome_leaf(self, board: Board) -> tuple[int, int] | None:
        """(tree id, leaf) of the troublesome leaf with largest Breaker degree."""
        best = None
        for v in iter_bits(self.trouble & self.leaf_mask()):
            if best is None or board.dB[v] > board.dB[best]:
                best = v
        if best is None:
            return None
        tid = best if (self.reg.singles >> best) & 1 else self.tree_of[best]
        return tid, best

    def case1a_pair(self, board: Board) -> Edge | None:
        if self.p <= self.params.pairing_stop:
            return None
        singles = self.reg.singles
        for u in iter_bits(singles):
            above = singles & ~board.breaker_adj[u] & ~((2 << u) - 1)
            if above:
                return (u, lowest_bit(above))
        return None

    def growth_target(self) -> int | None:
        """Tree with the fewest leaves (below ell), then lowest id.

        A singleton is a one-leaf tree whose id is the vertex itself.
        """
        best = (1, lowest_bit(self.reg.singles)) if self.reg.singles and self.params.ell > 1 else None
        for rid, t in self.reg.aug_trees.items():
            k = len(t.leaves)
            if k < self.params.ell and (best is None or (k, rid) < best):
                best = (k, rid)
        return None if best is None else best[1]

    def _clean_partner_candidates(self, board: Board, v: int) -> int:
        return self.clean_matched & ~board.breaker_adj[v]

    # -- steps ------------------------------------------------------------

    def step(self, board: Board) -> Claim | Stage1Output | Stage1Failure:
        self.sync(board)
        if self.check_every_turn:
            self._check(board)
        if self.pending is not None:
            return self._case1b_second(board)

        hit = self.select_troublesome_leaf(board)
        if hit is not None:
            tid, v = hit
            claim = self._case2a(board, tid, v)
            if claim is None:
                claim = self._case2b(board, tid, v)
            return claim

        pair = self.case1a_pair(board)
        if pair is not None:
            u, w = pair
            self.reg.singles &= ~((1 << u) | (1 << w))
            self.reg.partner[u] = w
            self.reg.partner[w] = u
            self.matched |= (1 << u) | (1 << w)
            self.clean_matched |= (1 << u) | (1 << w)
            return self._claim(edge(u, w), "1a", None, None)

        tid = self.growth_target()
        if tid is not None:
            return self._case1b_first(board, tid)
        return self._finish(board)

    def _claim(self, e: Edge, tag: str, tree: int | None, anchor: int | None) -> Claim:
        self.moves += 1
        self.case_counts[tag] = self.case_counts.get(tag, 0) + 1
        return Claim(edge=e, stage=1, case_tag=tag, tree=tree, anchor=anchor)

    def _case1b_first(self, board: Board, tid: int) -> Claim | Stage1Failure:
        if (self.reg.singles >> tid) & 1:
            v = tid
        else:
            v = min(self.reg.aug_trees[tid].leaves)
        cands = self._clean_partner_candidates(board, v)
        if not cands:
            return self._fail(GROWTH_STARVED, f"no clean matching edge reachable from leaf {v} (first half)")
        w = lowest_bit(cands)
        z = self.reg.partner[w]
        rest = cands & ~((1 << w) | (1 << z))
        t = self._tree_for(v)
        self._hang(t, v, w)
        self.pending = _Pending(tree=t.root, v=v, planned=lowest_bit(rest) if rest else None)
        return self._claim(edge(v, w), "1b.1", t.root, v)

    def _case1b_second(self, board: Board) -> Claim | Stage1Failure:
        pend = self.pending
        assert pend is not None
        v = pend.v
        cands = self._clean_partner_candidates(board, v)
        x = pend.planned
        if x is None or not (cands >> x) & 1:
            if not cands:
                return self._fail(GROWTH_STARVED, f"no clean matching edge reachable from {v} (second half)")
            x = lowest_bit(cands)
        t = self.reg.aug_trees[pend.tree]
        self._hang(t, v, x)
        self.pending = None
        return self._claim(edge(v, x), "1b.2", t.root, v)

    def _case2a(self, board: Board, tid: int, v: int) -> Claim | None:
        cands = self._clean_partner_candidates(board, v)
        if not cands:
            return None
        w = lowest_bit(cands)
        t = self._tree_for(v)
        self._hang(t, v, w)
        return self._claim(edge(v, w), "2a", t.root, v)

    def _case2b(self, board: Board, tid: int, v: int) -> Claim | Stage1Failure:
        cands = self.reg.singles & ~self.trouble & ~board.breaker_adj[v] & ~(1 << v)
        if not cands:
            return self._fail(CLOSE_STARVED, f"troublesome leaf {v} has no clean singleton partner")
        w = lowest_bit(cands)
        if (self.reg.singles >> v) & 1:
            self.reg.singles &= ~(1 << v)
            mt = MatchableTree(root=v, vertices=frozenset((v, w)), edges=[edge(v, w)], matching=[edge(v, w)])
        else:
            t = self.reg.aug_trees.pop(tid)
            matching = sorted(leaf_swap_matching(t, v) | {edge(v, w)})
            for x in t.nodes:
                del self.tree_of[x]
            for x in t.leaves:
                self.tree_leaves &= ~(1 << x)
            mt = MatchableTree(
                root=t.root,
                vertices=frozenset(t.nodes) | {w},
                edges=t.edges() + [edge(v, w)],
                matching=matching,
            )
        self.reg.singles &= ~(1 << w)
        self.reg.matchable.append(mt)
        return self._claim(edge(v, w), "2b", mt.root, v)

    # -- termination ------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "q": self.reg.q,
            "M": len(self.reg.partner) // 2,
            "singletons": self.reg.singles.bit_count(),
            "troublesome": self.trouble.bit_count(),
            "moves": self.moves,
            "pending": None if self.pending is None else [self.pending.tree, self.pending.v],
            "cases": dict(sorted(self.case_counts.items())),
        }

    def _fail(self, code: str, detail: str) -> Stage1Failure:
        return Stage1Failure(code, detail, self.snapshot())

    def _finish(self, board: Board) -> Stage1Output | Stage1Failure:
        trees = [self.reg.aug_trees[r] for r in sorted(self.reg.aug_trees)]
        out = Stage1Output(
            n=self.n,
            M=self.reg.matching_edges(),
            nice_trees=trees,
            matchable_trees=list(self.reg.matchable),
            maker_moves_used=self.moves,
        )
        prm = self.params
        if out.p % 2 or not prm.p_min <= out.p <= prm.p_max:
            return self._fail(PAIR_STARVED, f"stage 1 ended with p={out.p} outside [{prm.p_min}, {prm.p_max}]")
        problems = postcondition_violations(out, board, prm)
        if problems:
            return self._fail(POSTCONDITION, "; ".join(problems[:5]))
        return out

    def _check(self, board: Board) -> None:
        problems = self.reg.check(board)
        for rid, t in self.reg.aug_trees.items():
            if not is_augmenting(t) and not (self.pending and self.pending.tree == rid):
                problems.append(f"tree {rid} is not augmenting")
            if t.max_degree() > 3:
                problems.append(f"tree {rid} has a vertex of degree > 3")
        if problems:
            self.violations.append(f"turn {board.turn}: " + "; ".join(problems))


def postcondition_violations(out: Stage1Output, board: Board, params: Params) -> list[str]:
    """Everything the second stage relies on, re-derived from the output."""
    problems = []
    for t in out.nice_trees:
        if not is_nice(t, board, params):
            problems.append(f"tree {t.root} is not nice")
        if not is_small(t.nodes, board, params):
            problems.append(f"tree {t.root} is not small ({len(t)} vertices)")
    thr = params.troublesome_threshold
    for mt in out.matchable_trees:
        if not mt.verify():
            problems.append(f"matchable tree {mt.root} has an invalid matching")
        if not is_small(mt.vertices, board, params):
            problems.append(f"matchable tree {mt.root} is not small")
        if len(mt.vertices) != 2 and not any(board.dB[x] > thr for x in mt.vertices):
            problems.append(f"matchable tree {mt.root} has no troublesome vertex")
    return problems
