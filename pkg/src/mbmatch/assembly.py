"""Final perfect-matching assembly, independent verification, move accounting."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .board import Board, Edge, Params, edge
from .forest import leaf_swap_matching

if TYPE_CHECKING:
    from .game import GameTranscript
    from .stage1 import Stage1Output


class AssemblyError(RuntimeError):
    def __init__(self, message: str, uncovered: list[int], doubled: list[int]) -> None:
        super().__init__(f"{message}: uncovered={uncovered[:20]} doubly covered={doubled[:20]}")
        self.uncovered = uncovered
        self.doubled = doubled


@dataclass
class MatchingVerdict:
    ok: bool
    size: int
    duplicates: list[int] = field(default_factory=list)
    uncovered: list[int] = field(default_factory=list)
    not_maker: list[Edge] = field(default_factory=list)
    malformed: list[Any] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "size": self.size,
            "duplicates": self.duplicates,
            "uncovered": self.uncovered,
            "not_maker": [list(e) for e in self.not_maker],
            "malformed": self.malformed,
        }


def verify_perfect_matching(board: Board, edges: Iterable[Edge]) -> MatchingVerdict:
    """Check ``edges`` against the raw Maker bitsets of ``board``.

    Shares nothing with the strategy bookkeeping: coverage is recounted and
    ownership is read bit by bit from the claim map.
    """
    edges = list(edges)
    seen: Counter[int] = Counter()
    not_maker = []
    malformed = []
    for e in edges:
        try:
            u, v = int(e[0]), int(e[1])
        except (TypeError, ValueError, IndexError):
            malformed.append(repr(e))
            continue
        if not (0 <= u < board.n and 0 <= v < board.n) or u == v:
            malformed.append([u, v])
            continue
        seen[u] += 1
        seen[v] += 1
        if not (board.maker_adj[u] >> v) & 1:
            not_maker.append(edge(u, v))
    duplicates = sorted(v for v, c in seen.items() if c > 1)
    uncovered = [v for v in range(board.n) if v not in seen]
    ok = not (duplicates or uncovered or not_maker or malformed)
    return MatchingVerdict(ok, len(edges), duplicates, uncovered, sorted(not_maker), malformed)


def assemble_perfect_matching(s1: Stage1Output, N: Iterable[Edge]) -> list[Edge]:
    """Extend the leaf matching ``N`` to a perfect matching of K_n.

    Each nice tree contributes the matching of ``T - x`` where ``x`` is its
    leaf used by ``N``; matchable trees contribute their stored matching.
    """
    if not s1.nice_trees:
        raise ValueError("no nice trees: the leaf matching has nothing to join")
    N = [edge(*e) for e in N]
    leaf_tree = {x: i for i, t in enumerate(s1.nice_trees) for x in t.leaves}
    chosen: dict[int, int] = {}
    for u, v in N:
        for x in (u, v):
            i = leaf_tree.get(x)
            if i is None:
                raise ValueError(f"{x} is not a leaf of any nice tree")
            if i in chosen:
                raise ValueError(f"nice tree {s1.nice_trees[i].root} has two matched leaves")
            chosen[i] = x
    if len(chosen) != len(s1.nice_trees):
        missing = [s1.nice_trees[i].root for i in range(len(s1.nice_trees)) if i not in chosen]
        raise ValueError(f"nice trees without a matched leaf: {missing}")

    out = list(s1.M) + N
    for i, t in enumerate(s1.nice_trees):
        out.extend(leaf_swap_matching(t, chosen[i]))
    for mt in s1.matchable_trees:
        out.extend(mt.matching)

    count: Counter[int] = Counter(x for e in out for x in e)
    uncovered = [v for v in range(s1.n) if count[v] == 0]
    doubled = sorted(v for v, c in count.items() if c > 1)
    if uncovered or doubled:
        raise AssemblyError("assembled edge set is not a perfect matching", uncovered, doubled)
    return sorted(out)


def component_size_bound(params: Params) -> float:
    """Ceiling on vertices in non-edge components of Maker's Stage-1 graph,
    with the troublesome threshold standing in for n/sqrt(log n)."""
    thr = params.troublesome_threshold
    return 24 * params.ell * thr + 4 * params.ell + 8 * thr


def move_accounting(transcript: GameTranscript, params: Params | None = None) -> dict[str, Any]:
    if params is None:
        params = Params.from_dict(transcript.header["params"])
    n = transcript.header["n"]
    per_stage: Counter[int] = Counter()
    per_case: Counter[str] = Counter()
    for r in transcript.claims():
        if r["player"] == "maker":
            per_stage[r["stage"]] += 1
            per_case[r["case_tag"]] += 1
    total = sum(per_stage.values())
    summary = transcript.footer.get("maker", {})
    s1 = summary.get("stage1") or {}
    s2 = summary.get("stage2") or {}
    report: dict[str, Any] = {
        "n": n,
        "outcome": transcript.outcome,
        "maker_moves": total,
        "stage1_moves": per_stage.get(1, 0),
        "stage2_moves": per_stage.get(2, 0),
        "per_case": dict(sorted(per_case.items())),
        "half_n": n / 2,
        "overhead": (total - n / 2) / (n / 2),
    }
    if s1:
        container_edges = (
            len(s1["M"])
            + sum(len(t["edges"]) for t in s1["nice_trees"])
            + sum(len(t["edges"]) for t in s1["matchable_trees"])
        )
        non_edge = [t for t in s1["nice_trees"] + s1["matchable_trees"] if len(t["vertices"]) > 2]
        big = sum(len(t["vertices"]) for t in non_edge)
        bound = component_size_bound(params)
        report.update(
            p=s1["p"],
            q=s1["q"],
            stage1_container_edges=container_edges,
            stage1_conserved=container_edges == per_stage.get(1, 0),
            non_edge_component_vertices=big,
            component_size_bound=bound,
            component_size_ok=big <= bound,
        )
        budget = params.stage2_budget_factor * s1["p"]
        report.update(stage2_budget=budget, stage2_within_budget=per_stage.get(2, 0) <= budget)
        if s2:
            report["stage2_phase1"] = s2.get("phase1_claims", 0)
            report["stage2_phase2"] = s2.get("phase2_claims", 0)
    report["within_budget"] = report.get("stage2_within_budget", True)
    report["log_n"] = math.log(n)
    return report
