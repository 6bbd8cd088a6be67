"""Breaker adversaries. All are perfect-information and read-only on the board."""

from __future__ import annotations

import random
from collections import defaultdict
from collections.abc import Callable, Iterator
from typing import Any

from .board import Board, Edge, edge, iter_bits


def _quota(board: Board) -> int:
    return min(board.b, board.unclaimed_count)


def unclaimed_edges(board: Board) -> Iterator[Edge]:
    """All unclaimed edges in lexicographic order."""
    for u in range(board.n):
        for v in iter_bits(board.unclaimed_mask(u) >> (u + 1)):
            yield (u, u + 1 + v)


def _fill(board: Board, picks: list[Edge], taken: set[Edge], k: int, rng: random.Random) -> list[Edge]:
    """Top ``picks`` up to ``k`` edges with uniformly random unclaimed ones."""
    need = k - len(picks)
    if need <= 0:
        return picks
    remaining = board.unclaimed_count - len(taken)
    n = board.n
    if remaining <= 4 * need:
        pool = [e for e in unclaimed_edges(board) if e not in taken]
        extra = pool if len(pool) <= need else rng.sample(pool, need)
        picks.extend(extra)
        taken.update(extra)
        return picks
    while len(picks) < k:
        u = rng.randrange(n)
        v = rng.randrange(n - 1)
        if v >= u:
            v += 1
        e = edge(u, v)
        if e not in taken and board.is_unclaimed(u, v):
            picks.append(e)
            taken.add(e)
    return picks


class RandomBreaker:
    """Uniform sample of b distinct unclaimed edges (all of them if fewer remain)."""

    name = "random"

    def config(self) -> dict[str, Any]:
        return {}

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        return _fill(board, [], set(), _quota(board), rng)


class IsolatorBreaker:
    """Concentrates the whole budget on one Maker-untouched vertex.

    The target is the untouched vertex with the fewest unclaimed edges; a new
    target is picked whenever the current one gains a Maker edge or has
    nothing left to take.
    """

    name = "isolator"

    def __init__(self) -> None:
        self.target: int | None = None

    def config(self) -> dict[str, Any]:
        return {}

    def _retarget(self, board: Board, banned: set[int]) -> int | None:
        best = None
        for v in range(board.n):
            if board.dM[v] or v in banned:
                continue
            free = board.unclaimed_degree(v)
            if free and (best is None or free < best[0]):
                best = (free, v)
        return None if best is None else best[1]

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        k = _quota(board)
        picks: list[Edge] = []
        taken: set[Edge] = set()
        banned: set[int] = set()
        t = self.target
        if t is not None and (board.dM[t] or not board.unclaimed_degree(t)):
            t = None
        while len(picks) < k:
            if t is None:
                t = self._retarget(board, banned)
                if t is None:
                    break
            for w in iter_bits(board.unclaimed_mask(t)):
                e = edge(t, w)
                if e not in taken:
                    picks.append(e)
                    taken.add(e)
                    if len(picks) == k:
                        break
            if len(picks) < k:
                banned.add(t)
                t = None
        self.target = t
        return _fill(board, picks, taken, k, rng)


class LeafCutterBreaker:
    """Claims edges between published nice-tree leaf sets, else plays randomly."""

    name = "leaf-cutter"

    def __init__(self) -> None:
        self._targets: list[Edge] | None = None
        self._pos = 0

    def config(self) -> dict[str, Any]:
        return {}

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        k = _quota(board)
        picks: list[Edge] = []
        taken: set[Edge] = set()
        sets = public.get("leaf_sets")
        if sets and self._targets is None:
            self._targets = sorted(
                edge(a, c)
                for i, si in enumerate(sets)
                for sj in sets[i + 1:]
                for a in si
                for c in sj
            )
        if self._targets is not None:
            while len(picks) < k and self._pos < len(self._targets):
                e = self._targets[self._pos]
                self._pos += 1
                if board.is_unclaimed(*e):
                    picks.append(e)
                    taken.add(e)
        return _fill(board, picks, taken, k, rng)


class MaxDegreeBreaker:
    """Attacks the vertices with the most Maker edges (lowest id on ties)."""

    name = "max-degree"

    def config(self) -> dict[str, Any]:
        return {}

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        k = _quota(board)
        picks: list[Edge] = []
        taken: set[Edge] = set()
        for v in sorted(range(board.n), key=lambda x: (-board.dM[x], x)):
            if len(picks) == k:
                break
            for w in iter_bits(board.unclaimed_mask(v)):
                e = edge(v, w)
                if e not in taken:
                    picks.append(e)
                    taken.add(e)
                    if len(picks) == k:
                        break
        return picks


class ScriptedBreaker:
    """Replays the Breaker claims of a transcript turn by turn.

    If the game diverges from the script (a scripted edge is already taken
    or a turn is missing), the gap is filled with the lowest unclaimed edges
    and the turn is logged in ``deviations``.
    """

    name = "scripted"

    def __init__(self, script: dict[int, list[Edge]]) -> None:
        self.script = {int(t): [edge(*e) for e in es] for t, es in script.items()}
        self.deviations: list[int] = []

    @classmethod
    def from_transcript(cls, transcript: Any) -> ScriptedBreaker:
        script: dict[int, list[Edge]] = defaultdict(list)
        for r in transcript.claims():
            if r["player"] == "breaker":
                script[r["turn"]].append((r["u"], r["v"]))
        return cls(dict(script))

    def config(self) -> dict[str, Any]:
        return {"turns": len(self.script)}

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        k = _quota(board)
        picks = [e for e in self.script.get(board.turn, []) if board.is_unclaimed(*e)][:k]
        if len(picks) < k:
            self.deviations.append(board.turn)
            taken = set(picks)
            for e in unclaimed_edges(board):
                if len(picks) == k:
                    break
                if e not in taken:
                    picks.append(e)
                    taken.add(e)
        return picks


class NullBreaker:
    """Claims nothing; only legal with b = 0."""

    name = "null"

    def config(self) -> dict[str, Any]:
        return {}

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]:
        return []


BREAKERS: dict[str, Callable[..., Any]] = {
    "random": RandomBreaker,
    "isolator": IsolatorBreaker,
    "leaf-cutter": LeafCutterBreaker,
    "max-degree": MaxDegreeBreaker,
    "scripted": ScriptedBreaker,
    "null": NullBreaker,
}


def make_breaker(name: str, **kwargs: Any) -> Any:
    try:
        factory = BREAKERS[name]
    except KeyError:
        raise ValueError(f"unknown breaker {name!r}; choose from {sorted(BREAKERS)}") from None
    return factory(**kwargs)
