"""Turn loop (Breaker first), move types and the JSON-lines transcript."""

from __future__ import annotations

import json
import os
import random
import tempfile
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from . import __version__
from .assembly import verify_perfect_matching
from .board import Board, ClaimState, Edge, IllegalMoveError, edge


@dataclass
class Claim:
    edge: Edge
    stage: int
    case_tag: str
    tree: int | None = None
    anchor: int | None = None
    events: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class Victory:
    matching: list[Edge]
    events: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class Concede:
    code: str
    detail: str = ""
    events: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class Halt:
    """Maker stops voluntarily (e.g. a Stage-1-only run finished)."""

    reason: str
    events: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class Pass:
    events: list[dict[str, Any]] = field(default_factory=list)


Move = Claim | Victory | Concede | Halt | Pass


class MakerStrategy(Protocol):
    name: str
    public: dict[str, Any]

    def play(self, board: Board, rng: random.Random) -> Move: ...

    def config(self) -> dict[str, Any]: ...

    def summary(self) -> dict[str, Any]: ...


class BreakerStrategy(Protocol):
    name: str

    def choose(self, board: Board, rng: random.Random, public: dict[str, Any]) -> list[Edge]: ...

    def config(self) -> dict[str, Any]: ...


class TranscriptError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class GameTranscript:
    header: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)
    footer: dict[str, Any] = field(default_factory=dict)

    @property
    def outcome(self) -> str:
        return self.footer.get("outcome", "")

    def claims(self) -> Iterator[dict[str, Any]]:
        return (r for r in self.records if r["kind"] == "claim")

    def lines(self) -> Iterator[str]:
        yield _dumps({"kind": "header", **self.header})
        for r in self.records:
            yield _dumps({k: v for k, v in r.items() if not k.startswith("_")})
        yield _dumps({"kind": "footer", **self.footer})

    def to_jsonl(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path: str | Path) -> Path:
        """Write atomically so an interrupted batch never leaves a torn file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".jsonl")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())
        os.replace(tmp, path)
        return path

    @classmethod
    def parse(cls, text: str) -> GameTranscript:
        header = None
        footer = None
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TranscriptError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "kind" not in obj:
                raise TranscriptError(lineno, "record without a 'kind' field")
            kind = obj.pop("kind")
            if kind == "header":
                if header is not None or records:
                    raise TranscriptError(lineno, "header must be the first record")
                header = obj
            elif kind == "footer":
                if footer is not None:
                    raise TranscriptError(lineno, "duplicate footer")
                footer = obj
            elif kind in ("claim", "event"):
                if header is None:
                    raise TranscriptError(lineno, "record before header")
                if footer is not None:
                    raise TranscriptError(lineno, "record after footer")
                if kind == "claim":
                    for key in ("turn", "player", "u", "v"):
                        if key not in obj:
                            raise TranscriptError(lineno, f"claim without '{key}'")
                obj["kind"] = kind
                obj["_line"] = lineno
                records.append(obj)
            else:
                raise TranscriptError(lineno, f"unknown record kind {kind!r}")
        if header is None:
            raise TranscriptError(1, "missing header")
        if footer is None:
            raise TranscriptError(len(text.splitlines()), "missing footer (truncated transcript?)")
        t = cls(header=header, records=records, footer=footer)
        return t

    @classmethod
    def read(cls, path: str | Path) -> GameTranscript:
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def _claim_record(turn: int, player: str, e: Edge, stage: int | None, case_tag: str | None, **extra: Any) -> dict[str, Any]:
    rec = {"kind": "claim", "turn": turn, "player": player, "u": e[0], "v": e[1],
           "stage": stage, "case_tag": case_tag}
    rec.update({k: v for k, v in extra.items() if v is not None})
    return rec


def _fingerprint(board: Board) -> tuple[int, int, int, int]:
    return (len(board.history), board.maker_moves, board.breaker_moves, board.unclaimed_count)


def run_game(
    board: Board,
    maker: MakerStrategy,
    breaker: BreakerStrategy,
    rng_seed: int,
    params: dict[str, Any] | None = None,
) -> GameTranscript:
    """Play Breaker turn, Maker turn, ... until Maker wins, concedes or halts,
    or the board runs out of edges.

    The two players draw from independent streams derived from ``rng_seed``.
    An illegal claim aborts the game with outcome ``"faulty"``.
    """
    maker_rng = random.Random(f"{rng_seed}:maker")
    breaker_rng = random.Random(f"{rng_seed}:breaker")
    header = {
        "n": board.n,
        "b": board.b,
        "seed": rng_seed,
        "params": params,
        "maker": {"name": maker.name, "config": maker.config()},
        "breaker": {"name": breaker.name, "config": breaker.config()},
        "version": __version__,
    }
    records: list[dict[str, Any]] = []
    footer: dict[str, Any] = {}

    def events(turn: int, evs: list[dict[str, Any]]) -> None:
        for ev in evs:
            records.append({"kind": "event", "turn": turn, **ev})

    def finish(outcome: str, **info: Any) -> GameTranscript:
        footer.update(outcome=outcome, turns=board.turn, maker_moves=board.maker_moves,
                      breaker_moves=board.breaker_moves, **info)
        footer["maker"] = maker.summary()
        return GameTranscript(header=header, records=records, footer=footer)

    def settle(move: Move, turn: int) -> GameTranscript | None:
        """Handle a terminal Maker move; returns None for a claim or pass."""
        events(turn, move.events)
        if isinstance(move, Victory):
            verdict = verify_perfect_matching(board, move.matching)
            if not verdict.ok:
                return finish("faulty", code="UNVERIFIED_VICTORY", verdict=verdict.to_dict())
            return finish("maker_win", matching=sorted(edge(*e) for e in move.matching),
                          verdict=verdict.to_dict())
        if isinstance(move, Concede):
            return finish("maker_concede", code=move.code, detail=move.detail)
        if isinstance(move, Halt):
            return finish(move.reason)
        if not isinstance(move, (Claim, Pass)):
            raise TypeError(f"unknown move {move!r}")
        return None

    while True:
        turn = board.turn
        if board.unclaimed_count == 0:
            # nothing left to claim, but Maker may already own a perfect matching
            move = maker.play(board, maker_rng)
            done = settle(move, turn)
            return done if done is not None else finish("exhausted")

        k = min(board.b, board.unclaimed_count)
        before = _fingerprint(board)
        picks = breaker.choose(board, breaker_rng, maker.public)
        if _fingerprint(board) != before:
            return finish("faulty", code="BREAKER_MUTATED_BOARD")
        picks = [edge(*e) for e in picks]
        if len(picks) != k or len(set(picks)) != k:
            return finish("faulty", code="ILLEGAL_BREAKER_TURN",
                          detail=f"expected {k} distinct edges, got {len(picks)}")
        for e in picks:
            try:
                board.claim(e, ClaimState.BREAKER)
            except IllegalMoveError as exc:
                return finish("faulty", code="ILLEGAL_BREAKER_MOVE", detail=str(exc))
            records.append(_claim_record(turn, "breaker", e, None, None))
        isolated = sorted({x for e in picks for x in e if board.dM[x] == 0 and board.unclaimed_degree(x) == 0})
        if isolated:
            # a vertex Maker never touched has no free edge left: no perfect matching is possible
            return finish("breaker_win", isolated=isolated)

        before = _fingerprint(board)
        move = maker.play(board, maker_rng)
        if _fingerprint(board) != before:
            return finish("faulty", code="MAKER_MUTATED_BOARD")
        done = settle(move, turn)
        if done is not None:
            return done
        if isinstance(move, Claim):
            if board.unclaimed_count == 0:
                return finish("exhausted")
            try:
                board.claim(move.edge, ClaimState.MAKER)
            except IllegalMoveError as exc:
                return finish("faulty", code="ILLEGAL_MAKER_MOVE", detail=str(exc))
            records.append(_claim_record(turn, "maker", edge(*move.edge), move.stage, move.case_tag,
                                         tree=move.tree, anchor=move.anchor))
        elif k == 0:
            return finish("stalled")
        board.turn += 1
