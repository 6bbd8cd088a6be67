"""Maker strategies: the two-stage player and a passive one."""

from __future__ import annotations

import random
from typing import Any

from .assembly import AssemblyError, assemble_perfect_matching
from .board import Board, Params
from .game import Claim, Concede, Halt, Move, Pass, Victory
from .stage1 import Stage1, Stage1Failure, Stage1Output
from .stage2 import Concession, Stage2, extract_leaf_matching


class TwoStageMaker:
    """Stage 1 builds M and the nice trees; Stage 2 links one leaf per tree.

    After Stage 1 the leaf sets are published in ``public`` so that
    perfect-information adversaries can read them.
    """

    name = "two-stage"

    def __init__(self, params: Params, stop_after_stage1: bool = False, check_every_turn: bool = False) -> None:
        self.params = params
        self.stop_after_stage1 = stop_after_stage1
        self.check_every_turn = check_every_turn
        self.public: dict[str, Any] = {}
        self.stage1 = Stage1(params.n, params, check_every_turn=check_every_turn)
        self.s1_out: Stage1Output | None = None
        self.stage2: Stage2 | None = None
        self.failure: dict[str, Any] | None = None
        self.N: list[tuple[int, int]] | None = None

    def config(self) -> dict[str, Any]:
        return {"stop_after_stage1": self.stop_after_stage1, "check_every_turn": self.check_every_turn}

    def _concede(self, code: str, detail: str, snapshot: dict[str, Any], events: list[dict[str, Any]]) -> Concede:
        self.failure = {"code": code, "detail": detail, "snapshot": snapshot}
        events = events + [{"tag": f"concede:{code}", "snapshot": snapshot}]
        return Concede(code, detail, events=events)

    def play(self, board: Board, rng: random.Random) -> Move:
        pending: list[dict[str, Any]] = []
        if self.failure is not None:
            return Concede(self.failure["code"], self.failure["detail"])
        if self.s1_out is None:
            r = self.stage1.step(board)
            if isinstance(r, Claim):
                return r
            if isinstance(r, Stage1Failure):
                return self._concede(r.code, r.detail, r.snapshot, [])
            self.s1_out = r
            self.public["leaf_sets"] = r.leaf_sets()
            pending.append({"tag": "end", "p": r.p, "q": r.q, "moves": r.maker_moves_used})
            if self.stop_after_stage1:
                return Halt("stage1_complete", events=pending)
            self.stage2 = Stage2(r, board, self.params)
        assert self.stage2 is not None
        try:
            res = self.stage2.step(board, rng)
        except Concession as c:
            return self._concede(c.code, c.detail, self._stage2_snapshot(), pending)
        if isinstance(res, Claim):
            res.events = pending + res.events
            return res
        try:
            self.N = extract_leaf_matching(res, self.stage2.aux)
            matching = assemble_perfect_matching(self.s1_out, self.N)
        except (AssemblyError, ValueError) as exc:
            return self._concede("ASSEMBLY_FAILED", str(exc), self._stage2_snapshot(), pending)
        pending.append({"tag": "win", "cycle": list(res), "N": [list(e) for e in self.N]})
        return Victory(matching, events=pending)

    def _stage2_snapshot(self) -> dict[str, Any]:
        snap = self.stage1.snapshot()
        if self.stage2 is not None:
            s2 = self.stage2
            snap.update(stage2_phase=s2.phase, stage2_claims=s2.total_claims, path_length=len(s2.path.path),
                        out_deg_min=min(s2.aux.out_deg) if s2.aux.p else 0)
        return snap

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "stage1": self.s1_out.to_dict() if self.s1_out is not None else None,
            "stage1_cases": dict(sorted(self.stage1.case_counts.items())),
            "stage2": None,
            "failure": self.failure,
            "violations": self.stage1.violations,
        }
        if self.stage2 is not None:
            s2 = self.stage2.summary()
            s2["N"] = [list(e) for e in self.N] if self.N else None
            out["stage2"] = s2
        return out


class NullMaker:
    """Never claims anything; used to check that Breaker wins are recognised."""

    name = "null"

    def __init__(self) -> None:
        self.public: dict[str, Any] = {}

    def config(self) -> dict[str, Any]:
        return {}

    def play(self, board: Board, rng: random.Random) -> Move:
        return Pass()

    def summary(self) -> dict[str, Any]:
        return {}
