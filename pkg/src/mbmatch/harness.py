"""Seeded batch campaigns, CSV summaries, sweeps over the bias, and replay."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .assembly import move_accounting, verify_perfect_matching
from .board import Board, ClaimState, Params, ParamsError, derive_params, paper_b_max
from .breakers import BREAKERS, ScriptedBreaker, make_breaker
from .game import GameTranscript, run_game
from .maker import NullMaker, TwoStageMaker

CSV_COLUMNS = [
    "n", "b", "seed", "outcome", "code", "maker_moves", "stage1_moves", "stage2_moves",
    "p", "q", "monitor_events", "overhead", "wallclock",
]
SWEEP_COLUMNS = ["n", "b_frac", "b", "games", "wins", "win_rate", "mean_maker_moves", "mean_overhead"]
OUT_ENV = "MBMATCH_OUT"


class ConfigError(ValueError):
    pass


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


@dataclass
class BatchConfig:
    ns: list[int]
    b: int | None = None
    b_frac: float | None = None
    f: float = 1.0
    profile: str = "desk"
    ell: int | None = None
    threshold: float | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    breaker: str = "random"
    games: int = 1
    seed: int = 0
    out: Path = field(default_factory=default_out)
    stop_after_stage1: bool = False

    def validate(self) -> None:
        if not self.ns:
            raise ConfigError("at least one n is required")
        for n in self.ns:
            if n < 4 or n % 2:
                raise ConfigError(f"n must be even and at least 4, got {n}")
        if self.b is not None and self.b_frac is not None:
            raise ConfigError("give either b or b_frac, not both")
        if self.b is not None and self.b < 0:
            raise ConfigError(f"b must be non-negative, got {self.b}")
        if self.b_frac is not None and not 0 <= self.b_frac <= 1:
            raise ConfigError(f"b_frac must lie in [0, 1], got {self.b_frac}")
        if self.games < 1:
            raise ConfigError("games must be at least 1")
        if self.breaker not in BREAKERS or self.breaker == "scripted":
            raise ConfigError(f"unknown breaker {self.breaker!r}; choose from "
                              f"{sorted(k for k in BREAKERS if k != 'scripted')}")
        if self.profile not in ("paper", "desk"):
            raise ConfigError(f"unknown profile {self.profile!r}")

    def params_for(self, n: int) -> Params:
        kw: dict[str, Any] = dict(self.overrides)
        if self.ell is not None:
            kw["ell"] = self.ell
        if self.threshold is not None:
            kw["troublesome_threshold"] = self.threshold
        if self.b is not None:
            kw["b"] = self.b
        elif self.b_frac is not None:
            kw["b"] = math.floor(self.b_frac * max(paper_b_max(n, self.f), 0.0))
        try:
            return derive_params(n, f=self.f, profile=self.profile, **kw)
        except ParamsError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["out"] = str(self.out)
        return d


def game_seed(base: int, index: int) -> int:
    return base + index


def play(params: Params, breaker: str, seed: int, stop_after_stage1: bool = False) -> GameTranscript:
    board = Board(params.n, params.b)
    maker = TwoStageMaker(params, stop_after_stage1=stop_after_stage1)
    return run_game(board, maker, make_breaker(breaker), seed, params.to_dict())


def summary_row(t: GameTranscript, wallclock: float) -> dict[str, Any]:
    acc = move_accounting(t)
    s2 = (t.footer.get("maker") or {}).get("stage2") or {}
    return {
        "n": t.header["n"],
        "b": t.header["b"],
        "seed": t.header["seed"],
        "outcome": t.outcome,
        "code": t.footer.get("code", ""),
        "maker_moves": acc["maker_moves"],
        "stage1_moves": acc["stage1_moves"],
        "stage2_moves": acc["stage2_moves"],
        "p": acc.get("p", ""),
        "q": acc.get("q", ""),
        "monitor_events": s2.get("monitor_events", 0),
        "overhead": f"{acc['overhead']:.6f}",
        "wallclock": f"{wallclock:.3f}",
    }


def transcript_name(n: int, b: int, seed: int) -> str:
    return f"n{n}_b{b}_s{seed}.jsonl"


@dataclass
class BatchSummary:
    out: Path
    rows: list[dict[str, Any]]

    @property
    def games(self) -> int:
        return len(self.rows)

    @property
    def wins(self) -> int:
        return sum(r["outcome"] == "maker_win" for r in self.rows)

    def by_outcome(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            key = r["outcome"] + (f":{r['code']}" if r["code"] else "")
            out[key] = out.get(key, 0) + 1
        return dict(sorted(out.items()))


def run_batch(cfg: BatchConfig, progress: Any = None) -> BatchSummary:
    """Play ``cfg.games`` seeded games for every n; write transcripts and games.csv.

    Each transcript is written atomically and each CSV row is flushed as soon
    as its game ends, so an interrupted batch leaves only complete files.
    """
    cfg.validate()
    params = {n: cfg.params_for(n) for n in cfg.ns}
    out = Path(cfg.out)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    rows = []
    with open(out / "games.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        fh.flush()
        for n in cfg.ns:
            prm = params[n]
            for i in range(cfg.games):
                seed = game_seed(cfg.seed, i)
                start = time.perf_counter()
                t = play(prm, cfg.breaker, seed, cfg.stop_after_stage1)
                row = summary_row(t, time.perf_counter() - start)
                t.write(out / "transcripts" / transcript_name(n, prm.b, seed))
                writer.writerow(row)
                fh.flush()
                rows.append(row)
                if progress is not None:
                    progress(row)
    return BatchSummary(out, rows)


def sweep(cfg: BatchConfig, fracs: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0), progress: Any = None) -> list[dict[str, Any]]:
    """Win rate and move overhead as the bias runs through fractions of b_max."""
    cfg.validate()
    table = []
    for frac in fracs:
        sub = BatchConfig(**{**cfg.__dict__, "b": None, "b_frac": frac, "out": Path(cfg.out) / f"bfrac_{frac:g}"})
        summary = run_batch(sub, progress)
        for n in cfg.ns:
            rows = [r for r in summary.rows if r["n"] == n]
            wins = sum(r["outcome"] == "maker_win" for r in rows)
            table.append({
                "n": n,
                "b_frac": f"{frac:g}",
                "b": rows[0]["b"],
                "games": len(rows),
                "wins": wins,
                "win_rate": f"{wins / len(rows):.4f}",
                "mean_maker_moves": f"{sum(r['maker_moves'] for r in rows) / len(rows):.2f}",
                "mean_overhead": f"{sum(float(r['overhead']) for r in rows) / len(rows):.6f}",
            })
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(table)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out) / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    return table


def replay_board(t: GameTranscript) -> Board:
    board = Board(t.header["n"], t.header["b"])
    for r in t.claims():
        who = ClaimState.MAKER if r["player"] == "maker" else ClaimState.BREAKER
        board.claim((r["u"], r["v"]), who)
    return board


def replay(t: GameTranscript | str | Path) -> dict[str, Any]:
    """Re-play a transcript's game with its Breaker moves scripted.

    Reports whether the regenerated transcript is byte-identical and whether
    the stored matching verifies on the replayed board.
    """
    if not isinstance(t, GameTranscript):
        t = GameTranscript.read(t)
    h = t.header
    board = replay_board(t)
    stored_ok = None
    if t.outcome == "maker_win":
        stored_ok = verify_perfect_matching(board, [tuple(e) for e in t.footer.get("matching", [])]).ok
    maker_name = h["maker"]["name"]
    if maker_name == TwoStageMaker.name:
        params = Params.from_dict(h["params"])
        maker: Any = TwoStageMaker(params, **h["maker"]["config"])
    elif maker_name == NullMaker.name:
        maker = NullMaker()
    else:
        raise ConfigError(f"cannot rebuild maker {maker_name!r}")
    scripted = ScriptedBreaker.from_transcript(t)
    scripted.name = h["breaker"]["name"]
    scripted.config = lambda: h["breaker"]["config"]  # type: ignore[method-assign]
    again = run_game(Board(h["n"], h["b"]), maker, scripted, h["seed"], h["params"])
    return {
        "outcome": t.outcome,
        "replayed_outcome": again.outcome,
        "identical": again.to_jsonl() == t.to_jsonl(),
        "stored_verdict_ok": stored_ok,
        "replayed_verdict_ok": again.footer.get("verdict", {}).get("ok") if again.outcome == "maker_win" else None,
        "deviations": scripted.deviations,
    }
