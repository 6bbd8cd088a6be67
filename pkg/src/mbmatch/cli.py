"""Command line: ``mbmatch run | replay | audit | sweep``."""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from .audit import audit
from .breakers import BREAKERS
from .game import TranscriptError
from .harness import BatchConfig, ConfigError, default_out, replay, run_batch, sweep


def _game_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, nargs="+", required=True, help="board sizes (even)")
    bias = p.add_mutually_exclusive_group()
    bias.add_argument("--b", type=int, help="Breaker bias")
    bias.add_argument("--b-frac", type=float, help="bias as a fraction of the derived b_max")
    p.add_argument("--f", type=float, default=1.0, help="slack constant in b_max and ell (default 1)")
    p.add_argument("--ell", type=int, help="leaves per nice tree (desk profile)")
    p.add_argument("--threshold", type=float, help="troublesome threshold (desk profile)")
    p.add_argument("--breaker", default="random", choices=sorted(k for k in BREAKERS if k != "scripted"))
    p.add_argument("--games", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="base seed; game i uses seed + i")
    p.add_argument("--out", type=Path, default=None, help="output directory (default $MBMATCH_OUT or ./runs)")
    p.add_argument("--profile", choices=["paper", "desk"], default="desk")


def _config(args: argparse.Namespace) -> BatchConfig:
    return BatchConfig(
        ns=args.n, b=args.b, b_frac=args.b_frac, f=args.f, profile=args.profile, ell=args.ell,
        threshold=args.threshold, breaker=args.breaker, games=args.games, seed=args.seed,
        out=args.out if args.out is not None else default_out(),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbmatch", description="Biased Maker-Breaker perfect matching game on K_n.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play a seeded batch of games")
    _game_flags(run)
    run.add_argument("--stage1-only", action="store_true", help="halt Maker after Stage 1")

    sw = sub.add_parser("sweep", help="run batches across fractions of b_max")
    _game_flags(sw)
    sw.add_argument("--fracs", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 1.0])

    rp = sub.add_parser("replay", help="replay transcripts and re-verify their verdicts")
    rp.add_argument("paths", type=Path, nargs="+")

    au = sub.add_parser("audit", help="re-check every invariant on transcripts")
    au.add_argument("paths", type=Path, nargs="+")
    au.add_argument("--json", action="store_true", help="emit the report as JSON")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _config(args)
            cfg.stop_after_stage1 = args.stage1_only
            summary = run_batch(cfg)
            print(f"{summary.games} games, {summary.wins} Maker wins -> {summary.out}")
            for key, count in summary.by_outcome().items():
                print(f"  {key}: {count}")
            return 0
        if args.command == "sweep":
            table = sweep(_config(args), args.fracs)
            for row in table:
                print(" ".join(f"{k}={v}" for k, v in row.items()))
            return 0
        if args.command == "replay":
            bad = 0
            for path in args.paths:
                res = replay(path)
                good = res["identical"] and res["stored_verdict_ok"] is not False
                bad += not good
                print(f"{path}: {'OK' if good else 'MISMATCH'} {json.dumps(res, sort_keys=True)}")
            return 1 if bad else 0
        if args.command == "audit":
            bad = 0
            for path in args.paths:
                report = audit(path)
                bad += not report.ok
                if args.json:
                    print(json.dumps({"path": str(path), **report.to_dict()}, sort_keys=True))
                else:
                    print(f"== {path}: {'PASS' if report.ok else 'FAIL'}")
                    for line in report.lines():
                        print(f"  {line}")
            return 1 if bad else 0
    except ConfigError as exc:
        parser.error(str(exc))
    except TranscriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
