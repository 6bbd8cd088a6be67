from __future__ import annotations

import json

import pytest

from mbmatch.audit import CHECKS, audit
from mbmatch.board import Board, derive_params
from mbmatch.breakers import make_breaker
from mbmatch.game import GameTranscript, TranscriptError, run_game
from mbmatch.maker import TwoStageMaker


def game(n=256, b=6, seed=0, breaker="random", **kw):
    params = derive_params(n, profile="desk", **{"ell": 2, "b": b, **kw})
    return run_game(Board(n, b), TwoStageMaker(params), make_breaker(breaker), seed, params.to_dict())


def test_winning_run_passes_every_check():
    t = game()
    assert t.outcome == "maker_win"
    rep = audit(GameTranscript.parse(t.to_jsonl()))
    assert rep.ok, rep.lines()
    assert set(rep.checks) == set(CHECKS)


def test_duplicate_claim_is_reported_at_its_line(tmp_path):
    lines = game().to_jsonl().splitlines()
    idx = next(i for i, ln in enumerate(lines) if '"player":"breaker"' in ln and '"turn":5' in ln)
    lines.insert(idx + 1, lines[idx])
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    rep = audit(path)
    c = rep.checks["claim_permanence"]
    assert not c.ok and c.first_line == idx + 2 and c.first_turn == 5


def test_conceded_run_reports_code_and_snapshot():
    t = game(b=50, breaker="leaf-cutter")
    assert t.outcome == "maker_concede"
    rep = audit(GameTranscript.parse(t.to_jsonl()))
    assert rep.ok
    assert rep.failure["code"] == "PHASE1_ISOLATED"
    assert rep.failure["snapshot"]["stage2_phase"] == 1
    assert any(line.startswith("failure code PHASE1_ISOLATED") for line in rep.lines())


def test_tampered_phase1_anchor_is_caught():
    t = game()
    lines = t.to_jsonl().splitlines()
    leaf_sets = t.footer["maker"]["stage1"]["nice_trees"]
    idx = next(i for i, ln in enumerate(lines) if '"case_tag":"p1"' in ln)
    rec = json.loads(lines[idx])
    other = next(tr for tr in leaf_sets if rec["anchor"] not in tr["leaves"] and rec["u"] not in tr["leaves"]
                 and rec["v"] not in tr["leaves"])
    rec["anchor"] = other["leaves"][0]
    lines[idx] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
    rep = audit(GameTranscript.parse("\n".join(lines) + "\n"))
    assert not rep.checks["phase1_argmax"].ok


def test_tampered_case_tag_breaks_priority_or_legality():
    t = game(n=128, b=20, troublesome_threshold=10)
    lines = t.to_jsonl().splitlines()
    idx = next((i for i, ln in enumerate(lines) if '"case_tag":"2a"' in ln), None)
    if idx is None:
        pytest.skip("no case-2a move in this run")
    lines[idx] = lines[idx].replace('"case_tag":"2a"', '"case_tag":"1a"')
    rep = audit(GameTranscript.parse("\n".join(lines) + "\n"))
    assert not (rep.checks["case_priority"].ok and rep.checks["case_legality"].ok)


def test_truncated_transcript_raises_with_line(tmp_path):
    lines = game().to_jsonl().splitlines()[:-1]
    path = tmp_path / "cut.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TranscriptError) as err:
        audit(path)
    assert err.value.line == len(lines)
