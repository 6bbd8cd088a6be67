from __future__ import annotations

import math
import random

import pytest

from mbmatch.board import Board, ClaimState, derive_params
from mbmatch.breakers import BREAKERS, ScriptedBreaker, make_breaker, unclaimed_edges
from mbmatch.game import run_game
from mbmatch.maker import NullMaker, TwoStageMaker


def test_random_takes_everything_when_short():
    board = Board(4, 6)
    picks = make_breaker("random").choose(board, random.Random(0), {})
    assert sorted(picks) == list(unclaimed_edges(board))


def test_random_is_seeded():
    board = Board(64, 10)
    a = make_breaker("random").choose(board, random.Random(5), {})
    b = make_breaker("random").choose(board, random.Random(5), {})
    assert a == b and len(set(a)) == 10


def test_random_never_picks_claimed_edges():
    rng = random.Random(9)
    board = Board(16, 5)
    br = make_breaker("random")
    edges = list(unclaimed_edges(board))
    rng.shuffle(edges)
    for i, e in enumerate(edges[:100]):
        board.claim(e, ClaimState.MAKER if i % 2 else ClaimState.BREAKER)
    for _ in range(10_000):
        picks = br.choose(board, rng, {})
        assert len(picks) == 5 == len(set(picks))
        assert all(board.is_unclaimed(*e) for e in picks)


def test_isolator_isolates_at_once_against_passive_maker():
    t = run_game(Board(8, 7), NullMaker(), make_breaker("isolator"), 0)
    assert t.outcome == "breaker_win"
    assert t.footer["isolated"] == [0] and t.footer["turns"] == 0


def test_isolator_forces_troublesome_play():
    n = 64
    params = derive_params(n, profile="desk", ell=2, b=12, troublesome_threshold=8)
    t = run_game(Board(n, 12), TwoStageMaker(params), make_breaker("isolator"), 0, params.to_dict())
    tags = {r["case_tag"] for r in t.claims() if r["player"] == "maker"}
    assert t.outcome != "maker_win"
    assert t.footer.get("code") == "CLOSE_STARVED" or tags & {"2a", "2b"}


def test_isolator_retargets_after_maker_touch():
    br = make_breaker("isolator")
    board = Board(16, 3)
    first = br.choose(board, random.Random(0), {})
    assert {x for e in first for x in e} >= {0}
    for e in first:
        board.claim(e, ClaimState.BREAKER)
    board.claim((0, 9), ClaimState.MAKER)
    nxt = br.choose(board, random.Random(0), {})
    assert all(0 not in e for e in nxt)


def test_max_degree_falls_back_to_lowest_id():
    picks = make_breaker("max-degree").choose(Board(10, 3), random.Random(0), {})
    assert picks == [(0, 1), (0, 2), (0, 3)]


def test_leaf_cutter_forces_phase1_isolation():
    n, b = 256, 50
    params = derive_params(n, profile="desk", ell=2, b=b)
    t = run_game(Board(n, b), TwoStageMaker(params), make_breaker("leaf-cutter"), 0, params.to_dict())
    assert t.outcome == "maker_concede" and t.footer["code"] == "PHASE1_ISOLATED"
    end_turn = next(r["turn"] for r in t.records if r["kind"] == "event" and r.get("tag") == "end")
    p = t.footer["maker"]["stage1"]["p"]
    wipe = math.ceil(params.ell ** 2 * math.comb(p, 2) / b)
    assert t.footer["turns"] - end_turn <= wipe + 1


def test_scripted_replay_is_bit_exact():
    params = derive_params(128, profile="desk", ell=2, b=4)
    first = run_game(Board(128, 4), TwoStageMaker(params), make_breaker("random"), 21, params.to_dict())
    again = run_game(Board(128, 4), TwoStageMaker(params), ScriptedBreaker.from_transcript(first), 21,
                     params.to_dict())
    assert again.records == first.records
    assert again.footer == first.footer


def test_unknown_breaker():
    with pytest.raises(ValueError):
        make_breaker("nope")


@pytest.mark.parametrize("name", sorted(set(BREAKERS) - {"scripted", "null"}))
@pytest.mark.parametrize("seed", range(3))
def test_every_strategy_is_legal(name, seed):
    n, b = 96, 6
    params = derive_params(n, profile="desk", ell=2, b=b)
    board = Board(n, b)
    before = len(board.history)
    t = run_game(board, TwoStageMaker(params), make_breaker(name), seed, params.to_dict())
    assert t.outcome != "faulty", t.footer
    assert len(board.history) > before
