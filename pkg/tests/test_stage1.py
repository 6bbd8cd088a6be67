from __future__ import annotations

import math

import pytest

from mbmatch.audit import audit
from mbmatch.board import Board, ClaimState, derive_params
from mbmatch.breakers import make_breaker
from mbmatch.forest import is_augmenting, is_nice, is_small
from mbmatch.game import Claim, run_game
from mbmatch.maker import TwoStageMaker
from mbmatch.stage1 import CLOSE_STARVED, Stage1, Stage1Failure, Stage1Output


def desk(n, **kw):
    kw.setdefault("ell", 2)
    kw.setdefault("troublesome_threshold", n)
    kw.setdefault("b", 1)
    return derive_params(n, profile="desk", **kw)


def pair(st: Stage1, board: Board, u: int, w: int) -> None:
    st.reg.singles &= ~((1 << u) | (1 << w))
    st.reg.partner[u] = w
    st.reg.partner[w] = u
    st.matched |= (1 << u) | (1 << w)
    st.clean_matched |= (1 << u) | (1 << w)
    board.claim((u, w), ClaimState.MAKER)


def breaker_hits(board: Board, v: int, k: int, avoid=()) -> None:
    done = 0
    for w in range(board.n - 1, -1, -1):
        if done == k:
            break
        if w != v and w not in avoid and board.is_unclaimed(v, w):
            board.claim((v, w), ClaimState.BREAKER)
            done += 1


def test_select_troublesome_leaf_argmax_and_ties():
    n = 32
    params = desk(n, troublesome_threshold=2)
    board = Board(n, 1)
    st = Stage1(n, params)
    assert st.select_troublesome_leaf(board) is None
    breaker_hits(board, 4, 3)
    breaker_hits(board, 9, 7)
    st.sync(board)
    assert st.select_troublesome_leaf(board) == (9, 9)
    breaker_hits(board, 2, 7)
    st.sync(board)
    assert st.select_troublesome_leaf(board) == (2, 2)


def test_case1a_pairing_rules():
    n = 16
    board = Board(n, 1)
    st = Stage1(n, desk(n, p_min=2))
    assert st.case1a_pair(board) == (0, 1)
    st_stop = Stage1(n, desk(n, p_min=2, pairing_stop=16))
    assert st_stop.case1a_pair(board) is None


def test_case1a_none_when_all_singleton_pairs_claimed():
    n = 8
    board = Board(n, 1)
    st = Stage1(n, desk(n, p_min=1, pairing_stop=3))
    pair(st, board, 0, 1)
    pair(st, board, 2, 3)
    for u in range(4, 8):
        for v in range(u + 1, 8):
            board.claim((u, v), ClaimState.BREAKER)
    assert st.p == 4
    assert st.case1a_pair(board) is None


def test_case1b_grows_singleton_into_five_vertex_tree():
    n = 8
    board = Board(n, 1)
    st = Stage1(n, desk(n, p_min=1, pairing_stop=100))
    pair(st, board, 2, 3)
    pair(st, board, 4, 5)
    first = st.step(board)
    assert isinstance(first, Claim) and first.case_tag == "1b.1" and first.edge == (0, 2)
    board.claim(first.edge, ClaimState.MAKER)
    second = st.step(board)
    assert second.case_tag == "1b.2" and second.edge == (0, 4)
    board.claim(second.edge, ClaimState.MAKER)
    t = st.reg.aug_trees[0]
    assert t.leaves == {3, 5}
    assert {v: t.depth[v] for v in t.nodes} == {0: 0, 2: 1, 3: 2, 4: 1, 5: 2}
    assert not st.reg.check(board)


def test_case1b_second_half_re_searches_after_interference():
    n = 10
    board = Board(n, 1)
    st = Stage1(n, desk(n, p_min=1, pairing_stop=100))
    pair(st, board, 2, 3)
    pair(st, board, 4, 5)
    pair(st, board, 6, 7)
    first = st.step(board)
    board.claim(first.edge, ClaimState.MAKER)
    assert st.pending.planned == 4
    board.claim((0, 4), ClaimState.BREAKER)
    second = st.step(board)
    # 5 is still in the clean matching edge (4, 5); it becomes the middle node
    assert second.edge == (0, 5)
    assert st.reg.aug_trees[0].leaves == {3, 4}


def test_case2a_extends_troublesome_leaf():
    n = 32
    params = desk(n, troublesome_threshold=3, p_min=1, pairing_stop=100)
    board = Board(n, 1)
    st = Stage1(n, params)
    pair(st, board, 10, 11)
    breaker_hits(board, 0, 4)
    m_before = len(st.reg.partner) // 2
    c = st.step(board)
    assert c.case_tag == "2a" and c.edge == (0, 10)
    board.claim(c.edge, ClaimState.MAKER)
    t = st.reg.aug_trees[0]
    assert len(t) == 3 and len(st.reg.partner) // 2 == m_before - 1
    assert t.leaves == {11}


def test_case2a_falls_through_to_2b_and_closes_tree():
    n = 32
    params = desk(n, troublesome_threshold=3, p_min=1, pairing_stop=100)
    board = Board(n, 1)
    st = Stage1(n, params)
    pair(st, board, 1, 2)  # the path 0 - 1 - 2 once hung under root 0
    t = st._tree_for(0)
    st._hang(t, 0, 1)
    board.claim((0, 1), ClaimState.MAKER)
    breaker_hits(board, 2, 4, avoid={3})
    p_before, q_before = st.p, st.reg.q
    c = st.step(board)
    assert c.case_tag == "2b" and c.edge == (2, 3)
    mt = st.reg.matchable[-1]
    assert sorted(mt.matching) == [(0, 1), (2, 3)]
    assert mt.verify()
    assert st.p == p_before - 2 and st.reg.q == q_before + 1


def test_case2b_without_partner_reports_close_starved():
    n = 8
    params = desk(n, troublesome_threshold=3, p_min=1, pairing_stop=100)
    board = Board(n, 1)
    st = Stage1(n, params)
    for w in range(1, 8):
        board.claim((0, w), ClaimState.BREAKER)
    res = st.step(board)
    assert isinstance(res, Stage1Failure) and res.code == CLOSE_STARVED
    assert res.snapshot["troublesome"] == 1


def null_breaker_run(n, ell):
    params = derive_params(n, profile="desk", ell=ell, b=0)
    maker = TwoStageMaker(params, stop_after_stage1=True)
    t = run_game(Board(n, 0), maker, make_breaker("null"), 0, params.to_dict())
    return params, maker, t


@pytest.mark.parametrize("n,ell", [(64, 2), (256, 2), (256, 3), (1024, 3)])
def test_null_breaker_move_count(n, ell):
    params, maker, t = null_breaker_run(n, ell)
    assert t.outcome == "stage1_complete"
    out = maker.s1_out
    p = out.p
    assert p == 2 * params.p_min
    assert all(len(tr) == 4 * ell - 3 for tr in out.nice_trees)
    # |M| + tree edges, with |M| = (n - p(4 ell - 3)) / 2 and 4(ell - 1) edges per tree
    expected = (n - p * (4 * ell - 3)) // 2 + p * 4 * (ell - 1)
    assert t.footer["maker_moves"] == expected == out.maker_moves_used


def test_small_board_random_breaker_passes_postconditions():
    n = 16
    params = derive_params(n, profile="desk", ell=2, b=1, troublesome_threshold=1000)
    maker = TwoStageMaker(params, stop_after_stage1=True, check_every_turn=True)
    t = run_game(Board(n, 1), maker, make_breaker("random"), 7, params.to_dict())
    assert t.outcome == "stage1_complete"
    out = maker.s1_out
    assert isinstance(out, Stage1Output)
    board = Board(n, 1)
    for r in t.claims():
        board.claim((r["u"], r["v"]), ClaimState.MAKER if r["player"] == "maker" else ClaimState.BREAKER)
    for tr in out.nice_trees:
        assert is_nice(tr, board, params) and is_small(tr.nodes, board, params)
    assert not maker.stage1.violations
    assert audit(t).ok


@pytest.mark.parametrize("seed", range(12))
def test_parity_and_invariants_under_pressure(seed):
    n = 128
    b = int(n / math.log(n) ** 2)
    params = derive_params(n, profile="desk", ell=2, troublesome_threshold=n / 8, b=b * 4)
    maker = TwoStageMaker(params, stop_after_stage1=True, check_every_turn=True)
    t = run_game(Board(n, b * 4), maker, make_breaker("random"), seed, params.to_dict())
    assert t.outcome in ("stage1_complete", "maker_concede")
    if t.outcome == "stage1_complete":
        assert maker.s1_out.p % 2 == 0
    else:
        assert t.footer["code"] in ("GROWTH_STARVED", "CLOSE_STARVED", "PAIR_STARVED", "STAGE1_POSTCONDITION")
    assert not maker.stage1.violations
    for tr in maker.stage1.reg.aug_trees.values():
        assert is_augmenting(tr) or maker.stage1.pending is not None
    rep = audit(t)
    assert rep.ok, rep.lines()
