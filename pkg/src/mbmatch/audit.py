"""Transcript replay audit.

The audit rebuilds the board and Maker's Stage-1 structures from the claim
records alone (plus the case annotations) and re-checks every rule the
strategy is supposed to respect. It keeps its own plain-dict bookkeeping so
a bug in the strategy's data structures cannot certify itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .assembly import verify_perfect_matching
from .board import Board, ClaimState, IllegalMoveError, Params, edge, iter_bits
from .game import GameTranscript

CHECKS = (
    "claim_permanence",
    "turn_discipline",
    "degree_consistency",
    "registry_partition",
    "case_legality",
    "case_priority",
    "tie_rules",
    "tree_shape",
    "stage1_postcondition",
    "stage1_footer_match",
    "phase1_argmax",
    "stage2_budget",
    "leaf_matching",
    "verdict",
)


@dataclass
class CheckResult:
    ok: bool = True
    violations: int = 0
    first_turn: int | None = None
    first_line: int | None = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "violations": self.violations, "first_turn": self.first_turn,
                "first_line": self.first_line, "detail": self.detail}


@dataclass
class AuditReport:
    outcome: str
    checks: dict[str, CheckResult] = field(default_factory=lambda: {name: CheckResult() for name in CHECKS})
    warnings: list[str] = field(default_factory=list)
    failure: dict[str, Any] | None = None
    claims: int = 0

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def fail(self, name: str, turn: int | None, line: int | None, detail: str) -> None:
        c = self.checks[name]
        if c.ok:
            c.ok = False
            c.first_turn, c.first_line, c.detail = turn, line, detail
        c.violations += 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "outcome": self.outcome,
            "claims": self.claims,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "warnings": self.warnings,
            "failure": self.failure,
        }

    def lines(self) -> list[str]:
        out = [f"outcome: {self.outcome}"]
        for name, c in self.checks.items():
            if c.ok:
                out.append(f"PASS {name}")
            else:
                out.append(f"FAIL {name}: {c.violations} violation(s), first at turn {c.first_turn}"
                           f" (line {c.first_line}): {c.detail}")
        if self.failure:
            out.append(f"failure code {self.failure.get('code')}: {self.failure.get('detail', '')}")
            out.append(f"snapshot: {self.failure.get('snapshot')}")
        out.extend(f"warning: {w}" for w in self.warnings)
        return out


class _Stage1Model:
    """Maker's Stage-1 structure, rebuilt from annotated claims."""

    def __init__(self, n: int, params: Params) -> None:
        self.n = n
        self.params = params
        self.partner: dict[int, int] = {}
        self.singles: set[int] = set(range(n))
        self.tree_of: dict[int, int] = {}
        self.parent: dict[int, int | None] = {}
        self.kids: dict[int, list[int]] = {}
        self.depth: dict[int, int] = {}
        self.leaves: dict[int, set[int]] = {}
        self.members: dict[int, set[int]] = {}
        self.matchable: list[tuple[int, set[int], list[tuple[int, int]]]] = []
        self.pending: tuple[int, int] | None = None

    @property
    def p(self) -> int:
        return len(self.singles) + len(self.leaves)

    def is_leaf(self, v: int) -> bool:
        if v in self.singles:
            return True
        r = self.tree_of.get(v)
        return r is not None and v in self.leaves[r]

    def tree_id(self, v: int) -> int | None:
        if v in self.singles:
            return v
        return self.tree_of.get(v)

    def leaf_count(self, r: int) -> int:
        return 1 if r in self.singles else len(self.leaves[r])

    def materialise(self, v: int) -> int:
        if v in self.singles:
            self.singles.discard(v)
            self.tree_of[v] = v
            self.parent[v] = None
            self.kids[v] = []
            self.depth[v] = 0
            self.leaves[v] = {v}
            self.members[v] = {v}
            return v
        return self.tree_of[v]

    def add(self, r: int, par: int, child: int) -> None:
        self.tree_of[child] = r
        self.parent[child] = par
        self.kids[child] = []
        self.kids[par].append(child)
        self.depth[child] = self.depth[par] + 1
        self.leaves[r].discard(par)
        self.leaves[r].add(child)
        self.members[r].add(child)

    def tree_edges(self, r: int) -> list[tuple[int, int]]:
        return sorted(edge(v, self.parent[v]) for v in self.members[r] if self.parent[v] is not None)

    def shape_problems(self, r: int) -> list[str]:
        out = []
        for v in self.members[r]:
            k = len(self.kids[v])
            deg = k + (self.parent[v] is not None)
            if deg > 3:
                out.append(f"vertex {v} has degree {deg}")
            if self.depth[v] % 2 == 1 and k != 1:
                out.append(f"odd-depth vertex {v} has {k} children")
        return out

    def partition_count(self) -> int:
        return len(self.partner) + len(self.singles) + sum(len(m) for m in self.members.values()) + sum(
            len(vs) for _, vs, _ in self.matchable
        )

    def partition_problems(self) -> list[str]:
        seen: dict[int, str] = {}
        problems = []

        def put(v: int, fam: str) -> None:
            if v in seen:
                problems.append(f"vertex {v} in {seen[v]} and {fam}")
            seen[v] = fam

        for u, v in self.partner.items():
            if self.partner.get(v) != u:
                problems.append(f"matching partner of {u} is not symmetric")
            put(u, "M")
        for v in self.singles:
            put(v, "singletons")
        for r, m in self.members.items():
            for v in m:
                put(v, f"tree {r}")
        for r, vs, _ in self.matchable:
            for v in vs:
                put(v, f"matchable {r}")
        if len(seen) != self.n:
            problems.append(f"{self.n - len(seen)} vertices in no family")
        return problems


def _perfect_matching_exists(vertices: set[int], edges: list[tuple[int, int]]) -> bool:
    """Leaf-peeling check on a forest: each leaf must take its only neighbour."""
    adj: dict[int, set[int]] = {v: set() for v in vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    alive = set(vertices)
    changed = True
    while alive and changed:
        changed = False
        for x in sorted(alive):
            if x not in alive:
                continue
            nb = adj[x] & alive
            if not nb:
                return False
            if len(nb) == 1:
                (y,) = nb
                alive -= {x, y}
                changed = True
    return not alive


def audit(transcript: GameTranscript | str | Path, full_check_every: int = 64) -> AuditReport:
    """Replay ``transcript`` and re-check every rule; see :data:`CHECKS`."""
    if not isinstance(transcript, GameTranscript):
        transcript = GameTranscript.read(transcript)
    t = transcript
    n, b = t.header["n"], t.header["b"]
    params = Params.from_dict(t.header["params"]) if t.header.get("params") else None
    report = AuditReport(outcome=t.outcome)
    maker_summary = t.footer.get("maker") or {}
    if t.outcome not in ("maker_win",):
        report.failure = maker_summary.get("failure") or (
            {"code": t.footer.get("code"), "detail": t.footer.get("detail", "")} if t.footer.get("code") else None
        )
    board = Board(n, b)
    thr = params.troublesome_threshold if params else float("inf")
    model = _Stage1Model(n, params) if params else None
    trouble: set[int] = set()

    # stage-2 state
    leaf_owner: dict[int, int] = {}
    aux_p = 0
    dB_aux: list[int] = []
    out_deg: list[int] = []
    stage2_claims = 0
    stage1_done = False
    win_event: dict[str, Any] | None = None

    cur_turn = -1
    breaker_in_turn = 0
    maker_in_turn = 0
    expected_k = 0
    turn_line = None

    def close_turn() -> None:
        if cur_turn >= 0 and breaker_in_turn != expected_k:
            report.fail("turn_discipline", cur_turn, turn_line,
                        f"Breaker claimed {breaker_in_turn} edges, expected {expected_k}")

    def troublesome_leaf() -> int | None:
        best = None
        for v in trouble:
            if model.is_leaf(v) and (best is None or (board.dB[v], -v) > (board.dB[best], -best)):
                best = v
        return best

    def check_end(line: int | None, turn: int) -> None:
        nonlocal stage1_done, aux_p, dB_aux, out_deg
        stage1_done = True
        if model is None:
            return
        if model.pending is not None:
            report.fail("case_legality", turn, line, "stage 1 ended in the middle of a growth step")
        for problem in model.partition_problems():
            report.fail("registry_partition", turn, line, problem)
        roots = sorted(model.leaves)
        prm = model.params
        p = len(roots) + len(model.singles)
        if model.singles:
            report.fail("stage1_postcondition", turn, line, f"{len(model.singles)} singletons left at the end")
        if p % 2 or not prm.p_min <= p <= prm.p_max:
            report.fail("stage1_postcondition", turn, line, f"p={p} is odd or outside [{prm.p_min}, {prm.p_max}]")
        for r in roots:
            tv = model.members[r]
            leaves = model.leaves[r]
            tau = sum(1 for v in tv if board.dB[v] > thr)
            probs = model.shape_problems(r)
            if len(leaves) != prm.ell:
                probs.append(f"{len(leaves)} leaves")
            if any(board.dB[x] > thr for x in leaves):
                probs.append("a troublesome leaf")
            if any(model.depth[x] % 2 for x in leaves):
                probs.append("a leaf at odd depth")
            for v in tv:
                if model.depth[v] % 2 == 0 and v not in leaves and board.dB[v] <= thr and len(model.kids[v]) != 2:
                    probs.append(f"even-depth vertex {v} without two children")
            if not len(tv) < 4 * (tau + prm.ell):
                probs.append(f"{len(tv)} vertices is not small")
            for pr in probs:
                report.fail("stage1_postcondition", turn, line, f"tree {r}: {pr}")
        for r, vs, es in model.matchable:
            tau = sum(1 for v in vs if board.dB[v] > thr)
            if not len(vs) < 4 * (tau + prm.ell):
                report.fail("stage1_postcondition", turn, line, f"matchable tree {r} is not small")
            if len(vs) != 2 and tau == 0:
                report.fail("stage1_postcondition", turn, line, f"matchable tree {r} has no troublesome vertex")
        s1 = maker_summary.get("stage1")
        if s1 is not None:
            if sorted(map(tuple, s1["M"])) != sorted(edge(u, v) for u, v in model.partner.items() if u < v):
                report.fail("stage1_footer_match", turn, line, "matching differs from the footer")
            mine = {r: model.tree_edges(r) for r in roots}
            theirs = {tr["root"]: [tuple(e) for e in tr["edges"]] for tr in s1["nice_trees"]}
            if mine != theirs:
                report.fail("stage1_footer_match", turn, line, "nice trees differ from the footer")
            mine_m = sorted((r, sorted(vs)) for r, vs, _ in model.matchable)
            theirs_m = sorted((tr["root"], sorted(tr["vertices"])) for tr in s1["matchable_trees"])
            if mine_m != theirs_m:
                report.fail("stage1_footer_match", turn, line, "matchable trees differ from the footer")
        for i, r in enumerate(roots):
            for x in model.leaves[r]:
                leaf_owner[x] = i
        aux_p = len(roots)
        dB_aux = [0] * aux_p
        out_deg = [0] * aux_p

    def apply_stage1(rec: dict[str, Any], u: int, v: int, turn: int, line: int | None) -> None:
        tag = rec.get("case_tag")
        anchor = rec.get("anchor")
        m = model
        prm = m.params
        hot = troublesome_leaf()
        if tag in ("1a", "1b.1") and hot is not None:
            report.fail("case_priority", turn, line, f"case {tag} played while leaf {hot} was troublesome")
        if tag in ("1a", "1b.1", "2a", "2b") and m.pending is not None:
            report.fail("case_priority", turn, line, f"case {tag} played with a growth step half done")
        if tag in ("2a", "2b") and anchor != hot:
            report.fail("tie_rules", turn, line, f"case {tag} on leaf {anchor}, expected {hot}")

        def clean_partner(w: int) -> int | None:
            z = m.partner.get(w)
            if z is None or w in trouble or z in trouble:
                return None
            return z

        if tag == "1a":
            if not (u in m.singles and v in m.singles):
                report.fail("case_legality", turn, line, f"1a edge {(u, v)} is not between singletons")
                return
            if not m.p > prm.pairing_stop:
                report.fail("case_legality", turn, line, f"1a played with p={m.p} <= {prm.pairing_stop}")
            m.singles -= {u, v}
            m.partner[u] = v
            m.partner[v] = u
            return
        if tag in ("1b.1", "1b.2", "2a"):
            if anchor not in (u, v):
                report.fail("case_legality", turn, line, f"anchor {anchor} is not an endpoint")
                return
            w = v if anchor == u else u
            if tag == "1b.2":
                if m.pending is None or m.pending[1] != anchor:
                    report.fail("case_legality", turn, line, "1b.2 without a matching first half")
                    return
                r = m.pending[0]
                if m.tree_of.get(anchor) != r or len(m.kids[anchor]) != 1:
                    report.fail("case_legality", turn, line, f"1b.2 anchor {anchor} is not the half-grown node")
                    return
            else:
                if not m.is_leaf(anchor):
                    report.fail("case_legality", turn, line, f"{tag} anchor {anchor} is not a leaf")
                    return
                if tag == "1b.1":
                    if m.p > prm.pairing_stop:
                        if any(m.singles - {x} - _breaker_nbrs(board, x) for x in m.singles):
                            report.fail("case_priority", turn, line, "1b.1 played while a 1a pair was available")
                    want = _growth_choice(m)
                    if want is not None and m.tree_id(anchor) != want:
                        report.fail("tie_rules", turn, line, f"grew tree {m.tree_id(anchor)}, expected {want}")
                    elif m.leaf_count(m.tree_id(anchor)) >= prm.ell:
                        report.fail("case_legality", turn, line, "1b.1 on a tree with ell leaves")
                    rid = m.tree_id(anchor)
                    lv = [anchor] if rid in m.singles else sorted(m.leaves[rid])
                    if anchor != lv[0]:
                        report.fail("tie_rules", turn, line, f"grew from leaf {anchor}, expected {lv[0]}")
                r = m.materialise(anchor)
            z = clean_partner(w)
            if z is None:
                report.fail("case_legality", turn, line, f"{tag}: {w} is not in a clean matching edge")
                return
            del m.partner[w]
            del m.partner[z]
            m.add(r, anchor, w)
            m.add(r, w, z)
            if tag == "1b.1":
                m.pending = (r, anchor)
            elif tag == "1b.2":
                m.pending = None
            for pr in m.shape_problems(r) if m.pending is None else []:
                report.fail("tree_shape", turn, line, f"tree {r}: {pr}")
            return
        if tag == "2b":
            if anchor not in (u, v) or not m.is_leaf(anchor):
                report.fail("case_legality", turn, line, f"2b anchor {anchor} is not a leaf endpoint")
                return
            w = v if anchor == u else u
            if w not in m.singles or w in trouble or w == anchor:
                report.fail("case_legality", turn, line, f"2b partner {w} is not a clean singleton")
                return
            r = m.tree_id(anchor)
            if r in m.singles:
                m.singles.discard(r)
                vs, es = {r}, []
            else:
                vs = m.members.pop(r)
                es = [edge(x, m.parent[x]) for x in vs if m.parent[x] is not None]
                del m.leaves[r]
                for x in vs:
                    del m.tree_of[x]
            m.singles.discard(w)
            vs = set(vs) | {w}
            es = sorted(es + [edge(anchor, w)])
            if not _perfect_matching_exists(vs, es):
                report.fail("case_legality", turn, line, f"2b component at {r} has no perfect matching")
            m.matchable.append((r, vs, es))
            return
        report.fail("case_legality", turn, line, f"unknown stage-1 case tag {tag!r}")

    claim_count = 0
    for rec in t.records:
        line = rec.get("_line")
        turn = rec.get("turn", cur_turn)
        if rec["kind"] == "event":
            tag = rec.get("tag")
            if tag == "end":
                check_end(line, turn)
            elif tag == "win":
                win_event = rec
            continue
        claim_count += 1
        if turn != cur_turn:
            if turn < cur_turn:
                report.fail("turn_discipline", turn, line, f"turn {turn} after turn {cur_turn}")
            elif turn != cur_turn + 1:
                report.fail("turn_discipline", turn, line, f"turn jumps from {cur_turn} to {turn}")
            close_turn()
            if turn % full_check_every == 0:
                # periodic full recount; the cheap counters are checked every claim
                for problem in board.check_consistency():
                    report.fail("degree_consistency", turn, line, problem)
                if model is not None and not stage1_done:
                    for problem in model.partition_problems():
                        report.fail("registry_partition", turn, line, problem)
            cur_turn = turn
            breaker_in_turn = maker_in_turn = 0
            expected_k = min(b, board.unclaimed_count)
            turn_line = line
        u, v = int(rec["u"]), int(rec["v"])
        who = rec["player"]
        if who == "breaker":
            if maker_in_turn:
                report.fail("turn_discipline", turn, line, "Breaker claim after Maker's claim in the same turn")
            breaker_in_turn += 1
            state = ClaimState.BREAKER
        elif who == "maker":
            maker_in_turn += 1
            if maker_in_turn > 1:
                report.fail("turn_discipline", turn, line, "Maker claimed twice in one turn")
            state = ClaimState.MAKER
        else:
            report.fail("turn_discipline", turn, line, f"unknown player {who!r}")
            continue
        if state is ClaimState.MAKER and model is not None and rec.get("stage") == 1:
            try:
                apply_stage1(rec, u, v, turn, line)
            except (KeyError, TypeError) as exc:
                report.fail("case_legality", turn, line, f"stage-1 replay error {exc!r}")
            if model.partition_count() != n:
                report.fail("registry_partition", turn, line,
                            f"{model.partition_count()} vertices in families, n={n}")
        try:
            board.claim((u, v), state)
        except IllegalMoveError as exc:
            report.fail("claim_permanence", turn, line, str(exc))
            continue
        if state is ClaimState.BREAKER:
            for x in (u, v):
                if board.dB[x] > thr:
                    trouble.add(x)
        i, j = leaf_owner.get(u), leaf_owner.get(v)
        if stage1_done and i is not None and j is not None and i != j:
            if state is ClaimState.BREAKER:
                dB_aux[i] += 1
                dB_aux[j] += 1
        if state is ClaimState.MAKER and rec.get("stage") == 2:
            stage2_claims += 1
            if i is None or j is None or i == j:
                report.fail("case_legality", turn, line, f"stage-2 claim {(u, v)} is not between two leaf sets")
            elif rec.get("case_tag") == "p1":
                tail = leaf_owner.get(rec.get("anchor"))
                target = params.stage2_outdeg
                cands = [x for x in range(aux_p) if out_deg[x] < target]
                best = max(cands, key=lambda x: (dB_aux[x] - 2 * b * out_deg[x], -x)) if cands else None
                if tail != best:
                    report.fail("phase1_argmax", turn, line, f"Phase-1 tail {tail}, expected {best}")
                if tail is not None:
                    out_deg[tail] += 1
    if cur_turn >= 0:
        last_maker_ended = t.outcome not in ("faulty",)
        if breaker_in_turn != expected_k and last_maker_ended:
            report.fail("turn_discipline", cur_turn, turn_line,
                        f"Breaker claimed {breaker_in_turn} edges, expected {expected_k}")
    report.claims = claim_count
    for problem in board.check_consistency():
        report.fail("degree_consistency", cur_turn, None, problem)
    if model is not None and not stage1_done:
        for problem in model.partition_problems():
            report.fail("registry_partition", cur_turn, None, problem)
    for key, val in (("maker_moves", board.maker_moves), ("breaker_moves", board.breaker_moves)):
        if key in t.footer and t.footer[key] != val:
            report.fail("degree_consistency", cur_turn, None, f"footer {key}={t.footer[key]} but replay has {val}")

    if params is not None and stage1_done:
        budget = params.stage2_budget_factor * aux_p
        if stage2_claims > budget:
            report.fail("stage2_budget", cur_turn, None, f"{stage2_claims} stage-2 claims exceed {budget}")

    if t.outcome == "maker_win":
        verdict = verify_perfect_matching(board, [tuple(e) for e in t.footer.get("matching", [])])
        if not verdict.ok:
            report.fail("verdict", cur_turn, None, f"stored matching does not verify: {verdict.to_dict()}")
        if win_event is not None and leaf_owner:
            N = [edge(*e) for e in win_event.get("N", [])]
            hit = [leaf_owner.get(x) for e in N for x in e]
            if None in hit or sorted(hit) != list(range(aux_p)):
                report.fail("leaf_matching", cur_turn, win_event.get("_line"),
                            "leaf matching does not use exactly one leaf per nice tree")
            if any(not board.is_maker(*e) for e in N):
                report.fail("leaf_matching", cur_turn, win_event.get("_line"), "leaf matching uses a non-Maker edge")
    elif t.outcome == "faulty":
        report.fail("verdict", cur_turn, None, f"game aborted as faulty: {t.footer.get('code')}")
    if t.outcome == "maker_win" and model is not None and not stage1_done:
        report.warnings.append("win recorded without a stage-1 end event")
    return report


def _breaker_nbrs(board: Board, x: int) -> set[int]:
    return set(iter_bits(board.breaker_adj[x]))


def _growth_choice(m: _Stage1Model) -> int | None:
    best = None
    if m.singles:
        best = (1, min(m.singles))
    for r, lv in m.leaves.items():
        k = len(lv)
        if k < m.params.ell and (best is None or (k, r) < best):
            best = (k, r)
    return None if best is None else best[1]
