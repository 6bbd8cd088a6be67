"""Game state for the biased Maker-Breaker game on the complete graph K_n.

Edge ownership is kept as one integer bitset per vertex and per player, so
claim lookups are a shift and a mask, and "unclaimed neighbours of v" is a
single bitwise expression.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import Any

Edge = tuple[int, int]


class IllegalMoveError(ValueError):
    """Raised when a player tries to claim an edge that is already owned."""


class ParamsError(ValueError):
    pass


class ClaimState(enum.IntEnum):
    UNCLAIMED = 0
    MAKER = 1
    BREAKER = 2


def edge(u: int, v: int) -> Edge:
    """Canonical form of the unordered edge {u, v}."""
    if u == v:
        raise ValueError(f"self-loop at vertex {u}")
    return (u, v) if u < v else (v, u)


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def lowest_bit(mask: int) -> int:
    """Index of the lowest set bit, or -1 for an empty mask."""
    return (mask & -mask).bit_length() - 1


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


@dataclass(frozen=True)
class Params:
    """Every tunable constant of the two-stage Maker strategy.

    ``profile`` is ``"paper"`` when the values come straight from the
    asymptotic formulas, ``"desk"`` when some were overridden or scaled
    for small boards.
    """

    n: int
    b: int
    f: float
    ell: int
    troublesome_threshold: float
    p_min: int
    p_max: int
    pairing_stop: int
    b_max: int
    stage2_outdeg: int = 10
    stage2_budget_factor: int = 14
    profile: str = "paper"
    log_base: str = "e"

    def __post_init__(self) -> None:
        if self.ell < 2:
            raise ParamsError(f"ell must be at least 2, got {self.ell}")
        if self.troublesome_threshold <= 0:
            raise ParamsError("troublesome_threshold must be positive")
        if self.log_base != "e":
            raise ParamsError("only natural logarithms are supported")
        if self.p_min < 1 or self.p_max < self.p_min:
            raise ParamsError(f"bad p bounds [{self.p_min}, {self.p_max}]")
        if self.stage2_outdeg < 1 or self.stage2_budget_factor < 1:
            raise ParamsError("stage-2 constants must be positive")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Params:
        return cls(**data)


_OVERRIDABLE = {
    "b", "ell", "troublesome_threshold", "p_min", "p_max", "pairing_stop",
    "stage2_outdeg", "stage2_budget_factor",
}


def paper_b_max(n: int, f: float) -> float:
    ln = math.log(n)
    return n / ln - f * n / ln ** 1.25


def derive_params(n: int, f: float = 1.0, profile: str = "paper", **overrides: Any) -> Params:
    """Evaluate the strategy constants for a board of ``n`` vertices.

    Paper profile: leaf target ``ceil(sqrt(f) * ln(n)**0.25)``, troublesome
    threshold ``n / sqrt(ln n)``, bias ceiling
    ``floor(n/ln n - f*n/(ln n)**1.25)``, ``p_min = ceil(n/sqrt(ln n))``
    and pairing stop ``2*p_min + 1``. The ``"paper"`` profile rejects a
    non-positive bias ceiling.

    Desk profile keeps the same threshold but rescales ``p_min`` so that
    the trees fit on a small board, and accepts an override for every
    field. Unrecognised override names raise ``ParamsError``.
    """
    if n < 4:
        raise ParamsError(f"n must be at least 4, got {n}")
    if f <= 0:
        raise ParamsError("f must be positive")
    if profile not in ("paper", "desk"):
        raise ParamsError(f"unknown profile {profile!r}")
    unknown = set(overrides) - _OVERRIDABLE
    if unknown:
        raise ParamsError(f"unknown override(s): {sorted(unknown)}")
    if profile == "paper" and set(overrides) - {"b"}:
        raise ParamsError("only the bias may be set in the 'paper' profile")

    ln = math.log(n)
    raw_b_max = paper_b_max(n, f)
    b_max = math.floor(raw_b_max)
    if profile == "paper" and b_max <= 0:
        raise ParamsError(
            f"f={f} is too large for n={n}: n/ln n - f n/(ln n)^(5/4) = {raw_b_max:.3f} <= 0"
        )
    ell = math.ceil(math.sqrt(f) * ln ** 0.25)
    threshold = n / math.sqrt(ln)

    if profile == "paper":
        b = overrides.get("b", b_max)
        if not 0 <= b <= b_max:
            raise ParamsError(f"bias {b} outside [0, {b_max}] for the 'paper' profile")
        p_min = math.ceil(n / math.sqrt(ln))
        p_max = math.floor(4 * n / math.sqrt(ln) + 1)
        return Params(
            n=n, b=b, f=f, ell=ell, troublesome_threshold=threshold,
            p_min=p_min, p_max=p_max, pairing_stop=2 * p_min + 1, b_max=b_max,
            profile="paper",
        )

    ell = overrides.get("ell", max(ell, 2))
    threshold = overrides.get("troublesome_threshold", threshold)
    # each finished tree holds 4*ell - 3 vertices; pairing stops near 2*p_min trees
    p_min = overrides.get("p_min", max(1, math.ceil(n / (4 * (4 * ell - 3)))))
    return Params(
        n=n,
        b=overrides.get("b", max(b_max, 0)),
        f=f,
        ell=ell,
        troublesome_threshold=threshold,
        p_min=p_min,
        p_max=overrides.get("p_max", 4 * p_min + 1),
        pairing_stop=overrides.get("pairing_stop", 2 * p_min + 1),
        b_max=b_max,
        stage2_outdeg=overrides.get("stage2_outdeg", 10),
        stage2_budget_factor=overrides.get("stage2_budget_factor", 14),
        profile="desk",
    )


class Board:
    """Tri-state edge ownership over K_n plus degree and move counters.

    ``b = 0`` is accepted for desk experiments with a passive Breaker.
    """

    def __init__(self, n: int, b: int) -> None:
        if n < 4 or n % 2:
            raise ValueError(f"n must be even and at least 4, got {n}")
        if b < 0:
            raise ValueError(f"bias must be non-negative, got {b}")
        self.n = n
        self.b = b
        self.maker_adj = [0] * n
        self.breaker_adj = [0] * n
        self.dM = [0] * n
        self.dB = [0] * n
        self.maker_moves = 0
        self.breaker_moves = 0
        self.turn = 0
        self.history: list[tuple[int, int, ClaimState]] = []
        self.unclaimed_count = n * (n - 1) // 2
        self._full = (1 << n) - 1

    @property
    def version(self) -> int:
        """Number of claims so far; strategies must leave it unchanged."""
        return len(self.history)

    @property
    def total_edges(self) -> int:
        return self.n * (self.n - 1) // 2

    def state(self, u: int, v: int) -> ClaimState:
        if (self.maker_adj[u] >> v) & 1:
            return ClaimState.MAKER
        if (self.breaker_adj[u] >> v) & 1:
            return ClaimState.BREAKER
        return ClaimState.UNCLAIMED

    def is_unclaimed(self, u: int, v: int) -> bool:
        return u != v and not ((self.maker_adj[u] | self.breaker_adj[u]) >> v) & 1

    def is_maker(self, u: int, v: int) -> bool:
        return bool((self.maker_adj[u] >> v) & 1)

    def is_breaker(self, u: int, v: int) -> bool:
        return bool((self.breaker_adj[u] >> v) & 1)

    def unclaimed_mask(self, v: int) -> int:
        return self._full & ~(self.maker_adj[v] | self.breaker_adj[v] | (1 << v))

    def unclaimed_degree(self, v: int) -> int:
        return self.n - 1 - self.dM[v] - self.dB[v]

    def claim(self, e: Edge, who: ClaimState) -> None:
        u, v = e
        if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
            raise IllegalMoveError(f"{e} is not an edge of K_{self.n}")
        if not self.is_unclaimed(u, v):
            raise IllegalMoveError(f"edge {edge(u, v)} already claimed by {self.state(u, v).name}")
        if who is ClaimState.MAKER:
            self.maker_adj[u] |= 1 << v
            self.maker_adj[v] |= 1 << u
            self.dM[u] += 1
            self.dM[v] += 1
            self.maker_moves += 1
        elif who is ClaimState.BREAKER:
            self.breaker_adj[u] |= 1 << v
            self.breaker_adj[v] |= 1 << u
            self.dB[u] += 1
            self.dB[v] += 1
            self.breaker_moves += 1
        else:
            raise ValueError("claims must be made by MAKER or BREAKER")
        self.unclaimed_count -= 1
        self.history.append((min(u, v), max(u, v), who))

    def is_troublesome(self, v: int, params: Params) -> bool:
        return self.dB[v] > params.troublesome_threshold

    def unclaimed_between(self, A: Iterable[int], B: Iterable[int]) -> list[Edge]:
        """Unclaimed edges with one end in ``A`` and the other in ``B``.

        Sorted canonically; the sets must be disjoint.
        """
        a_set, b_set = set(A), set(B)
        if a_set & b_set:
            raise ValueError(f"sets overlap on {sorted(a_set & b_set)}")
        b_mask = mask_of(b_set)
        out = []
        for a in a_set:
            for w in iter_bits(self.unclaimed_mask(a) & b_mask):
                out.append(edge(a, w))
        out.sort()
        return out

    def maker_edges(self) -> list[Edge]:
        return [(u, w) for u in range(self.n) for w in iter_bits(self.maker_adj[u] >> (u + 1) << (u + 1))]

    def breaker_edges(self) -> list[Edge]:
        return [(u, w) for u in range(self.n) for w in iter_bits(self.breaker_adj[u] >> (u + 1) << (u + 1))]

    def check_consistency(self) -> list[str]:
        """Recount degrees from the bitsets and compare with the counters."""
        problems = []
        for v in range(self.n):
            if self.maker_adj[v] & self.breaker_adj[v]:
                problems.append(f"vertex {v}: edge owned by both players")
            if (self.maker_adj[v] | self.breaker_adj[v]) >> v & 1:
                problems.append(f"vertex {v}: self-loop")
            if self.maker_adj[v].bit_count() != self.dM[v]:
                problems.append(f"vertex {v}: dM counter {self.dM[v]} != {self.maker_adj[v].bit_count()}")
            if self.breaker_adj[v].bit_count() != self.dB[v]:
                problems.append(f"vertex {v}: dB counter {self.dB[v]} != {self.breaker_adj[v].bit_count()}")
        if sum(self.dM) != 2 * self.maker_moves:
            problems.append("sum of dM differs from twice the Maker edge count")
        if sum(self.dB) != 2 * self.breaker_moves:
            problems.append("sum of dB differs from twice the Breaker edge count")
        if self.unclaimed_count != self.total_edges - self.maker_moves - self.breaker_moves:
            problems.append("unclaimed counter out of sync")
        return problems


def new_board(n: int, b: int) -> Board:
    return Board(n, b)


def is_troublesome(board: Board, v: int, params: Params) -> bool:
    return board.is_troublesome(v, params)


def unclaimed_between(board: Board, A: Iterable[int], B: Iterable[int]) -> list[Edge]:
    return board.unclaimed_between(A, B)
