"""Biased Maker-Breaker perfect matching game on K_n with a two-stage Maker."""

from __future__ import annotations

__version__ = "0.1.0"

from .board import Board, ClaimState, IllegalMoveError, Params, ParamsError, derive_params, edge
from .game import GameTranscript, run_game
from .maker import NullMaker, TwoStageMaker
from .breakers import BREAKERS, make_breaker

__all__ = [
    "BREAKERS",
    "Board",
    "ClaimState",
    "GameTranscript",
    "IllegalMoveError",
    "NullMaker",
    "Params",
    "ParamsError",
    "TwoStageMaker",
    "__version__",
    "derive_params",
    "edge",
    "make_breaker",
    "run_game",
]
