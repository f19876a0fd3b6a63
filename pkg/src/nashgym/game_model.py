"""Tabular finite-horizon two-player zero-sum Markov games.

A game stores dense float64 tensors ``P[h, s, a, b, s']`` and ``r[h, s, a, b]``
with ``h`` running over ``0..H-1``. Policies are plain arrays of shape
``(H, S, A)`` (max player) or ``(H, S, B)`` (min player).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

ROW_TOL = 1e-9
RENORM_SLACK = 8 * np.finfo(np.float64).eps


class GameValidationError(ValueError):
    """A game or policy tensor violates one of its invariants."""


class GameFileError(ValueError):
    """A game file does not match the expected schema."""


@dataclass(frozen=True)
class MarkovGame:
    P: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        r = np.array(self.r, dtype=np.float64)
        if P.ndim != 5 or r.ndim != 4:
            raise GameValidationError(
                f"expected P with 5 axes and r with 4 axes, got {P.ndim} and {r.ndim}")
        if P.shape[:4] != r.shape or P.shape[1] != P.shape[4]:
            raise GameValidationError(
                f"inconsistent shapes P{P.shape} and r{r.shape}")
        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)

    @property
    def H(self) -> int:
        return self.r.shape[0]

    @property
    def S(self) -> int:
        return self.r.shape[1]

    @property
    def A(self) -> int:
        return self.r.shape[2]

    @property
    def B(self) -> int:
        return self.r.shape[3]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.S, self.A, self.B, self.H

    def __eq__(self, other):
        if not isinstance(other, MarkovGame):
            return NotImplemented
        return (self.P.shape == other.P.shape
                and np.array_equal(self.P, other.P)
                and np.array_equal(self.r, other.r))

    __hash__ = None


@dataclass(frozen=True)
class JointMixturePolicy:
    """Per-step mixture of product policies.

    ``weights[h, k]`` is the weight of component ``k`` at step ``h``;
    ``max_rows[h, k]`` has shape ``(S, A)`` and ``min_rows[h, k]`` shape ``(S, B)``.
    """

    weights: np.ndarray
    max_rows: np.ndarray
    min_rows: np.ndarray

    def __post_init__(self):
        for name in ("weights", "max_rows", "min_rows"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        w, mx, mn = self.weights, self.max_rows, self.min_rows
        if w.ndim != 2 or mx.ndim != 4 or mn.ndim != 4:
            raise GameValidationError("mixture arrays have the wrong number of axes")
        if mx.shape[:2] != w.shape or mn.shape[:2] != w.shape or mx.shape[2] != mn.shape[2]:
            raise GameValidationError(
                f"mixture shapes disagree: weights{w.shape} max{mx.shape} min{mn.shape}")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1.0) > ROW_TOL):
            raise GameValidationError("mixture weights must be nonnegative and sum to 1 per step")
        _check_rows(mx, "max-player mixture row")
        _check_rows(mn, "min-player mixture row")


def _check_rows(probs: np.ndarray, what: str) -> None:
    neg = np.argwhere(probs < 0)
    if neg.size:
        raise GameValidationError(f"{what} {tuple(neg[0][:-1])} has a negative entry")
    bad = np.argwhere(np.abs(probs.sum(axis=-1) - 1.0) > ROW_TOL)
    if bad.size:
        raise GameValidationError(f"{what} {tuple(bad[0])} does not sum to 1")


def validate_game(game: MarkovGame) -> None:
    """Raise :class:`GameValidationError` naming the first violated ``(h, s, a, b)``."""
    P, r = game.P, game.r
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(r))):
        raise GameValidationError("game tensors contain non-finite entries")
    neg = np.argwhere(P < 0)
    if neg.size:
        h, s, a, b, _ = neg[0]
        raise GameValidationError(
            f"negative transition probability at (h={h}, s={s}, a={a}, b={b})")
    sums = P.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        h, s, a, b = bad[0]
        raise GameValidationError(
            f"transition row (h={h}, s={s}, a={a}, b={b}) sums to {float(sums[h, s, a, b])!r}, not 1")
    bad = np.argwhere((r < 0) | (r > 1))
    if bad.size:
        h, s, a, b = bad[0]
        raise GameValidationError(
            f"reward {float(r[h, s, a, b])!r} at (h={h}, s={s}, a={a}, b={b}) is outside [0, 1]")


def validate_policy(probs: np.ndarray, game: MarkovGame, side: str) -> np.ndarray:
    """Return ``probs`` as a float array after checking shape and row sums.

    ``side`` is ``"max"`` or ``"min"``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n = game.A if side == "max" else game.B
    if probs.shape != (game.H, game.S, n):
        raise GameValidationError(
            f"{side}-player policy has shape {probs.shape}, expected {(game.H, game.S, n)}")
    _check_rows(probs, f"{side}-player policy row")
    return probs


def uniform_policy(game: MarkovGame, side: str) -> np.ndarray:
    n = game.A if side == "max" else game.B
    return np.full((game.H, game.S, n), 1.0 / n)


def random_game(S: int, A: int, B: int, H: int, seed: int) -> MarkovGame:
    """Random game with full-support transitions and uniform rewards in [0, 1]."""
    if min(S, A, B, H) < 1:
        raise ValueError(f"all dimensions must be >= 1, got S={S} A={A} B={B} H={H}")
    rng = np.random.default_rng(seed)
    # 1 - U[0,1) lies in (0, 1]
    raw = 1.0 - rng.random((H, S, A, B, S))
    P = raw / raw.sum(axis=-1, keepdims=True)
    r = rng.random((H, S, A, B))
    return MarkovGame(P, r)


def matching_pennies() -> MarkovGame:
    r = np.eye(2).reshape(1, 1, 2, 2)
    P = np.ones((1, 1, 2, 2, 1))
    return MarkovGame(P, r)


def lower_bound_game(mdp_P, mdp_R, B: int) -> MarkovGame:
    """Embed a single-agent MDP into a game whose min player has ``B`` inert actions.

    ``mdp_P`` has shape ``(H, S, A, S)`` and ``mdp_R`` shape ``(H, S, A)``.
    """
    mdp_P = np.asarray(mdp_P, dtype=np.float64)
    mdp_R = np.asarray(mdp_R, dtype=np.float64)
    if B < 1:
        raise ValueError("B must be >= 1")
    if mdp_P.ndim != 4 or mdp_R.ndim != 3 or mdp_P.shape[:3] != mdp_R.shape:
        raise GameValidationError(
            f"MDP shapes P{mdp_P.shape} and R{mdp_R.shape} are inconsistent")
    P = np.repeat(mdp_P[:, :, :, None, :], B, axis=3)
    r = np.repeat(mdp_R[:, :, :, None], B, axis=3)
    game = MarkovGame(P, r)
    validate_game(game)
    return game


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_nested(arr: np.ndarray) -> str:
    if arr.ndim == 1:
        return "[" + ",".join(_fmt(x) for x in arr) + "]"
    return "[" + ",".join(_dump_nested(sub) for sub in arr) + "]"


def dumps_array(arr) -> str:
    """Nested-list JSON text for ``arr`` with 17 significant digits per float."""
    return _dump_nested(np.asarray(arr, dtype=np.float64))


def dumps_game(game: MarkovGame) -> str:
    S, A, B, H = game.dims
    return (f'{{"S":{S},"A":{A},"B":{B},"H":{H},'
            f'"P":{dumps_array(game.P)},"r":{dumps_array(game.r)}}}\n')


def save_game(game: MarkovGame, path: str | os.PathLike) -> None:
    with open(path, "w") as f:
        f.write(dumps_game(game))


def game_from_dict(data: dict, renormalize: bool = True) -> MarkovGame:
    if not isinstance(data, dict):
        raise GameFileError("game file must hold a JSON object")
    for key in ("S", "A", "B", "H", "P", "r"):
        if key not in data:
            raise GameFileError(f"game file is missing field {key!r}")
    dims = {}
    for key in ("S", "A", "B", "H"):
        val = data[key]
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise GameFileError(f"field {key!r} must be a positive integer, got {val!r}")
        dims[key] = val
    S, A, B, H = dims["S"], dims["A"], dims["B"], dims["H"]
    try:
        P = np.array(data["P"], dtype=np.float64)
        r = np.array(data["r"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise GameFileError(f"ragged or non-numeric tensor: {exc}") from None
    if P.shape != (H, S, A, B, S):
        raise GameFileError(f"P has shape {P.shape}, expected {(H, S, A, B, S)}")
    if r.shape != (H, S, A, B):
        raise GameFileError(f"r has shape {r.shape}, expected {(H, S, A, B)}")
    game = MarkovGame(P, r)
    validate_game(game)
    if renormalize:
        # rows already normalized to float precision are kept bit-exact
        sums = P.sum(axis=-1, keepdims=True)
        off = np.abs(sums - 1.0) > RENORM_SLACK
        if np.any(off):
            game = MarkovGame(np.where(off, P / sums, P), r)
    return game


def load_game(path: str | os.PathLike) -> MarkovGame:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise GameFileError(f"{path}: not valid JSON ({exc})") from None
    return game_from_dict(data)
