"""Exact dynamic-programming oracles for tabular zero-sum Markov games.

Value tables are arrays of shape ``(H + 1, S)``; row ``h`` holds the value at
step ``h`` (0-based) and the last row is the zero terminal value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game_model import (GameValidationError, JointMixturePolicy, MarkovGame,
                         validate_policy)
from .matrix_game import solve_matrix_game

TIE_TOL = 1e-12


@dataclass(frozen=True)
class NeGapReport:
    gap: float
    per_state: np.ndarray
    max_side: np.ndarray
    min_side: np.ndarray

    def as_dict(self) -> dict:
        return {"gap": self.gap, "perState": self.per_state.tolist(),
                "maxSide": self.max_side.tolist(), "minSide": self.min_side.tolist()}


def joint_q(game: MarkovGame, h: int, v_next: np.ndarray) -> np.ndarray:
    """``r_h(s,a,b) + <P_h(.|s,a,b), v_next>`` as an ``(S, A, B)`` array."""
    return game.r[h] + game.P[h] @ v_next


def _argmax_low(values: np.ndarray) -> np.ndarray:
    # lowest index within TIE_TOL of the row maximum
    best = values.max(axis=-1, keepdims=True)
    return np.argmax(values >= best - TIE_TOL, axis=-1)


def eval_product_policy(game: MarkovGame, mu, nu) -> np.ndarray:
    mu = validate_policy(mu, game, "max")
    nu = validate_policy(nu, game, "min")
    V = np.zeros((game.H + 1, game.S))
    for h in reversed(range(game.H)):
        Q = joint_q(game, h, V[h + 1])
        V[h] = np.einsum("sa,sab,sb->s", mu[h], Q, nu[h])
    return V


def best_response_max(game: MarkovGame, nu) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic best response of the max player to ``nu`` and its value table."""
    nu = validate_policy(nu, game, "min")
    V = np.zeros((game.H + 1, game.S))
    policy = np.zeros((game.H, game.S, game.A))
    for h in reversed(range(game.H)):
        q = np.einsum("sab,sb->sa", joint_q(game, h, V[h + 1]), nu[h])
        act = _argmax_low(q)
        policy[h, np.arange(game.S), act] = 1.0
        V[h] = q[np.arange(game.S), act]
    return policy, V


def best_response_min(game: MarkovGame, mu) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic best response of the min player to ``mu`` and its value table."""
    mu = validate_policy(mu, game, "max")
    V = np.zeros((game.H + 1, game.S))
    policy = np.zeros((game.H, game.S, game.B))
    for h in reversed(range(game.H)):
        q = np.einsum("sa,sab->sb", mu[h], joint_q(game, h, V[h + 1]))
        act = _argmax_low(-q)
        policy[h, np.arange(game.S), act] = 1.0
        V[h] = q[np.arange(game.S), act]
    return policy, V


def ne_gap(game: MarkovGame, mu, nu) -> NeGapReport:
    """Largest unilateral improvement available to either player at step 0."""
    v_pair = eval_product_policy(game, mu, nu)[0]
    v_br_max = best_response_max(game, nu)[1][0]
    v_br_min = best_response_min(game, mu)[1][0]
    max_side = v_br_max - v_pair
    min_side = v_pair - v_br_min
    per_state = np.maximum(max_side, min_side)
    return NeGapReport(float(per_state.max()), per_state, max_side, min_side)


def eval_joint_mixture(game: MarkovGame, mix: JointMixturePolicy) -> np.ndarray:
    H, K, S, A = mix.max_rows.shape
    if (H, S, A, mix.min_rows.shape[3]) != (game.H, game.S, game.A, game.B):
        raise GameValidationError(
            f"mixture dimensions {(H, S, A, mix.min_rows.shape[3])} do not match the game")
    V = np.zeros((game.H + 1, game.S))
    for h in reversed(range(game.H)):
        Q = joint_q(game, h, V[h + 1])
        per_k = np.einsum("ksa,sab,ksb->ks", mix.max_rows[h], Q, mix.min_rows[h])
        V[h] = mix.weights[h] @ per_k
    return V


def solve_nash_exact(game: MarkovGame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nash policies and value table by backward induction over per-state matrix games."""
    V = np.zeros((game.H + 1, game.S))
    mu = np.zeros((game.H, game.S, game.A))
    nu = np.zeros((game.H, game.S, game.B))
    for h in reversed(range(game.H)):
        Q = joint_q(game, h, V[h + 1])
        for s in range(game.S):
            x, y, _ = solve_matrix_game(Q[s])
            mu[h, s], nu[h, s] = x, y
            V[h, s] = x @ Q[s] @ y
    return mu, nu, V
