"""Seeded generative-model simulator with position-keyed random draws.

Every uniform variate is a hash of ``(master_seed, phase, h, k, s, index, side)``
so the draws for a round do not depend on the order in which cells are
visited. The hash is the splitmix64 finalizer folded over the key fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game_model import MarkovGame

PHASE_OPPONENT = 1
PHASE_TRANSITION = 2
SIDE_MAX = 0
SIDE_MIN = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(n) for n in (30, 27, 31, 11))


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def key_hash(seed: int, *fields) -> np.ndarray:
    """64-bit hash of a key; ``fields`` may be integers or broadcastable int arrays."""
    with np.errstate(over="ignore"):
        z = _mix(np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        for f in fields:
            f = np.asarray(f).astype(np.uint64)
            z = _mix(z + (f + np.uint64(1)) * _GOLDEN)
    return z


def key_uniform(seed: int, *fields) -> np.ndarray:
    """Uniform draw(s) in [0, 1) with 53 bits taken from :func:`key_hash`."""
    return (key_hash(seed, *fields) >> _S11).astype(np.float64) * 2.0 ** -53


def inverse_cdf(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index sampled from each row of ``rows`` (last axis) by inverse CDF with uniforms ``u``."""
    cdf = np.cumsum(rows, axis=-1)
    target = u * cdf[..., -1]
    idx = np.sum(cdf <= target[..., None], axis=-1)
    return np.minimum(idx, rows.shape[-1] - 1)


@dataclass(frozen=True)
class RoundSample:
    """One round of samples. Opponent actions are deliberately not recorded."""

    r_max: np.ndarray     # (S, A)
    r_min: np.ndarray     # (S, B)
    next_max: np.ndarray  # (S, A) next-state indices
    next_min: np.ndarray  # (S, B)


class Simulator:
    """Generative model over a fixed game; counts every transition query."""

    def __init__(self, game: MarkovGame, master_seed: int):
        self.game = game
        self.master_seed = int(master_seed)
        self.call_count = 0

    def _check_index(self, h, s, a, b):
        S, A, B, H = self.game.dims
        if not (0 <= h < H and 0 <= s < S and 0 <= a < A and 0 <= b < B):
            raise IndexError(f"query (h={h}, s={s}, a={a}, b={b}) out of range for {(H, S, A, B)}")

    def sample_transition(self, h: int, s: int, a: int, b: int, call_key: tuple[int, ...]):
        """One generative-model call. Returns ``(next_state, reward)``."""
        self._check_index(h, s, a, b)
        u = key_uniform(self.master_seed, PHASE_TRANSITION, h, *call_key)
        s_next = int(inverse_cdf(self.game.P[h, s, a, b], u))
        self.call_count += 1
        return s_next, float(self.game.r[h, s, a, b])

    def sample_transitions(self, h: int, s, a, b, keys: tuple) -> np.ndarray:
        """Vectorized :meth:`sample_transition` over equally shaped index arrays.

        ``keys`` is a tuple of arrays that broadcast against ``s``; the element
        at each position equals the scalar ``call_key`` of that draw.
        """
        s, a, b = np.broadcast_arrays(s, a, b)
        u = key_uniform(self.master_seed, PHASE_TRANSITION, h, *keys)
        s_next = inverse_cdf(self.game.P[h, s, a, b], u)
        self.call_count += s.size
        return s_next


def sampling_round(sim: Simulator, h: int, k: int, mu_h, nu_h) -> RoundSample:
    """Draw one round of ``S * (A + B)`` samples at step ``h``, round ``k``.

    For each ``(s, a)`` an opponent action ``b ~ nu_h(.|s)`` is drawn and then
    ``s' ~ P_h(.|s, a, b)``; the min-player loop is the mirror image.
    """
    game = sim.game
    S, A, B, _ = game.dims
    mu_h = np.asarray(mu_h, dtype=np.float64)
    nu_h = np.asarray(nu_h, dtype=np.float64)
    if mu_h.shape != (S, A) or nu_h.shape != (S, B):
        raise ValueError(f"policy rows have shapes {mu_h.shape}, {nu_h.shape}; "
                         f"expected {(S, A)}, {(S, B)}")
    seed = sim.master_seed

    s_a = np.repeat(np.arange(S), A).reshape(S, A)
    a_idx = np.tile(np.arange(A), S).reshape(S, A)
    u = key_uniform(seed, PHASE_OPPONENT, h, k, s_a, a_idx, SIDE_MAX)
    b_drawn = inverse_cdf(nu_h[s_a], u)
    next_max = sim.sample_transitions(h, s_a, a_idx, b_drawn, (k, s_a, a_idx, SIDE_MAX))
    r_max = game.r[h, s_a, a_idx, b_drawn]

    s_b = np.repeat(np.arange(S), B).reshape(S, B)
    b_idx = np.tile(np.arange(B), S).reshape(S, B)
    u = key_uniform(seed, PHASE_OPPONENT, h, k, s_b, b_idx, SIDE_MIN)
    a_drawn = inverse_cdf(mu_h[s_b], u)
    next_min = sim.sample_transitions(h, s_b, a_drawn, b_idx, (k, s_b, b_idx, SIDE_MIN))
    r_min = game.r[h, s_b, a_drawn, b_idx]

    return RoundSample(r_max, r_min, next_max, next_min)
