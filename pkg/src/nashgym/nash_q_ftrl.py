"""Nash-Q-FTRL: decentralized Q-learning with FTRL policy updates.

For each step ``h`` (last to first) both players run ``K`` rounds of
sampling, averaged Q updates with rate ``alpha_k``, and exponential-weights
policy updates with rate ``eta_{k+1}``. The output policies are the
``alpha_k^K``-weighted mixtures of the per-round iterates, and the value
estimates are the matching weighted one-step values plus (minus) a
variance-aware bonus, clipped to ``[0, H - h]`` (0-based ``h``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ftrl
from .game_model import JointMixturePolicy, MarkovGame, dumps_array, validate_game
from .generative_model import Simulator, sampling_round


@dataclass(frozen=True)
class LearnerConfig:
    K: int
    c_alpha: float = ftrl.DEFAULT_C_ALPHA
    c_b: float = 0.5
    delta: float = 0.01
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.c_b < 0:
            raise ValueError(f"c_b must be nonnegative, got {self.c_b}")
        if self.c_alpha <= 0:
            raise ValueError(f"c_alpha must be positive, got {self.c_alpha}")


@dataclass
class RunTrace:
    """Per-round samples and policy snapshots, indexed ``[h, k-1, ...]``."""

    weights: np.ndarray   # (K,) alpha_k^K
    r_max: np.ndarray     # (H, K, S, A)
    next_max: np.ndarray  # (H, K, S, A)
    r_min: np.ndarray     # (H, K, S, B)
    next_min: np.ndarray  # (H, K, S, B)
    mu: np.ndarray        # (H, K, S, A) policy used in round k
    nu: np.ndarray        # (H, K, S, B)

    @classmethod
    def empty(cls, game: MarkovGame, K: int, weights: np.ndarray) -> "RunTrace":
        S, A, B, H = game.dims
        return cls(weights=np.asarray(weights, dtype=np.float64),
                   r_max=np.zeros((H, K, S, A)), next_max=np.zeros((H, K, S, A), dtype=np.int64),
                   r_min=np.zeros((H, K, S, B)), next_min=np.zeros((H, K, S, B), dtype=np.int64),
                   mu=np.zeros((H, K, S, A)), nu=np.zeros((H, K, S, B)))

    @property
    def H(self) -> int:
        return self.r_max.shape[0]

    @property
    def K(self) -> int:
        return self.r_max.shape[1]


@dataclass
class LearnerResult:
    mu_hat: np.ndarray
    nu_hat: np.ndarray
    v_bar: np.ndarray
    v_under: np.ndarray
    sample_count: int
    config: LearnerConfig
    trace: RunTrace | None = field(default=None, repr=False)

    def to_json(self) -> str:
        cfg = json.dumps(asdict(self.config), sort_keys=True)
        return (f'{{"muHat":{dumps_array(self.mu_hat)},"nuHat":{dumps_array(self.nu_hat)},'
                f'"vBar":{dumps_array(self.v_bar)},"vUnder":{dumps_array(self.v_under)},'
                f'"sampleCount":{self.sample_count},"config":{cfg}}}\n')


def bonus_scale(config: LearnerConfig, S: int, A: int, B: int, H: int) -> float:
    """``c_b * sqrt(ln^3(K S (A + B) / delta) / (K H))``."""
    K = config.K
    log_term = math.log(K * S * (A + B) / config.delta)
    return config.c_b * math.sqrt(log_term ** 3 / (K * H))


def bonus(var_acc, config: LearnerConfig, S: int, A: int, B: int, H: int):
    """Bonus for an accumulated ``sum_k alpha_k^K (Var_k + H)``."""
    return bonus_scale(config, S, A, B, H) * np.asarray(var_acc, dtype=np.float64)


def _weighted_var(pi: np.ndarray, q: np.ndarray) -> np.ndarray:
    mean = np.einsum("sa,sa->s", pi, q)
    return np.einsum("sa,sa->s", pi, (q - mean[:, None]) ** 2)


def run(game: MarkovGame, config: LearnerConfig) -> LearnerResult:
    validate_game(game)
    S, A, B, H = game.dims
    K = config.K
    sched = ftrl.WeightSchedule(K, config.c_alpha, H)
    sim = Simulator(game, config.seed)
    scale = bonus_scale(config, S, A, B, H)
    trace = RunTrace.empty(game, K, ftrl.alpha_weights(sched, K)) if config.record_trace else None

    v_bar = np.zeros((H + 1, S))
    v_under = np.zeros((H + 1, S))
    mu_hat = np.zeros((H, S, A))
    nu_hat = np.zeros((H, S, B))

    for h in reversed(range(H)):
        Q_max = np.zeros((S, A))
        Q_min = np.zeros((S, B))
        mu = np.full((S, A), 1.0 / A)
        nu = np.full((S, B), 1.0 / B)
        mix_mu = np.zeros((S, A))
        mix_nu = np.zeros((S, B))
        v_acc_max = np.zeros(S)
        v_acc_min = np.zeros(S)
        var_acc_max = np.zeros(S)
        var_acc_min = np.zeros(S)

        for k in range(1, K + 1):
            rs = sampling_round(sim, h, k, mu, nu)
            q_max = rs.r_max + v_bar[h + 1][rs.next_max]
            q_min = rs.r_min + v_under[h + 1][rs.next_min]

            a = sched.alpha[k]
            Q_max = (1 - a) * Q_max + a * q_max
            Q_min = (1 - a) * Q_min + a * q_min
            mix_mu = (1 - a) * mix_mu + a * mu
            mix_nu = (1 - a) * mix_nu + a * nu
            v_acc_max = (1 - a) * v_acc_max + a * np.einsum("sa,sa->s", mu, q_max)
            v_acc_min = (1 - a) * v_acc_min + a * np.einsum("sb,sb->s", nu, q_min)
            var_acc_max = (1 - a) * var_acc_max + a * (_weighted_var(mu, q_max) + H)
            var_acc_min = (1 - a) * var_acc_min + a * (_weighted_var(nu, q_min) + H)

            if trace is not None:
                i = k - 1
                trace.r_max[h, i], trace.next_max[h, i] = rs.r_max, rs.next_max
                trace.r_min[h, i], trace.next_min[h, i] = rs.r_min, rs.next_min
                trace.mu[h, i], trace.nu[h, i] = mu, nu

            # max player ascends Q_max, min player descends Q_min
            mu = ftrl.exp_weights(-Q_max, sched.eta[k + 1])
            nu = ftrl.exp_weights(Q_min, sched.eta[k + 1])

        mu_hat[h] = mix_mu / mix_mu.sum(axis=1, keepdims=True)
        nu_hat[h] = mix_nu / mix_nu.sum(axis=1, keepdims=True)
        v_bar[h] = np.minimum(v_acc_max + scale * var_acc_max, H - h)
        v_under[h] = np.maximum(v_acc_min - scale * var_acc_min, 0.0)

    return LearnerResult(mu_hat, nu_hat, v_bar, v_under, sim.call_count, config, trace)


def _require(trace):
    if trace is None:
        raise ValueError("run the learner with record_trace=True to replay its samples")
    return trace


def empirical_vstar(trace: RunTrace) -> np.ndarray:
    """Max-player best value against the logged empirical one-hot models."""
    trace = _require(trace)
    H, _, S, _ = trace.r_max.shape
    V = np.zeros((H + 1, S))
    for h in reversed(range(H)):
        q = np.einsum("k,ksa->sa", trace.weights, trace.r_max[h] + V[h + 1][trace.next_max[h]])
        V[h] = q.max(axis=1)
    return V


def empirical_vstar_min(trace: RunTrace) -> np.ndarray:
    """Min-player counterpart of :func:`empirical_vstar`."""
    trace = _require(trace)
    H, _, S, _ = trace.r_min.shape
    V = np.zeros((H + 1, S))
    for h in reversed(range(H)):
        q = np.einsum("k,ksb->sb", trace.weights, trace.r_min[h] + V[h + 1][trace.next_min[h]])
        V[h] = q.min(axis=1)
    return V


def joint_mixture_from_trace(trace: RunTrace) -> JointMixturePolicy:
    trace = _require(trace)
    weights = np.tile(trace.weights, (trace.H, 1))
    return JointMixturePolicy(weights, trace.mu, trace.nu)
