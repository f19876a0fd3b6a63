"""Weighted online linear optimization with exponential-weights FTRL.

Round indices are 1-based throughout this module to keep the weight formulas
readable: ``schedule.alpha[k]`` is the rate of round ``k`` and entry 0 is unused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_C_ALPHA = 24.0


class SchedulePreconditionError(ValueError):
    """The learning-rate schedule violates a precondition of the regret bound."""


@dataclass(frozen=True)
class WeightSchedule:
    """Rescaled-linear averaging rates and the matching FTRL learning rates.

    ``alpha[k] = c ln K / (k - 1 + c ln K)`` for ``k = 1..K``;
    ``eta[k + 1] = sqrt(ln K / (alpha[k] H))`` with ``eta[1] = 0``;
    ``hat_eta[1] = eta[2]`` and ``hat_eta[k] = eta[k] / (1 - alpha[k])`` otherwise.
    """

    K: int
    c_alpha: float = DEFAULT_C_ALPHA
    H: float = 1.0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2 (ln K must be positive), got {self.K}")
        if self.c_alpha <= 0 or self.H <= 0:
            raise ValueError("c_alpha and H must be positive")
        K = self.K
        c_log = self.c_alpha * math.log(K)
        k = np.arange(K + 1, dtype=np.float64)
        alpha = np.full(K + 1, np.nan)
        alpha[1:] = c_log / (k[1:] - 1.0 + c_log)
        alpha[1] = 1.0
        eta = np.full(K + 2, np.nan)
        eta[1] = 0.0
        eta[2:] = np.sqrt(math.log(K) / (alpha[1:] * self.H))
        hat_eta = np.full(K + 1, np.nan)
        hat_eta[1] = eta[2]
        hat_eta[2:] = eta[2:K + 1] / (1.0 - alpha[2:])
        for arr in (alpha, eta, hat_eta):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "hat_eta", hat_eta)


def alpha_weights(schedule: WeightSchedule, k: int) -> np.ndarray:
    """Weights ``alpha_i^k`` for ``i = 1..k`` (returned at positions ``0..k-1``)."""
    if not 1 <= k <= schedule.K:
        raise ValueError(f"k={k} outside 1..{schedule.K}")
    a = schedule.alpha[1:k + 1]
    # keep[i] = prod_{j > i} (1 - alpha_j) over rounds up to k
    keep = np.ones(k)
    keep[:-1] = np.cumprod((1.0 - a[:0:-1]))[::-1]
    return a * keep


def check_schedule(schedule: WeightSchedule, n: int | None = None, rtol: float = 1e-12) -> None:
    """Raise :class:`SchedulePreconditionError` unless the bound's preconditions hold up to ``n``."""
    n = schedule.K if n is None else n
    alpha, eta = schedule.alpha, schedule.eta
    if not 0 < alpha[1] <= 1:
        raise SchedulePreconditionError(f"alpha_1 = {alpha[1]} not in (0, 1]")
    if not math.isclose(eta[1], eta[2] * (1 - alpha[1]), abs_tol=1e-15):
        raise SchedulePreconditionError("eta_1 must equal eta_2 (1 - alpha_1)")
    for k in range(2, n + 1):
        if not 0 < alpha[k] < 1:
            raise SchedulePreconditionError(f"alpha_{k} = {alpha[k]} not in (0, 1)")
        lhs = eta[k + 1] * (1 - alpha[k])
        if not (0 < lhs <= eta[k] * (1 + rtol)):
            raise SchedulePreconditionError(
                f"eta_{k + 1} (1 - alpha_{k}) = {lhs} exceeds eta_{k} = {eta[k]}")


def exp_weights(L, eta: float) -> np.ndarray:
    """Distribution proportional to ``exp(-eta * L)``."""
    L = np.asarray(L, dtype=np.float64)
    if not (np.all(np.isfinite(L)) and math.isfinite(eta)):
        raise ValueError("exp_weights needs finite inputs")
    z = -eta * L
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def variance_under(pi, f) -> float:
    pi = np.asarray(pi, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if pi.shape != f.shape:
        raise ValueError(f"shape mismatch {pi.shape} vs {f.shape}")
    mean = pi @ f
    return float(pi @ (f - mean) ** 2)


def _check_losses(losses) -> np.ndarray:
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 2:
        raise ValueError(f"losses must be a (rounds, actions) array, got shape {losses.shape}")
    if np.any(losses < 0) or not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite and nonnegative")
    return losses


def running_losses(losses, schedule: WeightSchedule) -> np.ndarray:
    """``L_k = (1 - alpha_k) L_{k-1} + alpha_k l_k`` for ``k = 1..n`` (row ``k-1``)."""
    losses = _check_losses(losses)
    out = np.empty_like(losses)
    L = np.zeros(losses.shape[1])
    for k in range(1, losses.shape[0] + 1):
        a = schedule.alpha[k]
        L = (1 - a) * L + a * losses[k - 1]
        out[k - 1] = L
    return out


def run_ftrl(losses, schedule: WeightSchedule) -> np.ndarray:
    """Predictions ``pi_1..pi_n``: uniform first, then ``exp_weights(L_k, eta_{k+1})``."""
    losses = _check_losses(losses)
    n, A = losses.shape
    if n > schedule.K:
        raise ValueError(f"{n} rounds exceed the schedule length K={schedule.K}")
    pis = np.empty((n, A))
    pis[0] = 1.0 / A
    L = running_losses(losses, schedule)
    for k in range(1, n):
        pis[k] = exp_weights(L[k - 1], schedule.eta[k + 1])
    return pis


def _check_pair(losses, predictions, n):
    losses = _check_losses(losses)
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.shape != losses.shape:
        raise ValueError(f"predictions {predictions.shape} and losses {losses.shape} differ")
    if not 1 <= n <= losses.shape[0]:
        raise ValueError(f"n={n} outside 1..{losses.shape[0]}")
    return losses[:n], predictions[:n]


def weighted_regret(losses, predictions, schedule: WeightSchedule, n: int):
    """Return ``(R_n, per_action)`` under the weights ``alpha_k^n``."""
    losses, predictions = _check_pair(losses, predictions, n)
    w = alpha_weights(schedule, n)
    learner = w @ np.einsum("ka,ka->k", predictions, losses)
    per_action = learner - w @ losses
    return float(per_action.max()), per_action


def regret_bound_terms(losses, predictions, schedule: WeightSchedule, n: int):
    """The three summands of the variance-based bound: ``(variance, log, norm)``."""
    losses, predictions = _check_pair(losses, predictions, n)
    check_schedule(schedule, n)
    w = alpha_weights(schedule, n)
    ks = np.arange(1, n + 1)
    step = schedule.hat_eta[ks] * schedule.alpha[ks]
    mean = np.einsum("ka,ka->k", predictions, losses)
    var = np.einsum("ka,ka->k", predictions, (losses - mean[:, None]) ** 2)
    norm = np.abs(losses).max(axis=1)
    variance_term = 5.0 / 3.0 * float(w @ (step * var))
    log_term = math.log(losses.shape[1]) / schedule.eta[n + 1]
    big = step * norm > 1.0 / 3.0
    norm_term = 3.0 * float(w @ np.where(big, step ** 2 * norm ** 3, 0.0))
    return variance_term, log_term, norm_term


def regret_bound_rhs(losses, predictions, schedule: WeightSchedule, n: int) -> float:
    return float(sum(regret_bound_terms(losses, predictions, schedule, n)))


def pi_minus(L, hat_eta_k: float) -> np.ndarray:
    """Auxiliary iterate: exponential weights of ``L_k`` at rate ``hat_eta_k``."""
    return exp_weights(L, hat_eta_k)


def pi_minus_lower_bound(pi_k, loss_k, step: float) -> np.ndarray:
    """Entrywise lower bound on the auxiliary iterate given ``step = hat_eta_k * alpha_k``.

    Uses the coarse multiplicative form when ``step * max|loss| > 1/3`` and the
    variance-corrected form otherwise.
    """
    pi_k = np.asarray(pi_k, dtype=np.float64)
    loss_k = np.asarray(loss_k, dtype=np.float64)
    if step * np.abs(loss_k).max() > 1.0 / 3.0:
        return (1.0 - step * loss_k) * pi_k
    mean = pi_k @ loss_k
    var = pi_k @ (loss_k - mean) ** 2
    return (1.0 - step * (loss_k - mean) - 2.0 * step ** 2 * var) * pi_k
