import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import alpha_rates, alpha_weights_direct
from nashgym import ftrl
from nashgym.ftrl import (SchedulePreconditionError, WeightSchedule, alpha_weights,
                          check_schedule, exp_weights, pi_minus, pi_minus_lower_bound,
                          regret_bound_rhs, regret_bound_terms, run_ftrl, running_losses,
                          variance_under, weighted_regret)


def test_schedule_values():
    s = WeightSchedule(64, c_alpha=24, H=3)
    c = 24 * math.log(64)
    assert s.alpha[1] == 1.0
    assert s.alpha[5] == pytest.approx(c / (4 + c), rel=1e-15)
    assert s.eta[1] == 0.0
    assert s.eta[2] == pytest.approx(math.sqrt(math.log(64) / 3))
    assert s.eta[11] == pytest.approx(math.sqrt(math.log(64) / (s.alpha[10] * 3)))
    assert s.hat_eta[1] == s.eta[2]
    assert s.hat_eta[7] == pytest.approx(s.eta[7] / (1 - s.alpha[7]))
    assert np.all((s.alpha[2:] > 0) & (s.alpha[2:] < 1))


def test_schedule_rejects_small_k():
    with pytest.raises(ValueError):
        WeightSchedule(1)


@pytest.mark.parametrize("K", [4, 64, 1024])
def test_alpha_weights_match_product_definition(K):
    rates = alpha_rates(K, 24)
    s = WeightSchedule(K)
    np.testing.assert_allclose(s.alpha[1:], rates, rtol=1e-14)
    for k in sorted({1, 2, 3, K // 2, K}):
        np.testing.assert_allclose(alpha_weights(s, k), alpha_weights_direct(rates, k),
                                   rtol=1e-12, atol=1e-300)


def test_alpha_weights_first_round():
    assert alpha_weights(WeightSchedule(10), 1).tolist() == [1.0]
    with pytest.raises(ValueError):
        alpha_weights(WeightSchedule(10), 11)


@pytest.mark.parametrize("K", [4, 64, 1024])
def test_mixture_weight_identities(K):
    s = WeightSchedule(K)
    log_k = math.log(K)
    for k in range(1, K + 1):
        w = alpha_weights(s, k)
        assert abs(w.sum() - 1) <= 1e-12
        assert w.max() <= 2 * 24 * log_k / k
        if k >= 24 * log_k + 1:
            assert w[: k // 2].max() <= K ** -6.0


def test_tail_bound_not_applicable_at_k64():
    # premise k >= c ln K + 1 fails for every k <= 64
    assert 24 * math.log(64) + 1 > 64


@pytest.mark.parametrize("K", [2, 4, 64, 1024, 5000])
def test_schedule_precondition(K):
    check_schedule(WeightSchedule(K, H=7))
    s = WeightSchedule(K, H=7)
    ks = np.arange(2, K + 1)
    assert np.all(s.eta[ks + 1] * (1 - s.alpha[ks]) <= s.eta[ks])


def test_precondition_violation_reported():
    s = WeightSchedule(10)
    bad = np.array(s.eta)
    bad[5] = 0.01 * bad[5]
    object.__setattr__(s, "eta", bad)
    with pytest.raises(SchedulePreconditionError, match="eta_6"):
        check_schedule(s)


def test_exp_weights_examples():
    np.testing.assert_allclose(exp_weights([3.0, -1.0, 7.0], 0.0), [1 / 3] * 3)
    np.testing.assert_allclose(exp_weights([0.0, math.log(2)], 1.0), [2 / 3, 1 / 3],
                               rtol=1e-15)
    L = np.array([0.3, 2.0, -1.5, 4.0])
    np.testing.assert_array_almost_equal(exp_weights(L, 2.5), exp_weights(L + 123.0, 2.5), 15)
    # large eta * L is stable
    p = exp_weights([1000.0, 1001.0], 50.0)
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1) < 1e-12
    with pytest.raises(ValueError):
        exp_weights([np.inf, 0.0], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(0, 30),
       st.floats(-100, 100))
def test_exp_weights_normalized_and_shift_invariant(L, eta, c):
    p = exp_weights(L, eta)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(p, exp_weights(np.array(L) + c, eta), atol=1e-9)


def test_variance_under():
    assert variance_under([0.5, 0.5], [0.0, 1.0]) == 0.25
    assert variance_under([0.2, 0.8], [3.0, 3.0]) == 0.0
    assert variance_under([0.0, 1.0, 0.0], [5.0, 1.0, -2.0]) == 0.0
    with pytest.raises(ValueError):
        variance_under([0.5, 0.5], [1.0])


def test_running_losses_match_weighted_sums():
    rng = np.random.default_rng(1)
    losses = rng.random((30, 4))
    s = WeightSchedule(30)
    L = running_losses(losses, s)
    for k in (1, 7, 30):
        np.testing.assert_allclose(L[k - 1], alpha_weights(s, k) @ losses[:k], atol=1e-12)


def test_run_ftrl_symmetric_losses_stay_uniform():
    s = WeightSchedule(50)
    preds = run_ftrl(np.full((50, 3), 0.7), s)
    np.testing.assert_allclose(preds, 1 / 3, atol=1e-15)


def test_run_ftrl_first_prediction_uniform():
    preds = run_ftrl(np.array([[5.0, 0.0, 1.0]]), WeightSchedule(5))
    assert preds.tolist() == [[1 / 3] * 3]


def test_run_ftrl_monotone_for_dominated_action():
    s = WeightSchedule(100)
    preds = run_ftrl(np.tile([1.0, 0.0], (100, 1)), s)
    assert np.all(np.diff(preds[:, 1]) > 0)


def test_run_ftrl_rejects_negative_and_long():
    with pytest.raises(ValueError):
        run_ftrl(np.array([[-1.0, 0.0]]), WeightSchedule(4))
    with pytest.raises(ValueError):
        run_ftrl(np.zeros((5, 2)), WeightSchedule(4))


def test_weighted_regret_examples():
    s = WeightSchedule(10)
    losses = np.array([[1.0, 0.0]])
    R, per = weighted_regret(losses, np.array([[0.5, 0.5]]), s, 1)
    assert R == 0.5
    np.testing.assert_allclose(per, [-0.5, 0.5])
    const = np.full((10, 3), 2.0)
    assert weighted_regret(const, run_ftrl(const, s), s, 10)[0] == pytest.approx(0.0, abs=1e-14)


def test_bound_with_zero_losses():
    s = WeightSchedule(20, H=2)
    zeros = np.zeros((20, 4))
    preds = run_ftrl(zeros, s)
    assert regret_bound_rhs(zeros, preds, s, 20) == pytest.approx(math.log(4) / s.eta[21])


def test_single_action_regret_zero():
    s = WeightSchedule(30)
    losses = np.random.default_rng(0).random((30, 1)) * 5
    preds = run_ftrl(losses, s)
    R, _ = weighted_regret(losses, preds, s, 30)
    assert R == pytest.approx(0.0, abs=1e-12)
    assert R <= regret_bound_rhs(losses, preds, s, 30) + 1e-9


def test_spike_triggers_indicator_term():
    s = WeightSchedule(40, H=1)
    losses = np.zeros((40, 3))
    losses[0, 1] = 30.0
    preds = run_ftrl(losses, s)
    assert s.hat_eta[1] * s.alpha[1] * 30.0 > 1 / 3
    _, _, norm_term = regret_bound_terms(losses, preds, s, 40)
    assert norm_term > 0
    assert weighted_regret(losses, preds, s, 40)[0] <= regret_bound_rhs(losses, preds, s, 40)


@st.composite
def loss_instances(draw):
    A = draw(st.integers(2, 10))
    n = draw(st.integers(10, 500))
    H = draw(st.integers(1, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    kind = draw(st.sampled_from(["uniform", "sparse", "drifting"]))
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        losses = rng.uniform(0, H, size=(n, A))
    elif kind == "sparse":
        losses = H * (rng.random((n, A)) < 0.1)
    else:
        # the best action switches halfway through
        losses = rng.uniform(0, H / 4, size=(n, A))
        losses[: n // 2, 0] = H
        losses[n // 2:, 1] = H
    return losses, H


@settings(max_examples=200, deadline=None)
@given(loss_instances())
def test_regret_bound_holds(instance):
    losses, H = instance
    n = losses.shape[0]
    s = WeightSchedule(n, c_alpha=24, H=H)
    preds = run_ftrl(losses, s)
    for m in sorted({1, n // 3, n}):
        R, _ = weighted_regret(losses, preds, s, m)
        assert R <= regret_bound_rhs(losses, preds, s, m) + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(2, 300), st.floats(0.01, 20), st.integers(0, 2**32 - 1))
def test_pi_minus_lower_bound(A, K, scale, seed):
    rng = np.random.default_rng(seed)
    s = WeightSchedule(K, H=1)
    k = int(rng.integers(1, K + 1))
    L_prev = rng.uniform(0, scale, size=A)
    loss = rng.uniform(0, scale, size=A)
    a, eta_k = s.alpha[k], s.eta[k]
    pi_k = exp_weights(L_prev, eta_k) if k > 1 else np.full(A, 1 / A)
    L_k = (1 - a) * L_prev + a * loss if k > 1 else loss
    minus = pi_minus(L_k, s.hat_eta[k])
    bound = pi_minus_lower_bound(pi_k, loss, s.hat_eta[k] * a)
    assert np.all(minus >= bound - 1e-9)


def test_pi_minus_examples():
    np.testing.assert_allclose(pi_minus(np.zeros(4), 3.0), 0.25)
    s = WeightSchedule(20)
    L = np.array([0.2, 0.9, 0.4])
    assert pi_minus(L, s.eta[8]).tolist() == exp_weights(L, s.eta[8]).tolist()


def test_pi_minus_along_real_run():
    rng = np.random.default_rng(5)
    K, A = 200, 2
    s = WeightSchedule(K, H=4)
    # step sizes here lie in [1.15, 147]; small losses reach the fine regime
    losses = rng.uniform(0, 0.5, size=(K, A))
    preds = run_ftrl(losses, s)
    L = running_losses(losses, s)
    regimes = set()
    for k in range(1, K + 1):
        step = s.hat_eta[k] * s.alpha[k]
        regimes.add(step * losses[k - 1].max() > 1 / 3)
        minus = pi_minus(L[k - 1], s.hat_eta[k])
        assert np.all(minus >= pi_minus_lower_bound(preds[k - 1], losses[k - 1], step) - 1e-9)
    assert regimes == {True, False}


def test_module_rejects_negative_losses_in_regret():
    s = WeightSchedule(4)
    with pytest.raises(ValueError):
        ftrl.weighted_regret(np.array([[-0.1, 0.0]]), np.array([[0.5, 0.5]]), s, 1)
