import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lp_max, vertex_max
from smoothnash.core import Game, SmoothParams, random_game, top_smooth_average, verify
from smoothnash.errors import InvalidArgumentError, ResourceLimitError
from smoothnash.sampling import (
    KUniformProfile, SamplingParams, couple_smooth_to_uniform, hybrid_gaps, make_rng,
    sample_k_uniform, strong_sampling_certificate)
from smoothnash.zerosum import ZeroSumGame, solve_omd


def test_make_rng_reproducible():
    assert np.array_equal(make_rng(5).random(4), make_rng(5).random(4))
    assert not np.array_equal(make_rng(5).random(4), make_rng(6).random(4))


def test_sampling_params_k():
    p = SamplingParams(epsilon=0.2, sigma=0.25, delta=0.25, num_players=2)
    assert p.k == math.ceil(2 * math.log(8 * 2 / (0.25 * 0.25)) / 0.04)
    assert p.k == 278
    assert SamplingParams(0.9, 1.0, 0.9, 1, constant_c1=1e-6).k == 1


@pytest.mark.parametrize("field,value", [("epsilon", 0.0), ("delta", 1.0), ("sigma", 1.2)])
def test_sampling_params_validation(field, value):
    kwargs = dict(epsilon=0.2, sigma=0.5, delta=0.1, num_players=2)
    kwargs[field] = value
    with pytest.raises(InvalidArgumentError):
        SamplingParams(**kwargs)


def test_k_uniform_profile_validation():
    with pytest.raises(InvalidArgumentError):
        KUniformProfile(3, (np.array([1, 1]),))
    prof = KUniformProfile(4, (np.array([1, 3]), np.array([4, 0])))
    assert np.allclose(prof.strategies()[0], [0.25, 0.75])


def test_sample_point_masses():
    prof = sample_k_uniform([np.eye(3)[1], np.eye(3)[2]], 17, make_rng(0))
    assert prof.counts[0].tolist() == [0, 17, 0]
    assert prof.counts[1].tolist() == [0, 0, 17]


def test_sample_uniform_binomial_tail():
    k = 10**5
    prof = sample_k_uniform([np.array([0.5, 0.5])], k, make_rng(1))
    assert abs(prof.counts[0][0] - k / 2) <= 5 * math.sqrt(k / 4)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 200), n=st.integers(1, 8))
@settings(max_examples=50, deadline=None)
def test_sample_k_uniform_invariants(seed, k, n):
    rng = make_rng(seed)
    profile = [rng.dirichlet(np.ones(n)) for _ in range(2)]
    prof = sample_k_uniform(profile, k, rng)
    for c, x in zip(prof.counts, prof.strategies()):
        assert c.sum() == k and c.min() >= 0
        assert np.allclose(x * k, np.round(x * k))
    again = sample_k_uniform(profile, k, make_rng(seed + 1))
    assert np.array_equal(again.counts[0], sample_k_uniform(profile, k, make_rng(seed + 1)).counts[0])


# ---- coupling ------------------------------------------------------------------------

def test_coupling_uniform_sigma_one():
    targets, draws, contained = couple_smooth_to_uniform(
        np.full(5, 0.2), SmoothParams(1.0, 5), t=50, l=3, rng=make_rng(2))
    assert contained
    assert np.array_equal(targets, draws[:, 0])


def test_coupling_rejects_non_smooth():
    with pytest.raises(InvalidArgumentError):
        couple_smooth_to_uniform(np.eye(4)[0], SmoothParams(0.5, 4), 3, 3, make_rng(0))


def test_coupling_marginal_total_variation():
    n = 10
    smooth = SmoothParams(0.5, n)
    rng = make_rng(3)
    p = np.array([0.2, 0.2, 0.15, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05, 0.0])
    targets, draws, _ = couple_smooth_to_uniform(p, smooth, t=10**5, l=4, rng=rng)
    emp = np.bincount(targets, minlength=n) / targets.size
    assert 0.5 * np.abs(emp - p).sum() <= 0.02
    uni = np.bincount(draws.ravel(), minlength=n) / draws.size
    assert 0.5 * np.abs(uni - 1 / n).sum() <= 0.02


def test_coupling_containment_bound():
    t, l, sigma, n = 5, 20, 0.2, 20
    smooth = SmoothParams(sigma, n)
    rng = make_rng(4)
    p = np.zeros(n)
    p[:4] = 0.25  # every mass sits at the cap 1/(n sigma)
    trials = 10**4
    misses = sum(not couple_smooth_to_uniform(p, smooth, t, l, rng)[2] for _ in range(trials))
    bound = t * (1 - sigma) ** l
    se = math.sqrt(bound * (1 - bound) / trials)
    assert misses / trials <= bound + 3 * se


# ---- hybrid gaps ---------------------------------------------------------------------

def test_hybrid_gaps_one_player():
    g = Game(np.array([[0.1, 0.5, 0.9]]))
    x = np.array([0.2, 0.3, 0.5])
    xh = np.array([0.0, 1.0, 0.0])
    gaps = hybrid_gaps(g, [x], [xh], 0.5)
    assert len(gaps) == 1
    assert gaps[0] == pytest.approx(abs(g.payoffs[0] @ xh - g.payoffs[0] @ x))


def test_hybrid_gaps_two_players_vertex_oracle():
    rng = make_rng(5)
    n, sigma = 6, 0.5
    g = random_game(2, n, rng)
    xs = [rng.dirichlet(np.ones(n)) for _ in range(2)]
    xh = [rng.dirichlet(np.ones(n)) for _ in range(2)]
    gaps = hybrid_gaps(g, xs, xh, sigma)
    A, B = g.payoffs
    # Position 0 for each player is a scalar; position 1 has a free first player.
    expected = [
        abs(xh[0] @ A @ xh[1] - xs[0] @ A @ xh[1]),
        max(vertex_max(A @ (xh[1] - xs[1]), sigma), vertex_max(-A @ (xh[1] - xs[1]), sigma)),
        abs(xh[0] @ B @ xh[1] - xs[0] @ B @ xh[1]),
        max(vertex_max((xh[0] - xs[0]) @ B, sigma), vertex_max(-(xh[0] - xs[0]) @ B, sigma)),
        max(vertex_max(B @ (xh[1] - xs[1]), sigma), vertex_max(-B @ (xh[1] - xs[1]), sigma)),
    ]
    assert np.allclose(gaps, expected, atol=1e-12)


def test_hybrid_gaps_resource_guard(monkeypatch):
    monkeypatch.setattr("smoothnash.sampling.MAX_HYBRID_ENTRIES", 100)
    g = random_game(3, 6, make_rng(0))
    x = [np.full(6, 1 / 6)] * 3
    with pytest.raises(ResourceLimitError):
        hybrid_gaps(g, x, x, 0.5)


def test_hybrid_sup_matches_top_smooth_average():
    rng = make_rng(6)
    diff = rng.standard_normal(36)
    smooth = SmoothParams(0.25, 36)
    assert max(top_smooth_average(diff, smooth)[0], top_smooth_average(-diff, smooth)[0]) == \
        pytest.approx(max(lp_max(diff, 0.25), lp_max(-diff, 0.25)), abs=1e-9)


def test_certificate_rejects_non_equilibrium():
    g = Game.from_matrices(np.eye(3), np.eye(3))
    params = SamplingParams(0.3, 0.5, 0.25, 2)
    with pytest.raises(InvalidArgumentError):
        strong_sampling_certificate(g, [np.eye(3)[0], np.eye(3)[1]], params, make_rng(0))


def test_certificate_success_rate():
    # Hybrid gaps stay within epsilon in at least half of the draws.
    n, sigma, eps = 6, 0.5, 0.3
    params = SamplingParams(eps, sigma, 0.25, 2)
    smooth = SmoothParams(sigma, n)
    good = total = 0
    for seed in range(20):
        rng = make_rng(seed)
        zs = ZeroSumGame(rng.random((n, n)))
        trace = solve_omd(zs, smooth, 2048)
        game = zs.as_game()
        eq = [trace.x_avg, trace.y_avg]
        slack = verify(game, eq, smooth, 0.0).max_gain + 1e-9
        for _ in range(5):
            sample, gaps = strong_sampling_certificate(game, eq, params, rng, eq_slack=slack)
            assert sample.k == params.k
            good += max(gaps) <= eps
            total += 1
    assert good / total >= 0.5
