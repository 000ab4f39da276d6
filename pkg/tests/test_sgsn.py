import numpy as np
import pytest

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import grad_check
from gsn_shaper.core.dists import BernoulliVec, DiagGaussian
from gsn_shaper.exceptions import ShapeError
from gsn_shaper.services.sgsn import (ChainNoise, SimpleGsn, decode, encode, replay_suffix, sample_obs,
                                      transition_sample, unroll_chain, walkback_pairs)


def test_zero_encoder_gives_standard_normal(zero_gsn):
    q = encode(zero_gsn, np.ones((3, 2)))
    np.testing.assert_array_equal(q.mean.value, np.zeros((3, 2)))
    np.testing.assert_array_equal(q.logvar.value, np.zeros((3, 2)))


def test_zero_nets_zero_noise_transition_is_origin(zero_gsn):
    step = transition_sample(zero_gsn, np.ones((4, 2)), np.zeros((4, 2)), np.zeros((4, 2)))
    np.testing.assert_array_equal(step.x.value, np.zeros((4, 2)))


def test_transition_deterministic_given_noise(tiny_gsn, rng):
    x = rng.standard_normal((5, 2))
    nz, nx = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    a = transition_sample(tiny_gsn, x, nz, nx).x.value
    b = transition_sample(tiny_gsn, x, nz, nx).x.value
    np.testing.assert_array_equal(a, b)


def test_encode_rows_independent(tiny_gsn, rng):
    x = rng.standard_normal((4, 2))
    batch = encode(tiny_gsn, x).mean.value
    for i in range(4):
        np.testing.assert_allclose(encode(tiny_gsn, x[i:i + 1]).mean.value[0], batch[i], atol=1e-12)


def test_shape_errors(tiny_gsn):
    with pytest.raises(ShapeError):
        decode(tiny_gsn, np.zeros((3, 5)))
    with pytest.raises(ShapeError):
        encode(tiny_gsn, np.zeros((3, 1)))


def test_transition_mean_matches_latent_average(tiny_gsn, rng):
    n = 100_000
    x = np.tile([[0.4, -0.3]], (n, 1))
    step = transition_sample(tiny_gsn, x, rng.standard_normal((n, 2)), rng.standard_normal((n, 2)))
    # independent estimate of E_z[mean of p(x | z)]
    z = encode(tiny_gsn, x).mean.value + np.exp(encode(tiny_gsn, x).logvar.value / 2) * rng.standard_normal((n, 2))
    oracle = decode(tiny_gsn, z).mean.value.mean(axis=0)
    np.testing.assert_allclose(step.x.value.mean(axis=0), oracle, atol=0.02)


def test_bernoulli_decoder_emits_binary(rng):
    g = SimpleGsn.create(3, 2, hidden=(4,), family="bernoulli", seed=0)
    step = transition_sample(g, np.ones((6, 3)), rng.standard_normal((6, 2)), rng.standard_normal((6, 3)))
    assert isinstance(step.decoding, BernoulliVec)
    assert set(np.unique(step.x.value)) <= {0.0, 1.0}


def test_sample_obs_gaussian_zero_noise_is_mean():
    d = DiagGaussian(np.array([[1.0, 2.0]]), np.array([[0.5, -0.5]]))
    np.testing.assert_array_equal(sample_obs(d, np.zeros((1, 2))).value, [[1.0, 2.0]])


def test_walkback_roll_out_counts(tiny_gsn):
    x = np.array([[0.5, 0.5]])
    assert len(walkback_pairs(tiny_gsn, x, 2, 0, rng=0)) == 0
    pairs = walkback_pairs(tiny_gsn, x, 2, 3, rng=0)
    assert len(pairs) == 3
    for anchor, z in pairs:
        np.testing.assert_array_equal(anchor, x)
        assert z.shape == (1, 2)


def test_walkback_burn_in_never_changes_pairs(tiny_gsn):
    x = np.array([[0.1, -0.2], [1.0, 0.3]])
    a = walkback_pairs(tiny_gsn, x, 0, 4, rng=9).latents()
    b = walkback_pairs(tiny_gsn, x, 7, 4, rng=9).latents()
    np.testing.assert_array_equal(a, b)


def test_walkback_rejects_negative_counts(tiny_gsn):
    with pytest.raises(ValueError):
        walkback_pairs(tiny_gsn, np.zeros((1, 2)), -1, 1, rng=0)


def test_walkback_single_pair_follows_encoder(tiny_gsn):
    n = 100_000
    x = np.tile([[0.2, 0.7]], (n, 1))
    z = walkback_pairs(tiny_gsn, x, 0, 1, rng=3).latents()[0]
    q = encode(tiny_gsn, x[:1])
    np.testing.assert_allclose(z.mean(axis=0), q.mean.value[0], atol=0.02)
    np.testing.assert_allclose(z.var(axis=0), np.exp(q.logvar.value[0]), rtol=0.03)


def test_unroll_single_step_equals_transition(tiny_gsn, rng):
    x = rng.standard_normal((3, 2))
    noise = ChainNoise.draw(rng, 1, 3, 2, 2)
    traj = unroll_chain(tiny_gsn, x, 1, noise)
    step = transition_sample(tiny_gsn, x, noise.z[0], noise.x[0])
    np.testing.assert_array_equal(traj.states[1].value, step.x.value)
    assert traj.length == 1 and traj.state_values().shape == (2, 3, 2)


def test_unroll_rejects_short_chains(tiny_gsn):
    with pytest.raises(ValueError):
        unroll_chain(tiny_gsn, np.zeros((1, 2)), 0, 0)
    with pytest.raises(ValueError):
        unroll_chain(tiny_gsn, np.zeros((1, 2)), 3, ChainNoise.zeros(2, 1, 2, 2))


def test_unroll_zero_nets_zero_noise_stays_at_origin(zero_gsn):
    traj = unroll_chain(zero_gsn, np.ones((2, 2)), 4, ChainNoise.zeros(4, 2, 2, 2))
    np.testing.assert_array_equal(traj.state_values()[1:], np.zeros((4, 2, 2)))


def test_unroll_is_deterministic_for_a_seed(tiny_gsn):
    a = unroll_chain(tiny_gsn, np.zeros((3, 2)), 5, 11).state_values()
    b = unroll_chain(tiny_gsn, np.zeros((3, 2)), 5, 11).state_values()
    np.testing.assert_array_equal(a, b)


def test_replay_from_any_state_is_bitwise_identical(tiny_gsn, rng):
    traj = unroll_chain(tiny_gsn, rng.standard_normal((3, 2)), 5, ChainNoise.draw(rng, 5, 3, 2, 2))
    for t in range(5):
        replayed = replay_suffix(tiny_gsn, traj, t)
        np.testing.assert_array_equal(replayed.state_values(), traj.state_values()[t:])


def test_bptt_gradient_matches_finite_differences(tiny_gsn, rng):
    x0 = rng.standard_normal((2, 2))
    noise = ChainNoise.draw(rng, 3, 2, 2, 2)
    names = tiny_gsn.store.names()

    def f(*leaves):
        params = dict(zip(names, leaves))
        traj = unroll_chain(tiny_gsn, x0, 3, noise, params)
        total = ad.sum(ad.square(traj.states[1]))
        for state in traj.states[2:]:
            total = ad.add(total, ad.sum(ad.square(state)))
        return total

    assert grad_check(f, [tiny_gsn.store[n] for n in names]) < 1e-4


def test_from_store_roundtrip(tiny_gsn, rng):
    clone = SimpleGsn.from_store(tiny_gsn.store.copy())
    x = rng.standard_normal((2, 2))
    np.testing.assert_array_equal(encode(clone, x).mean.value, encode(tiny_gsn, x).mean.value)
    assert (clone.d_x, clone.k_z) == (2, 2)
