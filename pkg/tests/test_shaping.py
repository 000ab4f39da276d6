import numpy as np
import pytest

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tape
from gsn_shaper.core.nets import Mlp
from gsn_shaper.exceptions import ShapeError, SupportError
from gsn_shaper.services.data import random_discrete_target
from gsn_shaper.services.exact import Dist
from gsn_shaper.services.shaping import (GenDist, Guide, binomial_deviance, generator_logit_gradient, loss_f,
                                         loss_f_exact, loss_g, loss_g_exact, minimize_loss_f, moment_match_loss,
                                         optimal_guide_discrete, verify_theorem3)
from gsn_shaper.utils.rng import make_rng
from tests.conftest import zero_params

LN2 = np.log(2.0)


def linear_guide(weight: float, bias: float = 0.0) -> Guide:
    guide = Guide(Mlp.init([1, 1], seed=0, prefix="guide"))
    guide.store.set("guide.w0", np.array([[weight]]))
    guide.store.set("guide.b0", np.array([bias]))
    return guide


def test_binomial_deviance_values():
    assert binomial_deviance(0.0).item() == pytest.approx(LN2, abs=1e-15)
    assert binomial_deviance(50.0).item() < 1e-20
    f = np.linspace(-20, 20, 41)
    lhs = binomial_deviance(f).value - binomial_deviance(-f).value
    np.testing.assert_allclose(lhs, -f, atol=1e-12)
    assert np.all(np.isfinite(binomial_deviance(np.array([-1e6, 1e6])).value))


def test_loss_f_of_zero_guide(rng):
    guide = Guide.create(2, hidden=(4,), seed=0)
    zero_params(guide.store)
    value = loss_f(guide, rng.standard_normal((6, 2)), rng.standard_normal((6, 2))).item()
    assert value == pytest.approx(2 * LN2, abs=1e-12)


def test_loss_f_perfect_separation():
    guide = linear_guide(100.0)
    value = loss_f(guide, np.ones((4, 1)), -np.ones((4, 1))).item()
    assert value < 1e-30


def test_loss_f_on_identical_batches_is_at_least_2ln2(tiny_guide, rng):
    batch = rng.standard_normal((16, 2))
    assert loss_f(tiny_guide, batch, batch).item() >= 2 * LN2 - 1e-12


def test_loss_f_rejects_empty_and_mismatched_batches(tiny_guide):
    with pytest.raises(ShapeError):
        loss_f(tiny_guide, np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ShapeError):
        loss_f(tiny_guide, np.zeros((3, 2)), np.zeros((3, 3)))


def test_loss_f_treats_generated_batch_as_constant(tiny_guide, rng):
    tape = Tape()
    gen = tape.leaf(rng.standard_normal((4, 2)))
    data = tape.constant(rng.standard_normal((4, 2)))
    params = tiny_guide.store.bind(tape)
    grads = tape.backward(loss_f(tiny_guide, data, gen, params))
    np.testing.assert_array_equal(grads[gen], np.zeros((4, 2)))


def test_loss_g_value():
    guide = linear_guide(1.0)
    assert loss_g(guide, np.array([[-1.0], [2.0], [-3.0]])).item() == pytest.approx(4.0 / 3.0, abs=1e-15)
    assert loss_g(guide, np.array([[0.5], [2.0]])).item() == 0.0


def test_loss_g_gradient_zero_where_guide_positive():
    guide = linear_guide(1.0)
    tape = Tape()
    gen = tape.leaf([[2.0], [-1.0]])
    grads = tape.backward(loss_g(guide, gen))
    assert grads[gen][0, 0] == 0.0
    assert grads[gen][1, 0] == pytest.approx(-0.5, abs=1e-15)
    assert not any(name.startswith("guide") for name in grads.by_name())


def test_moment_match_zero_at_data_moments(rng):
    batch = rng.standard_normal((30, 2))
    value = moment_match_loss(batch, batch.mean(axis=0), np.cov(batch, rowvar=False)).item()
    assert value == pytest.approx(0.0, abs=1e-20)


def test_moment_match_mean_offset(rng):
    batch = rng.standard_normal((30, 2))
    v = np.array([0.3, -0.4])
    value = moment_match_loss(batch, batch.mean(axis=0) + v, np.cov(batch, rowvar=False)).item()
    assert value == pytest.approx(0.25, abs=1e-12)


def test_moment_match_matches_two_pass_recomputation(rng):
    batch = rng.standard_normal((25, 3)) * 2 + 1
    mean, cov = rng.standard_normal(3), np.eye(3) * 0.5
    expected = np.sum((batch.mean(axis=0) - mean) ** 2) + np.sum((np.cov(batch, rowvar=False) - cov) ** 2)
    assert moment_match_loss(batch, mean, cov).item() == pytest.approx(expected, abs=1e-10)


def test_moment_match_needs_two_rows():
    with pytest.raises(ShapeError):
        moment_match_loss(np.zeros((1, 2)), np.zeros(2), np.eye(2))


# =============================================================================
# Exact objectives
# =============================================================================

def test_optimal_guide_values():
    D = Dist([0.75, 0.25])
    np.testing.assert_array_equal(optimal_guide_discrete(D, D), [0.0, 0.0])
    np.testing.assert_allclose(optimal_guide_discrete(D, Dist([0.25, 0.75])), [np.log(3), -np.log(3)], atol=1e-15)


def test_optimal_guide_support_mismatch():
    with pytest.raises(SupportError) as info:
        optimal_guide_discrete(Dist([0.5, 0.5, 0.0]), Dist([0.5, 0.0, 0.5]))
    assert info.value.index == 1


@pytest.mark.parametrize("seed", range(5))
def test_numerical_minimizer_recovers_log_ratio(seed):
    D = random_discrete_target(8, 1.0, seed)
    G = random_discrete_target(8, 1.0, seed + 100)
    np.testing.assert_allclose(minimize_loss_f(D, G), optimal_guide_discrete(D, G), atol=1e-6)


def test_exact_losses():
    D, G = Dist([0.75, 0.25]), Dist([0.25, 0.75])
    assert loss_f_exact(np.zeros(2), D, G) == pytest.approx(2 * LN2, abs=1e-15)
    assert loss_g_exact(optimal_guide_discrete(D, G), G) > 0
    assert loss_g_exact(optimal_guide_discrete(D, D), D) == 0.0


def test_loss_f_exact_is_convex():
    rng = make_rng(2)
    D, G = Dist(rng.dirichlet(np.ones(5))), Dist(rng.dirichlet(np.ones(5)))
    for _ in range(20):
        a, b = rng.standard_normal(5) * 3, rng.standard_normal(5) * 3
        assert loss_f_exact((a + b) / 2, D, G) <= (loss_f_exact(a, D, G) + loss_f_exact(b, D, G)) / 2 + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_joint_optimality_characterization(seed):
    D = random_discrete_target(8, 1.0, seed)
    G = random_discrete_target(8, 1.0, seed + 50)
    assert loss_g_exact(optimal_guide_discrete(D, G), G) > 0
    assert loss_g_exact(optimal_guide_discrete(D, D), D) == 0.0


def test_generator_gradient_vanishes_at_target():
    D = random_discrete_target(6, 1.0, 4)
    grad = generator_logit_gradient(np.log(D.probs), optimal_guide_discrete(D, D))
    assert np.max(np.abs(grad)) == 0.0


def test_generator_gradient_matches_finite_differences():
    rng = make_rng(8)
    logits = rng.standard_normal(5)
    f = rng.standard_normal(5)
    grad = generator_logit_gradient(logits, f)
    h = 1e-6
    for i in range(5):
        up, down = logits.copy(), logits.copy()
        up[i] += h
        down[i] -= h
        fd = (loss_g_exact(f, GenDist(up).dist()) - loss_g_exact(f, GenDist(down).dist())) / (2 * h)
        assert grad[i] == pytest.approx(fd, abs=1e-8)


def test_shaping_run_from_target_stays_put():
    D = random_discrete_target(8, 1.0, 0)
    run = verify_theorem3(D, iterations=200, step=0.05, seed=0, initial_logits=np.log(D.probs))
    assert run.fixed_point_gradient == 0.0
    assert max(run.tv) <= 1e-12


def test_shaping_run_converges():
    D = random_discrete_target(8, 1.0, 0)
    run = verify_theorem3(D, iterations=5000, step=0.05, seed=0)
    assert len(run.tv) == 5001
    assert run.final_tv < 0.05
    # coarse windows; single steps may raise TV when one over-dense state dominates
    checkpoints = run.tv[::1000]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(checkpoints, checkpoints[1:]))


def test_shaping_run_validation():
    with pytest.raises(ValueError):
        verify_theorem3(Dist.uniform(3), iterations=1, step=0.0, seed=0)
    with pytest.raises(SupportError):
        verify_theorem3(Dist([0.5, 0.5, 0.0]), iterations=1, step=0.1, seed=0)


def test_guide_scores_shape(tiny_guide, rng):
    assert tiny_guide.scores(rng.standard_normal((7, 2))).shape == (7,)
    with pytest.raises(ShapeError):
        Guide(Mlp.init([2, 3], seed=0))


def test_guide_score_is_differentiable(tiny_guide, rng):
    tape = Tape()
    params = tiny_guide.store.bind(tape)
    out = ad.sum(tiny_guide.score(rng.standard_normal((3, 2)), params))
    assert set(tape.backward(out).by_name()) == set(tiny_guide.store.names())
