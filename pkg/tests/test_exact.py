import numpy as np
import pytest

from gsn_shaper.defaults import BUNDLED_MATRICES, LAZY_TWO_STATE, LAZY_TWO_STATE_STATIONARY
from gsn_shaper.exceptions import DataFormatError, ErgodicityError, NumericError, SupportError
from gsn_shaper.services import exact
from gsn_shaper.services.exact import (CondTable, Dist, TransitionMatrix, dispersion, exact_posterior, gibbs_joint,
                                       is_ergodic, load_table, load_transition, random_table, save_table,
                                       stationary, stationary_nullspace, total_variation, transition_matrix,
                                       verify_theorem1, verify_walkback_theorem1, walkback_corruption)
from gsn_shaper.utils.rng import make_rng


def test_dist_validation():
    with pytest.raises(SupportError):
        Dist([0.5, 0.6])
    with pytest.raises(SupportError):
        Dist([1.5, -0.5])
    assert Dist.uniform(4).probs.sum() == pytest.approx(1.0)


def test_cond_table_reports_bad_column():
    with pytest.raises(SupportError) as info:
        CondTable([[0.5, 0.2], [0.5, 0.2]])
    assert info.value.index == 1


def test_transition_matrix_identity_and_uniform():
    eye = CondTable(np.eye(3))
    np.testing.assert_array_equal(transition_matrix(eye, eye).table, np.eye(3))
    uniform = CondTable(np.full((3, 3), 1 / 3))
    np.testing.assert_allclose(transition_matrix(uniform, eye).table, np.full((3, 3), 1 / 3), atol=1e-15)


def test_transition_matrix_matches_triple_loop(rng):
    P, Q = random_table(4, 3, rng), random_table(3, 4, rng)
    T = transition_matrix(P, Q).table
    for x_next in range(4):
        for x in range(4):
            expected = sum(P.table[x_next, z] * Q.table[z, x] for z in range(3))
            assert T[x_next, x] == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("name", list(BUNDLED_MATRICES))
def test_bundled_verdicts(name):
    matrix, kind, witness = BUNDLED_MATRICES[name]
    verdict = is_ergodic(TransitionMatrix(matrix))
    assert verdict.kind == kind
    assert verdict.witness == witness


def test_identity_and_cycle_witnesses():
    assert str(is_ergodic(TransitionMatrix(np.eye(2)))) == "reducible (state 0 cannot reach state 1)"
    cycle = is_ergodic(TransitionMatrix([[0.0, 1.0], [1.0, 0.0]]))
    assert cycle.witness == "periodic, period 2" and cycle.period == 2


def test_positive_matrix_is_ergodic(rng):
    assert is_ergodic(TransitionMatrix(random_table(4, 4, rng).table)).ergodic


def test_stationary_of_doubly_stochastic_is_uniform():
    T = TransitionMatrix([[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]])
    np.testing.assert_allclose(stationary(T).probs, np.full(3, 1 / 3), atol=1e-12)


def test_stationary_of_lazy_two_state():
    pi = stationary(TransitionMatrix(LAZY_TWO_STATE)).probs
    np.testing.assert_allclose(pi, LAZY_TWO_STATE_STATIONARY, atol=1e-10)


def test_power_iteration_agrees_with_null_space():
    T = TransitionMatrix(random_table(6, 6, make_rng(5)).table)
    np.testing.assert_allclose(stationary(T).probs, stationary_nullspace(T), atol=1e-10)


def test_slowly_mixing_chain_uses_null_space_solution():
    eps = 1e-6
    T = TransitionMatrix([[1 - eps, 2 * eps], [eps, 1 - 2 * eps]])
    assert is_ergodic(T).ergodic
    np.testing.assert_allclose(stationary(T).probs, [2 / 3, 1 / 3], atol=1e-10)


def test_stationary_raises_numeric_error_when_no_solve_settles(monkeypatch):
    T = TransitionMatrix([[0.5, 0.5], [0.5, 0.5]])
    monkeypatch.setattr(exact, "stationary_nullspace", lambda _: np.array([0.9, 0.1]))
    with pytest.raises(NumericError, match="null-space residual"):
        stationary(T, max_iter=0)


def test_stationary_refuses_non_ergodic_chain():
    with pytest.raises(ErgodicityError) as info:
        stationary(TransitionMatrix([[0.0, 1.0], [1.0, 0.0]]))
    assert "periodic" in str(info.value)


def test_gibbs_joint_and_posterior(rng):
    D = Dist.uniform(3)
    Q = random_table(4, 3, rng)
    J = gibbs_joint(D, Q)
    assert J.shape == (3, 4)
    assert J.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_array_equal(exact_posterior(D, CondTable(np.eye(3))).table, np.eye(3))


def test_posterior_of_empty_latent_state():
    Q = CondTable([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(SupportError) as info:
        exact_posterior(Dist.uniform(2), Q)
    assert info.value.index == 1


def test_theorem1_uniform_is_exact():
    assert verify_theorem1(Dist.uniform(2), CondTable(np.full((2, 2), 0.5))) == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_theorem1_random(seed):
    rng = make_rng(seed)
    D = Dist(rng.dirichlet(np.ones(5)))
    Q = random_table(4, 5, rng)
    assert verify_theorem1(D, Q) < 1e-10
    T = transition_matrix(exact_posterior(D, Q), Q)
    assert np.all(np.diag(T.table) > 0)


def test_theorem1_with_zero_probability_state(rng):
    D = Dist([0.6, 0.0, 0.4])
    assert verify_theorem1(D, random_table(3, 3, rng)) < 1e-10


def test_walkback_corruption(rng):
    P, Q = random_table(4, 3, rng), random_table(3, 4, rng)
    np.testing.assert_allclose(walkback_corruption(P, Q, 1).table, Q.table, atol=1e-15)
    W = walkback_corruption(P, Q, 5)
    np.testing.assert_allclose(W.table.sum(axis=0), np.ones(4), atol=1e-12)
    with pytest.raises(ValueError):
        walkback_corruption(P, Q, 0)
    assert verify_walkback_theorem1(Dist.uniform(4), Q, P, 3) < 1e-10


def test_dispersion_of_uniform_columns():
    assert dispersion(CondTable(np.full((4, 2), 0.25))) == pytest.approx(np.log(4))


def test_total_variation():
    assert total_variation(Dist([0.5, 0.5]), Dist([1.0, 0.0])) == 0.5
    assert total_variation([0.2, 0.8], [0.2, 0.8]) == 0.0


def test_table_csv_roundtrip(tmp_path, rng):
    T = TransitionMatrix(random_table(3, 3, rng).table)
    path = tmp_path / "t.csv"
    save_table(T, path)
    np.testing.assert_array_equal(load_transition(path).table, T.table)
    save_table(Dist([0.25, 0.75]), tmp_path / "d.csv")
    np.testing.assert_array_equal(load_table(tmp_path / "d.csv"), [[0.25], [0.75]])


def test_malformed_table_csv(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("s0,s1\n0.5,abc\n0.5,0.5\n")
    with pytest.raises(DataFormatError):
        load_table(path)
