import numpy as np
import pytest

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tape
from gsn_shaper.core.nets import LOGVAR_CLAMP, Mlp, ParamStore, gaussian_head, mlp_forward, mlp_init
from gsn_shaper.exceptions import ShapeError
from tests.conftest import zero_params


def test_init_is_deterministic():
    a = mlp_init([2, 16, 16, 1], seed=7)
    b = mlp_init([2, 16, 16, 1], seed=7)
    for (na, va), (nb, vb) in zip(a.store.items(), b.store.items()):
        assert na == nb
        np.testing.assert_array_equal(va, vb)


def test_init_biases_zero_and_weights_within_glorot_bound():
    net = mlp_init([2, 16, 16, 1], seed=7)
    for i, (fan_in, fan_out) in enumerate(zip(net.widths[:-1], net.widths[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.all(np.abs(net.store[f"mlp.w{i}"]) <= bound)
        assert np.all(net.store[f"mlp.b{i}"] == 0.0)


@pytest.mark.parametrize("widths", [[4], [2, 0, 1], []])
def test_init_rejects_bad_widths(widths):
    with pytest.raises(ValueError):
        mlp_init(widths, seed=0)


def test_zero_network_outputs_zero(rng):
    net = mlp_init([3, 5, 2], seed=0)
    zero_params(net.store)
    np.testing.assert_array_equal(mlp_forward(net, rng.standard_normal((4, 3))).value, np.zeros((4, 2)))


def test_single_layer_is_affine(rng):
    net = mlp_init([3, 2], seed=1)
    x = rng.standard_normal((5, 3))
    expected = x @ net.store["mlp.w0"] + net.store["mlp.b0"]
    np.testing.assert_allclose(mlp_forward(net, x).value, expected, atol=1e-12)


def test_forward_matches_hand_computation(rng):
    net = mlp_init([2, 4, 3, 1], seed=3)
    net.store.set("mlp.b1", rng.standard_normal(3))
    x = rng.standard_normal((6, 2))
    s = net.store
    h = np.tanh(x @ s["mlp.w0"] + s["mlp.b0"])
    h = np.tanh(h @ s["mlp.w1"] + s["mlp.b1"])
    expected = h @ s["mlp.w2"] + s["mlp.b2"]
    np.testing.assert_allclose(mlp_forward(net, x).value, expected, atol=1e-12)


def test_forward_is_row_permutation_equivariant(rng):
    net = mlp_init([2, 8, 3], seed=2)
    x = rng.standard_normal((7, 2))
    perm = rng.permutation(7)
    np.testing.assert_allclose(mlp_forward(net, x[perm]).value, mlp_forward(net, x).value[perm], atol=1e-12)


def test_forward_rejects_wrong_input_width():
    net = mlp_init([2, 3], seed=0)
    with pytest.raises(ShapeError):
        mlp_forward(net, np.zeros((4, 3)))


def test_gaussian_head_of_zero_net():
    net = mlp_init([2, 6, 4], seed=0)
    zero_params(net.store)
    mean, logvar = gaussian_head(net, np.ones((3, 2)))
    np.testing.assert_array_equal(mean.value, np.zeros((3, 2)))
    np.testing.assert_array_equal(logvar.value, np.zeros((3, 2)))


def test_gaussian_head_clamps_large_logvar():
    net = mlp_init([1, 2], seed=0)
    net.store.set("mlp.w0", np.zeros((1, 2)))
    net.store.set("mlp.b0", np.array([0.0, 50.0]))
    _, logvar = gaussian_head(net, np.zeros((1, 1)))
    assert 7.9 < logvar.item() < LOGVAR_CLAMP


def test_gaussian_head_logvar_in_open_interval(rng):
    net = mlp_init([2, 16, 6], seed=4)
    for name, value in net.store.items():
        net.store.set(name, value * 20.0)
    _, logvar = gaussian_head(net, rng.standard_normal((50, 2)) * 10)
    assert np.all(np.abs(logvar.value) <= LOGVAR_CLAMP)


def test_gaussian_head_needs_even_width():
    with pytest.raises(ValueError):
        gaussian_head(mlp_init([2, 3], seed=0), np.zeros((1, 2)))


def test_param_store_rules():
    store = ParamStore()
    store.add("b", np.zeros(2))
    store.add("a", np.zeros((2, 2)))
    assert store.names() == ["a", "b"]
    with pytest.raises(ValueError):
        store.add("a", np.zeros(1))
    with pytest.raises(ShapeError):
        store.set("b", np.zeros(3))


def test_bind_once_per_tape_and_frozen_has_no_leaves():
    net = mlp_init([2, 3], seed=0)
    tape = Tape()
    assert net.store.bind(tape) is net.store.bind(tape)
    frozen_tape = Tape()
    frozen = net.store.bind(frozen_tape, frozen=True)
    out = ad.sum(mlp_forward(net, np.ones((2, 2)), frozen))
    assert not frozen_tape.backward(out).by_name()


def test_snapshot_restore_roundtrip():
    net = mlp_init([2, 3], seed=0)
    snap = net.store.snapshot()
    zero_params(net.store)
    net.store.restore(snap)
    np.testing.assert_array_equal(net.store["mlp.w0"], snap["mlp.w0"])


def test_from_store_recovers_widths():
    store = ParamStore()
    Mlp.init([3, 5, 4, 2], seed=0, store=store, prefix="enc")
    assert Mlp.from_store(store, "enc").widths == [3, 5, 4, 2]
    with pytest.raises(ValueError):
        Mlp.from_store(store, "dec")
