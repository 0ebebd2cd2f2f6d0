import numpy as np
import pytest

from headrecon import autodiff as ad
from headrecon.config import NetworkConfig
from headrecon.exception import ShapeMismatch
from headrecon.network import MlpNetwork, mlp_forward


def test_zero_network_gives_zero_output(rng):
    net = MlpNetwork(3, (4, 4), 2)
    params = net.init_params(rng, zero=True)
    assert np.array_equal(mlp_forward(net, params, rng.normal(size=(5, 3))),
                          np.zeros((5, 2)))


def test_identity_layer_passes_input_through_head():
    net = MlpNetwork(3, (), 3, heads=(('sigmoid', 3),))
    params = np.concatenate([np.eye(3).reshape(-1), np.zeros(3)])
    x = np.array([-1.0, 0.0, 2.0])
    assert np.allclose(mlp_forward(net, params, x), 1.0 / (1.0 + np.exp(-x)))


def test_forward_is_reproducible():
    net = MlpNetwork(3, (8, 8), 4, skips=(1,), beta=10.0)
    x = np.random.default_rng(5).normal(size=(7, 3))
    first = mlp_forward(net, net.init_params(np.random.default_rng(3)), x)
    second = mlp_forward(net, net.init_params(np.random.default_rng(3)), x)
    assert np.array_equal(first, second)


def test_mixed_heads(rng):
    net = MlpNetwork(2, (5,), 4, heads=(('linear', 1), ('softmax', 3)))
    out = mlp_forward(net, net.init_params(rng), rng.normal(size=(6, 2)))
    assert np.allclose(out[:, 1:].sum(axis=-1), 1.0)


def test_input_gradient_matches_finite_differences(rng):
    net = MlpNetwork(3, (8, 8), 2, skips=(1,), beta=10.0)
    params = net.init_params(rng, geometric=True)
    x = rng.normal(size=(4, 3))
    _, gradient = net.forward(params, x, gradient=True)

    h = 1e-6
    numeric = np.stack([
        (net.forward(params, x + h * e)[:, 0] -
         net.forward(params, x - h * e)[:, 0]) / (2.0 * h)
        for e in np.eye(3)], axis=-1)
    assert np.allclose(gradient, numeric, rtol=1e-6, atol=1e-8)


def test_input_gradient_is_differentiable(rng):
    net = MlpNetwork(3, (6,), 1, beta=10.0)
    params = ad.ParamVector.from_segments([('mlp', net.init_params(rng))])
    x = rng.normal(size=(3, 3))

    def loss(p):
        _, gradient = net.forward(p, x, gradient=True)
        return ad.sum_(gradient * gradient)

    assert ad.finite_diff_check(loss, params) < 1e-6


def test_layout_and_serialization():
    net = MlpNetwork(3, (4,), 2, skips=(1,), name='sdf')
    assert net.layout() == [('sdf.W0', (3, 4)), ('sdf.b0', (4,)),
                            ('sdf.W1', (7, 2)), ('sdf.b1', (2,))]
    assert net.n_params == 12 + 4 + 14 + 2
    assert MlpNetwork.from_dict(net.to_dict()) == net


def test_invalid_networks(rng):
    with pytest.raises(ShapeMismatch):
        MlpNetwork(3, (4,), 2, skips=(2,))
    with pytest.raises(ShapeMismatch):
        MlpNetwork(3, (4,), 2, heads=(('softmax', 3),))
    net = MlpNetwork(3, (4,), 2)
    with pytest.raises(ShapeMismatch):
        mlp_forward(net, net.init_params(rng), np.zeros((1, 2)))
    with pytest.raises(ShapeMismatch):
        mlp_forward(net, np.zeros(3), np.zeros((1, 3)))


def test_configured_networks():
    sdf, color, semantic = NetworkConfig.toy().networks()
    assert (sdf.in_width, sdf.out_width) == (3, 3)
    assert color.in_width == 9 + 2 and color.heads == (('sigmoid', 3),)
    assert semantic.out_width == 6 and semantic.heads == (('softmax', 6),)
    assert (sdf.name, color.name, semantic.name) == ('sdf', 'color',
                                                     'semantic')

    large = NetworkConfig.full_scale()
    assert (large.sdf_width, large.sdf_depth, large.sdf_skips) == \
        (512, 8, (4,))
