import numpy as np
import pytest

from headrecon import autodiff as ad
from headrecon.exception import AutodiffException, NonFiniteLoss, \
    ShapeMismatch
from headrecon.network import MlpNetwork


def _params(*values):
    return ad.ParamVector.from_segments([('theta', np.array(values,
                                                            dtype=float))])


def test_square():
    value, gradient = ad.value_and_grad(lambda p: p[0] * p[0], _params(3.0))
    assert value == 9.0
    assert gradient.values.tolist() == [6.0]


def test_softplus_slope_at_zero():
    gradient = ad.grad(lambda p: ad.softplus(p[0], 100.0), _params(0.0))
    assert gradient.values[0] == pytest.approx(0.5)


def test_constant_loss_has_zero_gradient():
    params = _params(1.0, 2.0)
    value, gradient = ad.value_and_grad(lambda p: 3.0, params)
    assert value == 3.0
    assert np.array_equal(gradient.values, np.zeros(2))
    assert ad.finite_diff_check(lambda p: 3.0, params) == 0.0


def test_quadratic_check():
    target = np.array([0.1, 0.1, 0.1])

    def loss(p):
        return ad.sum_((p - target) ** 2)

    assert ad.finite_diff_check(loss, _params(0.3, -0.2, 0.5)) < 1e-9


def test_mlp_matches_finite_differences(rng):
    net = MlpNetwork(2, (4, 3), 1, beta=10.0)
    params = ad.ParamVector.from_segments([('mlp', net.init_params(rng))])
    x = rng.normal(size=(5, 2))

    def loss(p):
        return ad.sum_(net.forward(p, x))

    assert ad.finite_diff_check(loss, params) < 1e-6


def test_composite_primitives(rng):
    weights = rng.normal(size=3)
    mask = np.array([True, False, True, True])

    def loss(p):
        logits = ad.stack([p[0], p[1] * p[2], ad.tanh(p[3])])
        spread = ad.concatenate([p[:2], ad.exp(p[2:])])
        picked = ad.getitem(p, mask)
        return ad.sum_(ad.log_softmax(logits) * weights) + \
            ad.sum_(spread * spread) + ad.norm(picked, axis=0) + \
            ad.sum_(ad.where(ad.value_of(p) > 0.0, ad.sqrt(ad.abs_(p)),
                             ad.sigmoid(p)))

    params = _params(0.3, -0.7, 0.2, 1.1)
    assert ad.finite_diff_check(loss, params) < 1e-7


def test_getitem_mask_gradient():
    mask = np.array([True, False, True])
    gradient = ad.grad(lambda p: ad.sum_(ad.getitem(p, mask) * 2.0),
                       _params(1.0, 2.0, 3.0))
    assert gradient.values.tolist() == [2.0, 0.0, 2.0]


def test_where_gradient_follows_the_chosen_branch():
    condition = np.array([True, False])
    gradient = ad.grad(lambda p: ad.sum_(ad.where(condition, 3.0 * p, p * p)),
                       _params(1.0, 2.0))
    assert gradient.values.tolist() == [3.0, 4.0]


def test_matmul_gradient(rng):
    A = rng.normal(size=(4, 3))

    def loss(p):
        M = p.reshape((3, 2))
        return ad.sum_(ad.matmul(A, M) ** 2) + \
            ad.sum_(ad.matmul(ad.transpose(M), A.T))

    params = ad.ParamVector.from_segments([('m', rng.normal(size=6))])
    assert ad.finite_diff_check(loss, params) < 1e-7


def test_eigenvector_gradient(rng):
    weights = rng.normal(size=3)

    def loss(p):
        A = ad.reshape(p, (1, 3, 3))
        H = A + ad.swapaxes(A, 1, 2)
        values, vectors = np.linalg.eigh(ad.value_of(H))
        selected = vectors[0, :, 0]
        sign = -1.0 if selected[np.argmax(np.abs(selected))] < 0 else 1.0
        v = ad.sym_eigvec(H, np.array([0]), np.array([sign]))
        return ad.sum_(v[0] * weights)

    params = ad.ParamVector.from_segments(
            [('a', np.diag([1.0, 2.0, 4.0]).reshape(-1) +
              0.1 * rng.normal(size=9))])
    assert ad.finite_diff_check(loss, params) < 1e-5


def test_unrecorded_operands_give_arrays():
    out = ad.softplus(np.array([0.0, 1.0]), 2.0)
    assert isinstance(out, np.ndarray)
    assert np.allclose(out, np.logaddexp(0.0, [0.0, 2.0]) / 2.0)


def test_non_finite_loss():
    with pytest.raises(NonFiniteLoss):
        with np.errstate(divide='ignore'):
            ad.value_and_grad(lambda p: ad.log(p[0] * 0.0), _params(1.0))
    with pytest.raises(NonFiniteLoss):
        _params(1.0, np.nan)


def test_non_scalar_loss():
    with pytest.raises(ShapeMismatch):
        ad.value_and_grad(lambda p: p * 2.0, _params(1.0, 2.0))


def test_gradient_of_foreign_output():
    first, second = ad.Tape(), ad.Tape()
    x = first.variable(np.ones(2))
    with pytest.raises(AutodiffException):
        second.gradient(ad.sum_(x), [x])


def test_param_vector_segments():
    params = ad.ParamVector.from_segments([
        ('net.W0', np.arange(6.0).reshape(2, 3)), ('net.b0', np.ones(3)),
        ('camera.omega', np.zeros((2, 3)))])
    assert len(params) == 15
    assert params.span('net.') == (0, 9)
    assert params.span('camera.') == (9, 15)
    assert np.array_equal(params.get('net.W0'),
                          np.arange(6.0).reshape(2, 3))
    assert params.names('net.') == ['net.W0', 'net.b0']

    tape = ad.Tape()
    view = params.view(tape.variable(params.values), 'net.W0')
    assert isinstance(view, ad.Var) and view.shape == (2, 3)

    copy = ad.ParamVector.from_layout_dict(params.values,
                                           params.layout_dict())
    assert copy.layout == params.layout
    with pytest.raises(ShapeMismatch):
        params.segment('sdf.W0')
    with pytest.raises(ShapeMismatch):
        params.with_values(np.zeros(14))


def test_param_vector_span_must_be_contiguous():
    params = ad.ParamVector.from_segments([
        ('a.x', np.zeros(2)), ('b', np.zeros(1)), ('a.y', np.zeros(2))])
    with pytest.raises(ShapeMismatch):
        params.span('a.')
