import numpy as np
import pytest

from headrecon.config import NetworkConfig
from headrecon.exception import SdfException, UmbilicPoint, \
    VanishingGradient
from headrecon.sdf import AnalyticCylinder, AnalyticPlane, \
    AnalyticSphere, AnalyticTorus, AnalyticUnion, NeuralSdf, SdfField, \
    eikonal_points, eikonal_residual, field_from_dict, \
    principal_directions, principal_directions_batch, sdf_eval, \
    sdf_hessian, sdf_normal, sign_normalize, tube_direction


class ScaledSphere(SdfField):
    """``2 (|x| - 1)``: the right zero set with twice the slope."""

    sphere = AnalyticSphere()

    def distance(self, X, params=None):
        return 2.0 * self.sphere.distance(X)

    def gradient(self, X, params=None):
        return 2.0 * self.sphere.gradient(X)


def _torus_point(major, minor, phi, psi):
    rho = major + minor * np.cos(psi)
    return np.array([rho * np.cos(phi), rho * np.sin(phi),
                     minor * np.sin(psi)])


def test_sphere_distance():
    value, features = sdf_eval(AnalyticSphere(), (0.0, 0.0, 2.0))
    assert value == 1.0
    assert features.shape == (0,)


def test_torus_distance_on_the_tube():
    torus = AnalyticTorus(1.0, 0.25)
    assert sdf_eval(torus, (1.0, 0.0, 0.25))[0] == pytest.approx(0.0,
                                                                 abs=1e-15)
    assert sdf_eval(torus, (2.0, 0.0, 0.0))[0] == pytest.approx(0.75)
    assert sdf_eval(torus, (0.0, 0.0, 0.0))[0] == pytest.approx(0.75)


def test_union_is_the_pointwise_minimum(rng):
    sphere = AnalyticSphere(np.zeros(3), 0.6)
    torus = AnalyticTorus(0.4, 0.15, np.array([0.0, -0.55, 0.0]),
                          np.array([0.0, 1.0, 0.0]))
    union = AnalyticUnion((sphere, torus))
    X = rng.uniform(-1.0, 1.0, (200, 3))
    assert np.allclose(union(X), np.minimum(sphere(X), torus(X)))
    gradients = np.asarray(union.gradient(X))
    nearest = union.component_index(X)
    assert np.allclose(gradients[nearest == 1],
                       np.asarray(torus.gradient(X))[nearest == 1])


def test_normals():
    assert np.allclose(sdf_normal(AnalyticSphere(), (0.0, 0.0, 2.0)),
                       (0.0, 0.0, 1.0))
    plane = AnalyticPlane(np.array([1.0, 2.0, 2.0]), 0.5)
    for x in ((0.0, 0.0, 0.0), (3.0, -1.0, 7.0)):
        assert np.allclose(sdf_normal(plane, x), np.array([1, 2, 2]) / 3.0)


def test_normal_vanishes_at_the_sphere_center():
    with pytest.raises(VanishingGradient):
        sdf_normal(AnalyticSphere(), (0.0, 0.0, 0.0))


def test_plane_hessian_is_zero():
    H = sdf_hessian(AnalyticPlane(np.array([0.0, 1.0, 1.0]), 0.2),
                    (0.3, 0.1, -0.4))
    assert np.max(np.abs(H)) < 1e-8


def test_sphere_hessian_eigenvalues():
    H = sdf_hessian(AnalyticSphere(), (0.0, 0.0, 2.0))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), (0.0, 0.5, 0.5),
                       atol=1e-5)


def test_torus_hessian_matches_second_differences():
    torus = AnalyticTorus(1.0, 0.25)
    x = _torus_point(1.0, 0.25, 0.7, 0.4)
    h = 2e-4
    E = np.eye(3) * h
    expected = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            expected[i, j] = (torus(x + E[i] + E[j]) - torus(x + E[i] - E[j])
                              - torus(x - E[i] + E[j]) +
                              torus(x - E[i] - E[j]))[0] / (4.0 * h * h)
    assert np.allclose(sdf_hessian(torus, x), expected, atol=1e-5)


def test_torus_principal_direction_follows_the_tube():
    sample = principal_directions(AnalyticTorus(1.0, 0.25), (1.25, 0.0, 0.0))
    angle = np.degrees(np.arccos(min(abs(sample.D @ (0.0, 1.0, 0.0)), 1.0)))
    assert angle < 2.0
    assert np.allclose(sample.D, (0.0, 1.0, 0.0), atol=1e-3)
    assert abs(sample.kappa1) == pytest.approx(0.8, abs=1e-3)
    assert abs(sample.kappa2) == pytest.approx(4.0, abs=1e-2)
    assert np.allclose(sample.n, (1.0, 0.0, 0.0))


def test_torus_curvatures_over_the_surface(rng):
    torus = AnalyticTorus(1.0, 0.25)
    phi, psi = rng.uniform(0.0, 2.0 * np.pi, (2, 1000))
    X = np.stack([_torus_point(1.0, 0.25, a, b) for a, b in zip(phi, psi)])
    result = principal_directions_batch(torus, X)
    assert result.valid.all()

    cosine = np.abs(np.einsum('ij,ij->i', np.asarray(result.D),
                              tube_direction(torus, X)))
    assert np.all(cosine >= np.cos(np.radians(2.0)))
    toroidal = np.cos(psi) / (1.0 + 0.25 * np.cos(psi))
    assert np.allclose(result.kappa_min, toroidal, rtol=1e-2, atol=1e-3)
    assert np.allclose(result.kappa_max, 4.0, rtol=1e-2)


def test_cylinder_principal_direction_is_the_axis():
    cylinder = AnalyticCylinder(np.zeros(3), np.array([0.0, 0.0, 1.0]), 1.0)
    sample = principal_directions(cylinder, (0.6, 0.8, 0.3))
    angle = np.degrees(np.arccos(min(abs(sample.D[2]), 1.0)))
    assert angle < 1.0
    assert sample.D[2] > 0.0
    assert abs(sample.kappa1) < 1e-4


def test_sphere_is_umbilic():
    with pytest.raises(UmbilicPoint):
        principal_directions(AnalyticSphere(), (0.0, 1.0, 0.0))


def test_tube_direction_is_tangent(rng):
    torus = AnalyticTorus(1.0, 0.25)
    X = np.stack([_torus_point(1.0, 0.25, phi, psi) for phi, psi in
                  rng.uniform(0.0, 2.0 * np.pi, (20, 2))])
    D = tube_direction(torus, X)
    normals = np.asarray(torus.gradient(X))
    assert np.allclose(np.einsum('ij,ij->i', D, normals), 0.0, atol=1e-12)
    assert np.array_equal(sign_normalize(D), D)


def test_eikonal_residual_of_exact_distances(rng):
    points = rng.uniform(-1.0, 1.0, (100, 3))
    assert eikonal_residual(AnalyticSphere(), points) < 1e-12
    assert eikonal_residual(ScaledSphere(), points) == pytest.approx(1.0)
    with pytest.raises(SdfException):
        eikonal_residual(AnalyticSphere(), np.zeros((0, 3)))


def test_geometric_initialization_is_nearly_a_distance():
    net = NetworkConfig.full_scale().networks()[0]
    rng = np.random.default_rng(0)
    field = NeuralSdf(net, net.init_params(rng, geometric=True, radius=0.75))
    points = rng.uniform(-1.0, 1.0, (1024, 3))
    assert eikonal_residual(field, points) < 0.1


def test_neural_field_features_and_gradient(rng):
    net = NetworkConfig.toy().networks()[0]
    field = NeuralSdf(net, net.init_params(rng, geometric=True))
    X = rng.uniform(-0.5, 0.5, (6, 3))
    distance, features, gradient = field.evaluate(X, gradient=True)
    assert distance.shape == (6,) and features.shape == (6, 2)
    assert field.feature_width == 2

    h = 1e-6
    numeric = np.stack([(field(X + h * e) - field(X - h * e)) / (2.0 * h)
                        for e in np.eye(3)], axis=-1)
    assert np.allclose(gradient, numeric, atol=1e-7)
    with pytest.raises(SdfException):
        NeuralSdf(net, np.zeros(3))


def test_eikonal_points(rng):
    surface = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    points = eikonal_points(rng, 10, (-1.0, 1.0), surface, sigma=0.01)
    assert points.shape == (10, 3)
    nearest = np.min(np.linalg.norm(points[:5, None] - surface, axis=-1),
                     axis=-1)
    assert np.all(nearest < 0.1)
    assert np.all(np.abs(points[5:]) <= 1.0)


def test_field_dictionaries(rng):
    union = AnalyticUnion((AnalyticSphere(np.array([0.1, 0.0, 0.0]), 0.6),
                           AnalyticTorus(0.4, 0.15),
                           AnalyticPlane(np.array([0.0, 1.0, 0.0]), 2.0),
                           AnalyticCylinder(radius=0.3)))
    copy = field_from_dict(union.to_dict())
    X = rng.uniform(-1.0, 1.0, (50, 3))
    assert np.array_equal(copy(X), union(X))

    net = NetworkConfig.toy().networks()[0]
    neural = NeuralSdf(net, net.init_params(rng))
    assert np.array_equal(field_from_dict(neural.to_dict())(X), neural(X))

    with pytest.raises(SdfException):
        field_from_dict({'type': 'cube'})
