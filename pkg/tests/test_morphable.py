import numpy as np
import pytest

from headrecon import autodiff as ad
from headrecon.exception import CountMismatch, EmptyMask, NonFiniteLoss, \
    NotUnit, ShapeMismatch, ZeroSigma
from headrecon.geometry import Camera, euler_to_matrix
from headrecon.morphable import LinearMorphableModel, MorphCoeffs, \
    ShLighting, default_camera, energy_landmark, energy_photo, energy_reg, \
    fit_proxy, load_model, model_albedo, model_geometry, proxy_mesh, \
    rasterize, sample_bilinear, sample_proxy_points, save_model, sh_basis, \
    shade_vertex, synthetic_morphable_model, vertex_normals, \
    visible_vertices


@pytest.fixture(scope='module')
def model():
    return synthetic_morphable_model(0)


def _tiny_model(**overrides):
    fields = dict(n_v=3, mean_geo=[0, 0, 0, 0.1, 0, 0, 0, 0.1, 0],
                  mean_alb=np.full(9, 0.5), B_id=np.eye(9)[:, :2],
                  B_exp=np.ones((9, 1)), B_alb=np.eye(9)[:, :1],
                  sigma_id=[0.5, 2.0], sigma_exp=[1.0], sigma_alb=[0.25],
                  triangles=[[0, 1, 2]], landmarks=[0])
    fields.update(overrides)
    return LinearMorphableModel(**fields)


def test_sh_basis_of_the_z_axis():
    assert np.allclose(sh_basis((0.0, 0.0, 1.0)),
                       (0.282095, 0.0, 0.488603, 0.0, 0.0, 0.0, 0.630784,
                        0.0, 0.0))


def test_sh_basis_is_orthonormal(rng):
    normals = rng.normal(size=(1_000_000, 3))
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    phi = sh_basis(normals)
    gram = 4.0 * np.pi * phi.T @ phi / len(phi)
    assert np.allclose(gram, np.eye(9), atol=1e-2)


def test_sh_basis_needs_unit_normals():
    with pytest.raises(NotUnit):
        sh_basis((0.0, 0.0, 2.0))


def test_ambient_shading_is_the_albedo():
    rgb = shade_vertex((0.5, 0.5, 0.5), (0.0, 0.0, 1.0), ShLighting.ambient())
    assert np.allclose(rgb, 0.5)
    gamma = np.zeros(9)
    gamma[0] = 1.0 / 0.282095
    assert np.allclose(shade_vertex((0.5, 0.2, 0.1), (0.6, 0.0, 0.8), gamma),
                       (0.5, 0.2, 0.1))


def test_zero_coefficients_give_the_mean(model):
    assert np.array_equal(model_geometry(model, model.zero_coeffs()),
                          model.mean_geo.reshape(-1, 3))
    assert np.array_equal(model_albedo(model, model.zero_coeffs()),
                          model.mean_alb.reshape(-1, 3))


def test_first_identity_coefficient_adds_the_first_column(model):
    alpha_id = np.zeros(model.k_id)
    alpha_id[0] = 1.0
    coeffs = MorphCoeffs(alpha_id, np.zeros(model.k_exp),
                         np.zeros(model.k_alb))
    assert np.allclose(model_geometry(model, coeffs),
                       (model.mean_geo + model.B_id[:, 0]).reshape(-1, 3))


def test_coefficient_shapes(model):
    with pytest.raises(ShapeMismatch):
        model_geometry(model, MorphCoeffs(np.zeros(model.k_id + 1),
                                          np.zeros(model.k_exp),
                                          np.zeros(model.k_alb)))
    with pytest.raises(NonFiniteLoss):
        MorphCoeffs([np.nan], [0.0], [0.0])


def test_invalid_models():
    with pytest.raises(ZeroSigma):
        _tiny_model(sigma_exp=[0.0])
    with pytest.raises(ShapeMismatch):
        _tiny_model(B_id=np.eye(9)[:, :2], sigma_id=[1.0])
    with pytest.raises(ShapeMismatch):
        _tiny_model(landmarks=[3])
    with pytest.raises(ShapeMismatch):
        ShLighting(np.zeros(4))


def test_regularizer_at_one_sigma():
    tiny = _tiny_model()
    coeffs = MorphCoeffs(tiny.sigma_id, tiny.sigma_exp, tiny.sigma_alb)
    assert float(energy_reg(tiny, coeffs)) == pytest.approx(4.0)
    assert float(energy_reg(tiny, tiny.zero_coeffs())) == 0.0


def test_landmark_energy():
    tiny = _tiny_model()
    cam = default_camera(64, 64)
    assert np.allclose(cam.project(np.zeros((1, 3))), [[32.0, 32.0]])
    energy = energy_landmark(tiny, tiny.zero_coeffs(), [cam],
                             [np.array([[35.0, 36.0]])])
    assert float(energy) == pytest.approx(25.0)

    unobserved = energy_landmark(tiny, tiny.zero_coeffs(), [cam],
                                 [np.array([[np.nan, np.nan]])])
    assert float(unobserved) == 0.0
    with pytest.raises(CountMismatch):
        energy_landmark(tiny, tiny.zero_coeffs(), [cam],
                        [np.zeros((2, 2))])


def test_photometric_energy_errors(model):
    cam = default_camera(32, 32)
    image = np.zeros((32, 32, 3))
    with pytest.raises(EmptyMask):
        energy_photo(model, model.zero_coeffs(), [ShLighting.ambient()],
                     [cam], [image], [np.zeros((32, 32), bool)])
    with pytest.raises(CountMismatch):
        energy_photo(model, model.zero_coeffs(), [], [cam], [image],
                     [np.ones((32, 32), bool)])


def test_synthetic_model(model):
    assert model.n_v == 642
    assert len(model.triangles) == 1280
    assert (model.k_id, model.k_exp, model.k_alb) == (4, 2, 2)
    assert len(model.landmarks) == 8
    assert np.allclose(np.linalg.norm(model.mean_geo.reshape(-1, 3),
                                      axis=-1), 0.6)


def test_vertex_normals_of_the_mean_sphere(model):
    vertices = model.mean_geo.reshape(-1, 3)
    normals = vertex_normals(vertices, model.triangles)
    assert np.allclose(np.linalg.norm(normals, axis=-1), 1.0)
    assert np.min(np.einsum('ij,ij->i', normals, vertices / 0.6)) > 0.99


def test_front_vertices_are_visible(model):
    vertices = model.mean_geo.reshape(-1, 3)
    visible = visible_vertices(vertices, vertex_normals(vertices,
                                                        model.triangles),
                               default_camera(32, 32))
    assert visible[model.landmarks].all()
    assert 0 < np.count_nonzero(visible) < model.n_v // 2


def test_rasterized_sphere(model):
    vertices = model.mean_geo.reshape(-1, 3)
    image, mask, depth = rasterize(vertices, model.triangles,
                                   np.ones((model.n_v, 3)),
                                   default_camera(32, 32))
    assert mask[16, 16] and not mask[0, 0]
    assert depth[16, 16] == pytest.approx(1.9, abs=0.02)
    assert np.allclose(image[mask], 1.0)
    assert np.all(image[~mask] == 0.0) and np.all(np.isinf(depth[~mask]))


def test_bilinear_sampling():
    image = np.arange(20.0).reshape(4, 5, 1)
    uv = np.array([[0.5, 0.5], [3.5, 2.5], [1.0, 0.5], [-4.0, 9.0]])
    assert np.allclose(sample_bilinear(image, uv)[:, 0],
                       (0.0, 13.0, 0.5, 15.0))

    weights = np.array([[1.0], [-2.0]])

    def loss(p):
        return ad.sum_(sample_bilinear(image, ad.reshape(p, (2, 2))) *
                       weights)

    params = ad.ParamVector.from_segments([('uv', np.array([1.3, 2.2, 3.1,
                                                            0.9]))])
    assert ad.finite_diff_check(loss, params) < 1e-8


def test_proxy_points(model):
    mesh = proxy_mesh(model, model.zero_coeffs())
    assert np.array_equal(mesh.vertices, model.mean_geo.reshape(-1, 3))
    first = sample_proxy_points(mesh, 50, seed=4)
    assert np.array_equal(first, sample_proxy_points(mesh, 50, seed=4))
    assert np.allclose(np.linalg.norm(first, axis=-1), 0.6, atol=0.02)
    with pytest.raises(ShapeMismatch):
        sample_proxy_points(mesh, 0)


def test_model_file(tmp_path, model):
    path = str(tmp_path / 'model.json')
    save_model(path, model)
    loaded = load_model(path)
    assert loaded.n_v == model.n_v
    assert np.array_equal(loaded.B_exp, model.B_exp)
    assert np.array_equal(loaded.landmarks, model.landmarks)


def test_proxy_fit_decreases_the_energy(model):
    cam = default_camera(32, 32)
    truth = MorphCoeffs(0.5 * model.sigma_id, np.zeros(model.k_exp),
                        np.zeros(model.k_alb))
    vertices = np.asarray(model_geometry(model, truth))
    image, mask, _ = rasterize(vertices, model.triangles,
                               np.asarray(model_albedo(model, truth)), cam)
    landmarks = cam.project(vertices[model.landmarks])

    result = fit_proxy(model, [image], [mask], [landmarks], max_iter=25)
    assert result.iterations >= 1
    assert result.trace[-1] < result.trace[0]
    assert np.all(np.diff(result.trace) <= 0.0)
    assert result.energy == result.trace[-1]
    assert len(result.cameras) == len(result.lighting) == 1

    with pytest.raises(CountMismatch):
        fit_proxy(model, [image], [mask, mask], [landmarks])


@pytest.mark.slow
def test_proxy_fit_recovers_the_identity(model):
    size = 160
    cams = []
    for yaw in (-0.3, 0.0, 0.3):
        R = np.asarray(euler_to_matrix(np.array([0.0, yaw, 0.0])))
        cams.append(Camera(R, np.array([0.0, 0.0, 2.5]), 1.5 * size,
                           1.5 * size, size / 2.0, size / 2.0, size, size))
    truth = MorphCoeffs(np.array([0.5, -0.4, 0.3, -0.5]) * model.sigma_id,
                        np.zeros(model.k_exp), np.zeros(model.k_alb))
    vertices = np.asarray(model_geometry(model, truth))
    albedo = np.asarray(model_albedo(model, truth))
    images, masks, landmarks = [], [], []
    for cam in cams:
        image, mask, _ = rasterize(vertices, model.triangles, albedo, cam)
        images.append(image)
        masks.append(mask)
        landmarks.append(cam.project(vertices[model.landmarks]))

    result = fit_proxy(model, images, masks, landmarks, cams)
    error = np.abs(np.asarray(result.coeffs.alpha_id) - truth.alpha_id)
    assert np.all(error < 0.05 * model.sigma_id)
    assert result.energy < 0.01 * result.trace[0]
