import numpy as np
import pytest

from headrecon import autodiff as ad
from headrecon.config import NetworkConfig, TracerConfig
from headrecon.exception import TangentialRay, TracerException
from headrecon.geometry import Ray
from headrecon.sdf import AnalyticPlane, AnalyticSphere, AnalyticTorus, \
    SdfField
from headrecon.tracer import differentiable_intersection, \
    differentiable_points, occupancy_minimizer, render_color, \
    semantic_probs, soft_occupancy, sphere_trace, trace_rays

PLUS_X = np.array([1.0, 0.0, 0.0])
PLUS_Z = np.array([0.0, 0.0, 1.0])


class RadiusSphere(SdfField):
    """Origin-centered sphere whose radius may be a parameter."""

    def __init__(self, radius):
        self.radius = radius

    def distance(self, X, params=None):
        radius = self.radius if params is None else params[0]
        return ad.norm(X, axis=-1) - radius

    def gradient(self, X, params=None):
        return X / ad.norm(X, axis=-1, keepdims=True)


def test_hit_along_the_axis():
    result = sphere_trace(AnalyticSphere(), Ray((0.0, 0.0, -3.0), PLUS_Z))
    assert result.hit
    assert result.t == pytest.approx(2.0)
    assert np.allclose(result.x, (0.0, 0.0, -1.0))


def test_miss():
    result = sphere_trace(AnalyticSphere(), Ray((0.0, 0.0, -3.0), PLUS_X))
    assert not result.hit
    assert result.t <= TracerConfig().t_max


def test_grazing_ray_converges():
    result = sphere_trace(AnalyticSphere(), Ray((0.0, 0.999, -3.0), PLUS_Z))
    assert result.hit
    assert abs(np.linalg.norm(result.x) - 1.0) < 1e-3
    assert result.iterations < TracerConfig().max_iter


def test_barely_penetrating_ray_is_refined_onto_the_surface():
    # the ray dips 4e-5 into the sphere, below the hit tolerance
    result = sphere_trace(AnalyticSphere(),
                          Ray((0.0, 0.99996, -3.0), PLUS_Z))
    assert result.hit
    expected = (0.0, 0.99996, -np.sqrt(1.0 - 0.99996 ** 2))
    assert np.linalg.norm(result.x - expected) < 1e-6


def test_rays_left_marching_are_classified():
    cfg = TracerConfig(max_iter=3)
    near = sphere_trace(AnalyticSphere(), Ray((0.0, 0.5, -3.0), PLUS_Z), cfg)
    assert near.hit
    assert np.linalg.norm(near.x) == pytest.approx(1.0, abs=1e-9)
    far = sphere_trace(AnalyticSphere(), Ray((0.0, 1.5, -3.0), PLUS_Z), cfg)
    assert not far.hit


def test_origin_inside_is_a_miss():
    result = sphere_trace(AnalyticSphere(), Ray((0.0, 0.0, 0.0), PLUS_Z))
    assert not result.hit


def test_batched_trace_matches_single_rays(rng):
    sphere = AnalyticSphere(np.zeros(3), 0.8)
    dirs = rng.normal(size=(20, 3)) * (0.2, 0.2, 0.0) + PLUS_Z
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origin = np.array([0.0, 0.0, -3.0])
    batch = trace_rays(sphere, origin, dirs)
    for i, d in enumerate(dirs):
        single = sphere_trace(sphere, Ray(origin, d))
        assert single.hit == batch.hit[i]
        assert single.t == batch.t[i]
    assert np.all(np.abs(sphere(batch.x[batch.hit])) < TracerConfig().eps)


def test_threads_do_not_change_results(rng):
    sphere = AnalyticSphere(np.array([0.1, 0.0, 0.0]), 0.7)
    dirs = rng.normal(size=(101, 3)) * (0.3, 0.3, 0.0) + PLUS_Z
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origin = np.array([0.0, 0.0, -3.0])
    one = trace_rays(sphere, origin, dirs, threads=1)
    three = trace_rays(sphere, origin, dirs, threads=3)
    for name in ('hit', 't', 'x', 'iterations'):
        assert np.array_equal(getattr(one, name), getattr(three, name))


def test_empty_batch():
    result = trace_rays(AnalyticSphere(), np.zeros(3), np.zeros((0, 3)))
    assert len(result) == 0


def test_invalid_tracer_constants():
    with pytest.raises(TracerException):
        TracerConfig(eps=0.0)
    with pytest.raises(TracerException):
        TracerConfig(newton_steps=-1)
    assert TracerConfig(newton_steps=0).newton_steps == 0


def test_differentiable_intersection_projects_onto_the_surface():
    x = differentiable_intersection((0.0, 0.0, -1.01), PLUS_Z,
                                    AnalyticSphere())
    assert np.allclose(x, (0.0, 0.0, -1.0))


def test_tangential_ray():
    with pytest.raises(TangentialRay):
        differentiable_intersection((1.0, 0.0, 0.0), PLUS_Z, AnalyticSphere())


def test_intersection_derivatives():
    field = RadiusSphere(0.8)
    trace = trace_rays(field, np.array([0.0, 0.0, -3.0]), PLUS_Z[None, :])
    assert trace.hit[0]
    params = ad.ParamVector.from_segments([
        ('radius', np.array([0.8])), ('origin', np.array([0.0, 0.0, -3.0]))])

    def loss(p):
        x, valid = differentiable_points(field, ad.reshape(p[1:4], (1, 3)),
                                         PLUS_Z[None, :], trace.t, p)
        assert valid.all()
        return ad.sum_(x * np.array([1.0, 0.0, 1.0]))

    value, gradient = ad.value_and_grad(loss, params)
    assert value == pytest.approx(-0.8)
    # the hit point moves toward the camera as the radius grows and
    # follows the origin sideways
    assert np.allclose(gradient.values, (-1.0, 1.0, 0.0, 0.0), atol=1e-6)


def test_invalid_rows_keep_the_traced_point():
    x, valid = differentiable_points(
            AnalyticSphere(), np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -3.0]]),
            np.array([PLUS_Z, PLUS_Z]), np.array([0.0, 2.0]))
    assert valid.tolist() == [False, True]
    assert np.array_equal(x[0], (1.0, 0.0, 0.0))


def test_soft_occupancy_on_a_plane():
    plane = AnalyticPlane(PLUS_X, 0.0)
    inside = Ray((0.0, 0.0, -3.0), PLUS_Z)
    assert soft_occupancy(plane, inside, 50.0) == 0.5
    parallel = Ray((1.0, 0.0, -3.0), PLUS_Z)
    assert soft_occupancy(plane, parallel, 50.0) == \
        pytest.approx(1.929e-22, rel=1e-3)


def test_occupancy_minimizer_through_the_center():
    t_star, f_min = occupancy_minimizer(AnalyticSphere(),
                                        np.array([0.0, 0.0, -3.0]),
                                        PLUS_Z[None, :])
    assert f_min[0] == pytest.approx(-1.0, abs=1e-2)
    assert t_star[0] == pytest.approx(3.0, abs=1e-2)


def test_occupancy_minimizer_refines_the_grid(rng):
    cfg = TracerConfig()
    dirs = rng.normal(size=(30, 3)) * (0.3, 0.3, 0.0) + PLUS_Z
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origin = np.array([0.0, 0.0, -3.0])
    sphere = AnalyticSphere()
    _, f_min = occupancy_minimizer(sphere, origin, dirs, cfg)
    samples = np.linspace(0.0, cfg.t_max, cfg.occupancy_samples)
    grid = np.min(sphere((origin + samples[:, None, None] *
                          dirs).reshape(-1, 3)).reshape(len(samples), -1),
                  axis=0)
    assert np.all(f_min <= grid)


def test_zero_networks_give_neutral_outputs(rng):
    _, color, semantic = NetworkConfig.toy().networks()
    x = np.array([0.1, 0.2, 0.3])
    rgb = render_color(color, color.init_params(rng, zero=True), x, PLUS_Z,
                       -PLUS_Z, np.zeros(2))
    assert rgb.shape == (3,)
    assert np.allclose(rgb, 0.5)

    probs = semantic_probs(semantic, semantic.init_params(rng, zero=True),
                           np.stack([x, -x]))
    assert probs.shape == (2, 6)
    assert np.allclose(probs, 1.0 / 6.0)


def _random_rays(rng, n):
    origins = rng.normal(size=(n, 3))
    origins *= 3.0 / np.linalg.norm(origins, axis=-1, keepdims=True)
    dirs = rng.uniform(-1.2, 1.2, size=(n, 3)) - origins
    return origins, dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def _grazing(field, origins, dirs, t_max, margin=1e-2):
    """Rays whose distance along the ray has a local minimum within
    ``margin`` of zero; their hit or miss is decided below the sampling
    resolution."""

    samples = np.linspace(0.0, t_max, 1201)
    grazing = np.zeros(len(origins), dtype=bool)
    for start in range(0, len(origins), 500):
        o = origins[start:start + 500]
        d = dirs[start:start + 500]
        X = o[:, None, :] + samples[None, :, None] * d[:, None, :]
        f = np.asarray(field(X.reshape(-1, 3))).reshape(len(o), -1)
        minimum = (f[:, 1:-1] <= f[:, :-2]) & (f[:, 1:-1] <= f[:, 2:])
        grazing[start:start + 500] = np.any(
                minimum & (np.abs(f[:, 1:-1]) < margin), axis=-1)
    return grazing


def _sphere_hits(origins, dirs):
    b = np.einsum('ij,ij->i', origins, dirs)
    disc = b ** 2 - (np.einsum('ij,ij->i', origins, origins) - 1.0)
    t = -b - np.sqrt(np.maximum(disc, 0.0))
    return (disc >= 0.0) & (t > 0.0), t


def _torus_hits(origins, dirs, major, minor):
    k = 4.0 * major ** 2
    hits = np.zeros(len(origins), dtype=bool)
    ts = np.zeros(len(origins))
    for i, (o, d) in enumerate(zip(origins, dirs)):
        a = 2.0 * o @ d
        b = o @ o + major ** 2 - minor ** 2
        roots = np.roots([1.0, 2.0 * a, a ** 2 + 2.0 * b - k * (d[0] ** 2 +
                                                               d[1] ** 2),
                          2.0 * a * b - 2.0 * k * (o[0] * d[0] + o[1] * d[1]),
                          b ** 2 - k * (o[0] ** 2 + o[1] ** 2)])
        real = roots.real[(np.abs(roots.imag) < 1e-6) & (roots.real > 0.0)]
        if len(real):
            hits[i], ts[i] = True, real.min()
    return hits, ts


@pytest.mark.parametrize('shape', ['sphere', 'torus'])
def test_random_rays_match_closed_form_intersections(rng, shape):
    cfg = TracerConfig(t_max=6.0)
    origins, dirs = _random_rays(rng, 10000)
    if shape == 'sphere':
        field = AnalyticSphere()
        hits, ts = _sphere_hits(origins, dirs)
    else:
        field = AnalyticTorus(1.0, 0.25)
        hits, ts = _torus_hits(origins, dirs, 1.0, 0.25)
    clear = ~_grazing(field, origins, dirs, cfg.t_max)
    assert clear.mean() > 0.9
    assert hits[clear].any() and not hits[clear].all()

    result = trace_rays(field, origins, dirs, cfg)
    assert np.array_equal(result.hit[clear], hits[clear])
    both = clear & hits
    expected = origins[both] + ts[both, None] * dirs[both]
    assert np.max(np.linalg.norm(result.x[both] - expected, axis=-1)) < 1e-3
