import numpy as np
import pytest

from headrecon.exception import MeshException, ParseError
from headrecon.mesh import Similarity, TriangleMesh, VoxelGrid, \
    export_obj, geometric_error, import_obj, marching_cubes, \
    orientation_deviation, radial_error, sample_grid, similarity_align, \
    umeyama
from headrecon.sdf import AnalyticSphere, AnalyticTorus, tube_direction

TRIANGLES = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0],
                          [2, 2, 0]], [[0, 1, 2], [1, 3, 4]])


@pytest.fixture(scope='module')
def sphere_mesh():
    grid = sample_grid(AnalyticSphere(np.zeros(3), 0.8), (-1.2, 1.2), 40)
    return marching_cubes(grid)


def test_sphere_extraction(sphere_mesh):
    assert not sphere_mesh.is_empty
    assert radial_error(sphere_mesh, radius=0.8) < 0.01
    assert sphere_mesh.area == pytest.approx(4.0 * np.pi * 0.64, rel=0.02)


def test_extracted_normals_point_outside(sphere_mesh):
    outward = sphere_mesh.vertices / np.linalg.norm(sphere_mesh.vertices,
                                                    axis=-1, keepdims=True)
    assert np.mean(np.einsum('ij,ij->i', sphere_mesh.normals, outward)) > \
        0.99
    radial = np.einsum('ij,ij->i', sphere_mesh.face_normals(),
                       sphere_mesh.centroids())
    assert np.mean(radial > 0.0) > 0.99
    flipped = np.einsum('ij,ij->i', sphere_mesh.flipped().face_normals(),
                        sphere_mesh.centroids())
    assert np.mean(flipped < 0.0) > 0.99


def test_doubling_the_resolution_reduces_the_error():
    sphere = AnalyticSphere(np.zeros(3), 0.8)
    errors = []
    for resolution in (64, 128):
        grid = sample_grid(sphere, (-1.0, 1.0), resolution)
        mesh = marching_cubes(grid)
        distance = np.abs(np.linalg.norm(mesh.vertices, axis=-1) - 0.8)
        assert distance.max() < grid.cell_diagonal
        errors.append(radial_error(mesh, radius=0.8))
    assert errors[1] <= 0.6 * errors[0]


def test_no_sign_change_gives_an_empty_mesh():
    grid = sample_grid(AnalyticSphere(np.full(3, 5.0), 0.5), (-1.0, 1.0), 8)
    mesh = marching_cubes(grid)
    assert mesh.is_empty and len(mesh) == 0
    with pytest.raises(MeshException):
        radial_error(mesh)


def test_grid_sampling(rng):
    sphere = AnalyticSphere(np.array([0.1, 0.0, 0.0]), 0.5)
    grid = sample_grid(sphere, ((-1.0, -1.0, -1.0), (1.0, 2.0, 1.0)),
                       (5, 7, 3))
    assert grid.resolution == (5, 7, 3)
    assert np.allclose(grid.spacing, (0.5, 0.5, 1.0))
    assert grid.values[0, 0, 0] == sphere(np.array([-1.0, -1.0, -1.0]))[0]
    assert np.array_equal(grid.values.reshape(-1), sphere(grid.points()))
    threaded = sample_grid(sphere, ((-1.0, -1.0, -1.0), (1.0, 2.0, 1.0)),
                           (5, 7, 3), threads=4)
    assert np.array_equal(threaded.values, grid.values)


def test_invalid_grids():
    with pytest.raises(MeshException):
        VoxelGrid(np.zeros(3), np.ones(3), np.zeros((1, 4, 4)))
    with pytest.raises(MeshException):
        VoxelGrid(np.ones(3), np.zeros(3), np.zeros((2, 2, 2)))
    with pytest.raises(MeshException):
        sample_grid(AnalyticSphere(), resolution=1)


def test_degenerate_triangles():
    vertices = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]
    with pytest.raises(MeshException):
        TriangleMesh(vertices, [[0, 1, 2], [0, 1, 3]])
    assert len(TriangleMesh.cleaned(vertices, [[0, 1, 2], [0, 1, 3]])) == 1
    with pytest.raises(MeshException):
        TriangleMesh(vertices, [[0, 1, 4]])


def test_single_sample_lies_in_the_triangle(rng):
    mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    point = mesh.sample_points(1, rng)[0]
    assert point[2] == 0.0
    assert point[0] >= 0.0 and point[1] >= 0.0
    assert point[0] + point[1] <= 1.0 + 1e-12


def test_samples_follow_the_areas(rng):
    # the second triangle has twice the area of the first
    points = TRIANGLES.sample_points(30000, rng)
    first = np.count_nonzero(points[:, 0] + points[:, 1] < 1.0 + 1e-12)
    ratio = first / (len(points) - first)
    assert ratio == pytest.approx(0.5, rel=0.03)


def test_obj_round_trip(tmp_path, sphere_mesh):
    path = str(tmp_path / 'out' / 'sphere.obj')
    export_obj(sphere_mesh, path)
    loaded = import_obj(path)
    assert np.allclose(loaded.vertices, sphere_mesh.vertices, atol=1e-8)
    assert np.array_equal(loaded.triangles, sphere_mesh.triangles)
    assert np.allclose(loaded.normals, sphere_mesh.normals, atol=1e-8)

    export_obj(TRIANGLES, path)
    loaded = import_obj(path)
    assert loaded.normals is None
    assert np.array_equal(loaded.triangles, TRIANGLES.triangles)


def test_obj_polygons_and_extras(tmp_path):
    path = tmp_path / 'quad.obj'
    path.write_text('# a unit square\no square\nv 0 0 0\nv 1 0 0\n'
                    'v 1 1 0\nv 0 1 0\nvt 0 0\ns off\nf 1/1 2/1 3/1 -1/1\n')
    mesh = import_obj(str(path))
    assert mesh.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert mesh.area == pytest.approx(1.0)


@pytest.mark.parametrize('text, line', [
    ('v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n', 4),
    ('v 0 0 0\nv 1 zero 0\n', 2),
    ('v 0 0\n', 1),
    ('v 0 0 0\nv 1 0 0\nf 1 2\n', 3),
    ('\n\nsphere 1\n', 3)])
def test_obj_parse_errors(tmp_path, text, line):
    path = tmp_path / 'bad.obj'
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        import_obj(str(path))
    assert info.value.line == line


def test_umeyama_recovers_a_similarity(rng):
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    truth = Similarity(1.5, R, np.array([0.2, -0.1, 0.3]))
    source = rng.normal(size=(50, 3))
    fitted = umeyama(source, truth.apply(source))
    assert fitted.scale == pytest.approx(1.5)
    assert np.allclose(fitted.R, R)
    assert np.allclose(fitted.t, truth.t)


def test_alignment_removes_scale_and_offset(sphere_mesh):
    moved = TriangleMesh(sphere_mesh.vertices * 1.1 + (0.08, -0.05, 0.0),
                         sphere_mesh.triangles)
    plain = geometric_error(moved, sphere_mesh, samples=4000)
    aligned = geometric_error(moved, sphere_mesh, align=True, samples=4000)
    assert plain > 0.05
    assert aligned < 0.5 * plain

    points = sphere_mesh.sample_points(500, np.random.default_rng(3))
    transform = similarity_align(points * 1.1 + 0.05, points)
    assert transform.scale == pytest.approx(1.0 / 1.1, rel=0.05)


def test_geometric_error_of_identical_meshes(sphere_mesh):
    assert geometric_error(sphere_mesh, sphere_mesh, samples=4000) < 0.04


def test_orientation_deviation_on_a_torus(rng):
    torus = AnalyticTorus(1.0, 0.25)
    phi, psi = rng.uniform(0.0, 2.0 * np.pi, (2, 30))
    rho = 1.0 + 0.25 * np.cos(psi)
    points = np.stack([rho * np.cos(phi), rho * np.sin(phi),
                       0.25 * np.sin(psi)], axis=-1)
    assert orientation_deviation(torus, points,
                                 tube_direction(torus, points)) < 1.0
    # directions across the tube are perpendicular to the principal ones
    across = np.cross(np.asarray(torus.gradient(points)),
                      tube_direction(torus, points))
    assert orientation_deviation(torus, points, across) > 89.0


def test_orientation_deviation_needs_valid_points():
    with pytest.raises(MeshException):
        orientation_deviation(AnalyticSphere(), [[0.0, 0.0, 1.0]],
                              [[1.0, 0.0, 0.0]])
