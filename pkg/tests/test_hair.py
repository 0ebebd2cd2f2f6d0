import numpy as np
import pytest

from headrecon.config import GaborBank
from headrecon.exception import DegenerateProjection, EmptyBatch, IoError, \
    ParseError, SizeMismatch
from headrecon.geometry import Camera
from headrecon.hair import OrientationMap, detect_orientation, \
    gabor_kernel, loss_orientation, orientation_terms, orientation_to_rgb, \
    project_3d_orientation, read_orientation_map, write_orientation_map
from headrecon.sdf import AnalyticSphere, AnalyticTorus

SIZE = 48


def _stripes(theta, wavelength=4.0, phase=0.3):
    """Stripes whose intensity varies along ``(cos theta, sin theta)``."""
    v, u = np.mgrid[0:SIZE, 0:SIZE].astype(float)
    return np.cos(2.0 * np.pi * (u * np.cos(theta) + v * np.sin(theta)) /
                  wavelength + phase)


def _interior(bank):
    r = bank.half_width
    mask = np.zeros((SIZE, SIZE), dtype=bool)
    mask[r:-r, r:-r] = True
    return mask


def _camera():
    return Camera(np.eye(3), (0.0, 0.0, 3.0), 100.0, 100.0, 32.0, 32.0, 64,
                  64)


def test_kernel_center_and_symmetry():
    bank = GaborBank()
    r = bank.half_width
    kernel = gabor_kernel(bank, 0.3, zero_mean=False)
    assert kernel.shape == (2 * r + 1, 2 * r + 1)
    assert kernel[r, r] == 1.0
    assert np.allclose(kernel, kernel[::-1, ::-1])
    assert abs(gabor_kernel(bank, 0.3).mean()) < 1e-15


def test_kernel_rotation_rotates_the_grid():
    bank = GaborBank()
    assert np.allclose(gabor_kernel(bank, np.pi / 2),
                       np.rot90(gabor_kernel(bank, 0.0)), atol=1e-12)


def test_vertical_stripes():
    bank = GaborBank()
    result = detect_orientation(_stripes(0.0), np.ones((SIZE, SIZE), bool),
                                bank)
    interior = _interior(bank)
    assert np.mean(result.bins[interior] == 0) >= 0.95
    vertical = np.all(np.isclose(result.direction, (0.0, 1.0)), axis=-1)
    assert np.mean(vertical[interior]) >= 0.95


def test_diagonal_stripes_within_one_bin():
    bank = GaborBank()
    result = detect_orientation(_stripes(np.pi / 4),
                                np.ones((SIZE, SIZE), bool), bank)
    expected = bank.n_orientations // 4
    bins = result.bins[_interior(bank)]
    assert np.mean(np.abs(bins - expected) <= 1) >= 0.95


@pytest.mark.parametrize('k', range(16))
def test_stripe_angles_within_one_bin(k):
    bank = GaborBank()
    result = detect_orientation(_stripes(np.pi * k / 16),
                                np.ones((SIZE, SIZE), bool), bank)
    n = bank.n_orientations
    offset = (result.bins[_interior(bank)] - 2 * k) % n
    assert np.mean(np.minimum(offset, n - offset) <= 1) >= 0.95


def test_color_images_and_masks():
    image = np.repeat(_stripes(0.0)[..., None], 3, axis=-1) * 0.5 + 0.5
    mask = np.zeros((SIZE, SIZE), dtype=bool)
    mask[10:20, 10:30] = True
    result = detect_orientation(image, mask)
    assert np.array_equal(result.valid, mask)
    assert np.all(result.bins[~mask] == -1)


def test_constant_image_is_low_confidence():
    mask = np.ones((SIZE, SIZE), dtype=bool)
    result = detect_orientation(np.full((SIZE, SIZE), 0.4), mask)
    assert result.low_confidence.all()
    assert not result.valid.any()


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        detect_orientation(np.zeros((SIZE, SIZE)), np.ones((SIZE, 8), bool))
    with pytest.raises(SizeMismatch):
        OrientationMap(np.zeros((4, 4, 3)))
    with pytest.raises(SizeMismatch):
        OrientationMap(np.full((2, 2, 2), 0.5))


def test_lookup_uses_the_containing_pixel():
    direction = np.zeros((2, 3, 2))
    direction[1, 2] = (1.0, 0.0)
    orientation = OrientationMap(direction)
    assert np.array_equal(orientation.at([[2.9, 1.1], [0.5, 0.5]]),
                          [[1.0, 0.0], [0.0, 0.0]])


def test_projection_of_a_lateral_direction():
    cam = _camera()
    assert np.allclose(project_3d_orientation((1.0, 0.0, 0.0), np.zeros(3),
                                              cam), (1.0, 0.0))
    assert np.allclose(project_3d_orientation((0.0, 2.0, 0.0), np.zeros(3),
                                              cam), (0.0, 1.0))


def test_direction_along_the_view_ray_is_degenerate():
    with pytest.raises(DegenerateProjection):
        project_3d_orientation((0.0, 0.0, 1.0), np.zeros(3), _camera())


@pytest.mark.parametrize('observed, expected', [
    ((0.0, 1.0), 0.0), ((0.0, -1.0), 0.0), ((1.0, 0.0), 1.0)])
def test_orientation_terms(observed, expected):
    cam = _camera()
    # tube direction at the outer equator is +y, which images to (0, 1)
    total, count = orientation_terms(
            AnalyticTorus(1.0, 0.25), np.array([[1.25, 0.0, 0.0]]),
            np.array([observed]), cam.R, cam.t, cam)
    assert count == 1
    assert float(total) == pytest.approx(expected, abs=1e-6)


def test_orientation_terms_skip_unusable_points():
    cam = _camera()
    total, count = orientation_terms(
            AnalyticSphere(), np.array([[0.0, 1.0, 0.0]]),
            np.array([[0.0, 1.0]]), cam.R, cam.t, cam)
    assert count == 0 and float(total) == 0.0


def test_loss_needs_pixels():
    orientation = OrientationMap(np.zeros((4, 4, 2)))
    with pytest.raises(EmptyBatch):
        loss_orientation(AnalyticSphere(), np.zeros((0, 2)), orientation,
                         _camera())


def test_visualization():
    direction = np.zeros((2, 2, 2))
    direction[0, 0] = (1.0, 0.0)
    direction[0, 1] = (-1.0, 0.0)
    rgb = orientation_to_rgb(OrientationMap(direction))
    assert rgb.shape == (2, 2, 3)
    assert np.allclose(rgb[0, 0], rgb[0, 1])
    assert np.array_equal(rgb[1], np.zeros((2, 3)))


def test_orientation_file(tmp_path):
    theta = np.linspace(0.0, np.pi, 12).reshape(3, 4)
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    direction[0, 0] = 0.0
    path = str(tmp_path / 'maps' / 'view.ori')
    write_orientation_map(path, OrientationMap(direction))

    loaded = read_orientation_map(path)
    assert (loaded.width, loaded.height) == (4, 3)
    assert np.allclose(loaded.direction, direction, atol=1e-6)
    assert np.array_equal(loaded.valid, OrientationMap(direction).valid)


def test_orientation_file_errors(tmp_path):
    with pytest.raises(IoError):
        read_orientation_map(str(tmp_path / 'missing.ori'))

    bad = tmp_path / 'bad.ori'
    bad.write_bytes(b'PNG1' + bytes(8))
    with pytest.raises(ParseError):
        read_orientation_map(str(bad))

    truncated = tmp_path / 'truncated.ori'
    truncated.write_bytes(b'ORI1' + np.array([2, 2], '<u4').tobytes() +
                          bytes(8))
    with pytest.raises(ParseError):
        read_orientation_map(str(truncated))
