"""Cameras, rays, rotations and the symmetric 3x3 eigensolver.

Conventions:

* world to camera: ``X_cam = R X + t``; camera center ``c = -R^T t``
* pixel coordinates ``(u, v)``: ``u`` along image columns, ``v`` along
  rows; pixel ``(row, col)`` has its center at ``(col + 0.5, row + 0.5)``
* Euler angles ``(a, b, c)`` are about x, y and z and compose as
  ``Rz(c) Ry(b) Rx(a)``

The rotation builders and the ``project_points`` / ``ray_directions``
functions accept recorded (autodiff) inputs, so they can be used inside
losses that optimize cameras.
"""

# Copyright (c) 2026, headrecon contributors
#
# Redistribution and use in source and binary forms, with or
# without modification, are permitted provided that the following
# conditions are met:
#
# 1. Redistributions of source code must retain the above copyright
#    notice, this list of conditions and the following disclaimer.
#
# 2. Redistributions in binary form must reproduce the above
#    copyright notice, this list of conditions and the following
#    disclaimer in the documentation and/or other materials
#    provided with the distribution.
#
# 3. Neither the name of the copyright holder nor the names of its
#    contributors may be used to endorse or promote products
#    derived from this software without specific prior written
#    permission.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND
# CONTRIBUTORS "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES,
# INCLUDING, BUT NOT LIMITED TO, THE IMPLIED WARRANTIES OF
# MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT HOLDER OR
# CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT
# NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES;
# LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT,
# STRICT LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE)
# ARISING IN ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF
# ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import autodiff as ad
from .exception import GeometryException, InvalidCamera, NotSymmetric, \
    OutOfBounds, PointBehindCamera
from .file import File
from .logging import Logging

logger = Logging.get_logger(__name__)

ROTATION_TOLERANCE = 1e-9
MIN_DEPTH = 1e-9


def _matrix(rows: Sequence[Sequence[Any]]) -> ad.Operand:
    return ad.stack([ad.stack(list(row)) for row in rows])


def rotation_x(a: ad.Operand) -> ad.Operand:
    c, s = ad.cos(a), ad.sin(a)
    return _matrix([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(b: ad.Operand) -> ad.Operand:
    c, s = ad.cos(b), ad.sin(b)
    return _matrix([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(c_: ad.Operand) -> ad.Operand:
    c, s = ad.cos(c_), ad.sin(c_)
    return _matrix([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(angles: ad.Operand) -> ad.Operand:
    """Return ``Rz(c) Ry(b) Rx(a)`` for angles ``(a, b, c)`` in radians."""
    a, b, c = angles[0], angles[1], angles[2]
    return ad.matmul(rotation_z(c), ad.matmul(rotation_y(b), rotation_x(a)))


def skew(w: ad.Operand) -> ad.Operand:
    """Cross-product matrix: ``skew(w) @ x == w x x``."""
    return _matrix([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]],
                    [-w[1], w[0], 0.0]])


def axis_angle_to_matrix(omega: ad.Operand) -> ad.Operand:
    """Rodrigues rotation ``I + A K + B K^2`` for the axis-angle vector
    ``omega``; small angles use the series expansions of ``A`` and ``B``."""

    theta2 = ad.dot(omega, omega)
    if float(ad.value_of(theta2)) < 1e-4:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        theta = ad.sqrt(theta2)
        a = ad.sin(theta) / theta
        b = (1.0 - ad.cos(theta)) / theta2
    k = skew(omega)
    return np.eye(3) + a * k + b * ad.matmul(k, k)


def check_rotation(R: np.ndarray, what: str = 'rotation') -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidCamera('%s must be a finite 3x3 matrix' % what)
    if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOLERANCE:
        raise InvalidCamera('%s is not orthonormal' % what)
    if abs(np.linalg.det(R) - 1.0) > ROTATION_TOLERANCE:
        raise InvalidCamera('%s has determinant %g, not +1' % (
            what, np.linalg.det(R)))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'origin', np.asarray(self.origin, float))
        object.__setattr__(self, 'dir', np.asarray(self.dir, float))
        if abs(np.linalg.norm(self.dir) - 1.0) > 1e-12:
            raise GeometryException('ray direction is not a unit vector')

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.dir


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera: pose ``(R, t)`` and intrinsics in pixels."""

    R: np.ndarray
    t: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, 'R', R)
        object.__setattr__(self, 't', t)
        check_rotation(R, 'camera rotation')
        if not np.all(np.isfinite(t)):
            raise InvalidCamera('camera translation is not finite')
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidCamera('focal lengths must be positive, not %g, '
                                '%g' % (self.fx, self.fy))
        if self.width < 1 or self.height < 1:
            raise InvalidCamera('image size must be positive, not %dx%d' % (
                self.width, self.height))

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    def with_pose(self, R: np.ndarray, t: np.ndarray) -> 'Camera':
        return Camera(R, t, self.fx, self.fy, self.cx, self.cy, self.width,
                      self.height)

    def project(self, V: np.ndarray) -> np.ndarray:
        """Project world point(s), shape (3,) or (N, 3), to pixels.

        Raises:
            PointBehindCamera: If any camera-space depth is <= 1e-9.
        """
        return np.asarray(project_points(self.R, self.t, self, V))

    def depth(self, V: np.ndarray) -> np.ndarray:
        return (np.asarray(V, dtype=float) @ self.R.T + self.t)[..., 2]

    def contains(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (p[..., 0] >= 0.0) & (p[..., 0] <= self.width) & \
            (p[..., 1] >= 0.0) & (p[..., 1] <= self.height)

    def pixel_ray(self, p: Sequence[float]) -> Ray:
        p = np.asarray(p, dtype=float)
        if not bool(self.contains(p)):
            raise OutOfBounds('pixel (%g, %g) is outside the %dx%d image' %
                              (p[0], p[1], self.width, self.height))
        origins, dirs = self.rays(p[None, :])
        return Ray(origins[0], dirs[0])

    def rays(self, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (origins, unit directions) for an (N, 2) pixel array."""
        origins, dirs = ray_directions(self.R, self.t, self, pixels)
        return np.asarray(origins), np.asarray(dirs)

    def to_dict(self) -> dict[str, Any]:
        return {'R': self.R.reshape(-1).tolist(), 't': self.t.tolist(),
                'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy,
                'width': self.width, 'height': self.height}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'Camera':
        try:
            return cls(np.asarray(data['R'], dtype=float).reshape(3, 3),
                       np.asarray(data['t'], dtype=float),
                       float(data['fx']), float(data['fy']),
                       float(data['cx']), float(data['cy']),
                       int(data['width']), int(data['height']))
        except (KeyError, ValueError, TypeError) as e:
            raise InvalidCamera('invalid camera %r: %s' % (data, e))

    @classmethod
    def look_at(cls, eye: Sequence[float], target: Sequence[float],
                up: Sequence[float], *, focal: float, width: int,
                height: int) -> 'Camera':
        """Camera at ``eye`` looking at ``target``; image rows run along
        ``-up``."""

        eye = np.asarray(eye, dtype=float)
        forward = np.asarray(target, dtype=float) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(-np.asarray(up, dtype=float), forward)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        return cls(R, -R @ eye, focal, focal, width / 2.0, height / 2.0,
                   width, height)


def camera_project(cam: Camera, V: np.ndarray) -> np.ndarray:
    return cam.project(V)


def camera_center(cam: Camera) -> np.ndarray:
    return cam.center


def pixel_ray(cam: Camera, p: Sequence[float]) -> Ray:
    return cam.pixel_ray(p)


def pixel_centers(height: int, width: int) -> np.ndarray:
    """Return the (height * width, 2) pixel centers in row-major order."""
    rows, cols = np.meshgrid(np.arange(height), np.arange(width),
                             indexing='ij')
    return np.stack([cols.reshape(-1) + 0.5, rows.reshape(-1) + 0.5],
                    axis=-1).astype(float)


def project_points(R: ad.Operand, t: ad.Operand, cam: Camera,
                   X: ad.Operand) -> ad.Operand:
    """Project points through pose ``(R, t)`` with ``cam``'s intrinsics.

    Raises:
        PointBehindCamera: If any camera-space depth is <= 1e-9.
    """

    P = ad.matmul(X, ad.transpose(R)) + t
    depth = ad.value_of(P)[..., 2]
    if np.any(depth <= MIN_DEPTH):
        raise PointBehindCamera('point is behind the camera (depth %g)' %
                                np.min(depth))
    Z = P[..., 2]
    return ad.stack([cam.fx * P[..., 0] / Z + cam.cx,
                     cam.fy * P[..., 1] / Z + cam.cy], axis=-1)


def ray_directions(R: ad.Operand, t: ad.Operand, cam: Camera,
                   pixels: np.ndarray) -> tuple[ad.Operand, ad.Operand]:
    """Return (origins, unit directions) of the rays through ``pixels``
    for pose ``(R, t)``."""

    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    local = np.stack([(pixels[:, 0] - cam.cx) / cam.fx,
                      (pixels[:, 1] - cam.cy) / cam.fy,
                      np.ones(len(pixels))], axis=-1)
    local /= np.linalg.norm(local, axis=-1, keepdims=True)
    # row vectors: d_world = d_cam @ R is R^T d_cam
    dirs = ad.matmul(local, R)
    center = -ad.matmul(t, R)
    origins = center + np.zeros((len(pixels), 1))
    if ad.is_recorded(R):
        dirs = dirs / ad.norm(dirs, axis=-1, keepdims=True)
    return origins, dirs


@dataclass(frozen=True)
class SymEigen3:
    """Eigen-decomposition sorted by ascending ``|eigenvalue|``; eigenvector
    ``i`` is column ``eigenvectors[:, i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eigen3(H: np.ndarray) -> SymEigen3:
    """Decompose a symmetric 3x3 matrix.

    Raises:
        NotSymmetric: If ``|H - H^T| >= 1e-8 |H|``.
    """

    H = np.asarray(H, dtype=float)
    scale = np.linalg.norm(H)
    if H.shape != (3, 3) or np.linalg.norm(H - H.T) > 1e-8 * scale:
        raise NotSymmetric('matrix is not symmetric')
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (H + H.T))
    order = np.argsort(np.abs(eigenvalues), kind='stable')
    return SymEigen3(eigenvalues[order], eigenvectors[:, order])


def camera_rays(cam: Camera, pixels: np.ndarray) -> \
        tuple[np.ndarray, np.ndarray]:
    return cam.rays(pixels)


def load_cameras(path: str) -> list[Camera]:
    """Read a camera file: a JSON array of cameras, index = view id."""

    data = File.read_json(path)
    if not isinstance(data, list):
        raise InvalidCamera('%s: expected a JSON array of cameras' % path)
    return [Camera.from_dict(item) for item in data]


def save_cameras(path: str, cams: Sequence[Camera]) -> None:
    File.write_json(path, [cam.to_dict() for cam in cams])
