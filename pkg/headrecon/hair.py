"""Hair orientation: Gabor filtering, projected 3D directions and the
orientation loss.

Image-space directions are ``(du, dv)`` pairs: ``du`` along image columns
and ``dv`` along rows, matching pixel coordinates.
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
from typing import Optional

import numpy as np

from scipy import ndimage
from skimage import color

from . import autodiff as ad
from .config import GaborBank, TracerConfig
from .exception import DegenerateProjection, EmptyBatch, ParseError, \
    SizeMismatch, IoError
from .file import File
from .geometry import Camera, MIN_DEPTH
from .logging import Logging
from .sdf import SdfField, principal_directions_batch
from .tracer import differentiable_points, trace_rays

logger = Logging.get_logger(__name__)

MAGIC = b'ORI1'
MIN_PROJECTION = 1e-9
CONFIDENCE = 1e-6

__all__ = ['GaborBank', 'OrientationMap', 'gabor_kernel',
           'detect_orientation', 'project_3d_orientation',
           'project_directions', 'orientation_terms', 'loss_orientation',
           'luminance', 'orientation_to_rgb', 'write_orientation_map',
           'read_orientation_map']


def gabor_kernel(bank: GaborBank, theta: float, *,
                 zero_mean: bool = True) -> np.ndarray:
    """Even-symmetric Gabor kernel indexed ``[v + r, u + r]`` (row, column)
    where ``r`` is the half-width."""

    r = bank.half_width
    v, u = np.mgrid[-r:r + 1, -r:r + 1].astype(float)
    u_rot = u * np.cos(theta) + v * np.sin(theta)
    v_rot = -u * np.sin(theta) + v * np.cos(theta)
    kernel = np.exp(-0.5 * (u_rot ** 2 / bank.sigma_u ** 2 +
                            v_rot ** 2 / bank.sigma_v ** 2)) * \
        np.cos(2.0 * np.pi * u_rot / bank.wavelength)
    return kernel - kernel.mean() if zero_mean else kernel


def luminance(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=float)
    return rgb @ np.array([0.299, 0.587, 0.114]) if rgb.ndim == 3 else rgb


@dataclass(frozen=True, eq=False)
class OrientationMap:
    """Per-pixel unit directions, zero outside the hair mask and at
    low-confidence pixels.

    ``bins`` holds the winning filter index (-1 where there is none) and is
    ``None`` for maps read from files.
    """

    direction: np.ndarray
    bins: Optional[np.ndarray] = None
    low_confidence: Optional[np.ndarray] = None

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float)
        if direction.ndim != 3 or direction.shape[2] != 2:
            raise SizeMismatch('orientation map must have shape (H, W, 2), '
                               'not %s' % (direction.shape,))
        lengths = np.linalg.norm(direction, axis=-1)
        if np.any((lengths > 0.0) & (np.abs(lengths - 1.0) > 1e-6)):
            raise SizeMismatch('orientation map directions must be unit or '
                               'zero vectors')
        object.__setattr__(self, 'direction', direction)
        if self.low_confidence is None:
            object.__setattr__(self, 'low_confidence',
                               np.zeros(direction.shape[:2], dtype=bool))

    @property
    def height(self) -> int:
        return self.direction.shape[0]

    @property
    def width(self) -> int:
        return self.direction.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.linalg.norm(self.direction, axis=-1) > 0.0

    def at(self, pixels: np.ndarray) -> np.ndarray:
        """Directions at (u, v) pixel coordinates, shape (N, 2)."""

        pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
        cols = np.clip(np.floor(pixels[:, 0]).astype(int), 0,
                       self.width - 1)
        rows = np.clip(np.floor(pixels[:, 1]).astype(int), 0,
                       self.height - 1)
        return self.direction[rows, cols]


def filter_responses(image: np.ndarray, bank: GaborBank) -> np.ndarray:
    """Absolute filter responses, shape (n_orientations, H, W)."""
    return np.stack([np.abs(ndimage.convolve(image, gabor_kernel(bank, a),
                                             mode='reflect'))
                     for a in bank.angles])


def detect_orientation(image: np.ndarray, hair_mask: np.ndarray,
                       bank: GaborBank = GaborBank()) -> OrientationMap:
    """Pick the strongest filter at each hair pixel.

    The winning angle ``theta*`` (ties go to the smallest angle) gives the
    direction ``(-sin theta*, cos theta*)``, which runs along the stripes
    the filter responds to.

    Raises:
        SizeMismatch: If the image and mask sizes differ.
    """

    gray = luminance(image)
    mask = np.asarray(hair_mask, dtype=bool)
    if gray.shape != mask.shape:
        raise SizeMismatch('image is %dx%d but hair mask is %dx%d' % (
            gray.shape[1], gray.shape[0], mask.shape[1], mask.shape[0]))

    responses = filter_responses(gray, bank)
    best = np.argmax(responses, axis=0)
    strongest = np.max(responses, axis=0)
    dynamic_range = float(np.ptp(gray[mask])) if mask.any() else 0.0
    low = mask & (strongest < CONFIDENCE * max(dynamic_range, 1.0))

    theta = np.asarray(bank.angles)[best]
    direction = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    keep = mask & ~low
    direction[~keep] = 0.0
    bins = np.where(mask, best, -1)
    logger.info('orientation: %d hair pixels, %d low confidence' % (
        np.count_nonzero(mask), np.count_nonzero(low)))
    return OrientationMap(direction, bins, low)


def project_directions(R: ad.Operand, t: ad.Operand, cam: Camera,
                       X: ad.Operand, D: ad.Operand) -> \
        tuple[ad.Operand, np.ndarray]:
    """Project 3D directions ``D`` at points ``X`` to unit image
    directions through the Jacobian of the pixel mapping.

    Returns:
        (directions, valid); invalid rows (projection shorter than 1e-9 or
        point behind the camera) are zero.
    """

    P = ad.matmul(X, ad.transpose(R)) + t
    E = ad.matmul(D, ad.transpose(R))
    Z = P[:, 2]
    du = cam.fx * (E[:, 0] / Z - P[:, 0] * E[:, 2] / (Z * Z))
    dv = cam.fy * (E[:, 1] / Z - P[:, 1] * E[:, 2] / (Z * Z))
    d = ad.stack([du, dv], axis=-1)
    length = np.linalg.norm(ad.value_of(d), axis=-1)
    valid = (length >= MIN_PROJECTION) & (ad.value_of(Z) > MIN_DEPTH)
    safe = ad.norm(d, axis=-1, keepdims=True) + \
        np.where(valid, 0.0, 1.0)[:, None]
    return ad.where(valid[:, None], d / safe, 0.0), valid


def project_3d_orientation(D: np.ndarray, x: np.ndarray,
                           cam: Camera) -> np.ndarray:
    """Image direction of the 3D direction ``D`` at point ``x``.

    Raises:
        DegenerateProjection: If the direction projects to (nearly) zero
            length, e.g. when it runs along the view ray.
    """

    d, valid = project_directions(cam.R, cam.t, cam,
                                  np.asarray(x, dtype=float).reshape(1, 3),
                                  np.asarray(D, dtype=float).reshape(1, 3))
    if not valid[0]:
        raise DegenerateProjection('direction %s projects to a point at %s'
                                   % (np.asarray(D).tolist(),
                                      np.asarray(x).tolist()))
    return np.asarray(d)[0]


def orientation_terms(field: SdfField, X: ad.Operand, observed: np.ndarray,
                      R: ad.Operand, t: ad.Operand, cam: Camera,
                      params: Optional[ad.Operand] = None) -> \
        tuple[ad.Operand, int]:
    """Return (sum of ``1 - |d_p . d_x|``, count) over the usable points.

    A point is usable when its principal direction is defined, it projects
    to a nonzero image direction and its observed direction is nonzero.
    """

    principal = principal_directions_batch(field, X, params)
    projected, projects = project_directions(R, t, cam, X, principal.D)
    usable = principal.valid & projects & \
        (np.linalg.norm(observed, axis=-1) > 0.0)
    count = int(np.count_nonzero(usable))
    if count == 0:
        return np.zeros(()), 0
    agreement = ad.abs_(ad.dot(ad.getitem(projected, usable),
                               observed[usable]))
    return ad.sum_(1.0 - agreement), count


def loss_orientation(field: SdfField, pixels: np.ndarray,
                     orientation_map: OrientationMap, cam: Camera,
                     cfg: TracerConfig = TracerConfig(),
                     params: Optional[ad.Operand] = None) -> ad.Operand:
    """Mean ``1 - |d_p . d_x|`` over the rays through ``pixels`` (hair
    pixels) that hit the surface at a usable point; rays that don't are
    left out of the mean.

    Raises:
        EmptyBatch: If there are no pixels.
    """

    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    if len(pixels) == 0:
        raise EmptyBatch('orientation loss needs at least one ray')
    origins, dirs = cam.rays(pixels)
    trace = trace_rays(field, origins, dirs, cfg)
    if not np.any(trace.hit):
        return np.zeros(())
    X, valid = differentiable_points(field, origins[trace.hit],
                                     dirs[trace.hit], trace.t[trace.hit],
                                     params)
    observed = orientation_map.at(pixels[trace.hit])
    observed = np.where(valid[:, None], observed, 0.0)
    total, count = orientation_terms(field, X, observed, cam.R, cam.t, cam,
                                     params)
    return total / count if count else np.zeros(())


def orientation_to_rgb(orientation_map: OrientationMap) -> np.ndarray:
    """HSV visualization: hue is the angle modulo pi, black where there is
    no direction."""

    direction = orientation_map.direction
    angle = np.mod(np.arctan2(direction[..., 1], direction[..., 0]), np.pi)
    valid = orientation_map.valid.astype(float)
    hsv = np.stack([angle / np.pi, valid, valid], axis=-1)
    return color.hsv2rgb(hsv)


def write_orientation_map(path: str, orientation_map: OrientationMap) -> \
        None:
    """Write the ORI1 format: magic, u32 width, u32 height, then (dx, dy)
    f32 pairs in row-major order, all little-endian."""

    header = np.array([orientation_map.width, orientation_map.height],
                      dtype='<u4').tobytes()
    body = orientation_map.direction.astype('<f4').tobytes()
    try:
        File.makedirs_for(path)
        with open(path, 'wb') as fd:
            fd.write(MAGIC + header + body)
    except OSError as e:
        raise IoError("can't write %s: %s" % (path, e), path)


def read_orientation_map(path: str) -> OrientationMap:
    try:
        with open(path, 'rb') as fd:
            data = fd.read()
    except OSError as e:
        raise IoError("can't read %s: %s" % (path, e), path)
    if data[:4] != MAGIC or len(data) < 12:
        raise ParseError('%s is not an ORI1 orientation map' % path)
    width, height = np.frombuffer(data[4:12], dtype='<u4').astype(int)
    if len(data) != 12 + 8 * width * height:
        raise ParseError('%s: expected %d bytes of data for %dx%d, not %d' %
                         (path, 8 * width * height, width, height,
                          len(data) - 12))
    direction = np.frombuffer(data[12:], dtype='<f4').astype(float)
    direction = direction.reshape(height, width, 2)
    lengths = np.linalg.norm(direction, axis=-1, keepdims=True)
    # f32 storage; restore exact unit length
    direction = np.where(lengths > 0.0, direction / np.where(
            lengths > 0.0, lengths, 1.0), 0.0)
    return OrientationMap(direction)
