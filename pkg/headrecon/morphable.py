"""Linear morphable face model, spherical-harmonics shading and the proxy
fit.

The model stores its mean shapes and bases vertex-major: entry ``3 i + c``
of a ``3 n_v`` vector is coordinate (or color channel) ``c`` of vertex
``i``. Bases are stored raw with their standard deviations kept
separately.

The proxy fit minimizes::

    w_photo E_photo + w_land E_land + w_reg E_reg

over the shared coefficients and per-view lighting and poses, by gradient
descent with Barzilai-Borwein trial steps and Armijo backtracking.
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

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from scipy import sparse

from . import autodiff as ad
from .exception import CountMismatch, DivergedEnergy, EmptyMask, \
    GeometryException, NonFiniteLoss, NotUnit, ShapeMismatch, ZeroSigma
from .file import File
from .geometry import Camera, euler_to_matrix, project_points
from .logging import Logging
from .mesh import TriangleMesh

logger = Logging.get_logger(__name__)

SH_C0 = 0.282095
SH_C1 = 0.488603
SH_C2 = 1.092548
SH_C3 = 0.315392
SH_C4 = 0.546274

UNIT_TOLERANCE = 1e-6
PROXY_WEIGHTS = (80.0, 5.0, 20.0)
PROXY_DEPTH = 2.5
ID_RMS = 0.6

# landmark directions on the front (-z) hemisphere; up is -y
FACIAL_DIRECTIONS = (
    ('right_eye', (-0.35, -0.25, -0.90)),
    ('left_eye', (0.35, -0.25, -0.90)),
    ('nose_tip', (0.0, 0.05, -1.0)),
    ('mouth_right', (-0.25, 0.40, -0.88)),
    ('mouth_left', (0.25, 0.40, -0.88)),
    ('chin', (0.0, 0.75, -0.66)),
    ('right_brow', (-0.35, -0.45, -0.82)),
    ('left_brow', (0.35, -0.45, -0.82)),
)

__all__ = ['LinearMorphableModel', 'MorphCoeffs', 'ShLighting',
           'ProxyFitResult', 'synthetic_morphable_model', 'load_model',
           'save_model', 'model_geometry', 'model_albedo', 'sh_basis',
           'shade_vertex', 'vertex_normals', 'visible_vertices',
           'sample_bilinear', 'energy_photo', 'energy_landmark',
           'energy_reg', 'fit_proxy', 'sample_proxy_points', 'proxy_mesh',
           'rasterize']


@dataclass(frozen=True, eq=False)
class LinearMorphableModel:
    n_v: int
    mean_geo: np.ndarray
    mean_alb: np.ndarray
    B_id: np.ndarray
    B_exp: np.ndarray
    B_alb: np.ndarray
    sigma_id: np.ndarray
    sigma_exp: np.ndarray
    sigma_alb: np.ndarray
    triangles: np.ndarray
    landmarks: np.ndarray

    def __post_init__(self):
        n = 3 * self.n_v
        for name in ('mean_geo', 'mean_alb'):
            value = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if value.size != n:
                raise ShapeMismatch('%s has %d values, expected %d' % (
                    name, value.size, n))
            object.__setattr__(self, name, value)
        for kind in ('id', 'exp', 'alb'):
            basis = np.asarray(getattr(self, 'B_' + kind), dtype=float)
            sigma = np.asarray(getattr(self, 'sigma_' + kind),
                               dtype=float).reshape(-1)
            if basis.ndim != 2 or basis.shape[0] != n or \
                    basis.shape[1] < 1 or basis.shape[1] != sigma.size:
                raise ShapeMismatch('B_%s has shape %s and sigma_%s has %d '
                                    'values; expected (%d, k) and k' % (
                                        kind, basis.shape, kind, sigma.size,
                                        n))
            if np.any(sigma == 0.0):
                raise ZeroSigma('sigma_%s has zero entries' % kind)
            object.__setattr__(self, 'B_' + kind, basis)
            object.__setattr__(self, 'sigma_' + kind, sigma)
        triangles = np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        landmarks = np.asarray(self.landmarks, dtype=int).reshape(-1)
        if len(triangles) and (triangles.min() < 0 or
                               triangles.max() >= self.n_v):
            raise ShapeMismatch('triangle indices out of range')
        if len(landmarks) and (landmarks.min() < 0 or
                               landmarks.max() >= self.n_v):
            raise ShapeMismatch('landmark indices out of range')
        object.__setattr__(self, 'triangles', triangles)
        object.__setattr__(self, 'landmarks', landmarks)

    @property
    def k_id(self) -> int:
        return self.B_id.shape[1]

    @property
    def k_exp(self) -> int:
        return self.B_exp.shape[1]

    @property
    def k_alb(self) -> int:
        return self.B_alb.shape[1]

    def zero_coeffs(self) -> 'MorphCoeffs':
        return MorphCoeffs(np.zeros(self.k_id), np.zeros(self.k_exp),
                           np.zeros(self.k_alb))

    def to_dict(self) -> dict[str, Any]:
        return {'n_v': self.n_v, 'mean_geo': self.mean_geo.tolist(),
                'mean_alb': self.mean_alb.tolist(),
                'B_id': self.B_id.tolist(), 'B_exp': self.B_exp.tolist(),
                'B_alb': self.B_alb.tolist(),
                'sigma_id': self.sigma_id.tolist(),
                'sigma_exp': self.sigma_exp.tolist(),
                'sigma_alb': self.sigma_alb.tolist(),
                'triangles': self.triangles.tolist(),
                'landmarks': self.landmarks.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'LinearMorphableModel':
        try:
            return cls(**{name: data[name] for name in (
                'n_v', 'mean_geo', 'mean_alb', 'B_id', 'B_exp', 'B_alb',
                'sigma_id', 'sigma_exp', 'sigma_alb', 'triangles',
                'landmarks')})
        except KeyError as e:
            raise ShapeMismatch('morphable model is missing %s' % e)


@dataclass(frozen=True, eq=False)
class MorphCoeffs:
    """Identity, expression and albedo coefficients; these may be
    recorded."""

    alpha_id: ad.Operand
    alpha_exp: ad.Operand
    alpha_alb: ad.Operand

    def __post_init__(self):
        for name in ('alpha_id', 'alpha_exp', 'alpha_alb'):
            value = getattr(self, name)
            if not ad.is_recorded(value):
                value = np.asarray(value, dtype=float).reshape(-1)
                object.__setattr__(self, name, value)
            if not np.all(np.isfinite(ad.value_of(value))):
                raise NonFiniteLoss('%s has non-finite values' % name)

    def to_dict(self) -> dict[str, Any]:
        return {name: ad.value_of(getattr(self, name)).tolist() for name in
                ('alpha_id', 'alpha_exp', 'alpha_alb')}


@dataclass(frozen=True, eq=False)
class ShLighting:
    """Nine spherical-harmonics coefficients shared by the color
    channels."""

    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        if gamma.size != 9:
            raise ShapeMismatch('lighting needs 9 coefficients, not %d' %
                                gamma.size)
        if not np.all(np.isfinite(gamma)):
            raise NonFiniteLoss('lighting has non-finite values')
        object.__setattr__(self, 'gamma', gamma)

    @classmethod
    def ambient(cls, level: float = 1.0) -> 'ShLighting':
        return cls(np.array([level / SH_C0] + [0.0] * 8))


@dataclass
class ProxyFitResult:
    coeffs: MorphCoeffs
    lighting: list[ShLighting]
    cameras: list[Camera]
    energy: float
    trace: list[float] = field(default_factory=list)
    iterations: int = 0


def _icosphere(subdivisions: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere with outward (counter-clockwise) triangles."""

    p = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0),
                (0, -1, p), (0, 1, p), (0, -1, -p), (0, 1, -p),
                (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    points = [np.array(v, dtype=float) / np.linalg.norm(v) for v in vertices]
    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                m = points[i] + points[j]
                points.append(m / np.linalg.norm(m))
                midpoints[key] = len(points) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    return np.array(points), np.array(faces, dtype=int)


def _smooth_basis(normals: np.ndarray, count: int, rms: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Random smooth per-vertex 3-vector fields from band 1-2 harmonics of
    the vertex directions, each scaled to the given RMS."""

    harmonics = _sh_basis(normals)[:, 1:]
    columns = []
    for _ in range(count):
        mix = rng.normal(size=(harmonics.shape[1], 3))
        column = (harmonics @ mix).reshape(-1)
        columns.append(column * rms / np.sqrt(np.mean(column ** 2)))
    return np.stack(columns, axis=1)


def synthetic_morphable_model(seed: int = 0, *, radius: float = 0.6,
                              subdivisions: int = 3,
                              ranks: tuple[int, int, int] = (4, 2, 2)) -> \
        LinearMorphableModel:
    """Deformed-icosphere model: 642 vertices at three subdivisions, smooth
    random bases and one landmark vertex per facial direction.

    One identity standard deviation moves a vertex by about a third of the
    radius.
    """

    rng = np.random.default_rng(seed)
    directions, triangles = _icosphere(subdivisions)
    k_id, k_exp, k_alb = ranks

    skin = np.array([0.80, 0.62, 0.52])
    # mild shading variation so that photometric gradients are informative
    pattern = 0.08 * np.sin(3.0 * directions[:, :1]) * \
        np.cos(2.0 * directions[:, 1:2])
    albedo = np.clip(skin + pattern, 0.0, 1.0)

    landmarks = []
    for _, direction in FACIAL_DIRECTIONS:
        d = np.asarray(direction) / np.linalg.norm(direction)
        landmarks.append(int(np.argmax(directions @ d)))

    model = LinearMorphableModel(
            n_v=len(directions),
            mean_geo=(radius * directions).reshape(-1),
            mean_alb=albedo.reshape(-1),
            B_id=_smooth_basis(directions, k_id, ID_RMS, rng),
            B_exp=_smooth_basis(directions, k_exp, 0.25, rng),
            B_alb=_smooth_basis(directions, k_alb, 0.25, rng),
            sigma_id=np.full(k_id, 0.2), sigma_exp=np.full(k_exp, 0.1),
            sigma_alb=np.full(k_alb, 0.1), triangles=triangles,
            landmarks=landmarks)
    logger.info('synthetic morphable model: %d vertices, k = %d/%d/%d' % (
        model.n_v, k_id, k_exp, k_alb))
    return model


def load_model(path: str) -> LinearMorphableModel:
    return LinearMorphableModel.from_dict(File.read_json(path))


def save_model(path: str, model: LinearMorphableModel) -> None:
    File.write_json(path, model.to_dict())


def _check_coeffs(model: LinearMorphableModel, coeffs: MorphCoeffs,
                  kinds: Sequence[str]) -> None:
    for kind in kinds:
        value = ad.value_of(getattr(coeffs, 'alpha_' + kind))
        width = getattr(model, 'k_' + kind)
        if value.shape != (width,):
            raise ShapeMismatch('alpha_%s has shape %s, expected (%d,)' % (
                kind, value.shape, width))


def model_geometry(model: LinearMorphableModel, coeffs: MorphCoeffs) -> \
        ad.Operand:
    """Vertex positions ``mean + B_id alpha_id + B_exp alpha_exp``, shape
    (n_v, 3).

    Raises:
        ShapeMismatch: If a coefficient length differs from its basis
            width.
    """

    _check_coeffs(model, coeffs, ('id', 'exp'))
    flat = model.mean_geo + ad.matmul(model.B_id, coeffs.alpha_id) + \
        ad.matmul(model.B_exp, coeffs.alpha_exp)
    return ad.reshape(flat, (model.n_v, 3))


def model_albedo(model: LinearMorphableModel, coeffs: MorphCoeffs) -> \
        ad.Operand:
    """Vertex albedos ``mean + B_alb alpha_alb``, shape (n_v, 3)."""

    _check_coeffs(model, coeffs, ('alb',))
    flat = model.mean_alb + ad.matmul(model.B_alb, coeffs.alpha_alb)
    return ad.reshape(flat, (model.n_v, 3))


def _sh_basis(N: ad.Operand) -> ad.Operand:
    x, y, z = N[..., 0], N[..., 1], N[..., 2]
    zero = 0.0 * x
    return ad.stack([zero + SH_C0, SH_C1 * y, SH_C1 * z, SH_C1 * x,
                     SH_C2 * x * y, SH_C2 * y * z,
                     SH_C3 * (3.0 * z * z - 1.0), SH_C2 * x * z,
                     SH_C4 * (x * x - y * y)], axis=-1)


def _check_unit(n: np.ndarray) -> None:
    lengths = np.linalg.norm(np.asarray(n, dtype=float), axis=-1)
    if np.any(np.abs(lengths - 1.0) > UNIT_TOLERANCE):
        raise NotUnit('normal is not unit length (|n| = %g)' %
                      np.max(np.abs(lengths - 1.0) + 1.0))


def sh_basis(n: Sequence[float]) -> np.ndarray:
    """Real spherical harmonics of bands 0-2 at a unit normal (or an
    (N, 3) batch).

    Raises:
        NotUnit: If a normal isn't unit length within 1e-6.
    """

    n = np.asarray(n, dtype=float)
    _check_unit(n)
    return np.asarray(_sh_basis(n))


def shade_vertex(albedo: Sequence[float], normal: Sequence[float],
                 lighting: Any) -> np.ndarray:
    """Unclamped ``albedo * (gamma . phi(n))``."""

    gamma = lighting.gamma if isinstance(lighting, ShLighting) else \
        np.asarray(lighting, dtype=float)
    return np.asarray(albedo, dtype=float) * float(gamma @ sh_basis(normal))


def _incidence(triangles: np.ndarray, n_v: int) -> sparse.csr_matrix:
    rows = triangles.reshape(-1)
    cols = np.repeat(np.arange(len(triangles)), 3)
    return sparse.csr_matrix((np.ones(rows.size), (rows, cols)),
                             shape=(n_v, len(triangles)))


def vertex_normals(vertices: ad.Operand, triangles: np.ndarray) -> \
        ad.Operand:
    """Area-weighted unit vertex normals; accepts recorded vertices."""

    triangles = np.asarray(triangles, dtype=int)
    n_v = ad.value_of(vertices).shape[0]
    corners = [ad.getitem(vertices, triangles[:, i]) for i in range(3)]
    face = ad.cross(corners[1] - corners[0], corners[2] - corners[0])
    summed = ad.sparse_matmul(_incidence(triangles, n_v), face)
    length = ad.norm(summed, axis=-1, keepdims=True)
    isolated = np.where(ad.value_of(length) > 0.0, 0.0, 1.0)
    return summed / (length + isolated)


def visible_vertices(vertices: np.ndarray, normals: np.ndarray,
                     cam: Camera, mask: Optional[np.ndarray] = None) -> \
        np.ndarray:
    """Vertices facing the camera (``n . (x - c) < 0``) in front of it,
    projecting inside the image and, if given, inside the mask."""

    vertices = np.asarray(vertices, dtype=float)
    normals = np.asarray(normals, dtype=float)
    facing = np.einsum('ij,ij->i', normals, vertices - cam.center) < 0.0
    depth = cam.depth(vertices)
    visible = facing & (depth > 1e-9)
    P = vertices @ cam.R.T + cam.t
    safe = np.where(visible, P[:, 2], 1.0)
    u = cam.fx * P[:, 0] / safe + cam.cx
    v = cam.fy * P[:, 1] / safe + cam.cy
    visible &= (u >= 0.0) & (u < cam.width) & (v >= 0.0) & \
        (v < cam.height)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        cols = np.clip(np.floor(u).astype(int), 0, cam.width - 1)
        rows = np.clip(np.floor(v).astype(int), 0, cam.height - 1)
        visible &= mask[rows, cols]
    return visible


def sample_bilinear(image: np.ndarray, uv: ad.Operand) -> ad.Operand:
    """Bilinearly interpolate an (H, W, C) image at (u, v) pixel
    coordinates (pixel centers at +0.5), clamping at the border.

    The result is recorded when ``uv`` is.
    """

    image = np.asarray(image, dtype=float)
    height, width = image.shape[:2]
    value = ad.value_of(uv)
    x = np.clip(value[:, 0] - 0.5, 0.0, width - 1.0)
    y = np.clip(value[:, 1] - 0.5, 0.0, height - 1.0)
    x0 = np.minimum(np.floor(x).astype(int), max(width - 2, 0))
    y0 = np.minimum(np.floor(y).astype(int), max(height - 2, 0))
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)

    # clamped coordinates carry no gradient
    inside_x = (value[:, 0] - 0.5 > 0.0) & (value[:, 0] - 0.5 < width - 1.0)
    inside_y = (value[:, 1] - 0.5 > 0.0) & (value[:, 1] - 0.5 < height - 1.0)
    fx = ad.where(inside_x, uv[:, 0] - 0.5 - x0, x - x0)
    fy = ad.where(inside_y, uv[:, 1] - 0.5 - y0, y - y0)
    fx = ad.reshape(fx, (-1, 1))
    fy = ad.reshape(fy, (-1, 1))
    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bottom = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _poses(cams: Sequence[Camera],
           poses: Optional[Sequence[tuple[ad.Operand, ad.Operand]]]) -> \
        list[tuple[ad.Operand, ad.Operand]]:
    if poses is None:
        return [(cam.R, cam.t) for cam in cams]
    if len(poses) != len(cams):
        raise CountMismatch('%d poses for %d cameras' % (len(poses),
                                                         len(cams)))
    return list(poses)


def _gamma(lighting: Any) -> ad.Operand:
    return lighting.gamma if isinstance(lighting, ShLighting) else lighting


def energy_photo(model: LinearMorphableModel, coeffs: MorphCoeffs,
                 lighting: Sequence[Any], cams: Sequence[Camera],
                 images: Sequence[np.ndarray],
                 face_masks: Sequence[np.ndarray], *,
                 poses: Optional[Sequence[tuple[ad.Operand,
                                                ad.Operand]]] = None) -> \
        ad.Operand:
    """Photometric energy summed over views.

    Each view contributes ``(1/|M_f|) sum ||I_in(pi(v)) - I(v)||^2`` over
    the model vertices that are visible and project inside its face mask.
    ``I_in`` is sampled bilinearly and ``I(v)`` is the unclamped shaded
    color. Visibility uses the current values only.

    Raises:
        EmptyMask: If a face mask has no pixels.
        CountMismatch: If the per-view inputs differ in length.
    """

    if not (len(lighting) == len(cams) == len(images) == len(face_masks)):
        raise CountMismatch('photometric energy needs one lighting, camera, '
                            'image and mask per view')
    poses = _poses(cams, poses)
    V = model_geometry(model, coeffs)
    A = model_albedo(model, coeffs)
    N = vertex_normals(V, model.triangles)
    phi = _sh_basis(N)

    total: ad.Operand = 0.0
    for cam, light, image, mask, (R, t) in zip(cams, lighting, images,
                                                face_masks, poses):
        mask = np.asarray(mask, dtype=bool)
        area = np.count_nonzero(mask)
        if area == 0:
            raise EmptyMask('face mask has no pixels')
        posed = cam.with_pose(ad.value_of(R), ad.value_of(t))
        visible = visible_vertices(ad.value_of(V), ad.value_of(N), posed,
                                   mask)
        if not np.any(visible):
            continue
        uv = project_points(R, t, cam, ad.getitem(V, visible))
        observed = sample_bilinear(image, uv)
        irradiance = ad.matmul(ad.getitem(phi, visible), _gamma(light))
        shaded = ad.getitem(A, visible) * ad.reshape(irradiance, (-1, 1))
        residual = observed - shaded
        total = total + ad.sum_(residual * residual) / area
    return total


def energy_landmark(model: LinearMorphableModel, coeffs: MorphCoeffs,
                    cams: Sequence[Camera],
                    landmarks2d: Sequence[np.ndarray], *,
                    poses: Optional[Sequence[tuple[ad.Operand,
                                                   ad.Operand]]] = None) -> \
        ad.Operand:
    """``(1/|L|) sum_j sum_i ||q_ij - pi_j(V_i)||^2``; NaN (unobserved)
    landmarks are skipped.

    Raises:
        CountMismatch: If a view's landmark count differs from the model's,
            or the number of views differs from the number of cameras.
    """

    if len(landmarks2d) != len(cams):
        raise CountMismatch('%d landmark views for %d cameras' % (
            len(landmarks2d), len(cams)))
    count = len(model.landmarks)
    poses = _poses(cams, poses)
    V = ad.getitem(model_geometry(model, coeffs), model.landmarks)

    total: ad.Operand = 0.0
    for cam, observed, (R, t) in zip(cams, landmarks2d, poses):
        observed = np.asarray(observed, dtype=float).reshape(-1, 2)
        if len(observed) != count:
            raise CountMismatch('%d landmarks observed but the model has %d'
                                % (len(observed), count))
        seen = ~np.any(np.isnan(observed), axis=-1)
        if not np.any(seen):
            continue
        residual = observed[seen] - project_points(R, t, cam,
                                                   ad.getitem(V, seen))
        total = total + ad.sum_(residual * residual)
    return total / max(count, 1)


def energy_reg(model: LinearMorphableModel, coeffs: MorphCoeffs) -> \
        ad.Operand:
    """Sum of squared coefficient-to-sigma ratios.

    Raises:
        ZeroSigma: If any standard deviation is zero.
    """

    total: ad.Operand = 0.0
    for kind in ('id', 'exp', 'alb'):
        sigma = getattr(model, 'sigma_' + kind)
        if np.any(sigma == 0.0):
            raise ZeroSigma('sigma_%s has zero entries' % kind)
        _check_coeffs(model, coeffs, (kind,))
        ratio = getattr(coeffs, 'alpha_' + kind) / sigma
        total = total + ad.sum_(ratio * ratio)
    return total


def default_camera(width: int, height: int, *,
                   focal: Optional[float] = None,
                   depth: float = PROXY_DEPTH) -> Camera:
    """Identity-rotation camera with the model origin ``depth`` units in
    front of it."""

    focal = 0.9 * width if focal is None else focal
    return Camera(np.eye(3), np.array([0.0, 0.0, depth]), focal, focal,
                  width / 2.0, height / 2.0, width, height)


class _ProxyProblem:
    """The proxy objective over one flat vector of whitened coefficients,
    lighting and pose corrections."""

    def __init__(self, model: LinearMorphableModel,
                 images: Sequence[np.ndarray],
                 masks: Sequence[np.ndarray],
                 landmarks: Sequence[np.ndarray], cams: Sequence[Camera],
                 weights: tuple[float, float, float]):
        self.model = model
        self.images = [np.asarray(image, dtype=float) for image in images]
        self.masks = [np.asarray(mask, dtype=bool) for mask in masks]
        self.landmarks = landmarks
        self.cams = list(cams)
        self.weights = weights
        n = len(self.cams)
        self.params = ad.ParamVector.from_segments([
            ('id', np.zeros(model.k_id)), ('exp', np.zeros(model.k_exp)),
            ('alb', np.zeros(model.k_alb)), ('light', np.zeros((n, 9))),
            ('rot', np.zeros((n, 3))), ('trans', np.zeros((n, 3)))])

    def unpack(self, flat: ad.Operand) -> \
            tuple[MorphCoeffs, ad.Operand, list[tuple[ad.Operand,
                                                      ad.Operand]]]:
        view = self.params.view
        coeffs = MorphCoeffs(view(flat, 'id') * self.model.sigma_id,
                             view(flat, 'exp') * self.model.sigma_exp,
                             view(flat, 'alb') * self.model.sigma_alb)
        rot, trans = view(flat, 'rot'), view(flat, 'trans')
        poses = [(ad.matmul(euler_to_matrix(rot[j]), cam.R), cam.t + trans[j])
                 for j, cam in enumerate(self.cams)]
        return coeffs, view(flat, 'light'), poses

    def terms(self, flat: ad.Operand) -> tuple[ad.Operand, ad.Operand,
                                               ad.Operand]:
        coeffs, light, poses = self.unpack(flat)
        lighting = [light[j] for j in range(len(self.cams))]
        photo = energy_photo(self.model, coeffs, lighting, self.cams,
                             self.images, self.masks, poses=poses)
        land = energy_landmark(self.model, coeffs, self.cams,
                               self.landmarks, poses=poses)
        reg = energy_reg(self.model, coeffs)
        return photo, land, reg

    def energy(self, flat: ad.Operand) -> ad.Operand:
        w_photo, w_land, w_reg = self.weights
        photo, land, reg = self.terms(flat)
        return w_photo * photo + w_land * land + w_reg * reg

    def evaluate(self, values: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = ad.value_and_grad(
                self.energy, self.params.with_values(values))
        return value, gradient.values

    def trial(self, values: np.ndarray) -> float:
        """Energy at a trial point; inf where it is undefined."""
        try:
            value = float(ad.value_of(self.energy(values)))
        except (GeometryException, NonFiniteLoss):
            return np.inf
        return value if np.isfinite(value) else np.inf

    def result(self, values: np.ndarray) -> \
            tuple[MorphCoeffs, list[ShLighting], list[Camera]]:
        coeffs, light, poses = self.unpack(values)
        cameras = [cam.with_pose(np.asarray(R), np.asarray(t))
                   for cam, (R, t) in zip(self.cams, poses)]
        return coeffs, [ShLighting(g) for g in np.asarray(light)], cameras


def fit_proxy(model: LinearMorphableModel, images: Sequence[np.ndarray],
              face_masks: Sequence[np.ndarray],
              landmarks2d: Sequence[np.ndarray],
              init_cams: Optional[Sequence[Camera]] = None, *,
              focal: Optional[float] = None,
              weights: tuple[float, float, float] = PROXY_WEIGHTS,
              max_iter: int = 2000, tol: float = 1e-6,
              armijo: float = 1e-4) -> ProxyFitResult:
    """Fit the morphable model to one or more views.

    Coefficients and lighting start at zero. Poses start at ``init_cams``
    or, without them, at `default_camera` for each image. Each iteration
    tries the Barzilai-Borwein step length and halves it until the Armijo
    condition holds; the fit stops when the relative energy decrease drops
    below ``tol``, when no decreasing step is found or after ``max_iter``
    iterations.

    Raises:
        CountMismatch: If the per-view inputs differ in length.
        DivergedEnergy: If the energy or its gradient is not finite.
    """

    if len(images) == 0:
        raise CountMismatch('the proxy fit needs at least one view')
    if not (len(images) == len(face_masks) == len(landmarks2d)):
        raise CountMismatch('%d images, %d masks and %d landmark views' % (
            len(images), len(face_masks), len(landmarks2d)))
    if init_cams is None:
        init_cams = [default_camera(image.shape[1], image.shape[0],
                                    focal=focal) for image in images]
    elif len(init_cams) != len(images):
        raise CountMismatch('%d cameras for %d images' % (len(init_cams),
                                                          len(images)))

    problem = _ProxyProblem(model, images, face_masks, landmarks2d,
                            init_cams, weights)
    x = np.array(problem.params.values)
    try:
        energy, g = problem.evaluate(x)
    except NonFiniteLoss as e:
        raise DivergedEnergy('initial proxy energy: %s' % e)
    trace = [energy]
    logger.info('proxy fit: %d views, initial energy %.6g' % (
        len(images), energy))

    step = 1e-3 / max(float(np.max(np.abs(g))), 1e-12)
    x_prev = g_prev = None
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if x_prev is not None:
            s, y = x - x_prev, g - g_prev
            sy = float(s @ y)
            step = float(s @ s) / sy if sy > 0.0 else 2.0 * step
        slope = float(g @ g)
        if slope == 0.0:
            break
        accepted = None
        for _ in range(40):
            candidate = x - step * g
            value = problem.trial(candidate)
            if value <= energy - armijo * step * slope:
                accepted = candidate, value
                break
            step /= 2.0
        if accepted is None:
            logger.debug('proxy fit: no decreasing step at iteration %d' %
                         iteration)
            break

        x_prev, g_prev = x, g
        x = accepted[0]
        previous = energy
        try:
            energy, g = problem.evaluate(x)
        except NonFiniteLoss as e:
            raise DivergedEnergy('proxy energy at iteration %d: %s' % (
                iteration, e))
        trace.append(energy)
        logger.debug('proxy fit: iteration %d energy %.9g step %.3g' % (
            iteration, energy, step))
        if previous - energy < tol * max(abs(previous), 1e-300):
            break

    coeffs, lighting, cameras = problem.result(x)
    logger.info('proxy fit: %d iterations, final energy %.6g' % (
        iteration, energy))
    return ProxyFitResult(coeffs, lighting, cameras, energy, trace,
                          iteration)


def proxy_mesh(model: LinearMorphableModel, coeffs: MorphCoeffs) -> \
        TriangleMesh:
    vertices = np.asarray(ad.value_of(model_geometry(model, coeffs)))
    normals = np.asarray(vertex_normals(vertices, model.triangles))
    return TriangleMesh(vertices, model.triangles, normals)


def sample_proxy_points(mesh: TriangleMesh, count: int, seed: int = 0) -> \
        np.ndarray:
    """Area-weighted random points on the proxy mesh; deterministic for a
    given seed."""

    if count < 1:
        raise ShapeMismatch('point count must be at least 1, not %d' % count)
    return mesh.sample_points(count, np.random.default_rng(seed))


def rasterize(vertices: np.ndarray, triangles: np.ndarray,
              colors: np.ndarray, cam: Camera) -> \
        tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-buffered Gouraud rendering at pixel centers.

    Returns:
        (image, mask, depth): an (H, W, 3) image that is zero where no
        triangle covers the pixel, the coverage mask and the camera depth
        (inf where uncovered).
    """

    vertices = np.asarray(vertices, dtype=float)
    colors = np.asarray(colors, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    height, width = cam.height, cam.width
    image = np.zeros((height, width, colors.shape[-1]))
    zbuffer = np.full((height, width), np.inf)

    depth = cam.depth(vertices)
    in_front = depth > 1e-9
    P = vertices @ cam.R.T + cam.t
    safe = np.where(in_front, P[:, 2], 1.0)
    uv = np.stack([cam.fx * P[:, 0] / safe + cam.cx,
                   cam.fy * P[:, 1] / safe + cam.cy], axis=-1)

    for tri in triangles:
        if not np.all(in_front[tri]):
            continue
        (u0, v0), (u1, v1), (u2, v2) = uv[tri]
        area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
        if abs(area) < 1e-12:
            continue
        c_lo = max(int(np.floor(min(u0, u1, u2) - 0.5)), 0)
        c_hi = min(int(np.ceil(max(u0, u1, u2) - 0.5)), width - 1)
        r_lo = max(int(np.floor(min(v0, v1, v2) - 0.5)), 0)
        r_hi = min(int(np.ceil(max(v0, v1, v2) - 0.5)), height - 1)
        if c_lo > c_hi or r_lo > r_hi:
            continue
        rows, cols = np.mgrid[r_lo:r_hi + 1, c_lo:c_hi + 1]
        pu, pv = cols + 0.5, rows + 0.5
        w1 = ((pu - u0) * (v2 - v0) - (u2 - u0) * (pv - v0)) / area
        w2 = ((u1 - u0) * (pv - v0) - (pu - u0) * (v1 - v0)) / area
        w0 = 1.0 - w1 - w2
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not np.any(inside):
            continue
        z = w0 * depth[tri[0]] + w1 * depth[tri[1]] + w2 * depth[tri[2]]
        rows, cols, z = rows[inside], cols[inside], z[inside]
        nearer = z < zbuffer[rows, cols]
        rows, cols, z = rows[nearer], cols[nearer], z[nearer]
        weights = np.stack([w0[inside][nearer], w1[inside][nearer],
                            w2[inside][nearer]], axis=-1)
        zbuffer[rows, cols] = z
        image[rows, cols] = weights @ colors[tri]

    mask = np.isfinite(zbuffer)
    return image, mask, zbuffer
