"""Triangle meshes, voxel grids, marching cubes, OBJ files and geometric
error measures."""

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

import os

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure

from .exception import IoError, MeshException, ParseError
from .logging import Logging
from .sdf import SdfField, principal_directions_batch
from .utility import Utility

logger = Logging.get_logger(__name__)

MIN_AREA = 1e-12
DEFAULT_BOUNDS = (-1.2, 1.2)

Bounds = Union[tuple[float, float], tuple[Sequence[float], Sequence[float]]]


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> \
        np.ndarray:
    if len(triangles) == 0:
        return np.zeros(0)
    v0, v1, v2 = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=-1)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh with optional per-vertex normals."""

    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)
        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if normals.shape != vertices.shape:
                raise MeshException('%d normals for %d vertices' % (
                    len(normals), len(vertices)))
            object.__setattr__(self, 'normals', normals)
        if len(triangles) and (triangles.min() < 0 or
                               triangles.max() >= len(vertices)):
            raise MeshException('triangle indices out of range 0..%d' % (
                len(vertices) - 1))
        degenerate = np.count_nonzero(self.triangle_areas() <= MIN_AREA)
        if degenerate:
            raise MeshException('mesh has %d degenerate triangles' %
                                degenerate)

    @classmethod
    def empty(cls) -> 'TriangleMesh':
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))

    @classmethod
    def cleaned(cls, vertices: np.ndarray, triangles: np.ndarray,
                normals: Optional[np.ndarray] = None) -> 'TriangleMesh':
        """Build a mesh, dropping degenerate triangles."""

        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=int).reshape(-1, 3)
        keep = _triangle_areas(vertices, triangles) > MIN_AREA
        return cls(vertices, triangles[keep], normals)

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def triangle_areas(self) -> np.ndarray:
        return _triangle_areas(self.vertices, self.triangles)

    @property
    def area(self) -> float:
        return float(np.sum(self.triangle_areas()))

    def face_normals(self) -> np.ndarray:
        v0, v1, v2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        normals = np.cross(v1 - v0, v2 - v0)
        return normals / np.linalg.norm(normals, axis=-1, keepdims=True)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def sample_points(self, count: int, rng: np.random.Generator) -> \
            np.ndarray:
        """Area-weighted uniform random surface points."""

        if self.is_empty:
            raise MeshException("can't sample points on an empty mesh")
        areas = self.triangle_areas()
        chosen = rng.choice(len(areas), size=count, p=areas / areas.sum())
        r1, r2 = rng.random(count), rng.random(count)
        s = np.sqrt(r1)
        weights = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=-1)
        corners = self.vertices[self.triangles[chosen]]
        return np.einsum('nk,nkj->nj', weights, corners)

    def flipped(self) -> 'TriangleMesh':
        normals = None if self.normals is None else -self.normals
        return TriangleMesh(self.vertices, self.triangles[:, ::-1], normals)


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Scalar samples on a regular lattice; ``values[i, j, k]`` is the
    value at ``lower + (i, j, k) * spacing``."""

    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(3)
        upper = np.asarray(self.upper, dtype=float).reshape(3)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'values', values)
        if values.ndim != 3 or min(values.shape) < 2:
            raise MeshException('grid resolution must be at least 2 per '
                                'axis, not %s' % (values.shape,))
        if not np.all(upper > lower):
            raise MeshException('grid bounds are empty')
        if not np.all(np.isfinite(values)):
            raise MeshException('grid values must be finite')

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.asarray(self.resolution) - 1)

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in
                zip(self.lower, self.upper, self.resolution)]

    def points(self) -> np.ndarray:
        return lattice_points(self.lower, self.upper, self.resolution)

    def gradient_at(self, X: np.ndarray) -> np.ndarray:
        """Trilinearly interpolated finite-difference gradient."""

        gradients = np.gradient(self.values, *self.spacing)
        coords = ((np.asarray(X) - self.lower) / self.spacing).T
        return np.stack([ndimage.map_coordinates(g, coords, order=1,
                                                 mode='nearest')
                         for g in gradients], axis=-1)


def _bounds(bounds: Bounds) -> tuple[np.ndarray, np.ndarray]:
    lower, upper = bounds
    return np.broadcast_to(np.asarray(lower, dtype=float), (3,)).copy(), \
        np.broadcast_to(np.asarray(upper, dtype=float), (3,)).copy()


def lattice_points(lower: np.ndarray, upper: np.ndarray,
                   resolution: Sequence[int]) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi, n in
            zip(lower, upper, resolution)]
    grid = np.meshgrid(*axes, indexing='ij')
    return np.stack([g.reshape(-1) for g in grid], axis=-1)


def sample_grid(field: SdfField, bounds: Bounds = DEFAULT_BOUNDS,
                resolution: Union[int, Sequence[int]] = 64, *,
                threads: int = 1) -> VoxelGrid:
    """Evaluate ``field`` at the lattice points of ``bounds``."""

    lower, upper = _bounds(bounds)
    resolution = tuple(np.broadcast_to(np.asarray(resolution, dtype=int),
                                       (3,)).tolist())
    if min(resolution) < 2:
        raise MeshException('grid resolution must be at least 2, not %s' % (
            resolution,))
    points = lattice_points(lower, upper, resolution)
    parts = Utility.map_chunks(
            lambda start, stop: np.asarray(field(points[start:stop])),
            len(points), threads=threads)
    return VoxelGrid(lower, upper, np.concatenate(parts).reshape(resolution))


def marching_cubes(grid: VoxelGrid) -> TriangleMesh:
    """Extract the zero level set.

    Triangles are oriented so that their normals follow ``+grad f`` (the
    outside of the surface) and vertex normals are the normalized
    interpolated grid gradient. A grid without a sign change gives an
    empty mesh.
    """

    values = grid.values
    if values.min() >= 0.0 or values.max() <= 0.0:
        logger.info('grid has no sign change; empty mesh')
        return TriangleMesh.empty()

    vertices, triangles, _, _ = measure.marching_cubes(
            values, level=0.0, spacing=tuple(grid.spacing),
            method='lorensen', allow_degenerate=False)
    vertices = vertices + grid.lower
    mesh = TriangleMesh.cleaned(vertices, triangles)
    if mesh.is_empty:
        return mesh

    gradients = grid.gradient_at(mesh.centroids())
    if np.sum(np.einsum('ij,ij->i', mesh.face_normals(), gradients)) < 0:
        mesh = TriangleMesh(mesh.vertices, mesh.triangles[:, ::-1])
    normals = grid.gradient_at(mesh.vertices)
    lengths = np.linalg.norm(normals, axis=-1, keepdims=True)
    normals = normals / np.where(lengths > 0.0, lengths, 1.0)
    return TriangleMesh(mesh.vertices, mesh.triangles, normals)


def export_obj(mesh: TriangleMesh, path: str) -> None:
    """Write ``mesh`` as Wavefront OBJ (9 significant digits)."""

    lines = ['# headrecon mesh: %d vertices, %d triangles' % (
        len(mesh.vertices), len(mesh.triangles))]
    lines += ['v %.9g %.9g %.9g' % tuple(v) for v in mesh.vertices]
    if mesh.normals is not None:
        lines += ['vn %.9g %.9g %.9g' % tuple(n) for n in mesh.normals]
        lines += ['f %d//%d %d//%d %d//%d' % (a, a, b, b, c, c) for
                  a, b, c in mesh.triangles + 1]
    else:
        lines += ['f %d %d %d' % tuple(t) for t in mesh.triangles + 1]
    try:
        dirname = os.path.dirname(path)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        with open(path, 'w') as fd:
            fd.write('\n'.join(lines) + '\n')
    except OSError as e:
        raise IoError("can't write %s: %s" % (path, e), path)


def _obj_index(text: str, count: int, line: int) -> int:
    try:
        index = int(text)
    except ValueError:
        raise ParseError('invalid index %r' % text, line)
    index = index - 1 if index > 0 else count + index
    if not 0 <= index < count:
        raise ParseError('index %s out of range 1..%d' % (text, count), line)
    return index


def import_obj(path: str) -> TriangleMesh:
    """Read a Wavefront OBJ file; polygons are fan-triangulated and
    texture coordinates, groups and materials are ignored."""

    try:
        with open(path) as fd:
            text = fd.read()
    except OSError as e:
        raise IoError("can't read %s: %s" % (path, e), path)

    vertices, normals, triangles, vertex_normal = [], [], [], {}
    for number, line in enumerate(text.splitlines(), 1):
        fields = line.split('#', 1)[0].split()
        if not fields:
            continue
        keyword, args = fields[0], fields[1:]
        if keyword in {'v', 'vn'}:
            try:
                values = [float(a) for a in args[:3]]
            except ValueError:
                raise ParseError('invalid number in %r' % line, number)
            if len(values) != 3:
                raise ParseError('%s needs 3 coordinates' % keyword, number)
            (vertices if keyword == 'v' else normals).append(values)
        elif keyword == 'f':
            if len(args) < 3:
                raise ParseError('face needs at least 3 vertices', number)
            corners = []
            for arg in args:
                parts = arg.split('/')
                corner = _obj_index(parts[0], len(vertices), number)
                if len(parts) == 3 and parts[2]:
                    vertex_normal[corner] = _obj_index(
                            parts[2], len(normals), number)
                corners.append(corner)
            triangles += [[corners[0], corners[i], corners[i + 1]]
                          for i in range(1, len(corners) - 1)]
        elif keyword not in {'vt', 'vp', 'o', 'g', 's', 'l', 'usemtl',
                             'mtllib'}:
            raise ParseError('unknown keyword %r' % keyword, number)

    vertex_normals = None
    if normals and len(vertex_normal) == len(vertices):
        vertex_normals = np.asarray(normals)[
            [vertex_normal[i] for i in range(len(vertices))]]
    return TriangleMesh(np.asarray(vertices).reshape(-1, 3),
                        np.asarray(triangles, dtype=int).reshape(-1, 3),
                        vertex_normals)


@dataclass(frozen=True)
class Similarity:
    """``x -> scale * R x + t``."""

    scale: float
    R: np.ndarray
    t: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(X) @ self.R.T + self.t


def umeyama(source: np.ndarray, target: np.ndarray) -> Similarity:
    """Least-squares similarity mapping corresponding ``source`` points
    onto ``target`` points."""

    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    xs, xt = source - mu_s, target - mu_t
    covariance = xt.T @ xs / len(source)
    U, S, Vt = np.linalg.svd(covariance)
    D = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        D[2, 2] = -1.0
    R = U @ D @ Vt
    variance = np.mean(np.sum(xs * xs, axis=-1))
    scale = float(np.trace(np.diag(S) @ D) / variance)
    return Similarity(scale, R, mu_t - scale * R @ mu_s)


def similarity_align(source: np.ndarray, target: np.ndarray, *,
                     iterations: int = 30, tol: float = 1e-9) -> \
        Similarity:
    """Align point sets without known correspondences: iterated closest
    points with the closed-form similarity at each step."""

    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    tree = cKDTree(target)
    transform = Similarity(1.0, np.eye(3), np.zeros(3))
    previous = np.inf
    for _ in range(iterations):
        moved = transform.apply(source)
        distances, index = tree.query(moved)
        transform = umeyama(source, target[index])
        error = float(np.mean(distances))
        if previous - error < tol:
            break
        previous = error
    return transform


def geometric_error(mesh: TriangleMesh, reference: TriangleMesh, *,
                    align: bool = False, samples: int = 10000,
                    seed: int = 0) -> float:
    """Mean distance from points sampled on ``mesh`` to the nearest of the
    points sampled on ``reference``, optionally after similarity
    alignment."""

    rng = np.random.default_rng(seed)
    points = mesh.sample_points(samples, rng)
    reference_points = reference.sample_points(samples, rng)
    if align:
        points = similarity_align(points, reference_points).apply(points)
    distances, _ = cKDTree(reference_points).query(points)
    return float(np.mean(distances))


def radial_error(mesh: TriangleMesh, center: Sequence[float] = (0, 0, 0),
                 radius: float = 1.0) -> float:
    """Mean relative deviation of the vertices from a sphere."""

    if mesh.is_empty:
        raise MeshException("can't measure the radial error of an empty "
                            "mesh")
    distances = np.linalg.norm(mesh.vertices - np.asarray(center), axis=-1)
    return float(np.mean(np.abs(distances - radius)) / radius)


def orientation_deviation(field: SdfField, points: np.ndarray,
                          directions: np.ndarray) -> float:
    """Mean unsigned angle (degrees) between the field's principal
    directions and ``directions``; umbilic points are skipped."""

    result = principal_directions_batch(field, np.asarray(points,
                                                          dtype=float))
    D = np.asarray(result.D)[result.valid]
    reference = np.asarray(directions, dtype=float)[result.valid]
    if len(D) == 0:
        raise MeshException('no valid principal directions')
    reference = reference / np.linalg.norm(reference, axis=-1,
                                           keepdims=True)
    cosines = np.clip(np.abs(np.einsum('ij,ij->i', D, reference)), 0.0, 1.0)
    return float(np.degrees(np.mean(np.arccos(cosines))))
