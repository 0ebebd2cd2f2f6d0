"""Synthetic head scenes.

The "head" is a sphere (the face, with patches for the facial parts) and a
torus lying on top of it (the hair) whose texture has stripes running
along the tube. Views are rendered with the analytic tracer from cameras
on a ring around the vertical axis, so masks, labels and orientation maps
are exact.
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

import os.path

from typing import Optional

import numpy as np

from .config import SyntheticConfig, TracerConfig
from .file import LABELS
from .geometry import Camera, pixel_centers
from .hair import OrientationMap, project_directions
from .logging import Logging
from .mesh import marching_cubes, sample_grid
from .morphable import FACIAL_DIRECTIONS, save_model, \
    synthetic_morphable_model
from .scene import Scene, View
from .sdf import AnalyticSphere, AnalyticTorus, AnalyticUnion, SdfField, \
    tube_direction
from .tracer import trace_rays

logger = Logging.get_logger(__name__)

SKIN = np.array([0.80, 0.62, 0.52])
HAIR = np.array([0.35, 0.22, 0.10])

# label, landmark directions, angular radius (radians), albedo
FACE_PARTS = (
    ('eyes', ('right_eye', 'left_eye'), 0.12, (0.15, 0.15, 0.20)),
    ('eyebrows', ('right_brow', 'left_brow'), 0.10, (0.30, 0.20, 0.12)),
    ('nose', ('nose_tip',), 0.12, (0.88, 0.56, 0.48)),
    ('lips', ('mouth_right', 'mouth_left'), 0.12, (0.70, 0.30, 0.30)),
)

GROUND_TRUTH_RESOLUTION = 64


def synthetic_head(config: SyntheticConfig) -> SdfField:
    """The analytic head; the sphere-only variant is a unit sphere."""

    if config.sphere_only:
        return AnalyticSphere(np.zeros(3), 1.0)
    return AnalyticUnion((
        AnalyticSphere(np.zeros(3), config.sphere_radius),
        AnalyticTorus(config.torus_major, config.torus_minor,
                      np.array([0.0, config.torus_height, 0.0]),
                      np.array([0.0, 1.0, 0.0]))))


def ring_cameras(config: SyntheticConfig) -> list[Camera]:
    """Cameras evenly spaced around the vertical axis, starting in front
    of the face (-z) and raised by ``elevation`` radians."""

    cams = []
    for index in range(config.views):
        phi = 2.0 * np.pi * index / config.views
        e = config.elevation
        eye = config.distance * np.array([np.sin(phi) * np.cos(e),
                                          -np.sin(e),
                                          -np.cos(phi) * np.cos(e)])
        cams.append(Camera.look_at(eye, np.zeros(3), (0.0, -1.0, 0.0),
                                   focal=config.focal_scale * config.width,
                                   width=config.width,
                                   height=config.height))
    return cams


def _directions(names: tuple[str, ...]) -> np.ndarray:
    lookup = dict(FACIAL_DIRECTIONS)
    D = np.array([lookup[name] for name in names], dtype=float)
    return D / np.linalg.norm(D, axis=-1, keepdims=True)


def _face_parts(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and albedos of sphere points."""

    u = X / np.linalg.norm(X, axis=-1, keepdims=True)
    labels = np.full(len(X), LABELS.index('face'))
    albedo = np.tile(SKIN, (len(X), 1))
    for name, directions, radius, color in FACE_PARTS:
        cosines = u @ _directions(directions).T
        inside = np.max(cosines, axis=-1) > np.cos(radius)
        labels[inside] = LABELS.index(name)
        albedo[inside] = color
    return labels, albedo


def _hair_albedo(torus: AnalyticTorus, X: np.ndarray, stripes: int,
                 phase: float) -> np.ndarray:
    """Stripes of constant angle around the tube cross-section."""

    p = X - torus.center
    height = p @ torus.axis
    rho = np.linalg.norm(p - height[:, None] * torus.axis, axis=-1)
    psi = np.arctan2(height, rho - torus.major)
    level = 0.6 + 0.4 * np.cos(stripes * psi + phase)
    return HAIR * level[:, None]


def landmark_points(config: SyntheticConfig) -> np.ndarray:
    radius = 1.0 if config.sphere_only else config.sphere_radius
    return radius * _directions(tuple(name for name, _ in
                                      FACIAL_DIRECTIONS))


def _landmarks(points: np.ndarray, cam: Camera) -> np.ndarray:
    """Projections of the sphere landmarks; NaN where facing away or
    outside the image."""

    facing = np.einsum('ij,ij->i', points, points - cam.center) < 0.0
    observed = np.full((len(points), 2), np.nan)
    if np.any(facing):
        projected = cam.project(points[facing])
        inside = cam.contains(projected)
        rows = np.nonzero(facing)[0][inside]
        observed[rows] = projected[inside]
    return observed


def render_view(field: SdfField, cam: Camera, config: SyntheticConfig,
                phase: float, *, threads: int = 1) -> View:
    """Render one view of the analytic head with a head light."""

    height, width = cam.height, cam.width
    origins, dirs = cam.rays(pixel_centers(height, width))
    trace = trace_rays(field, origins, dirs, TracerConfig(eps=1e-6),
                       threads=threads)
    hit = trace.hit
    X = trace.x[hit]

    labels = np.zeros(height * width, dtype=int)
    image = np.zeros((height * width, 3))
    hair = np.zeros(height * width, dtype=bool)
    direction = np.zeros((height * width, 2))

    if isinstance(field, AnalyticUnion):
        sphere, torus = field.components
        on_hair = field.component_index(X) == 1
    else:
        sphere, torus = field, None
        on_hair = np.zeros(len(X), dtype=bool)

    part_labels, albedo = _face_parts(X - sphere.center)
    part_labels[on_hair] = LABELS.index('hair')
    if torus is not None and np.any(on_hair):
        albedo[on_hair] = _hair_albedo(torus, X[on_hair], config.stripes,
                                       phase)
        D = tube_direction(torus, X[on_hair])
        projected, _ = project_directions(cam.R, cam.t, cam, X[on_hair], D)
        rows = np.nonzero(hit)[0][on_hair]
        direction[rows] = np.asarray(projected)
        hair[rows] = True

    normals = np.asarray(field.gradient(X))
    shading = 0.35 + 0.65 * np.abs(np.einsum('ij,ij->i', normals,
                                             dirs[hit]))
    image[hit] = np.clip(albedo * shading[:, None], 0.0, 1.0)
    labels[hit] = part_labels

    return View(image.reshape(height, width, 3), hit.reshape(height, width),
                hair.reshape(height, width), labels.reshape(height, width),
                cam, OrientationMap(direction.reshape(height, width, 2)))


def generate_synthetic_scene(config: SyntheticConfig = SyntheticConfig(),
                             seed: int = 0, outdir: Optional[str] = None, *,
                             threads: int = 1) -> Scene:
    """Build, render and (if ``outdir`` is given) write a synthetic scene.

    The seed sets the hair stripe phase and the morphable model, so the
    same seed gives byte-identical files.
    """

    rng = np.random.default_rng(seed)
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    field = synthetic_head(config)
    cams = ring_cameras(config)
    points = landmark_points(config)

    views = [render_view(field, cam, config, phase, threads=threads)
             for cam in cams]
    landmarks = [_landmarks(points, cam) for cam in cams]
    ground_truth = marching_cubes(sample_grid(
            field, resolution=GROUND_TRUTH_RESOLUTION, threads=threads))

    model_path = None
    if config.morphable and outdir is not None:
        model_path = os.path.join(outdir, 'model.json')
        save_model(model_path, synthetic_morphable_model(seed))

    scene = Scene(views, landmarks=landmarks, ground_truth=ground_truth,
                  analytic=field, model_path=model_path)
    logger.info('synthetic scene: %d views of %dx%d, %d hair pixels' % (
        len(views), config.width, config.height,
        sum(int(np.count_nonzero(view.hair_mask)) for view in views)))
    if outdir is not None:
        scene.save(outdir)
    return scene
