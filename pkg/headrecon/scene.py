"""Multi-view scenes and the ``scene.json`` manifest.

A scene directory looks like this::

    scene.json          manifest (paths are relative to the directory)
    cameras.json        one camera per view
    landmarks.json      per-view 2D landmarks (optional)
    view00/image.png    RGB image
    view00/mask.png     head mask
    view00/hair.png     hair mask
    view00/labels.png   semantic labels 0..6
    view00/orientation.ori
    ...

The manifest may also name the ground-truth mesh, the analytic scene
description, the morphable model and the proxy-fit outputs.
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

from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from .exception import IoError, ReconException, SizeMismatch
from .file import File, LABELS
from .geometry import Camera, load_cameras, save_cameras
from .hair import OrientationMap, read_orientation_map, \
    write_orientation_map
from .logging import Logging
from .mesh import TriangleMesh, export_obj, import_obj
from .sdf import SdfField, field_from_dict

logger = Logging.get_logger(__name__)

MANIFEST = 'scene.json'

FACE_LABELS = tuple(LABELS.index(name) for name in
                    ('face', 'eyes', 'eyebrows', 'nose', 'lips'))
HAIR_LABEL = LABELS.index('hair')


@dataclass(eq=False)
class View:
    """One calibrated view with its rasters."""

    image: np.ndarray
    mask: np.ndarray
    hair_mask: np.ndarray
    labels: np.ndarray
    camera: Camera
    orientation: Optional[OrientationMap] = None

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.hair_mask = np.asarray(self.hair_mask, dtype=bool)
        self.labels = np.asarray(self.labels, dtype=int)
        shape = self.image.shape[:2]
        rasters = [('mask', self.mask), ('hair mask', self.hair_mask),
                   ('labels', self.labels)]
        if self.orientation is not None:
            rasters.append(('orientation map', self.orientation.direction))
        for name, raster in rasters:
            if raster.shape[:2] != shape:
                raise SizeMismatch('%s is %dx%d but the image is %dx%d' % (
                    name, raster.shape[1], raster.shape[0], shape[1],
                    shape[0]))
        if (self.camera.height, self.camera.width) != shape:
            raise SizeMismatch('camera is %dx%d but the image is %dx%d' % (
                self.camera.width, self.camera.height, shape[1], shape[0]))
        if np.any(self.hair_mask & ~self.mask):
            raise ReconException('hair mask must lie inside the head mask')
        if self.labels.min(initial=0) < 0 or \
                self.labels.max(initial=0) >= len(LABELS):
            raise ReconException('labels must be in 0..%d' % (
                len(LABELS) - 1))

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def face_mask(self) -> np.ndarray:
        return np.isin(self.labels, FACE_LABELS)


@dataclass(eq=False)
class Scene:
    views: list[View]
    landmarks: Optional[list[np.ndarray]] = None
    bounds: tuple[float, float] = (-1.2, 1.2)
    ground_truth: Optional[TriangleMesh] = None
    analytic: Optional[SdfField] = None
    model_path: Optional[str] = None
    proxy_mesh: Optional[TriangleMesh] = None
    proxy_cameras: Optional[list[Camera]] = None
    root: Optional[str] = None

    def __post_init__(self):
        if not self.views:
            raise ReconException('a scene needs at least one view')
        if self.landmarks is not None and \
                len(self.landmarks) != len(self.views):
            raise SizeMismatch('%d landmark views for %d views' % (
                len(self.landmarks), len(self.views)))

    def __len__(self) -> int:
        return len(self.views)

    @property
    def cameras(self) -> list[Camera]:
        return [view.camera for view in self.views]

    def with_cameras(self, cams: Sequence[Camera]) -> 'Scene':
        if len(cams) != len(self.views):
            raise SizeMismatch('%d cameras for %d views' % (len(cams),
                                                            len(self.views)))
        views = [replace(view, camera=cam) for view, cam in
                 zip(self.views, cams)]
        return replace(self, views=views)

    def path(self, name: str) -> str:
        return name if self.root is None else os.path.join(self.root, name)

    @classmethod
    def load(cls, directory: str) -> 'Scene':
        """Load a scene directory.

        Raises:
            IoError: If the manifest or a file it names is missing.
        """

        manifest_path = File.require(os.path.join(directory, MANIFEST),
                                     what='scene manifest')
        manifest = File.read_json(manifest_path)

        def resolve(name: Optional[str], what: str) -> Optional[str]:
            return None if name is None else File.require(
                    os.path.join(directory, name), what=what)

        cameras = load_cameras(resolve(manifest.get('cameras',
                                                    'cameras.json'),
                                       'camera file'))
        entries = manifest.get('views', [])
        if len(entries) != len(cameras):
            raise SizeMismatch('%d views but %d cameras' % (len(entries),
                                                            len(cameras)))
        views = []
        for entry, cam in zip(entries, cameras):
            orientation = entry.get('orientation')
            views.append(View(
                File.read_png(resolve(entry['image'], 'image')),
                File.read_mask(resolve(entry['mask'], 'mask')),
                File.read_mask(resolve(entry['hair_mask'], 'hair mask')),
                File.read_labels(resolve(entry['labels'], 'label map')),
                cam,
                None if orientation is None else read_orientation_map(
                        resolve(orientation, 'orientation map'))))

        landmarks_path = resolve(manifest.get('landmarks'), 'landmarks file')
        ground_truth = resolve(manifest.get('ground_truth'),
                               'ground-truth mesh')
        analytic = resolve(manifest.get('analytic'), 'analytic scene')
        proxy_mesh = resolve(manifest.get('proxy_mesh'), 'proxy mesh')
        proxy_cameras = resolve(manifest.get('proxy_cameras'),
                                'proxy camera file')
        model = resolve(manifest.get('model'), 'morphable model')
        scene = cls(
                views=views,
                landmarks=None if landmarks_path is None else
                File.read_landmarks(landmarks_path),
                bounds=tuple(manifest.get('bounds', (-1.2, 1.2))),
                ground_truth=None if ground_truth is None else
                import_obj(ground_truth),
                analytic=None if analytic is None else
                field_from_dict(File.read_json(analytic)),
                model_path=model,
                proxy_mesh=None if proxy_mesh is None else
                import_obj(proxy_mesh),
                proxy_cameras=None if proxy_cameras is None else
                load_cameras(proxy_cameras),
                root=directory)
        logger.info('loaded %d views from %s' % (len(views), directory))
        return scene

    def save(self, directory: str) -> None:
        """Write the scene files and manifest to ``directory``."""

        manifest: dict[str, Any] = {'cameras': 'cameras.json', 'views': [],
                                    'bounds': list(self.bounds)}
        for index, view in enumerate(self.views):
            prefix = 'view%02d/' % index
            entry = {'image': prefix + 'image.png',
                     'mask': prefix + 'mask.png',
                     'hair_mask': prefix + 'hair.png',
                     'labels': prefix + 'labels.png'}
            File.write_png(os.path.join(directory, entry['image']),
                           view.image)
            File.write_mask(os.path.join(directory, entry['mask']),
                            view.mask)
            File.write_mask(os.path.join(directory, entry['hair_mask']),
                            view.hair_mask)
            File.write_labels(os.path.join(directory, entry['labels']),
                              view.labels)
            if view.orientation is not None:
                entry['orientation'] = prefix + 'orientation.ori'
                write_orientation_map(
                        os.path.join(directory, entry['orientation']),
                        view.orientation)
            manifest['views'].append(entry)
        save_cameras(os.path.join(directory, 'cameras.json'), self.cameras)

        if self.landmarks is not None:
            manifest['landmarks'] = 'landmarks.json'
            File.write_landmarks(os.path.join(directory, 'landmarks.json'),
                                 self.landmarks)
        if self.analytic is not None:
            manifest['analytic'] = 'analytic.json'
            File.write_json(os.path.join(directory, 'analytic.json'),
                            self.analytic.to_dict())
        if self.ground_truth is not None:
            manifest['ground_truth'] = 'ground_truth.obj'
            export_obj(self.ground_truth,
                       os.path.join(directory, 'ground_truth.obj'))
        if self.proxy_mesh is not None:
            manifest['proxy_mesh'] = 'proxy.obj'
            export_obj(self.proxy_mesh, os.path.join(directory, 'proxy.obj'))
        if self.proxy_cameras is not None:
            manifest['proxy_cameras'] = 'proxy_cameras.json'
            save_cameras(os.path.join(directory, 'proxy_cameras.json'),
                         self.proxy_cameras)
        if self.model_path is not None:
            manifest['model'] = os.path.relpath(self.model_path, directory)
        File.write_json(os.path.join(directory, MANIFEST), manifest)
        self.root = directory
        logger.info('wrote %d views to %s' % (len(self.views), directory))

    @staticmethod
    def update_manifest(directory: str, **entries: Any) -> None:
        """Add (or replace) manifest entries of a saved scene."""

        path = os.path.join(directory, MANIFEST)
        if not os.path.exists(path):
            raise IoError('scene manifest %s not found' % path, path)
        manifest = File.read_json(path)
        manifest.update(entries)
        File.write_json(path, manifest)
