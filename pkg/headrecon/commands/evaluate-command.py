"""Compare a reconstruction with the scene's ground truth.

Reports the mean surface distance to the ground-truth mesh (with and
without similarity alignment), the radial error when the scene is a
sphere and, given a checkpoint, the angle between the reconstructed
principal directions and the ground-truth hair directions.
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

import argparse
import json
import sys

import numpy as np

from headrecon.command import Command
from headrecon.exception import MeshException
from headrecon.file import File
from headrecon.logging import Logging
from headrecon.mesh import geometric_error, import_obj, \
    orientation_deviation, radial_error
from headrecon.recon import TrainedModel
from headrecon.scene import Scene
from headrecon.sdf import AnalyticSphere, AnalyticTorus, AnalyticUnion, \
    SdfField, tube_direction

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('mesh', help='reconstructed OBJ mesh')
    parser.add_argument('scene', help='scene directory')
    parser.add_argument('--checkpoint',
                        help='checkpoint for the orientation deviation')
    parser.add_argument('--samples', type=int, default=500,
                        help='hair surface samples; default: %(default)s')
    parser.add_argument('--output', help='JSON report file; default: '
                                         'standard output')


def project_to_surface(field: SdfField, points: np.ndarray,
                       steps: int = 3) -> np.ndarray:
    """Move points onto the zero level set with Newton steps along the
    gradient."""

    for _ in range(steps):
        f, g = field.distance_and_gradient(points)
        f, g = np.asarray(f), np.asarray(g)
        squared = np.maximum(np.einsum('ij,ij->i', g, g), 1e-12)
        points = points - (f / squared)[:, None] * g
    return points


def hair_samples(scene: Scene, count: int, seed: int) -> \
        tuple[np.ndarray, np.ndarray]:
    """Ground-truth hair surface points and their tube directions."""

    analytic = scene.analytic
    if not isinstance(analytic, AnalyticUnion) or \
            not isinstance(analytic.components[-1], AnalyticTorus):
        raise MeshException('the scene has no analytic hair surface')
    torus = analytic.components[-1]
    points = scene.ground_truth.sample_points(20 * count,
                                              np.random.default_rng(seed))
    points = points[analytic.component_index(points) ==
                    len(analytic.components) - 1][:count]
    if len(points) == 0:
        raise MeshException('no hair samples on the ground-truth mesh')
    return points, tube_direction(torus, points)


def _run_(args: argparse.Namespace) -> None:
    mesh = import_obj(File.require(args.mesh, what='mesh'))
    scene = Scene.load(args.scene)
    if scene.ground_truth is None:
        raise MeshException('scene %s has no ground-truth mesh' %
                            args.scene)
    if mesh.is_empty:
        raise MeshException('mesh %s is empty' % args.mesh)
    seed = 0 if args.seed is None else args.seed

    report = {
        'geometric_error': geometric_error(mesh, scene.ground_truth,
                                           seed=seed),
        'aligned_geometric_error': geometric_error(
                mesh, scene.ground_truth, align=True, seed=seed)}
    if isinstance(scene.analytic, AnalyticSphere):
        report['radial_error'] = radial_error(mesh, scene.analytic.center,
                                              scene.analytic.radius)
    if args.checkpoint:
        model, _, _ = TrainedModel.load(args.checkpoint)
        field = model.field()
        points, directions = hair_samples(scene, args.samples, seed)
        report['orientation_deviation'] = orientation_deviation(
                field, project_to_surface(field, points), directions)
        report['hair_samples'] = len(points)

    if args.output:
        File.write_json(args.output, report)
    else:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) +
                         '\n')
    for name, value in sorted(report.items()):
        logger.info('%s: %s' % (name, value))
