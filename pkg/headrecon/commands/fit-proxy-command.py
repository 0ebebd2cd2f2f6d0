"""Fit the morphable face model to a scene.

Writes the proxy mesh (``proxy.obj``), the fitted cameras
(``proxy_cameras.json``) and a fit report (``proxy_fit.json``) into the
scene directory and adds the first two to its manifest.
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
import os.path
import time

from headrecon.command import Command
from headrecon.exception import IoError
from headrecon.file import File
from headrecon.geometry import save_cameras
from headrecon.logging import Logging
from headrecon.mesh import export_obj
from headrecon.morphable import PROXY_WEIGHTS, fit_proxy, load_model, \
    proxy_mesh
from headrecon.scene import Scene

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('scene', help='scene directory')
    parser.add_argument('--model', help='morphable model file; default: '
                                        "the scene's model")
    parser.add_argument('--max-iter', type=int, default=2000,
                        help='maximum number of iterations; default: '
                             '%(default)s')
    parser.add_argument('--tol', type=float, default=1e-6,
                        help='relative energy decrease at which to stop; '
                             'default: %(default)s')
    parser.add_argument('--weights', type=float, nargs=3,
                        default=PROXY_WEIGHTS,
                        metavar=('PHOTO', 'LANDMARK', 'REG'),
                        help='energy weights; default: %(default)s')


def _run_(args: argparse.Namespace) -> None:
    scene = Scene.load(args.scene)
    model_path = args.model or scene.model_path
    if model_path is None:
        raise IoError('scene %s names no morphable model; use --model' %
                      args.scene, scene.path('scene.json'))
    model = load_model(File.require(model_path, what='morphable model'))
    if scene.landmarks is None:
        path = scene.path('landmarks.json')
        raise IoError('landmarks file %s not found' % path, path)

    start = time.time()
    result = fit_proxy(model, [view.image for view in scene.views],
                       [view.face_mask for view in scene.views],
                       scene.landmarks, scene.cameras,
                       weights=tuple(args.weights), max_iter=args.max_iter,
                       tol=args.tol)
    logger.info('fitted proxy in %d ms' % ((time.time() - start) * 1000))

    export_obj(proxy_mesh(model, result.coeffs),
               os.path.join(args.scene, 'proxy.obj'))
    save_cameras(os.path.join(args.scene, 'proxy_cameras.json'),
                 result.cameras)
    File.write_json(os.path.join(args.scene, 'proxy_fit.json'), {
        'energy': result.energy, 'iterations': result.iterations,
        'trace': result.trace, 'coeffs': result.coeffs.to_dict(),
        'lighting': [light.gamma.tolist() for light in result.lighting]})
    Scene.update_manifest(args.scene, proxy_mesh='proxy.obj',
                          proxy_cameras='proxy_cameras.json')
    Command.write_effective_config(args.scene, args, model=model_path,
                                   weights=list(args.weights),
                                   max_iter=args.max_iter, tol=args.tol)
