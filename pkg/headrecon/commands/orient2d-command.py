"""Detect 2D hair orientation maps.

Writes ``orientation.ori`` and an HSV visualization ``orientation.png``
next to each view's image and records the maps in the scene manifest.
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

from headrecon.command import Command
from headrecon.config import GaborBank
from headrecon.file import File
from headrecon.hair import detect_orientation, orientation_to_rgb, \
    write_orientation_map
from headrecon.logging import Logging
from headrecon.scene import MANIFEST, Scene

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('scene', help='scene directory')
    parser.add_argument('--orientations', type=int,
                        help='number of filter orientations')
    parser.add_argument('--sigma-u', type=float,
                        help='filter width across the stripes (pixels)')
    parser.add_argument('--sigma-v', type=float,
                        help='filter width along the stripes (pixels)')
    parser.add_argument('--wavelength', type=float,
                        help='stripe wavelength (pixels)')
    parser.add_argument('--half-width', type=int,
                        help='kernel half-width (pixels)')


def _run_(args: argparse.Namespace) -> None:
    bank = Command.config(args, GaborBank, n_orientations=args.orientations,
                          sigma_u=args.sigma_u, sigma_v=args.sigma_v,
                          wavelength=args.wavelength,
                          half_width=args.half_width)
    scene = Scene.load(args.scene)
    manifest = File.read_json(os.path.join(args.scene, MANIFEST))
    entries = manifest['views']
    for index, (view, entry) in enumerate(zip(scene.views, entries)):
        prefix = os.path.dirname(entry['image'])
        name = os.path.join(prefix, 'orientation.ori')
        orientation = detect_orientation(view.image, view.hair_mask, bank)
        write_orientation_map(os.path.join(args.scene, name), orientation)
        File.write_png(os.path.join(args.scene, prefix, 'orientation.png'),
                       orientation_to_rgb(orientation))
        entry['orientation'] = name
        logger.info('view %d: %d oriented pixels' % (
            index, int(orientation.valid.sum())))
    Scene.update_manifest(args.scene, views=entries)
    Command.write_effective_config(args.scene, args, bank)
