"""Extract the reconstructed surface as an OBJ mesh."""

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
from headrecon.logging import Logging
from headrecon.mesh import export_obj, marching_cubes, sample_grid
from headrecon.recon import TrainedModel

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('checkpoint', help='checkpoint file')
    parser.add_argument('output', help='OBJ file to write')
    parser.add_argument('--resolution', type=int, default=64,
                        help='grid resolution per axis; default: '
                             '%(default)s')
    parser.add_argument('--bounds', type=float, nargs=2, default=(-1.2, 1.2),
                        metavar=('LOW', 'HIGH'),
                        help='grid bounds on every axis; default: '
                             '%(default)s')


def _run_(args: argparse.Namespace) -> None:
    model, _, _ = TrainedModel.load(args.checkpoint)
    grid = sample_grid(model.field(), tuple(args.bounds), args.resolution,
                       threads=args.threads)
    mesh = marching_cubes(grid)
    if mesh.is_empty:
        logger.warning('%s: the field has no surface in the bounds; '
                       'writing an empty mesh' % args.checkpoint)
    export_obj(mesh, args.output)
    logger.info('wrote %s: %d vertices, %d triangles' % (
        args.output, len(mesh.vertices), len(mesh.triangles)))
    Command.write_effective_config(
            os.path.dirname(os.path.abspath(args.output)), args,
            checkpoint=args.checkpoint, resolution=args.resolution,
            bounds=list(args.bounds))
