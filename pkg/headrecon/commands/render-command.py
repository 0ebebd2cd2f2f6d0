"""Render a trained model.

Writes ``render.png`` (colors), ``depth.png`` (depth normalized over the
hits, black for misses) and ``hit.png`` into OUTDIR.
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

import numpy as np

from headrecon.command import Command
from headrecon.config import TrainConfig, TracerConfig
from headrecon.exception import OutOfBounds
from headrecon.file import File
from headrecon.geometry import load_cameras
from headrecon.logging import Logging
from headrecon.recon import TrainedModel, render_view

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('checkpoint', help='checkpoint file')
    parser.add_argument('outdir', help='output directory')
    parser.add_argument('--cameras', help='camera file; default: the '
                                          "checkpoint's corrected cameras")
    parser.add_argument('--view', type=int, default=0,
                        help='camera index; default: %(default)s')


def _run_(args: argparse.Namespace) -> None:
    model, _, extra = TrainedModel.load(args.checkpoint)
    cameras = load_cameras(File.require(args.cameras, what='camera file')) \
        if args.cameras else model.corrected_cameras()
    if not 0 <= args.view < len(cameras):
        raise OutOfBounds('camera index %d is out of range 0..%d' % (
            args.view, len(cameras) - 1))
    tracer = TrainConfig.from_dict(extra['config']).tracer \
        if 'config' in extra else TracerConfig()

    result = render_view(model, cameras[args.view], tracer,
                         threads=args.threads)
    depth = np.zeros(result.depth.shape)
    if np.any(result.hit):
        near, far = (float(f(result.depth[result.hit])) for f in
                     (np.min, np.max))
        depth[result.hit] = (far - result.depth[result.hit]) / max(
                far - near, 1e-12) * 0.8 + 0.2
    File.write_png(os.path.join(args.outdir, 'render.png'), result.image)
    File.write_png(os.path.join(args.outdir, 'depth.png'), depth)
    File.write_mask(os.path.join(args.outdir, 'hit.png'), result.hit)
    logger.info('rendered view %d: %d hits, %d tracer iterations' % (
        args.view, int(result.hit.sum()), int(result.iterations.sum())))
    Command.write_effective_config(args.outdir, args,
                                   checkpoint=args.checkpoint,
                                   cameras=args.cameras, view=args.view)
