"""Generate a synthetic head scene.

Renders a sphere "face" with a striped torus "hair" cap from cameras on a
ring and writes the scene directory: per-view images, head and hair
masks, label maps and orientation maps, the cameras, the 2D landmarks, the
ground-truth mesh and (unless disabled) a synthetic morphable model.
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

from headrecon.command import Command
from headrecon.config import SyntheticConfig
from headrecon.logging import Logging
from headrecon.synthetic import generate_synthetic_scene

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('outdir', help='scene directory to create')
    parser.add_argument('--views', type=int, help='number of views')
    parser.add_argument('--width', type=int, help='image width')
    parser.add_argument('--height', type=int, help='image height')
    parser.add_argument('--stripes', type=int,
                        help='number of hair texture stripes')
    parser.add_argument('--sphere-only', action='store_true', default=None,
                        help='render a unit sphere without hair')
    parser.add_argument('--no-morphable', dest='morphable',
                        action='store_false', default=None,
                        help="don't write a morphable model")


def _run_(args: argparse.Namespace) -> None:
    config = Command.config(args, SyntheticConfig, views=args.views,
                            width=args.width, height=args.height,
                            stripes=args.stripes,
                            sphere_only=args.sphere_only,
                            morphable=args.morphable)
    seed = 0 if args.seed is None else args.seed
    generate_synthetic_scene(config, seed, args.outdir, threads=args.threads)
    Command.write_effective_config(args.outdir, args, config)
