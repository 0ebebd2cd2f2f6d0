"""Check the loss gradients against central differences.

Builds a tiny synthetic scene with small networks, evaluates every loss
term on one ray batch and compares its analytic gradient with central
differences. Any term whose maximum relative error exceeds the tolerance
is reported as an error.
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
import sys

import numpy as np

from headrecon.command import Command
from headrecon.config import TERMS, NetworkConfig, SyntheticConfig, \
    TrainConfig
from headrecon.file import File
from headrecon.logging import Logging
from headrecon.recon import Reconstruction, gradient_report
from headrecon.synthetic import generate_synthetic_scene

logger = Logging.get_logger(__name__)


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--views', type=int, default=2,
                        help='number of views; default: %(default)s')
    parser.add_argument('--size', type=int, default=16,
                        help='image width and height; default: %(default)s')
    parser.add_argument('--rays', type=int, default=8,
                        help='head and hair rays; default: %(default)s')
    parser.add_argument('--terms', nargs='+', choices=TERMS, default=TERMS,
                        help='terms to check; default: all')
    parser.add_argument('--step', type=float, default=1e-5,
                        help='central difference step; default: '
                             '%(default)s')
    parser.add_argument('--tolerance', type=float, default=1e-4,
                        help='maximum relative error; default: %(default)s')
    parser.add_argument('--perturb-gradient', type=float, default=1.0,
                        metavar='SCALE',
                        help='scale the analytic gradient before comparing '
                             '(to demonstrate a failing check); default: '
                             '%(default)s')
    parser.add_argument('--report', help='JSON report file')


def _run_(args: argparse.Namespace) -> None:
    seed = 0 if args.seed is None else args.seed
    scene = generate_synthetic_scene(
            SyntheticConfig(views=args.views, width=args.size,
                            height=args.size, morphable=False), seed,
            threads=args.threads)
    scene.proxy_mesh = scene.ground_truth
    config = TrainConfig(network=NetworkConfig.toy(), head_rays=args.rays,
                         hair_rays=args.rays, proxy_samples=16,
                         eikonal_samples=16, seed=seed, threads=1)
    recon = Reconstruction(scene, config)
    params = recon.model.params
    # move the camera corrections off zero
    start, stop = params.span('camera.')
    values = np.array(params.values)
    values[start:stop] = np.random.default_rng(seed).normal(
            0.0, 1e-3, stop - start)
    params = params.with_values(values)
    recon.model = recon.model.with_params(params)
    logger.info('checking %d parameters' % len(params))

    report = gradient_report(recon, params, terms=args.terms, h=args.step,
                             perturb=args.perturb_gradient)
    for name, error in report.items():
        status = 'ok' if error <= args.tolerance else 'FAIL'
        sys.stdout.write('%-12s %.3e %s\n' % (name, error, status))
    failed = [name for name, error in report.items()
              if error > args.tolerance]
    if failed:
        logger.error('gradient check failed for %s (tolerance %g)' % (
            ', '.join(failed), args.tolerance))

    if args.report:
        File.write_json(args.report, {
            'parameters': len(params), 'tolerance': args.tolerance,
            'perturb_gradient': args.perturb_gradient, 'errors': report,
            'failed': failed})
        Command.write_effective_config(
                os.path.dirname(os.path.abspath(args.report)), args, config)
