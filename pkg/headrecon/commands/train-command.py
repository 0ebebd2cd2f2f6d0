"""Reconstruct the head from a scene.

Runs the staged optimization and writes ``history.csv``, periodic
checkpoints and ``final.json`` into OUTDIR.
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
import time

from headrecon.command import Command
from headrecon.config import ABLATIONS, PRIORS, NetworkConfig, TrainConfig
from headrecon.logging import Logging
from headrecon.recon import TrainedModel, train
from headrecon.scene import Scene

logger = Logging.get_logger(__name__)

NETWORKS = {'default': NetworkConfig, 'desk': NetworkConfig.desk,
            'full': NetworkConfig.full_scale}


def _add_arguments_(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('scene', help='scene directory')
    parser.add_argument('outdir', help='output directory')
    parser.add_argument('--epochs', type=int, help='number of epochs')
    parser.add_argument('--head-rays', type=int,
                        help='rays sampled per view in the head mask')
    parser.add_argument('--hair-rays', type=int,
                        help='rays sampled per view in the hair mask')
    parser.add_argument('--lr', type=float, help='Adam learning rate')
    parser.add_argument('--ablation', choices=ABLATIONS,
                        help='switch off loss terms')
    parser.add_argument('--checkpoint-every', type=int,
                        help='write a checkpoint every N epochs')
    parser.add_argument('--alpha-doubling', action='store_true',
                        default=None,
                        help='double the mask sharpness at each stage')
    parser.add_argument('--freeze-cameras', dest='optimize_cameras',
                        action='store_false', default=None,
                        help="don't optimize the camera corrections")
    parser.add_argument('--prior-order', metavar='ORDER',
                        help="comma-separated order in which the %s "
                             "priors join the loss, or 'all' to start them "
                             "together" % '/'.join(PRIORS))
    parser.add_argument('--network', choices=sorted(NETWORKS),
                        help='network size preset')
    parser.add_argument('--resume', metavar='CHECKPOINT',
                        help='continue from a checkpoint')


def _run_(args: argparse.Namespace) -> None:
    config = Command.config(
            args, TrainConfig, **{
                'schedule.epochs': args.epochs, 'head_rays': args.head_rays,
                'hair_rays': args.hair_rays, 'lr': args.lr,
                'ablation': args.ablation,
                'checkpoint_every': args.checkpoint_every,
                'alpha_doubling': args.alpha_doubling,
                'optimize_cameras': args.optimize_cameras,
                'prior_order': args.prior_order,
                'network': NETWORKS[args.network]().to_dict()
                if args.network else None,
                'seed': args.seed,
                'deterministic': True if args.deterministic else None,
                'threads': args.threads})
    scene = Scene.load(args.scene)

    model, adam, start_epoch = None, None, 0
    if args.resume:
        model, adam, extra = TrainedModel.load(args.resume)
        start_epoch = int(extra.get('epoch', 0))
        logger.info('resuming from %s at epoch %d' % (args.resume,
                                                      start_epoch))

    Command.write_effective_config(args.outdir, args, config,
                                   resume=args.resume)
    start = time.time()
    result = train(scene, config, model=model, adam=adam,
                   outdir=args.outdir, start_epoch=start_epoch)
    logger.info('trained %d epochs in %d ms' % (
        len(result.history), (time.time() - start) * 1000))
    if result.history:
        logger.info('final total loss %.6g' % result.history[-1]['total'])
