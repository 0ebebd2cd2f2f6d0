"""Head reconstruction tool.

Reconstructs a 3D head (face and hair) from calibrated multi-view images
as a neural signed distance field. In outline:

    gen-synthetic   write a synthetic scene
    fit-proxy       fit the morphable face model (proxy mesh and cameras)
    orient2d        detect 2D hair orientation maps
    train           run the staged optimization
    extract         extract the surface as a mesh
    render          render a trained model
    evaluate        compare a mesh with the ground truth
    gradcheck       check the loss gradients

Each command has its own options; use ``<command> --help`` to list them.
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
import cProfile
import logging
import pstats
import sys
import time

from typing import Optional

from . import version
from .command import Command
from .exception import HeadReconException
from .logging import Logging
from .utility import Utility

logger = Logging.get_logger('headrecon')

LOGLEVELS = ('none', 'fatal', 'error', 'warning', 'info', 'debug')

LOGLEVEL_MAP = {'none': 9999, 'fatal': logging.FATAL,
                'error': logging.ERROR, 'warning': logging.WARNING,
                'info': logging.INFO, 'debug': logging.DEBUG}


class ErrorHandler(logging.Handler):
    """Count error (and worse) records for use as the exit code."""

    def __init__(self):
        super().__init__(logging.ERROR)
        self.count = 0

    def emit(self, record):
        self.count += 1


# this is called without arguments when generating documentation
def get_argparser(argv: Optional[list[str]] = None,
                  opts: Optional[dict] = None) -> argparse.ArgumentParser:
    if argv is None:
        argv = sys.argv

    default_loglevel = 'warning'
    # warnings, errors and critical errors are always output
    default_loggername = ['headrecon']

    formatter_class = argparse.RawDescriptionHelpFormatter
    arg_parser = argparse.ArgumentParser(prog='headrecon',
                                         description=__doc__,
                                         fromfile_prefix_chars='@',
                                         formatter_class=formatter_class,
                                         add_help=False, allow_abbrev=False)

    arg_parser.add_argument("-P", "--plugindir", type=str, action="append",
                            default=[],
                            help="directories to search for command plugins")
    arg_parser.add_argument("-l", "--loglevel", choices=LOGLEVELS,
                            default=default_loglevel,
                            help="logging level; default: %r" %
                                 default_loglevel)
    arg_parser.add_argument("-L", "--loggername", type=str, action="append",
                            default=list(default_loggername),
                            help="module names for which to enable logging, "
                                 "e.g. 'tracer', 'recon' or 'train'; "
                                 "default: %r" % default_loggername)
    arg_parser.add_argument("--config", type=str,
                            help="JSON configuration file for the command")
    arg_parser.add_argument("--seed", type=int,
                            help="random seed; default: 0")
    arg_parser.add_argument("--threads", type=int,
                            help="worker threads; default: the number of "
                                 "cores (1 with --deterministic)")
    arg_parser.add_argument("--deterministic", action="store_true",
                            help="make results bitwise reproducible")
    arg_parser.add_argument("--profile", action="store_true",
                            help="enable profiling; statistics are written "
                                 "to stderr")

    # parse known arguments (all but command- and help-related arguments)
    args, argv_remaining = arg_parser.parse_known_args(argv[1:])

    logging.basicConfig(level=LOGLEVEL_MAP[args.loglevel])

    # for logger names to be honored, modules should define loggers like this:
    #   logger = Logging.get_logger(__name__)
    Logging.names = set(args.loggername)

    # import all commands and give them the opportunity to add arguments
    Command.import_all(plugindirs=args.plugindir)
    subparsers = arg_parser.add_subparsers(title='commands',
                                           dest='command', metavar='command')
    Command.add_arguments(subparsers)

    arg_parser.add_argument("-v", "--version", action="store_true",
                            help="show the version number and exit")
    arg_parser.add_argument("-h", "--help", action="help",
                            default=argparse.SUPPRESS,
                            help="show this help message and exit")

    if opts is not None:
        opts['argv_remaining'] = argv_remaining
        opts['namespace'] = args
    return arg_parser


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv

    # get argument parser and parse remaining arguments
    opts = {}
    arg_parser = get_argparser(argv=argv, opts=opts)
    args = arg_parser.parse_args(opts['argv_remaining'],
                                 namespace=opts['namespace'])

    error_handler = ErrorHandler()
    logger.root.addHandler(error_handler)

    try:
        # handle --version
        if args.version:
            sys.stderr.write('%s\n' % version())
            return 0
        if args.command is None:
            arg_parser.print_usage(sys.stderr)
            logger.error('no command given; choose from %s' %
                         Utility.nice_list(Command.items(), style='argparse'))
            return min(error_handler.count, 127)

        if args.deterministic:
            args.threads = 1
        elif args.threads is None:
            args.threads = Utility.available_threads()
        logger.debug('arguments %s' % args)

        profile = None
        if args.profile:
            profile = cProfile.Profile()
            profile.enable()

        command = Command.create(args.command)
        assert command is not None, 'command %s is not registered' % \
            args.command
        logger.info("running '%s'" % command)
        start = time.time()
        try:
            command.run(args)
            logger.info("ran     '%s' in %d ms" % (
                command, (time.time() - start) * 1000))
        except HeadReconException as e:
            logger.error('%s: %s' % (e.code, e))

        if profile is not None:
            profile.disable()
            stats = pstats.Stats(profile, stream=sys.stderr)
            stats.strip_dirs()
            stats.sort_stats('time')
            stats.print_stats(50)

        # some shells can't handle exit codes greater than 127
        logger.info('exit code %d' % min(error_handler.count, 127))
        return min(error_handler.count, 127)
    finally:
        logger.root.removeHandler(error_handler)
