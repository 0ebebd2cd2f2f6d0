"""Command (sub-command) support.

A command plugin is a ``<name>-command.py`` file in the ``commands``
directory (or in a ``--plugindir`` directory) that defines::

    def _add_arguments_(parser: argparse.ArgumentParser) -> None: ...
    def _run_(args: argparse.Namespace) -> None: ...

``_run_()`` reports failure by raising a `HeadReconException`.
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

from typing import Any, Optional, Type, TypeVar

from .config import ConfigBase
from .exception import PluginException
from .file import File
from .logging import Logging
from .plugin import Plugin

logger = Logging.get_logger(__name__)

C = TypeVar('C', bound=ConfigBase)

EFFECTIVE_CONFIG = 'effective_config.json'


class Command(Plugin):
    """Command base class."""

    @classmethod
    def is_known_method_name(cls, name: str) -> bool:
        return super().is_known_method_name(name) or name in {'_run_'}

    def run(self, args: argparse.Namespace) -> None:
        run = getattr(self.module, '_run_', None)
        if run is None:
            raise PluginException('%s command has no _run_() function' %
                                  self)
        run(args)

    @staticmethod
    def config(args: argparse.Namespace, cls: Type[C],
               **overrides: Any) -> C:
        """Build a configuration: built-in defaults, then the ``--config``
        file, then the overrides whose values aren't ``None``."""

        data: dict[str, Any] = {}
        if getattr(args, 'config', None):
            data = File.read_json(File.require(args.config,
                                               what='config file'))
            if not isinstance(data, dict):
                raise PluginException('%s: config file must hold a JSON '
                                      'object' % args.config)
        for key, value in overrides.items():
            if value is None:
                continue
            # dotted keys address nested sections, e.g. 'schedule.epochs'
            section = data
            *parents, last = key.split('.')
            for parent in parents:
                section = section.setdefault(parent, {})
            section[last] = value
        return cls.from_dict(data)

    @staticmethod
    def write_effective_config(outdir: str, args: argparse.Namespace,
                               config: Optional[ConfigBase] = None,
                               **options: Any) -> None:
        """Echo the command, the global options, the configuration and
        any command ``options`` into ``outdir``."""

        data: dict[str, Any] = {
            'command': getattr(args, 'command', None),
            'seed': getattr(args, 'seed', None),
            'deterministic': getattr(args, 'deterministic', False),
            'threads': getattr(args, 'threads', None)}
        if config is not None:
            data['config'] = config.to_dict()
        if options:
            data['options'] = options
        File.write_json(os.path.join(outdir, EFFECTIVE_CONFIG), data)
        logger.info('wrote %s' % os.path.join(outdir, EFFECTIVE_CONFIG))
