"""Plugin support."""

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
import importlib
import inspect
import os
import sys

from types import ModuleType

from typing import Any, Optional

from .exception import PluginException
from .logging import Logging

logger = Logging.get_logger(__name__)


class Plugin:
    """Plugin base class.

    A plugin is a python file called ``<name>-<type>.py`` (for example
    ``train-command.py``) that defines top-level functions. The functions
    a plugin type understands are listed by `is_known_method_name`.
    """

    # only .register() and .filter() access the plugin registry
    __plugins: dict[tuple[str, str], tuple[type['Plugin'], ModuleType]] = {}

    @classmethod
    def is_known_method_name(cls, name: str) -> bool:
        return name in {'_add_arguments_'}

    @classmethod
    def import_all(cls, *, plugindirs: Optional[list[str]] = None) -> None:
        """Import all plugins from the supplied plugin directories and the
        package plugin directory.

        Args:
            plugindirs: The plugin directories.
        """

        dirs, sys_path_save = cls.push_plugindirs(plugindirs=plugindirs)

        for dir_ in dirs:
            logger.info('scanning %s' % dir_)

            try:
                files = sorted(os.listdir(dir_))
            except OSError as e:
                logger.error("can't scan %s: %s" % (dir_, e))
                continue

            for file in files:
                if cls.file_matches(file):
                    path = os.path.join(dir_, file)
                    if module := cls.import_one(file, path=path):
                        logger.debug('imported %s from %s' % (
                            module.__name__, module.__file__))

        cls.pop_plugindirs(sys_path_save)

    @classmethod
    def push_plugindirs(cls, *, plugindirs: Optional[list[str]] = None) -> \
            tuple[list[str], list[str]]:

        # package and plugins directories, e.g. headrecon/commands
        package_dir = os.path.dirname(__file__)
        plugins_subdir = cls.__module__.split('.')[-1] + 's'

        # supplied plugin dirs are searched before the package plugins dir
        dirs = list(plugindirs or [])
        dirs.append(os.path.join(package_dir, plugins_subdir))

        # save sys.path and prefix it with the plugin search directories
        sys_path_save = sys.path[:]
        sys.path = dirs + sys_path_save

        return dirs, sys_path_save

    @classmethod
    def pop_plugindirs(cls, sys_path_save: list[str]) -> list[str]:
        sys.path = sys_path_save[:]
        return sys.path

    @classmethod
    def file_matches(cls, file: str) -> bool:
        # ignore hidden files, __init__.py and non python files
        if file.startswith('.') or file == '__init__.py' or \
                not file.endswith('.py'):
            return False

        # other file names have to match the pattern
        match = Logging.name_pattern.match(file)
        if not match:
            logger.warning('unexpected non-matching file name %s' % file)
        return bool(match)

    @classmethod
    def import_one(cls, file: str, *, path: Optional[str] = None) -> \
            Optional[ModuleType]:
        assert file.endswith('.py')
        name = file[:-3]
        path = path or file
        logger.debug('importing %s from %s' % (name, path))

        # noinspection PyBroadException
        try:
            # built-in plugins live in the plugins package
            package = cls.__module__ + 's'
            try:
                module = importlib.import_module('.%s' % name, package)
            except ModuleNotFoundError:
                # external plugins become top-level modules
                module = importlib.import_module(name)
        except Exception as e:
            logger.warning('failed to import %s from %s: %s' % (name, path,
                                                                 e))
            return None

        routines = {n for n, _ in inspect.getmembers(module,
                                                     inspect.isroutine)}
        plugin_name, plugin_type = cls.get_name_and_type(
                cls.get_canonical_name(name))
        plugin_class = cls.get_plugin_class(plugin_type)
        assert plugin_class is not None, \
            "unsupported plugin type %s, so can't look up its plugin " \
            "class" % plugin_type

        unknown = [n for n in routines if n.startswith('_') and
                   n.endswith('_') and n[1:-1] and
                   not plugin_class.is_known_method_name(n)]
        if unknown:
            logger.warning('%s: ignored unknown plugin functions %s' % (
                name, ', '.join(sorted(unknown))))

        cls.register((plugin_name, plugin_type), plugin_class, module)
        return module

    # only .register() and .filter() access the plugin registry
    @classmethod
    def register(cls, name_and_type: tuple[str, str],
                 plugin_class: type['Plugin'], module: ModuleType) -> None:
        """Register a plugin module."""

        if cls.__plugins.get(name_and_type) == (plugin_class, module):
            return
        if name_and_type in cls.__plugins:
            logger.warning('duplicate plugin; ignoring already-registered '
                           '%s %s' % name_and_type)

        cls.__plugins[name_and_type] = (plugin_class, module)
        logger.info('registered %s %s = %s (%s)' % (
            name_and_type + (plugin_class.__name__, module.__name__)))

    # only .register() and .filter() access the plugin registry
    @classmethod
    def filter(cls, name: Optional[str] = None) -> \
            list[tuple[str, type['Plugin'], ModuleType]]:
        result = []

        for (plugin_name, plugin_type), (plugin_class, module) \
                in cls.__plugins.items():
            # discard if the type doesn't match the class, e.g. 'command'
            if plugin_type != cls.__name__.lower():
                continue

            # discard if filtering on name, and the name doesn't match
            if name is not None and plugin_name != name:
                continue

            result.append((plugin_name, plugin_class, module))

        return sorted(result, key=lambda item: item[0])

    @classmethod
    def add_arguments(cls, subparsers: Any) -> None:
        """Add a sub-parser for each plugin of this type, and give the plugin
        the opportunity to add its own arguments to it.

        Raises:
            PluginException: If a plugin fails to add its arguments.
        """

        for name, class_, module in cls.filter():
            doc = (module.__doc__ or '').strip()
            parser = subparsers.add_parser(
                    name, help=doc.splitlines()[0] if doc else None,
                    description=doc or None,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
            parser.set_defaults(command=name)
            try:
                # noinspection PyProtectedMember
                class_._add_arguments(parser, module=module)
            except argparse.ArgumentError as e:
                raise PluginException('%s %s: invalid arguments: %s' % (
                    name, cls.__name__.lower(), e))

    @classmethod
    def _add_arguments(cls, arg_parser: argparse.ArgumentParser, *,
                       module: ModuleType) -> None:
        """Call the module's ``_add_arguments_(parser)`` function, if it has
        one."""

        routines = dict(inspect.getmembers(module, inspect.isroutine))
        if '_add_arguments_' in routines:
            routines['_add_arguments_'](arg_parser)

    @classmethod
    def create(cls, name: str, **kwargs) -> Optional['Plugin']:
        """Create an instance of the named plugin of the type of the class on
        which the method was invoked, e.g. ``Command.create('train')``.

        Returns:
            The plugin instance, or ``None`` if no plugin with this name has
            been registered.
        """

        result = cls.filter(name)
        if len(result) != 1:
            return None
        _, ctor, module = result[-1]
        return ctor(name, module=module, **kwargs)

    @classmethod
    def items(cls, *, exclude: Optional[list[str]] = None) -> \
            tuple[str, ...]:
        """Get the names of the plugins of the type of the class on which
        the method was invoked."""

        exclude = exclude or []
        return tuple(name for name, _, _ in cls.filter()
                     if name not in exclude)

    @classmethod
    def get_plugin_class(cls, plugin_type: str) -> Optional[type['Plugin']]:
        def get_subclasses(plugin_class) -> dict[str, type['Plugin']]:
            result = {plugin_class.__name__: plugin_class}
            for subclass in plugin_class.__subclasses__():
                result |= get_subclasses(subclass)
            return result

        return get_subclasses(cls).get(plugin_type.capitalize(), None)

    @classmethod
    def get_canonical_name(cls, name: str) -> str:
        """Convert a module or file name to an all lower-case ``name-type``
        canonical name, e.g. ``fit-proxy-command``."""

        name = os.path.splitext(name.split(os.sep)[-1])[0]
        if not (match := Logging.name_pattern.match(name)):
            raise PluginException('%s is not a valid plugin name' % name)
        return '%s-%s' % (match['name'].lower(), match['type'].lower())

    @classmethod
    def get_name_and_type(cls, canonical_name: str) -> tuple[str, str]:
        assert '-' in canonical_name, \
            'invalid canonical plugin name %s; did you get it from ' \
            '%s.get_canonical_name()?' % (canonical_name, cls.__name__)
        plugin_name, plugin_type = canonical_name.rsplit('-', 1)
        return plugin_name, plugin_type

    def __init__(self, name: str, *, module: ModuleType, **kwargs):
        assert not kwargs, 'unexpected keyword arguments: %s' % kwargs
        self._name = name
        self._module = module

    @property
    def module(self) -> ModuleType:
        return self._module

    def __str__(self):
        """Return the plugin name, e.g. ``train``."""
        return self._name

    def __repr__(self):
        return "%s(%s)" % (type(self).__name__, self)
