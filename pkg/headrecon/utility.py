"""Utilities."""

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

import os

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from .logging import Logging

logger = Logging.get_logger(__name__)

T = TypeVar('T')


class Utility:
    """Utility class."""

    @staticmethod
    def nice_dict(dct: dict, *, prefix: str = '',
                  style: Optional[str] = None) -> str:
        """Format a dictionary as a "nice" string.

        These are the supported styles::

            bare    : ('',  ', ', str,  ' ',  str,  '' )
            csv     : ('',  ', ', str,  '=',  str,  '' )
            default : ('{', ', ', repr, ': ', repr, '}')

        Floats are shown with 6 significant digits in the bare and csv
        styles.
        """

        def value_str(v):
            return '%.6g' % v if isinstance(v, float) else str(v)

        ldelim, isep, kfunc, kvsep, vfunc, rdelim = {
            'bare': ('', ', ', str, ' ', value_str, ''),
            'csv': ('', ', ', str, '=', value_str, ''),
        }.get(style, ('{', ', ', repr, ': ', repr, '}'))
        return prefix + ldelim + isep.join(
                [f'{kfunc(k)}{kvsep}{vfunc(v)}' for k, v in dct.items()]) + \
            rdelim

    @staticmethod
    def nice_list(lst: Iterable, *, style: Optional[str] = None,
                  limit: Optional[int] = None) -> str:
        """Format a list as a "nice" string.

        These are the supported styles::

            argparse : ('',  ', ', repr, '')
            bare     : ('',  ', ', str,  '')
            default  : ('[', ', ', str,  ']')

        Returns:
            The nicely formatted list, with ``...`` before the right delimiter
            if not all items are returned.
        """

        # it might be dict_keys or something like that
        if not isinstance(lst, list):
            lst = list(lst)
        ldelim, sep, func, rdelim = {
            'argparse': ('', ', ', repr, ''),
            'bare': ('', ', ', str, ''),
        }.get(style, ('[', ', ', str, ']'))
        term = sep + '...' if limit is not None and len(lst) > limit else ''
        return ldelim + sep.join(
                [func(i) for i in lst[:limit]]) + term + rdelim

    @staticmethod
    def available_threads() -> int:
        return os.cpu_count() or 1

    @staticmethod
    def chunk_ranges(count: int, chunks: int) -> list[tuple[int, int]]:
        """Split ``range(count)`` into at most ``chunks`` contiguous
        (start, stop) ranges of near-equal size."""

        chunks = max(1, min(chunks, count))
        bounds = [count * i // chunks for i in range(chunks + 1)]
        return [(bounds[i], bounds[i + 1]) for i in range(chunks)
                if bounds[i + 1] > bounds[i]]

    @staticmethod
    def map_chunks(func: Callable[[int, int], T], count: int, *,
                   threads: int = 1) -> list[T]:
        """Call ``func(start, stop)`` for contiguous chunks of
        ``range(count)`` and return the results in chunk order.

        With more than one thread the chunks run on a thread pool. The
        result order never depends on completion order.
        """

        ranges = Utility.chunk_ranges(count, threads)
        if threads <= 1 or len(ranges) <= 1:
            return [func(start, stop) for start, stop in ranges]
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(func, start, stop)
                       for start, stop in ranges]
            return [future.result() for future in futures]
