"""File utilities.

Images are 8-bit PNG files read and written with Pillow. Masks are stored
as 0/255 grayscale and label maps as grayscale values 0..6. JSON files are
written with sorted keys so that identical data gives identical bytes.
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

import json
import os
import os.path

from typing import Any, Optional

import numpy as np

from PIL import Image

from .exception import IoError, ParseError
from .logging import Logging

logger = Logging.get_logger(__name__)

LABELS = ('background', 'face', 'hair', 'eyes', 'eyebrows', 'nose', 'lips')


class File:
    """File class, providing file utilities."""

    @classmethod
    def find(cls, path: str, *, dirs: Optional[list[str]] = None) -> \
            Optional[str]:
        """Find a file.

        Any ``~user`` or ``$variable`` strings in the file path and directory
        names are expanded. An absolute path is returned as is if it exists.

        Args:
            path: The file path.
            dirs: The directories to search, in order (default: the current
                directory).

        Returns:
            The full path of the located file, or ``None`` if not found.
        """

        path = os.path.expanduser(os.path.expandvars(path))
        if os.path.isabs(path):
            return path if os.path.exists(path) else None

        for dir_ in dirs or [os.curdir]:
            candidate = os.path.join(
                    os.path.expanduser(os.path.expandvars(dir_)), path)
            logger.debug(f'    trying {candidate!r}')
            if os.path.exists(candidate):
                return os.path.realpath(candidate)
        return None

    @classmethod
    def require(cls, path: str, *, dirs: Optional[list[str]] = None,
                what: str = 'file') -> str:
        """As `find`, but raise `IoError` naming the path if not found."""

        found = cls.find(path, dirs=dirs)
        if found is None:
            where = ' in %s' % ', '.join(dirs) if dirs else ''
            raise IoError('%s %s not found%s' % (what, path, where), path)
        return found

    @staticmethod
    def makedirs_for(path: str) -> None:
        dirname = os.path.dirname(path)
        if dirname:
            os.makedirs(dirname, exist_ok=True)

    @classmethod
    def read_json(cls, path: str) -> Any:
        try:
            with open(path) as fd:
                return json.load(fd)
        except OSError as e:
            raise IoError("can't read %s: %s" % (path, e), path)
        except json.JSONDecodeError as e:
            raise ParseError('%s: %s' % (path, e.msg), e.lineno)

    @classmethod
    def write_json(cls, path: str, data: Any) -> None:
        try:
            cls.makedirs_for(path)
            with open(path, 'w') as fd:
                json.dump(data, fd, indent=2, sort_keys=True)
                fd.write('\n')
        except OSError as e:
            raise IoError("can't write %s: %s" % (path, e), path)

    @classmethod
    def read_png(cls, path: str) -> np.ndarray:
        """Read an RGB image as floats in [0, 1], shape (H, W, 3)."""

        try:
            with Image.open(path) as image:
                return np.asarray(image.convert('RGB'), dtype=float) / 255.0
        except OSError as e:
            raise IoError("can't read %s: %s" % (path, e), path)

    @classmethod
    def write_png(cls, path: str, image: np.ndarray) -> None:
        """Write an (H, W, 3) or (H, W) image of floats in [0, 1]."""

        data = np.round(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) *
                        255.0).astype(np.uint8)
        cls._write_bytes(path, data)

    @classmethod
    def _write_bytes(cls, path: str, data: np.ndarray) -> None:
        try:
            cls.makedirs_for(path)
            Image.fromarray(data).save(path, format='PNG')
        except OSError as e:
            raise IoError("can't write %s: %s" % (path, e), path)

    @classmethod
    def _read_gray(cls, path: str) -> np.ndarray:
        try:
            with Image.open(path) as image:
                return np.asarray(image.convert('L'))
        except OSError as e:
            raise IoError("can't read %s: %s" % (path, e), path)

    @classmethod
    def read_mask(cls, path: str) -> np.ndarray:
        return cls._read_gray(path) >= 128

    @classmethod
    def write_mask(cls, path: str, mask: np.ndarray) -> None:
        cls._write_bytes(path, np.where(np.asarray(mask, dtype=bool), 255,
                                        0).astype(np.uint8))

    @classmethod
    def read_labels(cls, path: str) -> np.ndarray:
        labels = cls._read_gray(path).astype(int)
        if labels.max(initial=0) >= len(LABELS):
            raise ParseError('%s: label values must be 0..%d, not %d' % (
                path, len(LABELS) - 1, labels.max()))
        return labels

    @classmethod
    def write_labels(cls, path: str, labels: np.ndarray) -> None:
        cls._write_bytes(path, np.asarray(labels, dtype=np.uint8))

    @classmethod
    def read_landmarks(cls, path: str) -> list[np.ndarray]:
        """Read per-view landmark lists; ``null`` entries become NaN."""

        data = cls.read_json(path)
        try:
            return [np.array([[np.nan, np.nan] if p is None else
                              [float(p[0]), float(p[1])] for p in view],
                             dtype=float).reshape(-1, 2) for view in data]
        except (TypeError, IndexError, ValueError) as e:
            raise ParseError('%s: invalid landmarks: %s' % (path, e))

    @classmethod
    def write_landmarks(cls, path: str, landmarks: list[np.ndarray]) -> None:
        cls.write_json(path, [[None if np.any(np.isnan(p)) else
                               [float(p[0]), float(p[1])] for p in view]
                              for view in landmarks])


read_png = File.read_png
write_png = File.write_png
read_mask = File.read_mask
write_mask = File.write_mask
read_labels = File.read_labels
write_labels = File.write_labels
