"""Exceptions.

The class name of each leaf exception is its error code; the CLI reports
errors as ``<code>: <message>``.
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

from typing import Optional


class HeadReconException(Exception):
    """Base ``headrecon`` exception."""

    def __init__(self, text: str):
        """Store the supplied text."""
        super().__init__(text)
        self._text = text

    def __str__(self):
        """Return the supplied text."""
        return self._text

    @property
    def code(self) -> str:
        return type(self).__name__


class GeometryException(HeadReconException):
    """Camera, ray or linear algebra exception."""


class PointBehindCamera(GeometryException):
    """Point has non-positive camera-space depth."""


class OutOfBounds(GeometryException):
    """Pixel or index lies outside the valid range."""


class NotSymmetric(GeometryException):
    """Matrix passed to the symmetric eigensolver isn't symmetric."""


class InvalidCamera(GeometryException):
    """Camera violates its rotation or intrinsics invariants."""


class AutodiffException(HeadReconException):
    """Differentiation or optimizer exception."""


class NonFiniteLoss(AutodiffException):
    """Loss value is NaN or infinite."""


class ShapeMismatch(AutodiffException):
    """Array shapes are inconsistent."""


class SdfException(HeadReconException):
    """Signed distance field exception."""


class VanishingGradient(SdfException):
    """Field gradient is (numerically) zero."""


class UmbilicPoint(SdfException):
    """Principal curvatures coincide so the direction is undefined."""


class TracerException(HeadReconException):
    """Ray tracing exception."""


class TangentialRay(TracerException):
    """Ray is tangent to the surface at the intersection."""


class MorphableModelException(HeadReconException):
    """Morphable model or proxy fitting exception."""


class EmptyMask(MorphableModelException):
    """Face mask has no pixels."""


class CountMismatch(MorphableModelException):
    """Landmark count doesn't match the model."""


class ZeroSigma(MorphableModelException):
    """Model standard deviation is zero."""


class NotUnit(MorphableModelException):
    """Vector isn't of unit length."""


class DivergedEnergy(MorphableModelException):
    """Proxy fitting energy became non-finite."""


class HairException(HeadReconException):
    """Hair orientation exception."""


class SizeMismatch(HairException):
    """Image and mask sizes differ."""


class DegenerateProjection(HairException):
    """Direction projects to a zero-length image vector."""


class ReconException(HeadReconException):
    """Reconstruction exception."""


class EmptyBatch(ReconException):
    """Loss term was given an empty batch."""


class MaskTooSmall(ReconException):
    """Mask has fewer pixels than were requested."""


class DivergedLoss(ReconException):
    """Training loss became non-finite."""


class MeshException(HeadReconException):
    """Mesh exception."""


class FileException(HeadReconException):
    """File I/O exception."""


class IoError(FileException):
    """File can't be read or written."""

    def __init__(self, text: str, path: Optional[str] = None):
        super().__init__(text)
        self._path = path

    @property
    def path(self) -> Optional[str]:
        return self._path


class ParseError(FileException, MeshException):
    """File content can't be parsed."""

    def __init__(self, text: str, line: Optional[int] = None):
        """``line`` is the 1-based line number, if known."""

        super().__init__('line %d: %s' % (line, text) if line else text)
        self._line = line

    @property
    def line(self) -> Optional[int]:
        return self._line


class PluginException(HeadReconException):
    """Plugin instantiation exception."""
