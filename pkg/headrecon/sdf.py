"""Signed distance fields.

Every field evaluates batches of points, shape (N, 3), and returns
distances of shape (N,) and gradients of shape (N, 3). Evaluation goes
through the autodiff primitives, so the points (and, for `NeuralSdf`, the
network parameters) may be recorded.

The Hessian is the central difference of the analytic gradient, so it is
recorded whenever the gradient is.
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

from dataclasses import dataclass, field as dataclass_field
from typing import Any, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .exception import SdfException, UmbilicPoint, VanishingGradient
from .logging import Logging
from .network import MlpNetwork

logger = Logging.get_logger(__name__)

HESSIAN_STEP = 1e-4
MIN_GRADIENT = 1e-9
UMBILIC_TOLERANCE = 1e-6


def _points(X: ad.Operand) -> ad.Operand:
    if ad.value_of(X).ndim == 1:
        return ad.reshape(X, (1, 3))
    return X


def _safe_normalize(w: ad.Operand) -> ad.Operand:
    length = ad.norm(w, axis=-1, keepdims=True)
    safe = ad.where(ad.value_of(length) > 1e-12, length, 1.0)
    return w / safe


def _unit(v: Sequence[float], what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    length = np.linalg.norm(v)
    if length < 1e-12:
        raise SdfException('%s must be nonzero' % what)
    return v / length


class SdfField:
    """Signed distance field base class."""

    kind = 'field'

    @property
    def feature_width(self) -> int:
        return 0

    def distance(self, X: ad.Operand, params: Optional[ad.Operand] = None) \
            -> ad.Operand:
        raise NotImplementedError

    def gradient(self, X: ad.Operand, params: Optional[ad.Operand] = None) \
            -> ad.Operand:
        raise NotImplementedError

    def distance_and_gradient(self, X: ad.Operand,
                              params: Optional[ad.Operand] = None) -> \
            tuple[ad.Operand, ad.Operand]:
        return self.distance(X, params), self.gradient(X, params)

    def features(self, X: ad.Operand, params: Optional[ad.Operand] = None) \
            -> ad.Operand:
        return np.zeros((ad.value_of(X).shape[0], 0))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.distance(np.asarray(X, dtype=float)))


@dataclass(frozen=True, eq=False)
class AnalyticSphere(SdfField):
    center: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))
    radius: float = 1.0

    kind = 'sphere'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, float))

    def distance(self, X, params=None):
        return ad.norm(_points(X) - self.center, axis=-1) - self.radius

    def gradient(self, X, params=None):
        return _safe_normalize(_points(X) - self.center)

    def to_dict(self):
        return {'type': self.kind, 'center': self.center.tolist(),
                'radius': self.radius}


@dataclass(frozen=True, eq=False)
class AnalyticTorus(SdfField):
    """Torus with major radius ``major`` around ``axis`` through
    ``center`` and tube radius ``minor``."""

    major: float = 1.0
    minor: float = 0.25
    center: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = dataclass_field(
            default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    kind = 'torus'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, float))
        object.__setattr__(self, 'axis', _unit(self.axis, 'torus axis'))

    def _tube_offset(self, X: ad.Operand) -> ad.Operand:
        """Vector from the nearest point of the tube's center circle."""

        p = _points(X) - self.center
        height = ad.matmul(p, self.axis)
        radial = p - ad.reshape(height, (-1, 1)) * self.axis
        rho = ad.norm(radial, axis=-1, keepdims=True)
        on_axis = ad.value_of(rho) <= 1e-12
        safe = ad.where(on_axis, 1.0, rho)
        # every point of the center circle is nearest to a point on the axis
        outward = ad.where(on_axis, self._perpendicular(), radial / safe)
        return radial - outward * self.major + \
            ad.reshape(height, (-1, 1)) * self.axis

    def _perpendicular(self) -> np.ndarray:
        e = np.eye(3)[np.argmin(np.abs(self.axis))]
        v = np.cross(self.axis, e)
        return v / np.linalg.norm(v)

    def distance(self, X, params=None):
        return ad.norm(self._tube_offset(X), axis=-1) - self.minor

    def gradient(self, X, params=None):
        return _safe_normalize(self._tube_offset(X))

    def to_dict(self):
        return {'type': self.kind, 'major': self.major, 'minor': self.minor,
                'center': self.center.tolist(), 'axis': self.axis.tolist()}


@dataclass(frozen=True, eq=False)
class AnalyticPlane(SdfField):
    """Half-space ``normal . x <= offset``."""

    normal: np.ndarray = dataclass_field(
            default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    offset: float = 0.0

    kind = 'plane'

    def __post_init__(self):
        object.__setattr__(self, 'normal', _unit(self.normal, 'plane normal'))

    def distance(self, X, params=None):
        return ad.matmul(_points(X), self.normal) - self.offset

    def gradient(self, X, params=None):
        n = ad.value_of(X).reshape(-1, 3).shape[0]
        return np.tile(self.normal, (n, 1))

    def to_dict(self):
        return {'type': self.kind, 'normal': self.normal.tolist(),
                'offset': self.offset}


@dataclass(frozen=True, eq=False)
class AnalyticCylinder(SdfField):
    """Infinite cylinder of ``radius`` around the line through ``point``
    along ``axis``."""

    point: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = dataclass_field(
            default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    radius: float = 1.0

    kind = 'cylinder'

    def __post_init__(self):
        object.__setattr__(self, 'point', np.asarray(self.point, float))
        object.__setattr__(self, 'axis', _unit(self.axis, 'cylinder axis'))

    def _radial(self, X: ad.Operand) -> ad.Operand:
        p = _points(X) - self.point
        return p - ad.reshape(ad.matmul(p, self.axis), (-1, 1)) * self.axis

    def distance(self, X, params=None):
        return ad.norm(self._radial(X), axis=-1) - self.radius

    def gradient(self, X, params=None):
        return _safe_normalize(self._radial(X))

    def to_dict(self):
        return {'type': self.kind, 'point': self.point.tolist(),
                'axis': self.axis.tolist(), 'radius': self.radius}


@dataclass(frozen=True, eq=False)
class AnalyticUnion(SdfField):
    """Pointwise minimum of its components."""

    components: tuple[SdfField, ...] = ()

    kind = 'union'

    def __post_init__(self):
        if not self.components:
            raise SdfException('union needs at least one component')
        object.__setattr__(self, 'components', tuple(self.components))

    def component_index(self, X: np.ndarray) -> np.ndarray:
        """Return the index of the nearest component at each point."""
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        values = np.stack([np.asarray(c.distance(X)) for c in
                           self.components])
        return np.argmin(values, axis=0)

    def _select(self, X, results, expand: bool):
        index = self.component_index(ad.value_of(X))
        out = results[0]
        for i, result in enumerate(results[1:], 1):
            chosen = index == i
            out = ad.where(chosen[:, None] if expand else chosen, result, out)
        return out

    def distance(self, X, params=None):
        return self._select(X, [c.distance(X) for c in self.components],
                            False)

    def gradient(self, X, params=None):
        return self._select(X, [c.gradient(X) for c in self.components], True)

    def to_dict(self):
        return {'type': self.kind,
                'components': [c.to_dict() for c in self.components]}


@dataclass(frozen=True, eq=False)
class NeuralSdf(SdfField):
    """Network-backed field: output 0 of ``network`` is the distance and
    the remaining outputs are the geometry feature vector ``z``.

    ``params`` holds the network's own parameters; the evaluation methods
    accept a (possibly recorded) replacement.
    """

    network: MlpNetwork
    params: np.ndarray

    kind = 'neural'

    def __post_init__(self):
        params = np.array(self.params, dtype=float).reshape(-1)
        if params.size != self.network.n_params:
            raise SdfException('network needs %d parameters, not %d' % (
                self.network.n_params, params.size))
        params.setflags(write=False)
        object.__setattr__(self, 'params', params)

    @property
    def feature_width(self) -> int:
        return self.network.out_width - 1

    def _params(self, params: Optional[ad.Operand]) -> ad.Operand:
        return self.params if params is None else params

    def evaluate(self, X: ad.Operand, params: Optional[ad.Operand] = None,
                 *, gradient: bool = False):
        """Return (distance, features) or (distance, features, gradient)."""

        X = _points(X)
        result = self.network.forward(self._params(params), X,
                                      gradient=gradient)
        out, grad = result if gradient else (result, None)
        distance, features = out[:, 0], out[:, 1:]
        return (distance, features) if grad is None else \
            (distance, features, grad)

    def distance(self, X, params=None):
        return self.evaluate(X, params)[0]

    def features(self, X, params=None):
        return self.evaluate(X, params)[1]

    def gradient(self, X, params=None):
        return self.evaluate(X, params, gradient=True)[2]

    def distance_and_gradient(self, X, params=None):
        distance, _, grad = self.evaluate(X, params, gradient=True)
        return distance, grad

    def with_params(self, params: np.ndarray) -> 'NeuralSdf':
        return NeuralSdf(self.network, params)

    def to_dict(self):
        return {'type': self.kind, 'network': self.network.to_dict(),
                'params': self.params.tolist()}


_FIELD_TYPES = {cls.kind: cls for cls in (
    AnalyticSphere, AnalyticTorus, AnalyticPlane, AnalyticCylinder,
    AnalyticUnion, NeuralSdf)}


def field_from_dict(data: dict[str, Any]) -> SdfField:
    """Build a field from its `SdfField.to_dict` form."""

    data = dict(data)
    kind = data.pop('type', None)
    if kind not in _FIELD_TYPES:
        raise SdfException('unknown field type %r' % kind)
    if kind == 'union':
        return AnalyticUnion(tuple(field_from_dict(c) for c in
                                   data['components']))
    if kind == 'neural':
        return NeuralSdf(MlpNetwork.from_dict(data['network']),
                         np.asarray(data['params'], dtype=float))
    return _FIELD_TYPES[kind](**data)


@dataclass(frozen=True)
class SurfaceSample:
    x: np.ndarray
    n: np.ndarray
    z: np.ndarray
    kappa1: float
    kappa2: float
    D: np.ndarray


def sdf_eval(field: SdfField, x: Sequence[float]) -> \
        tuple[float, np.ndarray]:
    """Return the signed distance and geometry feature at one point."""
    X = np.asarray(x, dtype=float).reshape(1, 3)
    return float(field.distance(X)[0]), np.asarray(field.features(X))[0]


def sdf_normal(field: SdfField, x: Sequence[float]) -> np.ndarray:
    """Return the unit normal (normalized gradient) at one point.

    Raises:
        VanishingGradient: If the gradient norm is <= 1e-9.
    """

    g = np.asarray(field.gradient(np.asarray(x, dtype=float).reshape(1, 3)))
    length = np.linalg.norm(g[0])
    if not length > MIN_GRADIENT:
        raise VanishingGradient('field gradient vanishes at %s' % (
            np.asarray(x).tolist(),))
    return g[0] / length


def hessian_batch(field: SdfField, X: ad.Operand,
                  params: Optional[ad.Operand] = None,
                  h: float = HESSIAN_STEP) -> ad.Operand:
    """Symmetrized central-difference Hessians, shape (N, 3, 3)."""

    X = _points(X)
    n = ad.value_of(X).shape[0]
    offsets = np.concatenate([np.tile(h * e, (n, 1)) for e in np.eye(3)])
    shifted = ad.concatenate([ad.concatenate([X, X, X]) + offsets,
                              ad.concatenate([X, X, X]) - offsets])
    g = field.gradient(shifted, params)
    rows = [(g[i * n:(i + 1) * n] - g[(3 + i) * n:(4 + i) * n]) / (2.0 * h)
            for i in range(3)]
    H = ad.stack(rows, axis=1)
    return (H + ad.swapaxes(H, 1, 2)) * 0.5


def sdf_hessian(field: SdfField, x: Sequence[float],
                h: float = HESSIAN_STEP) -> np.ndarray:
    if not h > 0:
        raise SdfException('Hessian step must be positive, not %g' % h)
    return np.asarray(hessian_batch(
            field, np.asarray(x, dtype=float).reshape(1, 3), h=h))[0]


def sign_normalize(D: np.ndarray) -> np.ndarray:
    """Flip rows so that each one's largest-magnitude component is
    positive."""

    D = np.asarray(D, dtype=float)
    rows = np.arange(D.shape[0])
    largest = D[rows, np.argmax(np.abs(D), axis=-1)]
    return D * np.where(largest < 0.0, -1.0, 1.0)[:, None]


@dataclass
class PrincipalDirections:
    """Batched principal directions; ``D`` and ``normal`` may be recorded.

    ``valid`` is false at umbilic points and where the gradient vanishes.
    """

    D: ad.Operand
    kappa_min: np.ndarray
    kappa_max: np.ndarray
    normal: ad.Operand
    valid: np.ndarray


def principal_directions_batch(field: SdfField, X: ad.Operand,
                               params: Optional[ad.Operand] = None,
                               h: float = HESSIAN_STEP) -> \
        PrincipalDirections:
    """Return the minimum-|curvature| tangent direction at each point.

    The normal eigenpair of the Hessian is deflated by adding ``s n n^T``
    to the tangent-projected Hessian ``P H P``, with ``s`` larger than
    every eigenvalue. The two remaining (tangent) eigenpairs are then
    always the two lowest in ascending order, whatever the curvatures.
    """

    X = _points(X)
    g = field.gradient(X, params)
    length = np.linalg.norm(ad.value_of(g), axis=-1)
    vanished = np.where(length > MIN_GRADIENT, 0.0, 1.0)
    normal = g / ad.reshape(ad.norm(g, axis=-1) + vanished, (-1, 1))

    H = hessian_batch(field, X, params, h)
    outer = ad.reshape(normal, (-1, 3, 1)) * ad.reshape(normal, (-1, 1, 3))
    P = np.eye(3) - outer
    Ht = ad.matmul(P, ad.matmul(H, P))
    Ht = (Ht + ad.swapaxes(Ht, 1, 2)) * 0.5
    spread = np.max(np.abs(np.linalg.eigvalsh(ad.value_of(Ht))), axis=-1)
    deflated = Ht + ad.reshape(1.0 + 2.0 * spread, (-1, 1, 1)) * outer

    eigenvalues, eigenvectors = np.linalg.eigh(ad.value_of(deflated))
    tangent = eigenvalues[:, :2]
    index = np.argmin(np.abs(tangent), axis=-1)
    rows = np.arange(len(index))
    kappa_min = tangent[rows, index]
    kappa_max = tangent[rows, 1 - index]

    selected = eigenvectors[rows, :, index]
    largest = selected[rows, np.argmax(np.abs(selected), axis=-1)]
    sign = np.where(largest < 0.0, -1.0, 1.0)
    D = ad.sym_eigvec(deflated, index, sign)

    valid = (length > MIN_GRADIENT) & \
        (np.abs(kappa_max - kappa_min) >= UMBILIC_TOLERANCE)
    return PrincipalDirections(D, kappa_min, kappa_max, normal, valid)


def principal_directions(field: SdfField, x: Sequence[float],
                         h: float = HESSIAN_STEP) -> SurfaceSample:
    """Return the surface sample at ``x``, whose ``D`` is the unit tangent
    direction of minimum absolute curvature (``kappa1``), sign-normalized
    so that its largest-magnitude component is positive.

    Raises:
        VanishingGradient: If the gradient vanishes at ``x``.
        UmbilicPoint: If the principal curvatures differ by < 1e-6.
    """

    X = np.asarray(x, dtype=float).reshape(1, 3)
    normal = sdf_normal(field, X[0])
    result = principal_directions_batch(field, X, h=h)
    if not result.valid[0]:
        raise UmbilicPoint('principal curvatures coincide at %s (%g, %g)' %
                           (X[0].tolist(), result.kappa_min[0],
                            result.kappa_max[0]))
    return SurfaceSample(x=X[0], n=normal,
                         z=np.asarray(field.features(X))[0],
                         kappa1=float(result.kappa_min[0]),
                         kappa2=float(result.kappa_max[0]),
                         D=np.asarray(result.D)[0])


def eikonal_residual(field: SdfField, points: ad.Operand,
                     params: Optional[ad.Operand] = None) -> ad.Operand:
    """Mean of ``(|grad f| - 1)^2`` over the points."""

    if ad.value_of(points).size == 0:
        raise SdfException('eikonal residual needs at least one point')
    g = field.gradient(points, params)
    return ad.mean((ad.norm(g, axis=-1) - 1.0) ** 2)


def eikonal_points(rng: np.random.Generator, count: int,
                   bounds: tuple[float, float] = (-1.0, 1.0),
                   surface_points: Optional[np.ndarray] = None,
                   sigma: float = 0.05) -> np.ndarray:
    """Sample points for the eikonal term: uniform in the bounding box,
    with half of them replaced by jittered surface points when any are
    given."""

    low, high = bounds
    points = rng.uniform(low, high, (count, 3))
    if surface_points is not None and len(surface_points) > 0:
        near = count // 2
        chosen = rng.integers(0, len(surface_points), near)
        points[:near] = np.asarray(surface_points)[chosen] + \
            rng.normal(0.0, sigma, (near, 3))
    return points


def tube_direction(torus: AnalyticTorus, X: np.ndarray) -> np.ndarray:
    """Sign-normalized unit toroidal (around-the-axis) direction."""

    p = np.asarray(X, dtype=float).reshape(-1, 3) - torus.center
    direction = np.cross(torus.axis, p)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return sign_normalize(direction)
