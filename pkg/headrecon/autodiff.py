"""Reverse-mode automatic differentiation.

A `Tape` records primitive operations on `Var` nodes. Each node holds a
numpy array and each primitive acts elementwise (with numpy broadcasting),
so a node is a batch of scalar nodes that share one recorded operation.

Every primitive also accepts plain arrays, in which case nothing is
recorded and a plain array is returned. This lets one piece of loss code
run either recorded (to get gradients) or unrecorded (for inference and
for finite-difference checks).

Example::

    params = ParamVector.from_segments([('theta', np.array([3.0]))])
    value, gradient = value_and_grad(lambda p: p[0] * p[0], params)
    # value == 9.0, gradient.values == [6.0]
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

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional, Sequence, Union

import numpy as np

from scipy import special

from .exception import AutodiffException, NonFiniteLoss, ShapeMismatch
from .logging import Logging

logger = Logging.get_logger(__name__)

Vjp = Callable[[np.ndarray], np.ndarray]


class Tape:
    """Wengert list of recorded operations.

    Nodes are appended in evaluation order, so the list is always
    topologically ordered and the backward pass is a single reverse sweep.
    """

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._parents: list[tuple[tuple[int, Vjp], ...]] = []

    def __len__(self) -> int:
        return len(self._values)

    def variable(self, value: Any) -> 'Var':
        """Create an input (leaf) node."""
        return Var(self, value)

    def record(self, value: np.ndarray,
               parents: tuple[tuple[int, Vjp], ...]) -> int:
        self._values.append(value)
        self._parents.append(parents)
        return len(self._values) - 1

    def gradient(self, output: 'Var', wrt: Sequence['Var']) -> \
            list[np.ndarray]:
        """Return d(sum of output)/d(node) for each of the ``wrt`` nodes.

        Nodes that the output doesn't depend on get exact zeros.
        """

        if output.tape is not self:
            raise AutodiffException('output was recorded on another tape')

        adjoints: list[Optional[np.ndarray]] = [None] * len(self._values)
        adjoints[output.index] = np.ones_like(output.value)
        for index in range(output.index, -1, -1):
            adjoint = adjoints[index]
            if adjoint is None:
                continue
            for parent, vjp in self._parents[index]:
                contribution = vjp(adjoint)
                if adjoints[parent] is None:
                    adjoints[parent] = contribution
                else:
                    adjoints[parent] = adjoints[parent] + contribution

        return [np.zeros_like(var.value) if adjoints[var.index] is None
                else np.asarray(adjoints[var.index], dtype=float).reshape(
                    var.value.shape) for var in wrt]


class Var:
    """Recorded array node."""

    # numpy defers binary operators with a Var operand to the Var methods
    __array_ufunc__ = None

    __slots__ = ('tape', 'value', 'index')

    def __init__(self, tape: Tape, value: Any,
                 parents: tuple[tuple[int, Vjp], ...] = ()):
        self.tape = tape
        self.value = np.asarray(value, dtype=float)
        self.index = tape.record(self.value, parents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def T(self) -> 'Var':
        return transpose(self)

    def __len__(self) -> int:
        return len(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape) -> 'Var':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> 'Var':
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Var':
        return mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return 'Var(#%d, shape=%s)' % (self.index, self.value.shape)


Operand = Union[Var, np.ndarray, float, int]


def value_of(x: Operand) -> np.ndarray:
    """Return the numeric value of a node or array."""
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def is_recorded(*xs: Any) -> bool:
    return any(isinstance(x, Var) for x in xs)


def _tape_of(xs: Iterable[Any]) -> Optional[Tape]:
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise AutodiffException('operands were recorded on '
                                        'different tapes')
    return tape


def _apply(value: np.ndarray, operands: Sequence[Any],
           vjps: Sequence[Vjp]) -> Union[Var, np.ndarray]:
    tape = _tape_of(operands)
    if tape is None:
        return value
    parents = tuple((x.index, vjp) for x, vjp in zip(operands, vjps)
                    if isinstance(x, Var))
    return Var(tape, value, parents)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast adjoint back down to an operand's shape."""

    g = np.asarray(g, dtype=float)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# binary arithmetic

def add(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    return _apply(va + vb, (a, b), (
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(g, vb.shape)))


def sub(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    return _apply(va - vb, (a, b), (
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(-g, vb.shape)))


def mul(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    return _apply(va * vb, (a, b), (
        lambda g: _unbroadcast(g * vb, va.shape),
        lambda g: _unbroadcast(g * va, vb.shape)))


def div(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    return _apply(va / vb, (a, b), (
        lambda g: _unbroadcast(g / vb, va.shape),
        lambda g: _unbroadcast(-g * va / (vb * vb), vb.shape)))


def neg(x: Operand):
    vx = value_of(x)
    return _apply(-vx, (x,), (lambda g: -g,))


def power(x: Operand, exponent: float):
    """Raise to a constant power."""
    vx = value_of(x)
    p = float(exponent)
    return _apply(vx ** p, (x,), (lambda g: g * p * vx ** (p - 1.0),))


def maximum(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    take_a = va >= vb
    return _apply(np.maximum(va, vb), (a, b), (
        lambda g: _unbroadcast(np.where(take_a, g, 0.0), va.shape),
        lambda g: _unbroadcast(np.where(take_a, 0.0, g), vb.shape)))


def minimum(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)
    take_a = va <= vb
    return _apply(np.minimum(va, vb), (a, b), (
        lambda g: _unbroadcast(np.where(take_a, g, 0.0), va.shape),
        lambda g: _unbroadcast(np.where(take_a, 0.0, g), vb.shape)))


def where(condition: np.ndarray, a: Operand, b: Operand):
    """Elementwise select; ``condition`` is a constant."""
    cond = np.asarray(condition, dtype=bool)
    va, vb = value_of(a), value_of(b)
    return _apply(np.where(cond, va, vb), (a, b), (
        lambda g: _unbroadcast(np.where(cond, g, 0.0), va.shape),
        lambda g: _unbroadcast(np.where(cond, 0.0, g), vb.shape)))


# unary functions

def exp(x: Operand):
    y = np.exp(value_of(x))
    return _apply(y, (x,), (lambda g: g * y,))


def log(x: Operand):
    vx = value_of(x)
    return _apply(np.log(vx), (x,), (lambda g: g / vx,))


def sin(x: Operand):
    vx = value_of(x)
    return _apply(np.sin(vx), (x,), (lambda g: g * np.cos(vx),))


def cos(x: Operand):
    vx = value_of(x)
    return _apply(np.cos(vx), (x,), (lambda g: -g * np.sin(vx),))


def sqrt(x: Operand):
    y = np.sqrt(value_of(x))
    return _apply(y, (x,), (lambda g: 0.5 * g / y,))


def tanh(x: Operand):
    y = np.tanh(value_of(x))
    return _apply(y, (x,), (lambda g: g * (1.0 - y * y),))


def sigmoid(x: Operand):
    y = special.expit(value_of(x))
    return _apply(y, (x,), (lambda g: g * y * (1.0 - y),))


def softplus(x: Operand, beta: float = 1.0):
    """Smooth ReLU ``log(1 + exp(beta x)) / beta``; its derivative is
    ``sigmoid(beta x)`` and its second derivative at 0 is ``beta / 4``."""

    vx = value_of(x)
    y = np.logaddexp(0.0, beta * vx) / beta
    return _apply(y, (x,), (lambda g: g * special.expit(beta * vx),))


def abs_(x: Operand):
    vx = value_of(x)
    return _apply(np.abs(vx), (x,), (lambda g: g * np.sign(vx),))


# linear algebra and reductions

def matmul(a: Operand, b: Operand):
    va, vb = value_of(a), value_of(b)

    if va.ndim == 1 and vb.ndim == 1:
        return _apply(va @ vb, (a, b), (lambda g: g * vb, lambda g: g * va))

    def vjp_a(g):
        if vb.ndim == 1:
            return _unbroadcast(g[..., None] * vb, va.shape)
        if va.ndim == 1:
            return _unbroadcast((vb @ g[..., None])[..., 0], va.shape)
        return _unbroadcast(g @ np.swapaxes(vb, -1, -2), va.shape)

    def vjp_b(g):
        if vb.ndim == 1:
            return _unbroadcast(
                    (np.swapaxes(va, -1, -2) @ g[..., None])[..., 0],
                    vb.shape)
        if va.ndim == 1:
            return _unbroadcast(va[:, None] * g[..., None, :], vb.shape)
        return _unbroadcast(np.swapaxes(va, -1, -2) @ g, vb.shape)

    return _apply(va @ vb, (a, b), (vjp_a, vjp_b))


def sparse_matmul(matrix: Any, x: Operand):
    """Multiply by a constant (scipy) sparse matrix."""
    vx = value_of(x)
    return _apply(np.asarray(matrix @ vx), (x,),
                  (lambda g: np.asarray(matrix.T @ g),))


def sum_(x: Operand, axis=None, keepdims: bool = False):
    vx = value_of(x)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, vx.shape)

    return _apply(np.sum(vx, axis=axis, keepdims=keepdims), (x,), (vjp,))


def mean(x: Operand, axis=None, keepdims: bool = False):
    vx = value_of(x)
    count = vx.size if axis is None else np.prod(
            [vx.shape[a] for a in np.atleast_1d(axis)])
    return sum_(x, axis=axis, keepdims=keepdims) / float(count)


def dot(a: Operand, b: Operand, axis: int = -1):
    return sum_(mul(a, b), axis=axis)


def norm(x: Operand, axis: int = -1, keepdims: bool = False):
    return sqrt(sum_(x * x, axis=axis, keepdims=keepdims))


def cross(a: Operand, b: Operand):
    """Cross product along the last axis."""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx],
                 axis=-1)


# shape manipulation

def getitem(x: Operand, key: Any):
    vx = value_of(x)
    if isinstance(key, np.ndarray) and key.dtype == bool:
        key = np.nonzero(key)

    def vjp(g):
        result = np.zeros_like(vx)
        np.add.at(result, key, g)
        return result

    return _apply(vx[key], (x,), (vjp,))


def reshape(x: Operand, shape: Sequence[int]):
    vx = value_of(x)
    return _apply(vx.reshape(shape), (x,),
                  (lambda g: np.reshape(g, vx.shape),))


def transpose(x: Operand, axes: Optional[Sequence[int]] = None):
    vx = value_of(x)
    axes_ = tuple(reversed(range(vx.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes_))
    return _apply(np.transpose(vx, axes_), (x,),
                  (lambda g: np.transpose(g, inverse),))


def swapaxes(x: Operand, axis1: int, axis2: int):
    vx = value_of(x)
    return _apply(np.swapaxes(vx, axis1, axis2), (x,),
                  (lambda g: np.swapaxes(g, axis1, axis2),))


def concatenate(xs: Sequence[Operand], axis: int = 0):
    values = [value_of(x) for x in xs]
    out = np.concatenate(values, axis=axis)
    axis_ = axis % out.ndim
    bounds = np.cumsum([0] + [v.shape[axis_] for v in values])

    def make_vjp(start, stop):
        index = (slice(None),) * axis_ + (slice(start, stop),)
        return lambda g: g[index]

    return _apply(out, xs, [make_vjp(bounds[i], bounds[i + 1])
                            for i in range(len(xs))])


def stack(xs: Sequence[Operand], axis: int = 0):
    out = np.stack([value_of(x) for x in xs], axis=axis)
    axis_ = axis % out.ndim
    return _apply(out, xs, [lambda g, i=i: np.take(g, i, axis=axis_)
                            for i in range(len(xs))])


def log_softmax(x: Operand, axis: int = -1):
    shift = np.max(value_of(x), axis=axis, keepdims=True)
    shifted = x - shift
    return shifted - log(sum_(exp(shifted), axis=axis, keepdims=True))


def softmax(x: Operand, axis: int = -1):
    return exp(log_softmax(x, axis=axis))


def sym_eigvec(matrices: Operand, index: np.ndarray, sign: np.ndarray):
    """Select one eigenvector per symmetric 3x3 matrix.

    Args:
        matrices: Batch of symmetric matrices, shape (N, 3, 3).
        index: Per-matrix eigenvector index into the ascending order of
            `numpy.linalg.eigh`.
        sign: Per-matrix sign (+1 or -1) applied to the eigenvector.

    Returns:
        The (N, 3) selected eigenvectors. The backward pass uses the
        first-order perturbation of a simple eigenvector.
    """

    vm = value_of(matrices)
    index = np.asarray(index, dtype=int)
    sign = np.asarray(sign, dtype=float)
    rows = np.arange(vm.shape[0])
    eigenvalues, eigenvectors = np.linalg.eigh(vm)
    selected = eigenvectors[rows, :, index]
    out = selected * sign[:, None]

    def vjp(g):
        gs = g * sign[:, None]
        projections = np.einsum('nij,ni->nj', eigenvectors, gs)
        gaps = eigenvalues[rows, index][:, None] - eigenvalues
        safe = np.abs(gaps) > 1e-12
        coefficients = np.where(
                safe, projections / np.where(safe, gaps, 1.0), 0.0)
        coefficients[rows, index] = 0.0
        combined = np.einsum('nij,nj->ni', eigenvectors, coefficients)
        result = combined[:, :, None] * selected[:, None, :]
        return 0.5 * (result + np.swapaxes(result, 1, 2))

    return _apply(out, (matrices,), (vjp,))


@dataclass(frozen=True)
class Segment:
    """Named slice of a `ParamVector`."""

    name: str
    offset: int
    length: int
    shape: tuple[int, ...]


class ParamVector:
    """Flat vector of 64-bit parameters with a named segment layout."""

    def __init__(self, values: Any, layout: Sequence[Segment]):
        values = np.array(values, dtype=float).reshape(-1)
        offset = 0
        for segment in layout:
            if segment.offset != offset or \
                    int(np.prod(segment.shape)) != segment.length:
                raise ShapeMismatch('segment %s is inconsistent with its '
                                    'layout' % segment.name)
            offset += segment.length
        if offset != values.size:
            raise ShapeMismatch('segments cover %d values but the vector '
                                'has %d' % (offset, values.size))
        if not np.all(np.isfinite(values)):
            raise NonFiniteLoss('parameter vector has non-finite values')
        self._values = values
        self._values.setflags(write=False)
        self._layout = tuple(layout)
        self._index = {segment.name: segment for segment in self._layout}

    @classmethod
    def from_segments(cls, named: Iterable[tuple[str, Any]]) -> \
            'ParamVector':
        layout, arrays, offset = [], [], 0
        for name, array in named:
            array = np.asarray(array, dtype=float)
            layout.append(Segment(name, offset, array.size, array.shape))
            arrays.append(array.reshape(-1))
            offset += array.size
        values = np.concatenate(arrays) if arrays else np.zeros(0)
        return cls(values, layout)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def layout(self) -> tuple[Segment, ...]:
        return self._layout

    def __len__(self) -> int:
        return self._values.size

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def segment(self, name: str) -> Segment:
        if name not in self._index:
            raise ShapeMismatch('no parameter segment named %s' % name)
        return self._index[name]

    def names(self, prefix: str = '') -> list[str]:
        return [s.name for s in self._layout if s.name.startswith(prefix)]

    def span(self, prefix: str) -> tuple[int, int]:
        """Return the (start, stop) range covered by segments whose names
        start with ``prefix``; these must be contiguous."""

        segments = [s for s in self._layout if s.name.startswith(prefix)]
        if not segments:
            raise ShapeMismatch('no parameter segments match %s' % prefix)
        start = segments[0].offset
        stop = segments[-1].offset + segments[-1].length
        if stop - start != sum(s.length for s in segments):
            raise ShapeMismatch('segments %s* aren\'t contiguous' % prefix)
        return start, stop

    def view(self, flat: Operand, name: str):
        """Extract a named segment (reshaped) from a flat vector, which may
        be recorded."""

        segment = self.segment(name)
        part = flat[segment.offset:segment.offset + segment.length]
        return part.reshape(segment.shape) if isinstance(part, Var) else \
            np.reshape(part, segment.shape)

    def get(self, name: str) -> np.ndarray:
        return self.view(self._values, name)

    def with_values(self, values: Any) -> 'ParamVector':
        return ParamVector(values, self._layout)

    def zeros_like(self) -> 'ParamVector':
        return ParamVector(np.zeros_like(self._values), self._layout)

    def layout_dict(self) -> list[dict[str, Any]]:
        return [{'name': s.name, 'offset': s.offset, 'len': s.length,
                 'shape': list(s.shape)} for s in self._layout]

    @classmethod
    def from_layout_dict(cls, values: Any, layout: Sequence[dict]) -> \
            'ParamVector':
        return cls(values, [Segment(d['name'], int(d['offset']),
                                    int(d['len']),
                                    tuple(d.get('shape', [d['len']])))
                            for d in layout])

    def __repr__(self):
        return 'ParamVector(%d values, %d segments)' % (
            len(self), len(self._layout))


LossFunction = Callable[[Operand], Operand]


def value_and_grad(loss_fn: LossFunction, params: ParamVector) -> \
        tuple[float, ParamVector]:
    """Evaluate ``loss_fn`` on a recorded copy of the parameters and return
    its value and gradient.

    Raises:
        NonFiniteLoss: If the loss value is NaN or infinite.
    """

    tape = Tape()
    theta = tape.variable(params.values)
    loss = loss_fn(theta)
    value = float(np.sum(value_of(loss)))
    if not np.isfinite(value):
        raise NonFiniteLoss('loss value is %r' % value)
    if isinstance(loss, Var):
        if loss.size != 1:
            raise ShapeMismatch('loss must be a scalar, not shape %s' % (
                loss.shape,))
        gradient = tape.gradient(loss, [theta])[0]
    else:
        gradient = np.zeros_like(params.values)
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteLoss('loss gradient has non-finite values')
    return value, params.with_values(gradient)


def grad(loss_fn: LossFunction, params: ParamVector) -> ParamVector:
    """Return the gradient of ``loss_fn`` at ``params``."""
    return value_and_grad(loss_fn, params)[1]


def finite_diff_check(loss_fn: LossFunction, params: ParamVector,
                      h: float = 1e-5, *,
                      indices: Optional[Sequence[int]] = None,
                      atol: float = 1e-10,
                      gradient: Optional[np.ndarray] = None) -> float:
    """Compare `grad` against central differences.

    The relative error of each coordinate is ``|a - n| / max(|a|, |n|,
    floor)`` where ``a`` is the analytic and ``n`` the numerical
    derivative. ``floor`` is ``atol`` plus 1e-3 times the largest analytic
    component, so coordinates that are negligible relative to the rest of
    the gradient are compared on that scale.

    Args:
        loss_fn: Deterministic loss function of the flat parameter vector.
        params: Point at which to check.
        h: Central difference step.
        indices: Coordinates to check (default: all).
        atol: Absolute floor of the denominator.
        gradient: Analytic gradient to check instead of `grad`'s.

    Returns:
        The maximum relative error (0 when both gradients are exactly 0).
    """

    analytic = grad(loss_fn, params).values if gradient is None else \
        np.asarray(gradient, dtype=float)
    base = np.array(params.values)
    indices = range(base.size) if indices is None else indices
    floor = atol + 1e-3 * float(np.max(np.abs(analytic), initial=0.0))

    worst = 0.0
    for i in indices:
        plus, minus = base.copy(), base.copy()
        plus[i] += h
        minus[i] -= h
        numeric = (float(np.sum(value_of(loss_fn(plus)))) -
                   float(np.sum(value_of(loss_fn(minus))))) / (2.0 * h)
        a = float(analytic[i])
        error = abs(a - numeric)
        if error == 0.0:
            continue
        worst = max(worst, error / max(abs(a), abs(numeric), floor))
    return worst
