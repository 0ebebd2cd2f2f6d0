"""Multi-layer perceptrons evaluated through the autodiff primitives.

The same `MlpNetwork` drives the signed distance network F, the appearance
network g and the semantic network s. Parameters live outside the network
(in a flat vector segment), so a network definition is immutable and
shareable.
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

from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from . import autodiff as ad
from .exception import ShapeMismatch
from .logging import Logging

logger = Logging.get_logger(__name__)

# skip connections are scaled so that their variance matches the layer
# they join
SKIP_SCALE = 1.0 / np.sqrt(2.0)

HEADS = ('linear', 'sigmoid', 'softmax', 'tanh')


@dataclass(frozen=True)
class MlpNetwork:
    """Fully connected network with softplus hidden layers.

    Attributes:
        in_width: Input width.
        hidden: Hidden layer widths.
        out_width: Output width.
        skips: Linear-layer indices at which the input is concatenated to
            the layer input.
        beta: Softplus sharpness ``s``.
        heads: Output activations as (activation, count) pairs covering the
            output in order.
        name: Parameter segment prefix.
    """

    in_width: int
    hidden: tuple[int, ...]
    out_width: int
    skips: tuple[int, ...] = ()
    beta: float = 100.0
    heads: tuple[tuple[str, int], ...] = ()
    name: str = 'mlp'
    _shapes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'hidden', tuple(int(w) for w in
                                                 self.hidden))
        object.__setattr__(self, 'skips', tuple(sorted(self.skips)))
        heads = tuple((str(a), int(n)) for a, n in self.heads) or \
            (('linear', self.out_width),)
        if sum(n for _, n in heads) != self.out_width or \
                any(a not in HEADS for a, _ in heads):
            raise ShapeMismatch('invalid heads %r for output width %d' % (
                heads, self.out_width))
        object.__setattr__(self, 'heads', heads)

        widths = (self.in_width,) + self.hidden + (self.out_width,)
        if any(s <= 0 or s >= len(widths) - 1 for s in self.skips):
            raise ShapeMismatch('skip indices %r are out of range' % (
                self.skips,))
        shapes = []
        for layer in range(len(widths) - 1):
            fan_in = widths[layer] + (self.in_width if layer in self.skips
                                      else 0)
            shapes.append(((fan_in, widths[layer + 1]),
                           (widths[layer + 1],)))
        object.__setattr__(self, '_shapes', tuple(shapes))

    @property
    def n_layers(self) -> int:
        return len(self._shapes)

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        """Return the (segment name, shape) pairs of the parameters."""

        result = []
        for layer, (w_shape, b_shape) in enumerate(self._shapes):
            result.append(('%s.W%d' % (self.name, layer), w_shape))
            result.append(('%s.b%d' % (self.name, layer), b_shape))
        return result

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())

    def init_params(self, rng: np.random.Generator, *,
                    geometric: bool = False, radius: float = 0.75,
                    zero: bool = False) -> np.ndarray:
        """Initialize the parameters as a flat array.

        With ``geometric`` set the network starts out approximating the
        signed distance ``|x| - radius`` of a sphere: hidden weights are
        drawn with standard deviation sqrt(2/fan_out) and the last
        layer with mean sqrt(pi/fan_in), deviation 1e-4 and bias
        ``-radius``.
        """

        arrays = []
        for layer, (w_shape, b_shape) in enumerate(self._shapes):
            fan_in, fan_out = w_shape
            last = layer == self.n_layers - 1
            if zero:
                weights, bias = np.zeros(w_shape), np.zeros(b_shape)
            elif geometric and last:
                weights = rng.normal(np.sqrt(np.pi) / np.sqrt(fan_in), 1e-4,
                                     w_shape)
                bias = np.full(b_shape, -radius)
            elif geometric:
                weights = rng.normal(0.0, np.sqrt(2.0) / np.sqrt(fan_out),
                                     w_shape)
                bias = np.zeros(b_shape)
            else:
                weights = rng.normal(0.0, np.sqrt(1.0 / fan_in), w_shape)
                bias = np.zeros(b_shape)
            arrays += [weights.reshape(-1), bias.reshape(-1)]
        return np.concatenate(arrays)

    def _weights(self, params: ad.Operand, layer: int) -> tuple[Any, Any]:
        offset = 0
        for index, (w_shape, b_shape) in enumerate(self._shapes):
            w_size, b_size = int(np.prod(w_shape)), int(np.prod(b_shape))
            if index == layer:
                weights = params[offset:offset + w_size]
                bias = params[offset + w_size:offset + w_size + b_size]
                if isinstance(weights, ad.Var):
                    return weights.reshape(w_shape), bias
                return np.reshape(weights, w_shape), np.asarray(bias)
            offset += w_size + b_size
        raise ShapeMismatch('no layer %d' % layer)

    def _head(self, h: ad.Operand) -> ad.Operand:
        parts, start = [], 0
        for activation, count in self.heads:
            part = h[:, start:start + count] if len(self.heads) > 1 else h
            if activation == 'sigmoid':
                part = ad.sigmoid(part)
            elif activation == 'softmax':
                part = ad.softmax(part, axis=-1)
            elif activation == 'tanh':
                part = ad.tanh(part)
            parts.append(part)
            start += count
        return parts[0] if len(parts) == 1 else ad.concatenate(parts, axis=-1)

    def forward(self, params: ad.Operand, x: ad.Operand, *,
                gradient: bool = False, raw: bool = False) -> \
            Union[ad.Operand, tuple[ad.Operand, ad.Operand]]:
        """Evaluate the network on a batch.

        Args:
            params: This network's flat parameters (array or recorded).
            x: Inputs, shape (N, in_width) (array or recorded).
            gradient: Also return the gradient of output 0 with respect to
                the input, shape (N, in_width), propagated as forward-mode
                tangents through the same primitives (so it is itself
                differentiable with respect to the parameters).
            raw: Skip the head activations.

        Returns:
            The (N, out_width) output, or an (output, gradient) tuple.
        """

        n = ad.value_of(x).shape[0]
        identity = np.eye(self.in_width)
        h = x
        tangents: Optional[list] = None
        if gradient:
            tangents = [np.broadcast_to(identity[k], (n, self.in_width))
                        for k in range(self.in_width)]

        for layer in range(self.n_layers):
            if layer in self.skips:
                h = ad.concatenate([h, x], axis=-1) * SKIP_SCALE
                if tangents is not None:
                    tangents = [ad.concatenate(
                            [t, np.broadcast_to(identity[k],
                                                (n, self.in_width))],
                            axis=-1) * SKIP_SCALE
                        for k, t in enumerate(tangents)]
            weights, bias = self._weights(params, layer)
            last = layer == self.n_layers - 1
            if tangents is not None:
                column = weights[:, 0:1] if last else weights
                tangents = [ad.matmul(t, column) for t in tangents]
            h = ad.matmul(h, weights) + bias
            if not last:
                if tangents is not None:
                    slope = ad.sigmoid(h * self.beta)
                    tangents = [slope * t for t in tangents]
                h = ad.softplus(h, self.beta)

        out = h if raw else self._head(h)
        if tangents is None:
            return out
        return out, ad.concatenate(tangents, axis=-1)

    def to_dict(self) -> dict[str, Any]:
        return {'in_width': self.in_width, 'hidden': list(self.hidden),
                'out_width': self.out_width, 'skips': list(self.skips),
                'beta': self.beta,
                'heads': [[a, n] for a, n in self.heads], 'name': self.name}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'MlpNetwork':
        return cls(in_width=int(data['in_width']),
                   hidden=tuple(data['hidden']),
                   out_width=int(data['out_width']),
                   skips=tuple(data.get('skips', ())),
                   beta=float(data.get('beta', 100.0)),
                   heads=tuple(tuple(h) for h in data.get('heads', ())),
                   name=data.get('name', 'mlp'))


def mlp_forward(net: MlpNetwork, params: ad.Operand, x: ad.Operand) -> \
        ad.Operand:
    """Evaluate ``net`` on one input vector or a batch of them.

    Raises:
        ShapeMismatch: If the input width or parameter count is wrong.
    """

    vx = ad.value_of(x)
    single = vx.ndim == 1
    if vx.shape[-1] != net.in_width:
        raise ShapeMismatch('network expects input width %d, not %d' % (
            net.in_width, vx.shape[-1]))
    if ad.value_of(params).size != net.n_params:
        raise ShapeMismatch('network expects %d parameters, not %d' % (
            net.n_params, ad.value_of(params).size))
    out = net.forward(params, x.reshape((1, -1)) if single and isinstance(
            x, ad.Var) else np.reshape(vx, (1, -1)) if single else x)
    return out[0] if single else out
