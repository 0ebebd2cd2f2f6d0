"""Adam optimizer and checkpoint files."""

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
from typing import Any, Optional

import numpy as np

from .autodiff import ParamVector
from .exception import ParseError, ShapeMismatch
from .file import File
from .logging import Logging

logger = Logging.get_logger(__name__)


@dataclass
class AdamState:
    """Adam moment estimates; ``t`` counts the steps taken so far."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParamVector, **kwargs) -> 'AdamState':
        return cls(m=np.zeros(len(params)), v=np.zeros(len(params)),
                   **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {'m': self.m.tolist(), 'v': self.v.tolist(), 't': self.t,
                'lr': self.lr, 'beta1': self.beta1, 'beta2': self.beta2,
                'eps': self.eps}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'AdamState':
        return cls(m=np.asarray(data['m'], dtype=float),
                   v=np.asarray(data['v'], dtype=float),
                   t=int(data.get('t', 0)),
                   lr=float(data.get('lr', 1e-4)),
                   beta1=float(data.get('beta1', 0.9)),
                   beta2=float(data.get('beta2', 0.999)),
                   eps=float(data.get('eps', 1e-8)))


def adam_step(state: AdamState, params: ParamVector,
              grad: ParamVector) -> ParamVector:
    """Apply one bias-corrected Adam update and return the new parameters.

    The moments and step count in ``state`` are updated in place.

    Raises:
        ShapeMismatch: If the parameter, gradient and moment sizes differ.
    """

    g = grad.values
    if g.shape != params.values.shape or state.m.shape != g.shape:
        raise ShapeMismatch('Adam shapes differ: params %s, gradient %s, '
                            'moments %s' % (params.values.shape, g.shape,
                                            state.m.shape))

    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params.with_values(
            params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))


@dataclass
class Checkpoint:
    params: ParamVector
    adam: Optional[AdamState] = None
    extra: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: str, params: ParamVector,
                    adam: Optional[AdamState] = None, **extra) -> None:
    """Write a checkpoint as JSON.

    Floats are written with full (repr) precision, so a checkpoint reloads
    bit-for-bit.
    """

    data = {'segments': params.layout_dict(),
            'values': params.values.tolist()}
    if adam is not None:
        data['adam'] = adam.to_dict()
    data.update(extra)
    File.write_json(path, data)
    logger.info('wrote checkpoint %s' % path)


def load_checkpoint(path: str) -> Checkpoint:
    """Read a checkpoint written by `save_checkpoint`.

    Raises:
        IoError: If the file can't be read.
        ParseError: If it isn't JSON or lacks the parameters.
    """

    data = File.read_json(path)
    if not isinstance(data, dict):
        raise ParseError('invalid checkpoint %s: not an object' % path)
    try:
        params = ParamVector.from_layout_dict(data.pop('values'),
                                              data.pop('segments'))
        adam = AdamState.from_dict(data.pop('adam')) if 'adam' in data \
            else None
    except (KeyError, TypeError) as e:
        raise ParseError('invalid checkpoint %s: missing %s' % (path, e))
    return Checkpoint(params=params, adam=adam, extra=data)
