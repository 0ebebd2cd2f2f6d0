"""Configuration dataclasses.

Each class has ``from_dict()`` and ``to_dict()``. ``from_dict()`` ignores
(with a warning) keys it doesn't know, so that a config file written by a
newer version still loads.
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

import dataclasses
import math

from dataclasses import dataclass, field
from typing import Any, Type, TypeVar

from .exception import HairException, ReconException, TracerException
from .logging import Logging
from .network import MlpNetwork

logger = Logging.get_logger(__name__)

C = TypeVar('C', bound='ConfigBase')

ABLATIONS = ('none', 'baseline', 'no-proxy', 'no-semantic',
             'semantic-without-hair', 'no-orientation')

TERMS = ('rgb', 'mask', 'eikonal', 'proxy', 'semantic', 'orientation')

PRIORS = ('proxy', 'semantic', 'orientation')


class ConfigBase:
    """Dictionary conversion shared by the configuration dataclasses."""

    # nested config classes, keyed by field name
    _nested: dict[str, Type['ConfigBase']] = {}

    @classmethod
    def from_dict(cls: Type[C], data: dict[str, Any]) -> C:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            logger.warning('%s: ignored unknown keys %s' % (
                cls.__name__, ', '.join(unknown)))
        kwargs = {}
        for name, value in data.items():
            if name not in names:
                continue
            if name in cls._nested and isinstance(value, dict):
                value = cls._nested[name].from_dict(value)
            elif isinstance(value, list):
                value = tuple(value)
            kwargs[name] = value
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self: C, **changes) -> C:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TracerConfig(ConfigBase):
    """Sphere tracer and soft occupancy constants (scene units)."""

    eps: float = 1e-4
    t_max: float = 4.0
    max_iter: int = 128
    occupancy_samples: int = 100
    secant_steps: int = 8
    newton_steps: int = 4
    golden_steps: int = 3

    def __post_init__(self):
        if min(self.eps, self.t_max, self.max_iter, self.occupancy_samples,
               self.secant_steps) <= 0 or \
                min(self.newton_steps, self.golden_steps) < 0:
            raise TracerException('tracer constants must be positive: %r' %
                                  (self,))


@dataclass(frozen=True)
class GaborBank(ConfigBase):
    """Even-symmetric Gabor filter bank; lengths are in pixels."""

    n_orientations: int = 32
    sigma_u: float = 1.8
    sigma_v: float = 2.4
    wavelength: float = 4.0
    half_width: int = 8

    def __post_init__(self):
        if self.n_orientations < 2:
            raise HairException('a Gabor bank needs at least 2 '
                                'orientations, not %d' % self.n_orientations)
        if min(self.sigma_u, self.sigma_v, self.wavelength,
               self.half_width) <= 0:
            raise HairException('Gabor parameters must be positive: %r' % (
                self,))

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(math.pi * k / self.n_orientations
                     for k in range(self.n_orientations))


@dataclass(frozen=True)
class LossWeights(ConfigBase):
    """Loss term weights, the orientation-stage overrides and the mask
    sharpness ``alpha``."""

    rgb: float = 1.0
    mask: float = 100.0
    eikonal: float = 0.1
    proxy: float = 1.0
    semantic: float = 0.05
    orientation: float = 1.0
    orientation_rgb: float = 100.0
    orientation_eikonal: float = 10.0
    alpha: float = 50.0

    def __post_init__(self):
        negative = [f.name for f in dataclasses.fields(self)
                    if getattr(self, f.name) < 0]
        if negative:
            raise ReconException('negative loss weights: %s' %
                                 ', '.join(negative))
        if self.alpha <= 0:
            raise ReconException('alpha must be positive, not %g' %
                                 self.alpha)

    def term(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class StageSchedule(ConfigBase):
    """Three training stages, each adding one prior (see
    `TrainConfig.prior_order`).

    Stage 1 starts at epoch 0, stage 2 at ``first`` and stage 3 at
    ``second``. Unset boundaries default to 1/3 and 2/3 of ``epochs``.
    """

    epochs: int = 300
    first: int = -1
    second: int = -1

    def __post_init__(self):
        first, second = self.boundaries
        if not 0 <= first < second <= self.epochs:
            raise ReconException('stage boundaries %d, %d are invalid for '
                                 '%d epochs' % (first, second, self.epochs))

    @property
    def boundaries(self) -> tuple[int, int]:
        first = self.first if self.first >= 0 else self.epochs // 3
        second = self.second if self.second >= 0 else 2 * self.epochs // 3
        return first, second

    def stage(self, epoch: int) -> int:
        first, second = self.boundaries
        return 1 if epoch < first else 2 if epoch < second else 3


@dataclass(frozen=True)
class NetworkConfig(ConfigBase):
    """Widths and depths of the distance (F), appearance (g) and semantic
    (s) networks; depths count hidden layers."""

    sdf_width: int = 64
    sdf_depth: int = 8
    sdf_skips: tuple[int, ...] = (4,)
    feature_width: int = 32
    color_width: int = 64
    color_depth: int = 4
    semantic_width: int = 64
    semantic_depth: int = 4
    beta: float = 100.0
    init_radius: float = 0.75

    @classmethod
    def full_scale(cls) -> 'NetworkConfig':
        return cls(sdf_width=512, feature_width=256, color_width=512,
                   semantic_width=512)

    @classmethod
    def desk(cls) -> 'NetworkConfig':
        """Networks small enough to fit a 64x64 scene in minutes on a CPU."""
        return cls(sdf_width=32, sdf_depth=4, sdf_skips=(2,), feature_width=8,
                   color_width=32, color_depth=2, semantic_width=32,
                   semantic_depth=2)

    @classmethod
    def toy(cls) -> 'NetworkConfig':
        """Networks of a few hundred parameters for gradient checks."""
        return cls(sdf_width=8, sdf_depth=2, sdf_skips=(1,), feature_width=2,
                   color_width=8, color_depth=1, semantic_width=8,
                   semantic_depth=1, beta=10.0)

    def networks(self) -> tuple[MlpNetwork, MlpNetwork, MlpNetwork]:
        sdf = MlpNetwork(3, (self.sdf_width,) * self.sdf_depth,
                         1 + self.feature_width, skips=tuple(self.sdf_skips),
                         beta=self.beta, name='sdf')
        color = MlpNetwork(9 + self.feature_width,
                           (self.color_width,) * self.color_depth, 3,
                           beta=self.beta, heads=(('sigmoid', 3),),
                           name='color')
        semantic = MlpNetwork(3, (self.semantic_width,) *
                              self.semantic_depth, 6, beta=self.beta,
                              heads=(('softmax', 6),), name='semantic')
        return sdf, color, semantic


@dataclass(frozen=True)
class TrainConfig(ConfigBase):
    """Reconstruction training settings."""

    schedule: StageSchedule = field(default_factory=StageSchedule)
    weights: LossWeights = field(default_factory=LossWeights)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    tracer: TracerConfig = field(default_factory=TracerConfig)
    head_rays: int = 256
    hair_rays: int = 256
    proxy_samples: int = 256
    eikonal_samples: int = 256
    lr: float = 5e-4
    seed: int = 0
    deterministic: bool = False
    threads: int = 1
    alpha_doubling: bool = False
    ablation: str = 'none'
    optimize_cameras: bool = True
    checkpoint_every: int = 0
    prior_order: str = ','.join(PRIORS)

    _nested = {'schedule': StageSchedule, 'weights': LossWeights,
               'network': NetworkConfig, 'tracer': TracerConfig}

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ReconException('unknown ablation %r; expected one of %s' %
                                 (self.ablation, ', '.join(ABLATIONS)))
        if self.head_rays < 1 or self.lr <= 0:
            raise ReconException('invalid ray count or learning rate: %d, '
                                 '%g' % (self.head_rays, self.lr))
        if self.prior_order != 'all' and \
                sorted(self.prior_order.split(',')) != sorted(PRIORS):
            raise ReconException("prior order must be 'all' or a "
                                 "permutation of %s, not %r" % (
                                     ','.join(PRIORS), self.prior_order))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'TrainConfig':
        """As `ConfigBase.from_dict`, also accepting a top-level
        ``epochs`` shorthand for ``schedule.epochs``."""

        data = dict(data)
        if 'epochs' in data:
            schedule = dict(data.get('schedule', {}))
            schedule.setdefault('epochs', data.pop('epochs'))
            data['schedule'] = schedule
        return super().from_dict(data)

    @property
    def epochs(self) -> int:
        return self.schedule.epochs

    def enabled_terms(self) -> frozenset[str]:
        """Terms the ablation leaves switched on."""

        disabled = {'baseline': {'proxy', 'semantic', 'orientation'},
                    'no-proxy': {'proxy'}, 'no-semantic': {'semantic'},
                    'no-orientation': {'orientation'}}.get(self.ablation,
                                                           set())
        return frozenset(TERMS) - disabled

    def prior_stages(self) -> dict[str, int]:
        """Stage at which each prior joins the loss; ``'all'`` starts them
        together."""

        if self.prior_order == 'all':
            return dict.fromkeys(PRIORS, 1)
        return {name: stage for stage, name in
                enumerate(self.prior_order.split(','), start=1)}

    def active_terms(self, epoch: int) -> frozenset[str]:
        stage = self.schedule.stage(epoch)
        active = {'rgb', 'mask', 'eikonal'}
        active.update(name for name, start in self.prior_stages().items()
                      if stage >= start)
        return frozenset(active) & self.enabled_terms()

    def weights_at(self, epoch: int) -> LossWeights:
        """Weights in effect at ``epoch``: the overrides that come with the
        orientation term and the optional alpha doubling applied."""

        stage = self.schedule.stage(epoch)
        weights = self.weights
        if 'orientation' in self.active_terms(epoch):
            weights = weights.replace(rgb=weights.orientation_rgb,
                                      eikonal=weights.orientation_eikonal)
        if self.alpha_doubling:
            weights = weights.replace(alpha=weights.alpha * 2 ** (stage - 1))
        return weights


@dataclass(frozen=True)
class SyntheticConfig(ConfigBase):
    """Synthetic head scene: a sphere "face" with a striped torus "hair"
    cap, viewed by cameras on a ring around the vertical axis."""

    views: int = 8
    width: int = 64
    height: int = 64
    focal_scale: float = 0.9
    distance: float = 2.5
    elevation: float = 0.25
    sphere_radius: float = 0.6
    torus_major: float = 0.4
    torus_minor: float = 0.15
    torus_height: float = -0.55
    stripes: int = 6
    sphere_only: bool = False
    morphable: bool = True

    def __post_init__(self):
        if self.views < 1 or self.width < 2 or self.height < 2:
            raise ReconException('invalid synthetic scene size: %d views of '
                                 '%dx%d' % (self.views, self.width,
                                            self.height))
