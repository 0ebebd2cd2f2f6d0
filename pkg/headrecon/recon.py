"""Reconstruction losses, ray sampling and the staged trainer.

All parameters (the distance network F, the appearance network g, the
semantic network s and the per-view camera corrections) live in one
`ParamVector`. A training step samples a ray batch, traces it with the
current parameters (numerically, without recording), and then evaluates
the loss as a recorded function of the parameters with the trace results
held fixed.

The loss is::

    w_rgb L_rgb + w_mask L_mask + w_eikonal L_eikonal + w_proxy L_proxy
        + w_semantic L_semantic + w_orientation L_orientation

where terms that are not active in the current stage (or are switched off
by the ablation setting) are not evaluated at all, so that they contribute
exactly zero to the value and to the gradient.
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

import csv
import os.path

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .config import TERMS, LossWeights, TracerConfig, TrainConfig
from .exception import DivergedLoss, EmptyBatch, IoError, MaskTooSmall, \
    NonFiniteLoss, ReconException
from .file import File
from .geometry import Camera, axis_angle_to_matrix, pixel_centers, \
    ray_directions
from .hair import orientation_terms
from .logging import Logging
from .network import MlpNetwork
from .optimizer import AdamState, adam_step, load_checkpoint, \
    save_checkpoint
from .scene import HAIR_LABEL, Scene
from .utility import Utility
from .sdf import NeuralSdf, SdfField, eikonal_points, eikonal_residual
from .tracer import TraceResult, differentiable_points, distance_at, \
    occupancy_minimizer, render_color, trace_rays

logger = Logging.get_logger(__name__)

HISTORY_COLUMNS = ('epoch', 'stage') + TERMS + ('total',)


@dataclass(frozen=True)
class Networks:
    sdf: MlpNetwork
    color: MlpNetwork
    semantic: MlpNetwork

    @property
    def all(self) -> tuple[MlpNetwork, MlpNetwork, MlpNetwork]:
        return self.sdf, self.color, self.semantic

    def to_dict(self) -> dict[str, Any]:
        return {net.name: net.to_dict() for net in self.all}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'Networks':
        return cls(*(MlpNetwork.from_dict(data[name]) for name in
                     ('sdf', 'color', 'semantic')))


def _network_segments(net: MlpNetwork, flat: np.ndarray) -> \
        list[tuple[str, np.ndarray]]:
    segments, offset = [], 0
    for name, shape in net.layout():
        size = int(np.prod(shape))
        segments.append((name, flat[offset:offset + size].reshape(shape)))
        offset += size
    return segments


def init_params(networks: Networks, n_views: int,
                rng: np.random.Generator, *,
                init_radius: float = 0.75) -> ad.ParamVector:
    """Geometric initialization for F, default initialization for g and
    s, and zero camera corrections."""

    sdf = networks.sdf.init_params(rng, geometric=True, radius=init_radius)
    color = networks.color.init_params(rng)
    semantic = networks.semantic.init_params(rng)
    return ad.ParamVector.from_segments(
            _network_segments(networks.sdf, sdf) +
            _network_segments(networks.color, color) +
            _network_segments(networks.semantic, semantic) +
            [('camera.omega', np.zeros((n_views, 3))),
             ('camera.delta_t', np.zeros((n_views, 3)))])


@dataclass
class TrainedModel:
    """Networks, their parameters and the cameras the corrections apply
    to."""

    networks: Networks
    params: ad.ParamVector
    cameras: list[Camera]

    @classmethod
    def initial(cls, scene: Scene, config: TrainConfig) -> 'TrainedModel':
        networks = Networks(*config.network.networks())
        cameras = scene.proxy_cameras or scene.cameras
        params = init_params(networks, len(cameras),
                             np.random.default_rng(config.seed),
                             init_radius=config.network.init_radius)
        return cls(networks, params, list(cameras))

    def part(self, flat: ad.Operand, name: str) -> ad.Operand:
        start, stop = self.params.span(name + '.')
        return flat[start:stop]

    def field(self, values: Optional[np.ndarray] = None) -> NeuralSdf:
        values = self.params.values if values is None else values
        return NeuralSdf(self.networks.sdf,
                         np.asarray(self.part(values, 'sdf')))

    def pose(self, flat: ad.Operand, view: int) -> \
            tuple[ad.Operand, ad.Operand]:
        """Corrected pose: ``R = exp(omega) R_0``, ``t = t_0 + delta_t``."""

        cam = self.cameras[view]
        omega = self.params.view(flat, 'camera.omega')[view]
        delta = self.params.view(flat, 'camera.delta_t')[view]
        return ad.matmul(axis_angle_to_matrix(omega), cam.R), cam.t + delta

    def corrected_cameras(self) -> list[Camera]:
        cams = []
        for view, cam in enumerate(self.cameras):
            R, t = self.pose(self.params.values, view)
            cams.append(cam.with_pose(np.asarray(R), np.asarray(t)))
        return cams

    def with_params(self, params: ad.ParamVector) -> 'TrainedModel':
        return TrainedModel(self.networks, params, self.cameras)

    def save(self, path: str, adam: Optional[AdamState] = None,
             **extra) -> None:
        save_checkpoint(path, self.params, adam,
                        networks=self.networks.to_dict(),
                        cameras=[cam.to_dict() for cam in self.cameras],
                        **extra)

    @classmethod
    def load(cls, path: str) -> tuple['TrainedModel', Optional[AdamState],
                                      dict[str, Any]]:
        checkpoint = load_checkpoint(path)
        extra = dict(checkpoint.extra)
        try:
            networks = Networks.from_dict(extra.pop('networks'))
            cameras = [Camera.from_dict(c) for c in extra.pop('cameras')]
        except KeyError as e:
            raise IoError('%s is not a reconstruction checkpoint (no %s)' %
                          (path, e), path)
        return cls(networks, checkpoint.params, cameras), checkpoint.adam, \
            extra


@dataclass
class RayBatch:
    """Sampled pixels of one view: head rays, then hair rays, then rays
    outside the head mask, with their ground truth."""

    view: int
    pixels: np.ndarray
    inside: np.ndarray
    hair: np.ndarray
    colors: np.ndarray
    labels: np.ndarray
    orientation: np.ndarray

    def __len__(self) -> int:
        return len(self.pixels)


def _choose(rng: np.random.Generator, candidates: np.ndarray, count: int,
            what: str, *, required: bool) -> np.ndarray:
    if count > len(candidates):
        if required:
            raise MaskTooSmall('%s has %d pixels but %d rays were requested'
                               % (what, len(candidates), count))
        logger.warning('%s has only %d pixels; sampling %d rays instead of '
                       '%d' % (what, len(candidates), len(candidates),
                               count))
        count = len(candidates)
    return rng.choice(candidates, size=count, replace=False) if count else \
        np.zeros(0, dtype=int)


def sample_rays(scene: Scene, view: int, counts: tuple[int, int],
                seed: Any = 0, *, outside: Optional[int] = None) -> RayBatch:
    """Sample pixels uniformly without replacement: ``counts[0]`` from the
    head mask, ``counts[1]`` from the hair mask and ``outside`` (default:
    the head count) from outside the head mask.

    ``seed`` may be anything `numpy.random.default_rng` accepts, or a
    generator.

    Raises:
        MaskTooSmall: If the head mask has fewer pixels than requested.
            Hair and outside counts are reduced (with a warning) instead.
    """

    rng = seed if isinstance(seed, np.random.Generator) else \
        np.random.default_rng(seed)
    v = scene.views[view]
    head, hair = counts
    outside = head if outside is None else outside
    chosen = [
        _choose(rng, np.flatnonzero(v.mask), head, 'head mask',
                required=True),
        _choose(rng, np.flatnonzero(v.hair_mask), hair, 'hair mask',
                required=False),
        _choose(rng, np.flatnonzero(~v.mask), outside, 'background',
                required=False)]
    index = np.concatenate(chosen)
    sizes = [len(c) for c in chosen]

    rows, cols = np.divmod(index, v.width)
    pixels = np.stack([cols + 0.5, rows + 0.5], axis=-1).astype(float)
    inside = np.repeat([True, True, False], sizes)
    hair_rays = np.repeat([False, True, False], sizes)
    orientation = np.zeros((len(index), 2)) if v.orientation is None else \
        v.orientation.direction.reshape(-1, 2)[index]
    return RayBatch(view, pixels, inside, hair_rays,
                    v.image.reshape(-1, 3)[index], v.labels.reshape(-1)[index],
                    orientation)


@dataclass
class SurfaceHits:
    """Differentiable hit points of the batch rows in ``rows``, with view
    directions, unit normals and geometry features."""

    rows: np.ndarray
    x: ad.Operand
    v: ad.Operand
    n: ad.Operand
    z: ad.Operand

    def __len__(self) -> int:
        return len(self.rows)


def surface_hits(field: SdfField, origins: ad.Operand, dirs: ad.Operand,
                 trace: TraceResult, rows: np.ndarray,
                 params: Optional[ad.Operand] = None) -> SurfaceHits:
    """Re-express the traced hits of ``rows`` as functions of the
    parameters; rows at grazing incidence are dropped."""

    rows = np.asarray(rows, dtype=int)
    if len(rows) == 0:
        empty = np.zeros((0, 3))
        return SurfaceHits(rows, empty, empty, empty,
                           np.zeros((0, field.feature_width)))
    x, valid = differentiable_points(field, ad.getitem(origins, rows),
                                     ad.getitem(dirs, rows), trace.t[rows],
                                     params)
    rows = rows[valid]
    x = ad.getitem(x, valid)
    if isinstance(field, NeuralSdf):
        _, z, g = field.evaluate(x, params, gradient=True)
    else:
        g, z = field.gradient(x, params), field.features(x, params)
    n = g / ad.norm(g, axis=-1, keepdims=True)
    return SurfaceHits(rows, x, ad.getitem(dirs, rows), n, z)


def loss_proxy(field: SdfField, points: np.ndarray,
               params: Optional[ad.Operand] = None) -> ad.Operand:
    """Mean ``|f|`` over the proxy surface points.

    Raises:
        EmptyBatch: If there are no points.
    """

    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyBatch('proxy loss needs at least one point')
    return ad.mean(ad.abs_(field.distance(points, params)))


def loss_rgb(color: MlpNetwork, color_params: ad.Operand,
             hits: SurfaceHits, batch: RayBatch) -> ad.Operand:
    """Mean over the hit rays of the L1 color distance summed over the
    channels; misses don't count.

    Raises:
        EmptyBatch: If the batch has no rays inside the head mask.
    """

    if not np.any(batch.inside):
        raise EmptyBatch('color loss needs rays inside the head mask')
    if len(hits) == 0:
        return np.zeros(())
    rendered = render_color(color, color_params, hits.x, hits.v, hits.n,
                            hits.z)
    difference = ad.abs_(batch.colors[hits.rows] - rendered)
    return ad.sum_(difference) / len(hits)


def loss_semantic(semantic: MlpNetwork, semantic_params: ad.Operand,
                  hits: SurfaceHits, batch: RayBatch, *,
                  exclude_hair: bool = False) -> ad.Operand:
    """Mean categorical cross-entropy over hit rays labelled 1..6.

    With ``exclude_hair`` hair rays are treated as background and left
    out.

    Raises:
        EmptyBatch: If the batch has no rays inside the head mask.
    """

    if not np.any(batch.inside):
        raise EmptyBatch('semantic loss needs rays inside the head mask')
    labels = batch.labels[hits.rows]
    if exclude_hair:
        labels = np.where(labels == HAIR_LABEL, 0, labels)
    keep = labels >= 1
    if not np.any(keep):
        return np.zeros(())
    logits = semantic.forward(semantic_params, ad.getitem(hits.x, keep),
                              raw=True)
    log_probs = ad.log_softmax(logits, axis=-1)
    chosen = ad.getitem(log_probs, (np.arange(np.count_nonzero(keep)),
                                    labels[keep] - 1))
    return -ad.mean(chosen)


def mask_rows(batch: RayBatch, trace: TraceResult) -> np.ndarray:
    """Rows the mask term applies to: everything except hits inside the
    head mask."""
    return np.flatnonzero(~(trace.hit & batch.inside))


def loss_mask(field: SdfField, origins: ad.Operand, dirs: ad.Operand,
              batch: RayBatch, trace: TraceResult, alpha: float,
              cfg: TracerConfig = TracerConfig(),
              params: Optional[ad.Operand] = None, *,
              t_star: Optional[np.ndarray] = None) -> ad.Operand:
    """``(1/(alpha |P|)) sum CE(O_p, S(p))`` with the soft occupancy
    ``S = sigmoid(-alpha min_t f)``.

    Hits inside the head mask contribute zero. ``t_star`` holds the
    occupancy minimizers of the `mask_rows` rows and is computed if not
    given.

    Raises:
        EmptyBatch: If the batch is empty.
    """

    if len(batch) == 0:
        raise EmptyBatch('mask loss needs at least one ray')
    rows = mask_rows(batch, trace)
    if len(rows) == 0:
        return np.zeros(())
    o = ad.getitem(origins, rows)
    d = ad.getitem(dirs, rows)
    if t_star is None:
        t_star, _ = occupancy_minimizer(field, ad.value_of(o),
                                        ad.value_of(d), cfg)
    m = distance_at(field, o, d, t_star, params)
    occupied = batch.inside[rows].astype(float)
    # CE(o, sigmoid(-a m)) = o softplus(a m) + (1 - o) softplus(-a m)
    ce = occupied * ad.softplus(alpha * m) + \
        (1.0 - occupied) * ad.softplus(-alpha * m)
    return ad.sum_(ce) / (alpha * len(batch))


def loss_orientation_hits(field: SdfField, hits: SurfaceHits,
                          batch: RayBatch, R: ad.Operand, t: ad.Operand,
                          cam: Camera,
                          params: Optional[ad.Operand] = None) -> \
        ad.Operand:
    """Mean ``1 - |d_p . d_x|`` over the hair rays among ``hits``."""

    hair = batch.hair[hits.rows]
    if not np.any(hair):
        return np.zeros(())
    total, count = orientation_terms(field, ad.getitem(hits.x, hair),
                                     batch.orientation[hits.rows][hair],
                                     R, t, cam, params)
    return total / count if count else np.zeros(())


@dataclass
class StepInputs:
    """Everything a step's loss holds fixed: the batch, its trace, the
    occupancy minimizers and the sampled eikonal and proxy points."""

    view: int
    epoch: int
    batch: RayBatch
    trace: TraceResult
    t_star: np.ndarray
    eikonal: np.ndarray
    proxy: Optional[np.ndarray]


@dataclass
class LossResult:
    value: float
    gradient: ad.ParamVector
    terms: dict[str, float]


class Reconstruction:
    """Loss evaluation for a scene and a training configuration."""

    def __init__(self, scene: Scene, config: TrainConfig,
                 model: Optional[TrainedModel] = None):
        self.scene = scene
        self.config = config
        self.model = model or TrainedModel.initial(scene, config)
        if len(self.model.cameras) != len(scene.views):
            raise ReconException('model has %d cameras but the scene has %d '
                                 'views' % (len(self.model.cameras),
                                            len(scene.views)))
        self.threads = 1 if config.deterministic else config.threads
        self.terms_available = set(config.enabled_terms())
        if 'proxy' in self.terms_available and (
                scene.proxy_mesh is None or scene.proxy_mesh.is_empty):
            logger.warning('scene has no proxy mesh; proxy term disabled')
            self.terms_available.discard('proxy')
        if 'orientation' in self.terms_available and all(
                view.orientation is None for view in scene.views):
            logger.warning('scene has no orientation maps; orientation '
                           'term disabled')
            self.terms_available.discard('orientation')

        # hair and background counts per view, reduced once to what the
        # masks hold
        self.ray_counts = []
        for index, view in enumerate(scene.views):
            hair = min(config.hair_rays,
                       int(np.count_nonzero(view.hair_mask)))
            outside = min(config.head_rays,
                          int(np.count_nonzero(~view.mask)))
            if (hair, outside) != (config.hair_rays, config.head_rays):
                logger.warning('view %d: sampling %d hair and %d background '
                               'rays instead of %d and %d' % (
                                   index, hair, outside, config.hair_rays,
                                   config.head_rays))
            self.ray_counts.append((hair, outside))

    def active_terms(self, epoch: int) -> frozenset[str]:
        return self.config.active_terms(epoch) & self.terms_available

    def prepare(self, values: np.ndarray, view: int, epoch: int) -> \
            StepInputs:
        """Sample and trace the batch for ``view`` at ``epoch``."""

        config = self.config
        rng = np.random.default_rng([config.seed, epoch, view])
        hair, outside = self.ray_counts[view]
        batch = sample_rays(self.scene, view, (config.head_rays, hair), rng,
                            outside=outside)
        field = self.model.field(values)
        R, t = self.model.pose(values, view)
        origins, dirs = ray_directions(R, t, self.model.cameras[view],
                                       batch.pixels)
        trace = trace_rays(field, origins, dirs, config.tracer,
                           threads=self.threads)
        rows = mask_rows(batch, trace)
        t_star, _ = occupancy_minimizer(field, origins[rows], dirs[rows],
                                        config.tracer)
        eikonal = eikonal_points(rng, config.eikonal_samples,
                                 tuple(self.scene.bounds),
                                 trace.x[trace.hit])
        proxy = None
        if self.scene.proxy_mesh is not None and \
                not self.scene.proxy_mesh.is_empty:
            proxy = self.scene.proxy_mesh.sample_points(
                    config.proxy_samples, rng)
        return StepInputs(view, epoch, batch, trace, t_star, eikonal, proxy)

    def terms(self, flat: ad.Operand, inputs: StepInputs,
              active: Sequence[str], values: Optional[np.ndarray] = None) \
            -> dict[str, ad.Operand]:
        """Evaluate the (unweighted) ``active`` terms.

        ``values`` are the numeric parameters the inputs were prepared
        with (default: ``flat``'s value).
        """

        model, config = self.model, self.config
        values = ad.value_of(flat) if values is None else values
        field = model.field(values)
        sdf = model.part(flat, 'sdf')
        view, batch, trace = inputs.view, inputs.batch, inputs.trace
        cam = model.cameras[view]
        if config.optimize_cameras:
            R, t = model.pose(flat, view)
        else:
            R, t = model.pose(values, view)
        origins, dirs = ray_directions(R, t, cam, batch.pixels)
        weights = config.weights_at(inputs.epoch)

        result: dict[str, ad.Operand] = {}
        hits = None
        if {'rgb', 'semantic', 'orientation'} & set(active):
            hits = surface_hits(field, origins, dirs, trace,
                                np.flatnonzero(trace.hit & batch.inside),
                                sdf)
        if 'rgb' in active:
            result['rgb'] = loss_rgb(model.networks.color,
                                     model.part(flat, 'color'), hits, batch)
        if 'mask' in active:
            result['mask'] = loss_mask(field, origins, dirs, batch, trace,
                                       weights.alpha, config.tracer, sdf,
                                       t_star=inputs.t_star)
        if 'eikonal' in active:
            result['eikonal'] = eikonal_residual(field, inputs.eikonal, sdf)
        if 'proxy' in active and inputs.proxy is not None:
            result['proxy'] = loss_proxy(field, inputs.proxy, sdf)
        if 'semantic' in active:
            result['semantic'] = loss_semantic(
                    model.networks.semantic, model.part(flat, 'semantic'),
                    hits, batch,
                    exclude_hair=config.ablation == 'semantic-without-hair')
        if 'orientation' in active:
            result['orientation'] = loss_orientation_hits(
                    field, hits, batch, R, t, cam, sdf)
        return result

    def loss(self, flat: ad.Operand, inputs: StepInputs,
             weights: Optional[LossWeights] = None,
             active: Optional[Sequence[str]] = None,
             values: Optional[np.ndarray] = None,
             record: Optional[dict[str, float]] = None) -> ad.Operand:
        weights = self.config.weights_at(inputs.epoch) if weights is None \
            else weights
        active = self.active_terms(inputs.epoch) if active is None else \
            active
        terms = self.terms(flat, inputs, active, values)
        total: ad.Operand = 0.0
        for name in TERMS:
            if name in terms:
                total = total + weights.term(name) * terms[name]
                if record is not None:
                    record[name] = float(ad.value_of(terms[name]))
        return total


def total_loss(recon: Reconstruction, params: ad.ParamVector, view: int,
               epoch: int, *, inputs: Optional[StepInputs] = None,
               weights: Optional[LossWeights] = None,
               active: Optional[Sequence[str]] = None) -> LossResult:
    """Weighted loss of one view's batch and its gradient with respect to
    all parameters.

    Raises:
        DivergedLoss: If the loss or its gradient isn't finite.
    """

    values = params.values
    if inputs is None:
        inputs = recon.prepare(values, view, epoch)
    terms: dict[str, float] = {}
    try:
        value, gradient = ad.value_and_grad(
                lambda flat: recon.loss(flat, inputs, weights, active,
                                        values, terms), params)
    except NonFiniteLoss as e:
        raise DivergedLoss('epoch %d, view %d: %s' % (epoch, view, e))
    return LossResult(value, gradient, terms)


@dataclass
class TrainResult:
    model: TrainedModel
    history: list[dict[str, float]] = field(default_factory=list)
    adam: Optional[AdamState] = None


def start_history(path: str, start_epoch: int = 0) -> None:
    """Create ``path`` with the CSV header.

    When resuming (``start_epoch > 0``) the rows of earlier epochs are kept
    and those of later epochs, left by a run that went past the
    checkpoint, are dropped.
    """

    kept: list[list[str]] = []
    if start_epoch > 0 and os.path.isfile(path):
        try:
            with open(path, newline='') as fd:
                kept = [row for row in list(csv.reader(fd))[1:]
                        if row and int(row[0]) < start_epoch]
        except OSError as e:
            raise IoError("can't read %s: %s" % (path, e), path)
        except ValueError:
            raise IoError('%s is not a loss history' % path, path)
    try:
        File.makedirs_for(path)
        with open(path, 'w', newline='') as fd:
            writer = csv.writer(fd)
            writer.writerow(HISTORY_COLUMNS)
            writer.writerows(kept)
    except OSError as e:
        raise IoError("can't write %s: %s" % (path, e), path)


def append_history(path: str, row: dict[str, float]) -> None:
    """Append one epoch's row; floats keep full precision."""

    try:
        with open(path, 'a', newline='') as fd:
            csv.writer(fd).writerow(
                    [row['epoch'], row['stage']] +
                    [repr(float(row[name])) for name in TERMS + ('total',)])
    except OSError as e:
        raise IoError("can't write %s: %s" % (path, e), path)


def train(scene: Scene, config: TrainConfig, *,
          model: Optional[TrainedModel] = None,
          adam: Optional[AdamState] = None,
          outdir: Optional[str] = None, start_epoch: int = 0) -> TrainResult:
    """Run the staged optimization.

    Each epoch takes one Adam step per view, in view order. The history
    row of an epoch holds the mean (over views) of each unweighted term,
    zero for inactive terms, and the mean weighted total. With ``outdir``
    each row is appended to ``history.csv`` there as its epoch ends, and
    periodic checkpoints (``checkpoint_every``) and ``final.json`` are
    written.

    Raises:
        DivergedLoss: If the loss becomes non-finite.
    """

    recon = Reconstruction(scene, config, model)
    model = recon.model
    params = model.params
    if not config.optimize_cameras:
        logger.info('camera corrections are frozen')
    if adam is None:
        adam = AdamState.for_params(params, lr=config.lr)
    camera_start, camera_stop = params.span('camera.')
    history_path = None
    if outdir is not None:
        history_path = os.path.join(outdir, 'history.csv')
        start_history(history_path, start_epoch)

    history = []
    for epoch in range(start_epoch, config.epochs):
        stage = config.schedule.stage(epoch)
        sums = dict.fromkeys(TERMS + ('total',), 0.0)
        for view in range(len(scene.views)):
            result = total_loss(recon, params, view, epoch)
            gradient = result.gradient
            if not config.optimize_cameras:
                values = np.array(gradient.values)
                values[camera_start:camera_stop] = 0.0
                gradient = gradient.with_values(values)
            try:
                params = adam_step(adam, params, gradient)
            except NonFiniteLoss as e:
                raise DivergedLoss('epoch %d, view %d: %s' % (epoch, view,
                                                            e))
            recon.model = model = model.with_params(params)
            for name, value in result.terms.items():
                sums[name] += value
            sums['total'] += result.value

        row = {name: value / len(scene.views) for name, value in
               sums.items()}
        row.update(epoch=epoch, stage=stage)
        history.append(row)
        logger.info('epoch %d (stage %d): %s' % (
            epoch, stage, Utility.nice_dict(
                    {name: row[name] for name in TERMS + ('total',)},
                    style='csv')))
        if history_path is not None:
            append_history(history_path, row)
        if outdir is not None and config.checkpoint_every > 0 and \
                (epoch + 1) % config.checkpoint_every == 0:
            model.save(os.path.join(outdir, 'checkpoint-%04d.json' % (
                epoch + 1)), adam, epoch=epoch + 1, config=config.to_dict())

    if outdir is not None:
        model.save(os.path.join(outdir, 'final.json'), adam,
                   epoch=config.epochs, config=config.to_dict())
    return TrainResult(model, history, adam)


@dataclass
class RenderResult:
    image: np.ndarray
    hit: np.ndarray
    depth: np.ndarray
    iterations: np.ndarray


def render_view(model: TrainedModel, cam: Camera,
                cfg: TracerConfig = TracerConfig(), *,
                threads: int = 1) -> RenderResult:
    """Render the appearance network's colors at every pixel center;
    misses are black and have infinite depth."""

    height, width = cam.height, cam.width
    origins, dirs = cam.rays(pixel_centers(height, width))
    field = model.field()
    trace = trace_rays(field, origins, dirs, cfg, threads=threads)
    image = np.zeros((height * width, 3))
    hit = trace.hit
    if np.any(hit):
        X = trace.x[hit]
        _, z, g = field.evaluate(X, gradient=True)
        g = np.asarray(g)
        lengths = np.linalg.norm(g, axis=-1, keepdims=True)
        n = g / np.where(lengths > 0.0, lengths, 1.0)
        image[hit] = np.asarray(render_color(
                model.networks.color, model.part(model.params.values,
                                                 'color'),
                X, dirs[hit], n, np.asarray(z)))
    depth = np.where(hit, cam.depth(trace.x), np.inf)
    return RenderResult(image.reshape(height, width, 3),
                        hit.reshape(height, width),
                        depth.reshape(height, width),
                        trace.iterations.reshape(height, width))


def gradient_report(recon: Reconstruction, params: ad.ParamVector, *,
                    view: int = 0, epoch: int = 0,
                    terms: Sequence[str] = TERMS, h: float = 1e-5,
                    indices: Optional[Sequence[int]] = None,
                    perturb: float = 1.0) -> dict[str, float]:
    """Maximum relative error between the analytic and the central
    difference gradient of each (unweighted) term, with the batch and its
    trace held fixed.

    ``perturb`` scales the analytic gradient before the comparison.

    Raises:
        ReconException: If a term can't be evaluated on this scene.
    """

    values = params.values
    inputs = recon.prepare(values, view, epoch)
    report = {}
    for name in terms:
        def loss_fn(flat, name=name):
            result = recon.terms(flat, inputs, [name], values)
            if name not in result:
                raise ReconException('%s term needs data this scene '
                                     'lacks' % name)
            return result[name]

        analytic = ad.grad(loss_fn, params).values * perturb
        report[name] = ad.finite_diff_check(loss_fn, params, h,
                                            indices=indices,
                                            gradient=analytic)
        logger.info('%s: max relative error %.3g' % (name, report[name]))
    return report
