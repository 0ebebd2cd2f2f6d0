"""Sphere tracing, differentiable intersections and soft occupancy.

Tracing itself is numeric only: the trainer traces with the current
parameters and then re-expresses the hit points (`differentiable_points`)
and the occupancy minima (`soft_occupancy_at`) as recorded functions of
the parameters, with the ray parameters held fixed.
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
from typing import Optional

import numpy as np

from . import autodiff as ad
from .config import TracerConfig
from .exception import TangentialRay
from .geometry import Ray
from .logging import Logging
from .network import MlpNetwork
from .sdf import SdfField
from .utility import Utility

logger = Logging.get_logger(__name__)

MIN_INCIDENCE = 1e-6
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

__all__ = ['TracerConfig', 'TraceResult', 'trace_rays', 'sphere_trace',
           'differentiable_points', 'differentiable_intersection',
           'distance_at', 'occupancy_minimizer', 'soft_occupancy_at',
           'soft_occupancy', 'render_color', 'semantic_probs']


@dataclass
class TraceResult:
    """Trace results; batched results hold one array entry per ray."""

    hit: np.ndarray
    t: np.ndarray
    x: np.ndarray
    iterations: np.ndarray

    def __len__(self) -> int:
        return len(self.hit)

    def ray(self, index: int) -> 'TraceResult':
        return TraceResult(bool(self.hit[index]), float(self.t[index]),
                           np.array(self.x[index]),
                           int(self.iterations[index]))


def _secant(field: SdfField, origins: np.ndarray, dirs: np.ndarray,
            t_lo: np.ndarray, f_lo: np.ndarray, t_hi: np.ndarray,
            f_hi: np.ndarray, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Refine sign-change brackets (``f_lo > 0 > f_hi``) with the
    Illinois variant of regula falsi."""

    t = t_hi.copy()
    f = f_hi.copy()
    side = np.zeros(len(t), dtype=int)
    for _ in range(steps):
        denominator = f_hi - f_lo
        safe = np.where(np.abs(denominator) > 1e-300, denominator, -1.0)
        t = np.clip(t_lo - f_lo * (t_hi - t_lo) / safe,
                    np.minimum(t_lo, t_hi), np.maximum(t_lo, t_hi))
        f = field(origins + t[:, None] * dirs)
        positive = f > 0
        t_lo = np.where(positive, t, t_lo)
        f_lo = np.where(positive, f, np.where(side == -1, f_lo / 2, f_lo))
        t_hi = np.where(positive, t_hi, t)
        f_hi = np.where(positive, np.where(side == 1, f_hi / 2, f_hi), f)
        side = np.where(positive, 1, -1)
    return t, f


def _newton(field: SdfField, origins: np.ndarray, dirs: np.ndarray,
            t: np.ndarray, steps: int,
            t_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Newton steps toward ``f(o + t d) = 0``; a step is kept only where it
    reduces ``|f|``."""

    f = field(origins + t[:, None] * dirs)
    for _ in range(steps):
        g = np.asarray(field.gradient(origins + t[:, None] * dirs))
        slope = np.einsum('ij,ij->i', g, dirs)
        usable = np.abs(slope) > MIN_INCIDENCE
        trial = np.clip(t - f / np.where(usable, slope, 1.0), 0.0, t_max)
        f_trial = field(origins + trial[:, None] * dirs)
        better = usable & (np.abs(f_trial) < np.abs(f))
        if not np.any(better):
            break
        t = np.where(better, trial, t)
        f = np.where(better, f_trial, f)
    return t, f


def _trace_chunk(field: SdfField, origins: np.ndarray, dirs: np.ndarray,
                 cfg: TracerConfig) -> TraceResult:
    n = len(origins)
    t = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    iterations = np.zeros(n, dtype=int)

    # a ray starting inside the object has no first intersection
    active = np.asarray(field(origins)) > 0.0
    t_prev = np.zeros(n)
    f_prev = np.zeros(n)
    for _ in range(cfg.max_iter):
        index = np.nonzero(active)[0]
        if len(index) == 0:
            break
        f = field(origins[index] + t[index, None] * dirs[index])
        iterations[index] += 1

        converged = np.abs(f) < cfg.eps
        crossed = ~converged & (f < 0.0)
        hit[index[converged]] = True
        if np.any(crossed):
            rows = index[crossed]
            t_ref, f_ref = _secant(field, origins[rows], dirs[rows],
                                   t_prev[rows], f_prev[rows], t[rows],
                                   f[crossed], cfg.secant_steps)
            t[rows] = t_ref
            hit[rows] = np.abs(f_ref) < cfg.eps
        done = converged | crossed

        stepping = index[~done]
        t_prev[stepping] = t[stepping]
        f_prev[stepping] = f[~done]
        t[stepping] += f[~done]
        active[index[done]] = False
        active[stepping[t[stepping] > cfg.t_max]] = False

    # rays still marching after max_iter creep toward a tangent point
    rows = np.nonzero(hit | active)[0]
    if len(rows) and cfg.newton_steps:
        t[rows], f = _newton(field, origins[rows], dirs[rows], t[rows],
                             cfg.newton_steps, cfg.t_max)
        hit[rows] = np.abs(f) < cfg.eps

    t = np.where(hit, t, np.minimum(t, cfg.t_max))
    return TraceResult(hit, t, origins + t[:, None] * dirs, iterations)


def trace_rays(field: SdfField, origins: np.ndarray, dirs: np.ndarray,
               cfg: TracerConfig = TracerConfig(), *,
               threads: int = 1) -> TraceResult:
    """Sphere trace a batch of rays.

    Each ray steps ``t <- t + f(o + t d)`` from ``t = 0``. It hits when
    ``|f| < eps``; a step that lands inside the surface (a sign change) is
    refined by ``secant_steps`` regula falsi steps. Hits then take up to
    ``newton_steps`` Newton steps toward ``f = 0``, as do rays still
    marching after ``max_iter`` steps, which hit if that brings ``|f|``
    below ``eps``. Rays that leave ``[0, t_max]`` or start inside the
    object miss.
    """

    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    origins = np.broadcast_to(origins, dirs.shape)
    parts = Utility.map_chunks(
            lambda start, stop: _trace_chunk(field, origins[start:stop],
                                             dirs[start:stop], cfg),
            len(dirs), threads=threads)
    if not parts:
        return TraceResult(np.zeros(0, dtype=bool), np.zeros(0),
                           np.zeros((0, 3)), np.zeros(0, dtype=int))
    return TraceResult(*(np.concatenate([getattr(p, name) for p in parts])
                         for name in ('hit', 't', 'x', 'iterations')))


def sphere_trace(field: SdfField, ray: Ray,
                 cfg: TracerConfig = TracerConfig()) -> TraceResult:
    return trace_rays(field, ray.origin, ray.dir[None, :], cfg).ray(0)


def differentiable_points(field: SdfField, origins: ad.Operand,
                          dirs: ad.Operand, t: np.ndarray,
                          params: Optional[ad.Operand] = None) -> \
        tuple[ad.Operand, np.ndarray]:
    """Re-express traced hit points as functions of the parameters.

    With ``y = o + t d`` (``t`` fixed) this returns
    ``x_diff = y - d f(y) / (grad f(y) . d)``, whose value is ``y`` on the
    surface and whose derivatives are those of the true intersection to
    first order. The origins and directions may be recorded, in which
    case the camera derivatives are carried too.

    Returns:
        (x_diff, valid), where rows with ``|grad f . d| <= 1e-6`` are
        invalid and have ``x_diff = y``.
    """

    y = origins + ad.reshape(np.asarray(t, dtype=float), (-1, 1)) * dirs
    f, g = field.distance_and_gradient(y, params)
    incidence = ad.dot(g, dirs)
    valid = np.abs(ad.value_of(incidence)) > MIN_INCIDENCE
    step = ad.where(valid, f / ad.where(valid, incidence, 1.0), 0.0)
    return y - dirs * ad.reshape(step, (-1, 1)), valid


def differentiable_intersection(x: np.ndarray, v: np.ndarray,
                                field: SdfField,
                                params: Optional[ad.Operand] = None) -> \
        ad.Operand:
    """Return ``x - v f(x) / (grad f(x) . v)`` for one hit point.

    Raises:
        TangentialRay: If ``|grad f(x) . v| <= 1e-6``.
    """

    x = np.asarray(x, dtype=float).reshape(1, 3)
    v = np.asarray(v, dtype=float).reshape(1, 3)
    x_diff, valid = differentiable_points(field, x, v, np.zeros(1), params)
    if not valid[0]:
        raise TangentialRay('ray is tangent to the surface at %s' %
                            x[0].tolist())
    return x_diff[0]


def distance_at(field: SdfField, origins: ad.Operand, dirs: ad.Operand,
                t: np.ndarray, params: Optional[ad.Operand] = None) -> \
        ad.Operand:
    """Field value at ``o + t d``."""
    t = ad.reshape(np.asarray(t, dtype=float), (-1, 1))
    return field.distance(origins + t * dirs, params)


def occupancy_minimizer(field: SdfField, origins: np.ndarray,
                        dirs: np.ndarray,
                        cfg: TracerConfig = TracerConfig()) -> \
        tuple[np.ndarray, np.ndarray]:
    """Return (t*, min f) of ``f(o + t d)`` over ``t`` in ``[0, t_max]``.

    The minimum over ``occupancy_samples`` uniform samples is refined by
    ``golden_steps`` golden-section iterations on the bracketing sample
    interval; t* is the best point evaluated.
    """

    origins = np.broadcast_to(np.asarray(origins, dtype=float).reshape(
            -1, 3), np.shape(dirs))
    dirs = np.asarray(dirs, dtype=float)
    n, k = len(dirs), cfg.occupancy_samples
    samples = np.linspace(0.0, cfg.t_max, k)
    points = origins[:, None, :] + samples[None, :, None] * dirs[:, None, :]
    values = np.asarray(field(points.reshape(-1, 3))).reshape(n, k)
    best = np.argmin(values, axis=1)
    rows = np.arange(n)
    t_best = samples[best]
    f_best = values[rows, best]

    spacing = samples[1] - samples[0] if k > 1 else cfg.t_max
    a = np.maximum(t_best - spacing, 0.0)
    b = np.minimum(t_best + spacing, cfg.t_max)

    def evaluate(t):
        return np.asarray(field(origins + t[:, None] * dirs))

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = evaluate(c), evaluate(d)
    for _ in range(cfg.golden_steps):
        for t_new, f_new in ((c, fc), (d, fd)):
            better = f_new < f_best
            t_best = np.where(better, t_new, t_best)
            f_best = np.where(better, f_new, f_best)
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - GOLDEN * (b - a)
        d_new = a + GOLDEN * (b - a)
        fc_new = evaluate(c_new)
        fd_new = evaluate(d_new)
        c, d, fc, fd = c_new, d_new, fc_new, fd_new
    for t_new, f_new in ((c, fc), (d, fd)):
        better = f_new < f_best
        t_best = np.where(better, t_new, t_best)
        f_best = np.where(better, f_new, f_best)
    return t_best, f_best


def soft_occupancy_at(field: SdfField, origins: ad.Operand,
                      dirs: ad.Operand, t_star: np.ndarray, alpha: float,
                      params: Optional[ad.Operand] = None) -> ad.Operand:
    """``sigmoid(-alpha f(o + t* d))`` with t* held fixed."""
    return ad.sigmoid(-alpha * distance_at(field, origins, dirs, t_star,
                                           params))


def soft_occupancy(field: SdfField, ray: Ray, alpha: float,
                   cfg: TracerConfig = TracerConfig()) -> float:
    """Soft "the ray hits the object" indicator in (0, 1)."""

    t_star, _ = occupancy_minimizer(field, ray.origin[None, :],
                                    ray.dir[None, :], cfg)
    return float(soft_occupancy_at(field, ray.origin[None, :],
                                   ray.dir[None, :], t_star, alpha)[0])


def render_color(g: MlpNetwork, params: ad.Operand, x: ad.Operand,
                 v: ad.Operand, n: ad.Operand, z: ad.Operand) -> ad.Operand:
    """Evaluate the appearance network on (x, v, n, z); batched or single."""

    single = ad.value_of(x).ndim == 1
    inputs = [ad.reshape(a, (1, -1)) if single else a for a in (x, v, n, z)]
    out = g.forward(params, ad.concatenate(inputs, axis=-1))
    return out[0] if single else out


def semantic_probs(s: MlpNetwork, params: ad.Operand, x: ad.Operand) -> \
        ad.Operand:
    """Part probabilities (face, hair, eyes, eyebrows, nose, lips)."""

    single = ad.value_of(x).ndim == 1
    out = s.forward(params, ad.reshape(x, (-1, 3)))
    return out[0] if single else out
