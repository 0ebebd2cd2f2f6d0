"""The ``headrecon`` package."""

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

from .autodiff import ParamVector, finite_diff_check, value_and_grad
from .command import Command
from .config import GaborBank, LossWeights, NetworkConfig, StageSchedule, \
    SyntheticConfig, TracerConfig, TrainConfig
from .exception import HeadReconException
from .geometry import Camera, load_cameras, save_cameras
from .hair import OrientationMap, detect_orientation
from .logging import Logging
from .mesh import TriangleMesh, export_obj, import_obj, marching_cubes, \
    sample_grid
from .morphable import LinearMorphableModel, fit_proxy
from .plugin import Plugin
from .recon import TrainedModel, train
from .scene import Scene, View
from .sdf import AnalyticSphere, AnalyticTorus, NeuralSdf
from .synthetic import generate_synthetic_scene
from .tracer import trace_rays
from .utility import Utility
from .version import __version__, __version_date__


# use this when reporting the version
def version() -> str:
    package = __package__.split('.')[0]
    return '%s %s (%s version)' % (package, __version__, __version_date__)
