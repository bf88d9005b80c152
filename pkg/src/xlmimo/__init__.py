"""Channel estimation for extremely large-scale MIMO links with partially-connected
hybrid arrays in the near field."""

from .channel import (ChannelPair, NlosPath, NlosPathSet, SceneConfig, los_channel, nlos_channel,
                      parabolic_channel, sample_scene, sopm_channel, steering_vector)
from .errors import *  # noqa: F401,F403
from .frontend import HybridFrontend, build_frontend, receive
from .geometry import ArrayConfig, SceneGeometry
from .harness import ExperimentConfig, nmse, run_sweep, run_trial
from .los_estimator import estimate_los
from .nlos_estimator import build_polar_dictionary, estimate_nlos

__version__ = "0.1.0"
