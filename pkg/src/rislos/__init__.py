"""Parametric ML estimation and tracking of LOS channels for RIS-aided links."""

from .array import Aoa, AngleGrid, ArrayGeometry, array_response, configuration_angle_grid, search_grid, steering_phases
from .channel import ChannelState, LinkBudget, LosChannelParams, PilotSession, make_los_channel, synth_received_pilots
from .configurator import build_codebook, nearest_unused, optimal_config, run_adaptive_estimation, smart_init
from .estimator import Estimate, estimate_all, estimate_aoa, ls_estimate, mle_objective
from .metrics import nmse, se_achieved, se_max

__version__ = "0.1.0"

__all__ = [
    "Aoa", "AngleGrid", "ArrayGeometry", "array_response", "configuration_angle_grid", "search_grid",
    "steering_phases", "ChannelState", "LinkBudget", "LosChannelParams", "PilotSession", "make_los_channel",
    "synth_received_pilots", "build_codebook", "nearest_unused", "optimal_config", "run_adaptive_estimation",
    "smart_init", "Estimate", "estimate_all", "estimate_aoa", "ls_estimate", "mle_objective", "nmse",
    "se_achieved", "se_max",
]
