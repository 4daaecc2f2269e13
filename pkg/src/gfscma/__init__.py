"""Grant-free SCMA link simulation with joint channel, data and activity estimation."""

from .codebook import Codebook, load_codebook, make_codebook
from .config import ConfigError, IdentifiabilityError, SystemConfig, ebn0_to_noise_var
from .frame import Frame, generate_frame
from .pattern import FactorGraphPattern, build_pattern
from .pilots import PilotBook, check_identifiability, generate_zc_pilots, ml_estimate
from .receivers.baselines import bp_mf_receiver, mpa_genie
from .receivers.ep import ReceiverOutput, run_receiver

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "ConfigError",
    "FactorGraphPattern",
    "Frame",
    "IdentifiabilityError",
    "PilotBook",
    "ReceiverOutput",
    "SystemConfig",
    "bp_mf_receiver",
    "build_pattern",
    "check_identifiability",
    "ebn0_to_noise_var",
    "generate_frame",
    "generate_zc_pilots",
    "load_codebook",
    "make_codebook",
    "ml_estimate",
    "mpa_genie",
    "run_receiver",
]
