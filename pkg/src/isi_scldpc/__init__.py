"""Erasure and AWGN analysis of spatially coupled LDPC codes over ISI channels."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree without installation
    __version__ = "0+unknown"

from .erasure_de import EnsembleConfig, bp_threshold, run_de
from .exit_entropy import map_threshold_bound, sir_threshold
from .metric_chain import build_chain_system, transfer_function
from .trellis import ChannelModel, build_trellis

__all__ = [
    "ChannelModel",
    "EnsembleConfig",
    "bp_threshold",
    "build_chain_system",
    "build_trellis",
    "map_threshold_bound",
    "run_de",
    "sir_threshold",
    "transfer_function",
]
