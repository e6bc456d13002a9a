"""Bit-exact functional simulator for temporal neural networks built from
ramp integrate-and-fire columns, STDP and supervised voters."""
from .core import INF, GammaParams, NeuronModel, fire_time, rnl_response, snl_response, body_potential
from .column import Column, ColumnLayer, ColumnParams, StdpGate, wta, stdp_delta
from .decode import NO_PREDICTION, VoterBank, VoterLayer, VoterParams, tally
from .config import ConfigError, NetworkConfig, PRESETS, preset
from .network import Network, StepResult, build_topology, run

__version__ = "0.1.0"

__all__ = [
    "INF", "GammaParams", "NeuronModel", "fire_time", "rnl_response", "snl_response", "body_potential",
    "Column", "ColumnLayer", "ColumnParams", "StdpGate", "wta", "stdp_delta",
    "NO_PREDICTION", "VoterBank", "VoterLayer", "VoterParams", "tally",
    "ConfigError", "NetworkConfig", "PRESETS", "preset",
    "Network", "StepResult", "build_topology", "run",
]
