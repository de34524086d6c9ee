"""Distributed strain sensing along a capacitive fibre: RC ladder model,
multi-tone lock-in measurement chain, and strain / joint-angle reconstruction."""

from .ladder import (
    LadderModel,
    RCParams,
    SegmentSpec,
    StrainRangeError,
    delta_cp,
    discrimination_score,
    frequency_sweep,
    garment_ladder,
    ladder_impedance,
    paper_ladder,
    parallel_capacitance,
    params_at_strain,
)
from .signal_chain import ExcitationConfig, IQFrames, NoiseConfig, paper_excitation, simulate_frames

__version__ = "0.1.0"

__all__ = [
    "ExcitationConfig",
    "IQFrames",
    "LadderModel",
    "NoiseConfig",
    "RCParams",
    "SegmentSpec",
    "StrainRangeError",
    "delta_cp",
    "discrimination_score",
    "frequency_sweep",
    "garment_ladder",
    "ladder_impedance",
    "paper_excitation",
    "paper_ladder",
    "parallel_capacitance",
    "params_at_strain",
    "simulate_frames",
]
