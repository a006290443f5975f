"""Two-tone mode-mixing analysis and masking-signal separation for EMD."""

from .emd import ImfSet, SiftConfig, decompose, extract_imf, is_imf, sift_once
from .errors import (
    DegenerateEnvelopeError,
    EstimatorUnreliableError,
    FormatError,
    InsufficientExtremaError,
    ModemixError,
    SignalError,
)
from .signal import EndPolicy, Signal, ToneSpec, Waveform, synthesize
from .spectral import analytic, fft_peaks, inst_track, track_extremes
from .twotone import TwoToneEstimate, estimate_two_tone, exact_extremes

__version__ = "0.1.0"

__all__ = [
    "ImfSet",
    "SiftConfig",
    "decompose",
    "extract_imf",
    "is_imf",
    "sift_once",
    "ModemixError",
    "SignalError",
    "FormatError",
    "DegenerateEnvelopeError",
    "InsufficientExtremaError",
    "EstimatorUnreliableError",
    "EndPolicy",
    "Signal",
    "ToneSpec",
    "Waveform",
    "synthesize",
    "analytic",
    "fft_peaks",
    "inst_track",
    "track_extremes",
    "TwoToneEstimate",
    "estimate_two_tone",
    "exact_extremes",
]
