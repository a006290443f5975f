"""Uniformly sampled signals, tone synthesis, extrema and spline envelopes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateEnvelopeError, SignalError

__all__ = [
    "Signal",
    "ToneSpec",
    "Waveform",
    "EndPolicy",
    "ExtremaIndex",
    "synthesize",
    "find_extrema",
    "envelope",
    "count_peak_rate",
    "zero_crossings",
]


class Waveform(str, enum.Enum):
    SINE = "sine"
    COSINE = "cosine"


class EndPolicy(str, enum.Enum):
    """How envelope knots are extended past the record ends."""

    MIRROR = "mirror"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class Signal:
    """Real-valued time series on a uniform grid.

    Sample ``i`` sits at ``t0 + i / sample_rate``. The sample buffer is
    copied on construction and made read-only.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        data = np.array(self.samples, dtype=float, copy=True)
        if data.ndim != 1:
            raise SignalError("samples must be one-dimensional")
        if data.size == 0:
            raise SignalError("samples must be non-empty")
        if not np.all(np.isfinite(data)):
            raise SignalError("samples must be finite")
        rate = float(self.sample_rate)
        if not np.isfinite(rate) or rate <= 0:
            raise SignalError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        if not np.isfinite(self.t0):
            raise SignalError("t0 must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", rate)
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        """Record length in seconds (``len / sample_rate``)."""
        return len(self) / self.sample_rate

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.sample_rate

    def like(self, samples) -> "Signal":
        """New signal on the same grid."""
        return Signal(samples, self.sample_rate, self.t0)

    def same_grid(self, other: "Signal") -> bool:
        return (
            len(self) == len(other)
            and self.sample_rate == other.sample_rate
            and self.t0 == other.t0
        )

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def __add__(self, other: "Signal") -> "Signal":
        _check_grid(self, other)
        return self.like(self.samples + other.samples)

    def __sub__(self, other: "Signal") -> "Signal":
        _check_grid(self, other)
        return self.like(self.samples - other.samples)

    def __mul__(self, k: float) -> "Signal":
        return self.like(self.samples * float(k))

    __rmul__ = __mul__

    def __neg__(self) -> "Signal":
        return self.like(-self.samples)

    def __repr__(self) -> str:
        return f"Signal(n={len(self)}, sample_rate={self.sample_rate:g}, t0={self.t0:g})"


def _check_grid(a: Signal, b: Signal) -> None:
    if not a.same_grid(b):
        raise SignalError("signals are on different sample grids")


@dataclass(frozen=True)
class ToneSpec:
    amplitude: float
    frequency: float
    phase: float = 0.0
    waveform: Waveform = Waveform.SINE

    def __post_init__(self):
        if not self.amplitude > 0:
            raise SignalError(f"tone amplitude must be > 0, got {self.amplitude}")
        if not self.frequency > 0:
            raise SignalError(f"tone frequency must be > 0, got {self.frequency}")
        object.__setattr__(self, "waveform", Waveform(self.waveform))

    def render(self, t: np.ndarray) -> np.ndarray:
        arg = 2 * np.pi * self.frequency * t + self.phase
        wave = np.sin if self.waveform is Waveform.SINE else np.cos
        return self.amplitude * wave(arg)


def synthesize(tones: Sequence[ToneSpec], duration: float, sample_rate: float, t0: float = 0.0) -> Signal:
    """Render a sum of tones on a uniform grid.

    The record holds ``round(duration * sample_rate)`` samples. An empty
    tone list gives an all-zero signal.
    """
    if not duration > 0:
        raise SignalError(f"duration must be > 0, got {duration}")
    if not sample_rate > 0:
        raise SignalError(f"sample_rate must be > 0, got {sample_rate}")
    for tone in tones:
        if tone.frequency >= sample_rate / 2:
            raise SignalError(
                f"tone at {tone.frequency:g} Hz is at or above Nyquist ({sample_rate / 2:g} Hz)"
            )
    n = int(round(duration * sample_rate))
    if n < 1:
        raise SignalError("duration too short for the sample rate")
    t = t0 + np.arange(n) / sample_rate
    out = np.zeros(n)
    for tone in tones:
        out += tone.render(t)
    return Signal(out, sample_rate, t0)


@dataclass(frozen=True)
class ExtremaIndex:
    maxima: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    minima: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def count(self) -> int:
        return len(self.maxima) + len(self.minima)


def find_extrema(s) -> ExtremaIndex:
    """Interior local maxima and minima by three-point comparison.

    Flat runs count once, at their midpoint (rounded down), if the signal
    rises into and falls out of them (or vice versa). Endpoints are never
    extrema.
    """
    x = np.asarray(getattr(s, "samples", s), dtype=float)
    if x.size < 3:
        raise SignalError("need at least 3 samples to find extrema")
    # Collapse flat runs so each run is one point, then compare neighbours.
    change = np.flatnonzero(np.diff(x) != 0)
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [x.size - 1]))
    vals = x[starts]
    if vals.size < 3:
        return ExtremaIndex()
    left = vals[1:-1] - vals[:-2]
    right = vals[1:-1] - vals[2:]
    mids = (starts[1:-1] + ends[1:-1]) // 2
    maxima = mids[(left > 0) & (right > 0)]
    minima = mids[(left < 0) & (right < 0)]
    return ExtremaIndex(maxima.astype(int), minima.astype(int))


def zero_crossings(s) -> int:
    """Number of sign changes, exact zeros treated as a sign of their own."""
    x = np.asarray(getattr(s, "samples", s), dtype=float)
    nz = x[x != 0]
    if nz.size < 2:
        return 0
    return int(np.count_nonzero(np.signbit(nz[1:]) != np.signbit(nz[:-1])))


def _mirror_knots(idx: np.ndarray, vals: np.ndarray, n: int):
    # Two nearest extrema at each end, reflected about the end samples.
    k = min(2, idx.size)
    left_t = -idx[:k][::-1]
    left_v = vals[:k][::-1]
    right_t = 2 * (n - 1) - idx[-k:][::-1]
    right_v = vals[-k:][::-1]
    t = np.concatenate((left_t, idx, right_t))
    v = np.concatenate((left_v, vals, right_v))
    # Reflection of a knot lying exactly on an end sample duplicates it.
    t, keep = np.unique(t, return_index=True)
    return t, v[keep]


def envelope(s: Signal, knots, end_policy: EndPolicy | str = EndPolicy.MIRROR) -> Signal:
    """Natural cubic spline through ``(knot, s[knot])`` on the full grid.

    Raises DegenerateEnvelopeError when fewer than two knots remain after
    end handling.
    """
    x = s.samples
    n = x.size
    idx = np.asarray(knots, dtype=int)
    if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= n):
        raise SignalError("knots must be strictly increasing indices into the signal")
    policy = EndPolicy(end_policy)
    vals = x[idx]
    if policy is EndPolicy.MIRROR and idx.size:
        tk, vk = _mirror_knots(idx.astype(float), vals, n)
    else:
        tk, vk = idx.astype(float), vals
    if tk.size < 2:
        raise DegenerateEnvelopeError(f"envelope needs >= 2 knots, got {tk.size}")
    grid = np.arange(n, dtype=float)
    if tk.size == 2:
        # natural spline through two points is the chord, extrapolated
        slope = (vk[1] - vk[0]) / (tk[1] - tk[0])
        return s.like(vk[0] + slope * (grid - tk[0]))
    spline = CubicSpline(tk, vk, bc_type="natural", extrapolate=True)
    return s.like(spline(grid))


def count_peak_rate(track, sample_rate: float, method: str = "count",
                    prominence: float | None = None) -> float:
    """Peaks per second in a track.

    ``method="count"`` divides the number of strict local maxima by the
    record duration. ``method="span"`` divides the number of peak-to-peak
    intervals by the time between the first and last peak, which does not
    quantise to ``1/duration`` on short windows. Those two peaks are
    placed between samples by a parabola through their neighbours.

    ``prominence`` discards maxima below that prominence (absolute units).
    """
    y = np.asarray(track, dtype=float)
    if y.size < 3:
        raise SignalError("track needs at least 3 samples")
    peaks = _peaks(y, prominence)
    if method == "count":
        return peaks.size * sample_rate / y.size
    if method == "span":
        if peaks.size < 2:
            return 0.0
        span = _vertex(y, peaks[-1]) - _vertex(y, peaks[0])
        return (peaks.size - 1) * sample_rate / span
    raise ValueError(f"unknown method {method!r}")


def _vertex(y: np.ndarray, i: int) -> float:
    if i <= 0 or i >= y.size - 1:
        return float(i)
    left, mid, right = y[i - 1], y[i], y[i + 1]
    curv = left - 2 * mid + right
    if curv >= 0:
        return float(i)
    return i + float(np.clip(0.5 * (left - right) / curv, -0.5, 0.5))


def _peaks(y: np.ndarray, prominence: float | None) -> np.ndarray:
    if prominence is None or prominence <= 0:
        return find_extrema(y).maxima
    from scipy.signal import find_peaks

    peaks, _ = find_peaks(y, prominence=prominence)
    return peaks
