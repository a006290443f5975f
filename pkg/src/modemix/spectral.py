"""Analytic signal, instantaneous amplitude/frequency and FFT screening."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.signal import find_peaks

from .errors import EstimatorUnreliableError, SignalError
from .signal import Signal, count_peak_rate

__all__ = [
    "AnalyticSignal",
    "InstTrack",
    "EnvelopeExtremes",
    "SpectralPeak",
    "hilbert_transform",
    "analytic",
    "inst_track",
    "track_extremes",
    "fft_peaks",
    "tone_amplitude",
]

EDGE_GUARD_FRACTION = 0.05


def hilbert_transform(x) -> np.ndarray:
    """Discrete Hilbert transform by one-sided spectrum doubling.

    Negative-frequency bins are zeroed, positive ones doubled, DC (and
    Nyquist for even lengths) kept; the imaginary part of the inverse
    transform is the quadrature signal.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spec * gain).imag


@dataclass(frozen=True, eq=False)
class AnalyticSignal:
    """``real_part + j * imag_part``; ``real_part`` is the input with its mean removed."""

    real_part: Signal
    imag_part: Signal
    mean_removed: float = 0.0

    @property
    def sample_rate(self) -> float:
        return self.real_part.sample_rate

    @property
    def complex(self) -> np.ndarray:
        return self.real_part.samples + 1j * self.imag_part.samples

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.real_part.samples, self.imag_part.samples)

    @property
    def phase(self) -> np.ndarray:
        """Four-quadrant phase, unwrapped."""
        return np.unwrap(np.arctan2(self.imag_part.samples, self.real_part.samples))


def _end_taper(n: int, fraction: float) -> np.ndarray:
    g = int(round(fraction * n))
    w = np.ones(n)
    if g > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(g) / g))
        w[:g] = ramp
        w[n - g:] = ramp[::-1]
    return w


def analytic(s: Signal, taper: float = EDGE_GUARD_FRACTION) -> AnalyticSignal:
    """Analytic signal of ``s`` with its mean removed.

    The periodic wrap of a non-periodic record leaks a slowly decaying
    error into the FFT quadrature that reaches mid-record (about 2% of the
    amplitude for generic tones). The quadrature is therefore computed from
    a copy whose first and last ``taper`` fraction is faded by a raised
    cosine and which is zero-padded by one record length on both sides.
    This is linear in ``s``. Records of fewer than about 20 cycles keep
    a truncation error of a few percent mid-record that no end treatment
    removes; lengthen the record there. The removed mean is weighted by
    the same taper. ``taper=0`` gives the plain transform and plain mean.
    """
    if len(s) < 8:
        raise SignalError("analytic signal needs at least 8 samples")
    if not 0 <= taper < 0.5:
        raise SignalError("taper must be in [0, 0.5)")
    n = len(s)
    w = _end_taper(n, taper)
    # Taper-weighted mean: partial cycles at the record ends bias a plain
    # mean, and subtracting that bias adds a ripple to the envelope.
    mean = float(np.dot(w, s.samples) / w.sum())
    x = s.samples - mean
    if taper > 0:
        buf = np.concatenate([np.zeros(n), x * w, np.zeros(n)])
        y = hilbert_transform(buf)[n:2 * n]
    else:
        y = hilbert_transform(x)
    return AnalyticSignal(s.like(x), s.like(y), mean)


@dataclass(frozen=True, eq=False)
class InstTrack:
    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray
    sample_rate: float
    edge_guard: int = 0

    def __len__(self) -> int:
        return self.amplitude.size

    @property
    def guard(self) -> slice:
        return slice(self.edge_guard, len(self) - self.edge_guard)


def inst_track(a: AnalyticSignal, edge_guard: int | None = None) -> InstTrack:
    """Instantaneous amplitude and frequency of an analytic signal.

    Frequency is the central difference of the unwrapped phase over
    ``2*pi*dt`` (one-sided at the record ends). Where the analytic signal
    vanishes the frequency of the previous valid sample is carried forward.
    """
    x = a.real_part.samples
    y = a.imag_part.samples
    n = x.size
    amp = np.hypot(x, y)
    valid = amp > 0
    phase = np.unwrap(np.arctan2(y, x))
    freq = np.gradient(phase) * a.sample_rate / (2 * np.pi)
    if not np.all(valid):
        # Phase is meaningless where x = y = 0, and the central difference
        # spreads that to both neighbours; hold the last good value there.
        bad = ~valid
        bad[1:] |= ~valid[:-1]
        bad[:-1] |= ~valid[1:]
        last_good = np.maximum.accumulate(np.where(bad, -1, np.arange(n)))
        freq = np.where(last_good >= 0, freq[np.maximum(last_good, 0)], 0.0)
    if edge_guard is None:
        edge_guard = int(round(EDGE_GUARD_FRACTION * n))
    edge_guard = max(0, min(int(edge_guard), (n - 1) // 2))
    return InstTrack(amp, freq, phase, a.sample_rate, edge_guard)


@dataclass(frozen=True)
class EnvelopeExtremes:
    """Extreme values of amplitude and frequency tracks.

    The primary fields come from medians of per-beat extremes; the
    ``*_global`` fields are plain min/max over the guarded region.
    ``f_mean`` is the phase-slope frequency over whole beats, i.e. the
    frequency of the dominant tone.
    """

    k_min: float
    k_max: float
    f_min: float
    f_max: float
    delta_f: float
    f_mean: float | None = None
    n_beats: int = 0
    delta_f_frequency_track: float | None = None
    k_min_global: float | None = None
    k_max_global: float | None = None
    f_min_global: float | None = None
    f_max_global: float | None = None

    def __post_init__(self):
        if not (0 <= self.k_min <= self.k_max):
            raise ValueError(f"need 0 <= k_min <= k_max, got {self.k_min}, {self.k_max}")
        if self.f_min > self.f_max:
            raise ValueError("f_min must not exceed f_max")
        if self.delta_f < 0:
            raise ValueError("delta_f must be >= 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _refine(y: np.ndarray, i: int) -> float:
    """Parabolic vertex value through samples i-1, i, i+1."""
    if i <= 0 or i >= y.size - 1:
        return float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    denom = a - 2 * b + c
    if denom == 0:
        return float(b)
    p = 0.5 * (a - c) / denom
    if abs(p) > 1:
        return float(b)
    return float(b - 0.25 * (a - c) * p)


def track_extremes(track: InstTrack, rel_prominence: float = 0.02,
                   flat_tolerance: float = 0.01) -> EnvelopeExtremes:
    """Robust extremes of a two-tone beat pattern.

    Beat cycles are delimited by successive amplitude peaks inside the edge
    guard. Each cycle contributes one amplitude minimum and one frequency
    maximum and minimum; each peak one amplitude maximum. The reported
    values are medians over cycles. ``delta_f`` is the amplitude-peak rate
    measured over the span of detected peaks.

    An amplitude track flatter than ``flat_tolerance`` (relative peak to
    peak) is read as a single tone with ``delta_f = 0``.
    """
    g = track.guard
    amp = track.amplitude[g]
    freq = track.frequency[g]
    fs = track.sample_rate
    if amp.size < 3:
        raise EstimatorUnreliableError("guarded region is empty")
    level = float(np.median(amp))
    if not level > 0 or not np.isfinite(level):
        raise EstimatorUnreliableError("amplitude track is zero")
    glob = dict(
        k_min_global=float(amp.min()),
        k_max_global=float(amp.max()),
        f_min_global=float(freq.min()),
        f_max_global=float(freq.max()),
    )
    if (amp.max() - amp.min()) <= flat_tolerance * level:
        phase = track.phase[g]
        f_mean = float((phase[-1] - phase[0]) * fs / (2 * np.pi * (phase.size - 1)))
        fmed = float(np.median(freq))
        return EnvelopeExtremes(
            k_min=level, k_max=level, f_min=fmed, f_max=fmed, delta_f=0.0,
            f_mean=f_mean, n_beats=0, delta_f_frequency_track=0.0, **glob,
        )
    prom = rel_prominence * level
    peaks, _ = find_peaks(amp, prominence=prom)
    if peaks.size < 2:
        raise EstimatorUnreliableError(
            f"found {peaks.size} amplitude beat(s) in the guarded track; lengthen the record"
        )
    kmax = [_refine(amp, i) for i in peaks]
    kmin, fmax, fmin = [], [], []
    for lo, hi in zip(peaks[:-1], peaks[1:]):
        seg = slice(lo, hi + 1)
        i_amin = lo + int(np.argmin(amp[seg]))
        kmin.append(-_refine(-amp, i_amin))
        i_fmax = lo + int(np.argmax(freq[seg]))
        i_fmin = lo + int(np.argmin(freq[seg]))
        fmax.append(_refine(freq, i_fmax))
        fmin.append(-_refine(-freq, i_fmin))
    phase = track.phase[g]
    span = float(peaks[-1] - peaks[0])
    f_mean = float((phase[peaks[-1]] - phase[peaks[0]]) * fs / (2 * np.pi * span))
    delta_f = count_peak_rate(amp, fs, method="span", prominence=prom)
    fspread = float(np.median(fmax) - np.median(fmin))
    try:
        df_freq = count_peak_rate(freq, fs, method="span", prominence=0.1 * fspread)
    except Exception:
        df_freq = None
    k_min = min(float(np.median(kmin)), float(np.median(kmax)))
    return EnvelopeExtremes(
        k_min=max(0.0, k_min),
        k_max=float(np.median(kmax)),
        f_min=float(np.median(fmin)),
        f_max=float(np.median(fmax)),
        delta_f=float(delta_f),
        f_mean=f_mean,
        n_beats=int(peaks.size - 1),
        delta_f_frequency_track=df_freq,
        **glob,
    )


@dataclass(frozen=True)
class SpectralPeak:
    frequency: float
    magnitude: float


def fft_peaks(s: Signal, top_k: int = 5, rel_floor: float = 1e-6) -> list[SpectralPeak]:
    """Largest local maxima of the Hann-windowed amplitude spectrum.

    Magnitudes are in signal units (a tone of amplitude A on a bin reads
    A). Peak frequency and height are refined by a parabola through the
    log magnitude of the three bins around each maximum. Peaks below
    ``rel_floor`` times the largest are dropped.
    """
    x = s.samples
    n = x.size
    if n < 16:
        raise SignalError("fft_peaks needs at least 16 samples")
    w = np.hanning(n)
    mag = 2 * np.abs(np.fft.rfft(x * w)) / w.sum()
    df = s.sample_rate / n
    inner = (mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:])
    cand = np.flatnonzero(inner) + 1
    if cand.size == 0 or mag.max() == 0:
        return []
    cand = cand[mag[cand] >= rel_floor * mag[cand].max()]
    cand = cand[np.argsort(mag[cand])[::-1]][:top_k]
    out = []
    for k in cand:
        a, b, c = np.log(mag[k - 1 : k + 2] + 1e-300)
        denom = a - 2 * b + c
        p = 0.5 * (a - c) / denom if denom != 0 else 0.0
        peak = np.exp(b - 0.25 * (a - c) * p)
        out.append(SpectralPeak(float((k + p) * df), float(peak)))
    out.sort(key=lambda pk: pk.magnitude, reverse=True)
    return out


def tone_amplitude(s: Signal, frequency: float, guard: int = 0) -> tuple[float, float]:
    """Least-squares amplitude and phase of a sinusoid at ``frequency``.

    Fits ``c*sin(2*pi*f*t) + d*cos(2*pi*f*t)`` (plus a constant) and
    returns ``(hypot(c, d), atan2(d, c))`` so the fitted tone is
    ``amp * sin(2*pi*f*t + phase)``.
    """
    sl = slice(guard, len(s) - guard if guard else None)
    t = s.t[sl]
    x = s.samples[sl]
    arg = 2 * np.pi * frequency * t
    design = np.column_stack([np.sin(arg), np.cos(arg), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    return float(np.hypot(coef[0], coef[1])), float(np.arctan2(coef[1], coef[0]))
