"""Two-tone parameter estimation from instantaneous amplitude/frequency extremes.

For ``x = A sin(2 pi f1 t) + B sin(2 pi f2 t)`` the analytic signal is
``exp(j w2 t) (A exp(j dw t) + B)``. Its modulus swings between
``|A - B|`` and ``A + B``; its phase slope between
``f2 + df*A/(A+B)`` and ``f2 + df*A/(A-B)``, with ``df = f1 - f2``.
Inverting those four relations gives the tone parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signal import Signal, ToneSpec, synthesize
from .spectral import EnvelopeExtremes, InstTrack, track_extremes

__all__ = [
    "EnvelopeExtremes",
    "TwoToneEstimate",
    "FrequencyEstimate",
    "estimate_amplitudes",
    "estimate_frequencies",
    "estimate_two_tone",
    "exact_extremes",
    "reconstruct",
]

FMAX = "fmax_equation"
FMIN = "fmin_equation"
AVERAGED = "averaged"
ILL_CONDITIONED_RATIO = 0.1
TRUST_SLACK = 0.1


def estimate_amplitudes(e: EnvelopeExtremes) -> tuple[float, float]:
    """Larger and smaller tone amplitude from the envelope extremes."""
    return (e.k_max + e.k_min) / 2.0, (e.k_max - e.k_min) / 2.0


@dataclass(frozen=True)
class FrequencyEstimate:
    f1: float
    f2: float
    via: str
    f2_by_fmax: float
    f2_by_fmin: float
    inverted: bool = False
    ill_conditioned: bool = False


def _is_inverted(e: EnvelopeExtremes) -> bool:
    # The frequency spike at the envelope minimum points away from the
    # dominant tone: upward if the high tone dominates, downward otherwise.
    if e.f_mean is None:
        return False
    return (e.f_mean - e.f_min) > (e.f_max - e.f_mean)


def estimate_frequencies(e: EnvelopeExtremes, a: float, b: float, route: str | None = None,
                         ill_conditioned_ratio: float = ILL_CONDITIONED_RATIO) -> FrequencyEstimate:
    """Recover ``(f1, f2)`` given the amplitude pair ``a >= b``.

    The spike route (``fmax_equation``) uses the singular extreme, the
    other route (``fmin_equation``) the mild one. When the low-frequency
    tone dominates, the spike is the frequency minimum and the roles of
    ``f_min``/``f_max`` swap; ``inverted`` is set.

    ``route=None`` picks the spike route unless ``a - b`` is within
    ``ill_conditioned_ratio * a``.
    """
    df = e.delta_f
    inverted = _is_inverted(e)
    if df == 0 or b <= 0:
        if e.f_mean is not None and df == 0:
            f = e.f_mean
        else:
            f = 0.5 * (e.f_min + e.f_max)
        f2 = f - df if not inverted else f
        return FrequencyEstimate(f2 + df, f2, FMAX if route is None else route, f2, f2, inverted)
    gap = a - b
    ill = gap <= ill_conditioned_ratio * a
    if inverted:
        # Dominant tone is f2; spike drops below it by df*b/(a-b).
        spike = e.f_min + df * b / gap if gap > 0 else math.nan
        mild = e.f_max - df * b / (a + b)
    else:
        spike = e.f_max - a * df / gap if gap > 0 else math.nan
        mild = e.f_min - a * df / (a + b)
    if route is None:
        route = FMIN if ill else FMAX
    if route == FMAX:
        f2 = spike
    elif route == FMIN:
        f2 = mild
    elif route == AVERAGED:
        f2 = 0.5 * (spike + mild)
    else:
        raise ValueError(f"unknown route {route!r}")
    return FrequencyEstimate(f2 + df, f2, route, spike, mild, inverted, ill)


@dataclass(frozen=True)
class TwoToneEstimate:
    """Tone pair recovered from one IMF.

    ``a >= b`` are the envelope-derived amplitudes of the dominant and the
    weaker tone. ``amp_hi_freq``/``amp_lo_freq`` assign them to ``f1``
    (higher frequency) and ``f2``; they differ from ``(a, b)`` only when
    the estimate is ``inverted``.
    """

    amp_hi_freq: float
    amp_lo_freq: float
    f1: float
    f2: float
    delta_f: float
    a: float
    b: float
    via: str = FMAX
    inverted: bool = False
    trusted: bool = True
    ill_conditioned: bool = False
    consistency: float = 0.0
    f2_by_fmax: float | None = None
    f2_by_fmin: float | None = None
    extremes: EnvelopeExtremes | None = field(default=None, compare=False)

    @property
    def freq_ratio(self) -> float:
        return self.f2 / self.f1 if self.f1 > 0 else math.nan

    def tones(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """``((amp, f1), (amp, f2))`` in frequency-role order."""
        return (self.amp_hi_freq, self.f1), (self.amp_lo_freq, self.f2)

    def to_dict(self) -> dict:
        e = self.extremes
        out = {
            "amp_hi_freq": self.amp_hi_freq,
            "amp_lo_freq": self.amp_lo_freq,
            "f1": self.f1,
            "f2": self.f2,
            "delta_f": self.delta_f,
            "k_min": e.k_min if e else None,
            "k_max": e.k_max if e else None,
            "f_min": e.f_min if e else None,
            "f_max": e.f_max if e else None,
            "via": self.via,
            "trusted": self.trusted,
            "inverted": self.inverted,
            "ill_conditioned": self.ill_conditioned,
            "consistency": self.consistency,
            "f2_by_fmax": self.f2_by_fmax,
            "f2_by_fmin": self.f2_by_fmin,
        }
        if e is not None:
            out["extremes"] = e.to_dict()
        return out


def _consistency(e: EnvelopeExtremes, a: float, b: float) -> float:
    """Relative slack of the frequency spread against its model value."""
    spread = e.f_max - e.f_min
    if b <= 0 or e.delta_f == 0:
        return 0.0 if spread <= 1e-9 * max(1.0, abs(e.f_max)) else math.inf
    if a <= b:
        return math.inf
    model = a * e.delta_f * (1.0 / (a - b) - 1.0 / (a + b))
    return abs(spread - model) / max(model, 1e-300)


def estimate_from_extremes(e: EnvelopeExtremes, route: str | None = None,
                           ill_conditioned_ratio: float = ILL_CONDITIONED_RATIO) -> TwoToneEstimate:
    a, b = estimate_amplitudes(e)
    fe = estimate_frequencies(e, a, b, route, ill_conditioned_ratio)
    hi, lo = (b, a) if fe.inverted else (a, b)
    slack = _consistency(e, a, b)
    return TwoToneEstimate(
        amp_hi_freq=hi,
        amp_lo_freq=lo,
        f1=fe.f1,
        f2=fe.f2,
        delta_f=e.delta_f,
        a=a,
        b=b,
        via=fe.via,
        inverted=fe.inverted,
        trusted=bool(slack < TRUST_SLACK),
        ill_conditioned=fe.ill_conditioned,
        consistency=slack,
        f2_by_fmax=fe.f2_by_fmax,
        f2_by_fmin=fe.f2_by_fmin,
        extremes=e,
    )


def estimate_two_tone(track: InstTrack, route: str | None = None, **extreme_opts) -> TwoToneEstimate:
    """Extremes of ``track`` inverted into a two-tone estimate."""
    return estimate_from_extremes(track_extremes(track, **extreme_opts), route)


def exact_extremes(amp_hi: float, f1: float, amp_lo: float, f2: float) -> EnvelopeExtremes:
    """Closed-form extremes of the two-tone model (forward direction)."""
    if f1 <= f2:
        raise ValueError("f1 must exceed f2")
    df = f1 - f2
    at_peak = f2 + df * amp_hi / (amp_hi + amp_lo)
    if amp_hi == amp_lo:
        at_trough = math.inf
    else:
        at_trough = f2 + df * amp_hi / (amp_hi - amp_lo)
    dominant = f1 if amp_hi > amp_lo else f2
    return EnvelopeExtremes(
        k_min=abs(amp_hi - amp_lo),
        k_max=amp_hi + amp_lo,
        f_min=min(at_peak, at_trough),
        f_max=max(at_peak, at_trough),
        delta_f=df,
        f_mean=dominant,
    )


def reconstruct(est: TwoToneEstimate, duration: float, sample_rate: float,
                reference: Signal | None = None, t0: float = 0.0) -> Signal:
    """Render the estimated tone pair.

    With a ``reference`` the two phases come from a joint least-squares
    fit of both sinusoids to it; amplitudes stay at their estimated values.
    """
    phases = (0.0, 0.0)
    if reference is not None:
        t = reference.t
        cols = []
        for f in (est.f1, est.f2):
            arg = 2 * np.pi * f * t
            cols += [np.sin(arg), np.cos(arg)]
        coef, *_ = np.linalg.lstsq(np.column_stack(cols), reference.samples, rcond=None)
        phases = (math.atan2(coef[1], coef[0]), math.atan2(coef[3], coef[2]))
        duration, sample_rate, t0 = reference.duration, reference.sample_rate, reference.t0
    tones = [
        ToneSpec(amp, f, ph)
        for (amp, f), ph in zip(est.tones(), phases)
        if amp > 0 and f > 0
    ]
    return synthesize(tones, duration, sample_rate, t0)
