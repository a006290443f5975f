"""Masking-signal separation of closely spaced tones.

A known tone ``x_m`` above both mixed tones is added and subtracted; EMD
of ``x + x_m`` and ``x - x_m`` pulls the upper tone into a mixture with
the mask while leaving the lower one out, and averaging the two first
IMFs cancels the mask.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .boundary_map import MapGrid, default_map
from .emd import ImfSet, SiftConfig, decompose, extract_imf, is_imf
from .errors import ModemixError
from .signal import Signal, Waveform
from .spectral import analytic, fft_peaks, inst_track
from .twotone import FMIN, TwoToneEstimate, estimate_two_tone

log = logging.getLogger(__name__)

__all__ = [
    "Region",
    "Prediction",
    "MaskSpec",
    "MaskPolicy",
    "SeparationPlan",
    "MaskedDecomposition",
    "RoundRecord",
    "map_region",
    "design_mask",
    "masked_emd",
    "is_mixed",
    "separate_all",
]

SEPARATION_RATIO = 0.5
ATTRACTION_RATIO = 0.67
SEPARATION_SCORE = 0.8
ATTRACTION_SCORE = 0.5


class Region(str, enum.Enum):
    ATTRACTION = "attraction"
    SEPARATION = "separation"
    TRANSITION = "transition"


class Prediction(str, enum.Enum):
    SEPARABLE = "separable"
    MARGINAL = "marginal"
    INFEASIBLE = "infeasible"


def map_region(freq_ratio: float, log_amp_ratio: float, grid: MapGrid | None = None) -> Region:
    """Classify a (lower/upper frequency, log10 lower/upper amplitude) pair.

    Ratios up to 0.5 always separate and from 0.67 up always attract; in
    between the empirical map decides (score >= 0.8 separation, <= 0.5
    attraction, otherwise transition).
    """
    if not 0 < freq_ratio < 1:
        raise ModemixError(f"frequency ratio must be in (0, 1), got {freq_ratio}")
    if freq_ratio <= SEPARATION_RATIO:
        return Region.SEPARATION
    if freq_ratio >= ATTRACTION_RATIO:
        return Region.ATTRACTION
    score = (grid or default_map()).lookup(freq_ratio, log_amp_ratio)
    if score >= SEPARATION_SCORE:
        return Region.SEPARATION
    if score <= ATTRACTION_SCORE:
        return Region.ATTRACTION
    return Region.TRANSITION


@dataclass(frozen=True)
class MaskSpec:
    frequency: float
    amplitude: float
    phase: float = 0.0
    waveform: Waveform = Waveform.COSINE

    def __post_init__(self):
        if not self.frequency > 0:
            raise ModemixError("mask frequency must be > 0")
        if not self.amplitude > 0:
            raise ModemixError("mask amplitude must be > 0")
        object.__setattr__(self, "waveform", Waveform(self.waveform))

    def render(self, like: Signal) -> Signal:
        if self.frequency >= like.nyquist:
            raise ModemixError(
                f"mask at {self.frequency:g} Hz is at or above Nyquist ({like.nyquist:g} Hz)"
            )
        arg = 2 * np.pi * self.frequency * like.t + self.phase
        wave = np.cos if self.waveform is Waveform.COSINE else np.sin
        return like.like(self.amplitude * wave(arg))

    @property
    def energy_density(self) -> float:
        """Mean power ``a_m**2 / 2``; times duration gives injected energy."""
        return self.amplitude**2 / 2.0


@dataclass(frozen=True)
class MaskPolicy:
    """Rules for placing the mask.

    ``strict`` keeps ``f1/f_m > hi_bound`` and ``f2/f_m < lo_bound`` and
    falls back to the common ``relaxed_bound`` when that interval is empty.
    ``relaxed`` starts from the common bound. ``placement`` is the position
    of ``f_m`` inside the interval (0.5 = midpoint). The amplitude targets
    ``log10(a1/a_m) = target_log_amp``.
    """

    name: str = "strict"
    hi_bound: float = 0.7
    lo_bound: float = 0.6
    relaxed_bound: float = 0.67
    placement: float = 0.5
    target_log_amp: float = -0.25
    log_amp_band: tuple[float, float] = (-0.4, -0.2)
    frequency: float | None = None
    amplitude: float | None = None
    phase: float = 0.0
    waveform: Waveform = Waveform.COSINE

    def __post_init__(self):
        if self.name not in ("strict", "relaxed"):
            raise ModemixError(f"unknown policy {self.name!r}")
        lo, hi = self.log_amp_band
        if not lo <= self.target_log_amp <= hi:
            raise ModemixError("target_log_amp must lie inside log_amp_band")
        if not 0 < self.placement < 1:
            raise ModemixError("placement must be in (0, 1)")

    @classmethod
    def strict(cls, **kw) -> "MaskPolicy":
        return cls(name="strict", **kw)

    @classmethod
    def relaxed(cls, **kw) -> "MaskPolicy":
        return cls(name="relaxed", **kw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "hi_bound": self.hi_bound,
            "lo_bound": self.lo_bound,
            "relaxed_bound": self.relaxed_bound,
            "placement": self.placement,
            "target_log_amp": self.target_log_amp,
            "log_amp_band": list(self.log_amp_band),
            "frequency": self.frequency,
            "amplitude": self.amplitude,
            "phase": self.phase,
            "waveform": Waveform(self.waveform).value,
        }


@dataclass(frozen=True)
class SeparationPlan:
    mask: MaskSpec | None
    ratio_hi: float
    ratio_lo: float
    log_amp_hi: float
    log_amp_lo: float
    predicted: Prediction
    interval: tuple[float, float] = (math.nan, math.nan)
    region_hi: Region | None = None
    region_lo: Region | None = None
    diagnosis: str = ""

    def to_dict(self) -> dict:
        m = self.mask
        return {
            "f_m": m.frequency if m else None,
            "a_m": m.amplitude if m else None,
            "phase": m.phase if m else None,
            "waveform": m.waveform.value if m else None,
            "ratio_hi": self.ratio_hi,
            "ratio_lo": self.ratio_lo,
            "log_amp_hi": self.log_amp_hi,
            "log_amp_lo": self.log_amp_lo,
            "predicted": self.predicted.value,
            "interval": list(self.interval),
            "region_hi": self.region_hi.value if self.region_hi else None,
            "region_lo": self.region_lo.value if self.region_lo else None,
            "diagnosis": self.diagnosis,
        }


def _infeasible(diagnosis: str, interval=(math.nan, math.nan)) -> SeparationPlan:
    nan = math.nan
    return SeparationPlan(None, nan, nan, nan, nan, Prediction.INFEASIBLE, interval,
                          diagnosis=diagnosis)


def design_mask(est: TwoToneEstimate, policy: MaskPolicy = MaskPolicy(),
                nyquist: float | None = None, grid: MapGrid | None = None) -> SeparationPlan:
    """Pick mask frequency and amplitude from a two-tone estimate.

    Never raises for an unsuitable estimate; the plan comes back
    ``infeasible`` with a diagnosis instead.
    """
    f1, f2 = est.f1, est.f2
    a1, a2 = est.amp_hi_freq, est.amp_lo_freq
    if not (a1 > 0 and a2 > 0 and f1 > f2 > 0):
        return _infeasible(f"estimate is not a distinct tone pair (f1={f1:.4g}, f2={f2:.4g}, "
                           f"a1={a1:.4g}, a2={a2:.4g})")
    notes = []
    if policy.name == "strict":
        lo, hi = f2 / policy.lo_bound, f1 / policy.hi_bound
        relaxed = not lo < hi
        if relaxed:
            notes.append(f"strict interval ({lo:.4g}, {hi:.4g}) empty")
            lo, hi = f2 / policy.relaxed_bound, f1 / policy.relaxed_bound
    else:
        lo, hi = f2 / policy.relaxed_bound, f1 / policy.relaxed_bound
        relaxed = True
    # Widely spaced pairs put the lower bound under f1; the mask must
    # stay above both tones.
    lo = max(lo, f1)
    if not lo < hi:
        return _infeasible(f"no mask frequency satisfies both bounds ({lo:.4g}, {hi:.4g})", (lo, hi))
    if policy.frequency is not None:
        f_m = float(policy.frequency)
        notes.append("frequency override")
        if not lo < f_m < hi:
            notes.append(f"override {f_m:g} Hz outside ({lo:.4g}, {hi:.4g})")
            relaxed = True
    else:
        f_m = lo + policy.placement * (hi - lo)
    if nyquist is not None and f_m >= nyquist:
        return _infeasible(f"mask frequency {f_m:.4g} Hz at or above Nyquist", (lo, hi))
    if policy.amplitude is not None:
        a_m = float(policy.amplitude)
        notes.append("amplitude override")
    else:
        a_m = a1 * 10.0 ** (-policy.target_log_amp)
    mask = MaskSpec(f_m, a_m, policy.phase, policy.waveform)
    ratio_hi, ratio_lo = f1 / f_m, f2 / f_m
    log_hi, log_lo = math.log10(a1 / a_m), math.log10(a2 / a_m)
    if not ratio_hi < 1:
        return _infeasible(f"mask {f_m:.4g} Hz not above f1={f1:.4g} Hz", (lo, hi))
    reg_hi = map_region(ratio_hi, log_hi, grid)
    reg_lo = map_region(ratio_lo, log_lo, grid)
    ok = reg_hi is Region.ATTRACTION and reg_lo is Region.SEPARATION
    if ok and not relaxed:
        predicted = Prediction.SEPARABLE
    elif ok and policy.name == "relaxed":
        predicted = Prediction.SEPARABLE
    else:
        predicted = Prediction.MARGINAL
        if not ok:
            notes.append(f"map regions: hi={reg_hi.value}, lo={reg_lo.value}")
    return SeparationPlan(mask, ratio_hi, ratio_lo, log_hi, log_lo, predicted, (lo, hi),
                          reg_hi, reg_lo, "; ".join(notes))


@dataclass(frozen=True, eq=False)
class MaskedDecomposition:
    imf_plus: Signal
    imf_minus: Signal
    separated_imf: Signal
    remainder: Signal
    plan: SeparationPlan | None = None
    warnings: tuple = ()
    iterations: tuple = ()


def masked_emd(x: Signal, mask: MaskSpec, cfg: SiftConfig = SiftConfig(),
               plan: SeparationPlan | None = None) -> MaskedDecomposition:
    """First IMFs of ``x + x_m`` and ``x - x_m``, averaged."""
    xm = mask.render(x)
    warnings = []
    halves, counts = [], []
    for sign, label in ((1.0, "plus"), (-1.0, "minus")):
        y, k, ok = extract_imf(x.like(x.samples + sign * xm.samples), cfg, return_info=True)
        if not ok or not is_imf(y):
            warnings.append(f"y_{label} failed the IMF criterion after {k} sifts")
        halves.append(y)
        counts.append(k)
    y_plus, y_minus = halves
    sep = x.like(0.5 * (y_plus.samples + y_minus.samples))
    rem = x.like(x.samples - sep.samples)
    return MaskedDecomposition(y_plus, y_minus, sep, rem, plan, tuple(warnings), tuple(counts))


def is_mixed(est: TwoToneEstimate, ratio_threshold: float = SEPARATION_RATIO,
             min_amp_ratio: float = 0.05, require_trusted: bool = True) -> bool:
    """Two trusted, same-octave tones of non-negligible relative amplitude."""
    return bool(
        (est.trusted or not require_trusted)
        and est.delta_f > 0
        and est.b >= min_amp_ratio * est.a
        and est.f1 > est.f2 > 0
        and est.f2 / est.f1 > ratio_threshold
    )


@dataclass(frozen=True)
class RoundRecord:
    imf_index: int
    action: str
    estimate: TwoToneEstimate | None = None
    plan: SeparationPlan | None = None
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "imf_index": self.imf_index + 1,
            "action": self.action,
            "estimate": self.estimate.to_dict() if self.estimate else None,
            "plan": self.plan.to_dict() if self.plan else None,
            "warnings": list(self.warnings),
        }


def _estimate(imf: Signal, route: str | None = None) -> TwoToneEstimate | None:
    try:
        return estimate_two_tone(inst_track(analytic(imf)), route=route)
    except ModemixError:
        return None


def _find_mixture(imf: Signal, ratio_threshold: float):
    """``(estimate, action)`` for a mixed IMF, else ``(estimate or None, reason)``.

    Near-equal amplitudes push the frequency spike beyond what the sifted
    track resolves and the spike-route estimate fails its slack test. The
    mild-extreme route stays usable there, so it is accepted instead when
    the FFT confirms both tones.
    """
    est = _estimate(imf)
    if est is None:
        return None, "no-estimate"
    if is_mixed(est, ratio_threshold):
        if _spectrally_confirmed(imf, est):
            return est, "masked"
        return est, "not-confirmed"
    if est.trusted:
        return est, "single"
    alt = _estimate(imf, FMIN)
    if (alt is not None and is_mixed(alt, ratio_threshold, require_trusted=False)
            and _spectrally_confirmed(imf, alt)):
        return alt, "masked-fmin-route"
    return est, "untrusted"


def _spectrally_confirmed(imf: Signal, est: TwoToneEstimate, top_k: int = 4) -> bool:
    """Both estimated tones show up among the strongest FFT peaks.

    Guards against beat-like modulation that is not a tone pair, e.g. the
    leftover leak of an already-separated neighbour.
    """
    tol = max(0.35 * est.delta_f, 2.0 * imf.sample_rate / len(imf))
    peaks = [p.frequency for p in fft_peaks(imf, top_k)]
    return all(any(abs(p - f) < tol for p in peaks) for f in (est.f1, est.f2))


def _same_pair(est: TwoToneEstimate, pair) -> bool:
    f1, f2 = pair
    tol = 0.5 * max(est.delta_f, f1 - f2)
    return abs(est.f1 - f1) < tol and abs(est.f2 - f2) < tol


def separate_all(x: Signal, cfg: SiftConfig = SiftConfig(), policy: MaskPolicy = MaskPolicy(),
                 max_rounds: int = 4, ratio_threshold: float = SEPARATION_RATIO,
                 min_energy_fraction: float = 0.01, grid: MapGrid | None = None) -> ImfSet:
    """Decompose, then unmix IMFs that carry two same-octave tones.

    Each round takes the first unfinished mixed IMF, designs a mask from its
    two-tone estimate and replaces the IMF by the masked result; the
    leftover is added back to everything below it, which is decomposed
    afresh. IMFs up to the replaced one are then final. A tone pair is
    only masked once: leftover amplitude modulation from the same pair in
    a later IMF is accepted. The per-round log is in ``history``.
    """
    base = decompose(x, cfg)
    imfs = list(base.imfs)
    residue = base.residue
    iters, conv = list(base.iterations), list(base.converged)
    total = x.energy()
    history = []
    handled = []
    start = 0
    rounds = 0
    while rounds < max_rounds:
        target = None
        for i in range(start, len(imfs)):
            if total > 0 and imfs[i].energy() < min_energy_fraction * total:
                continue
            est, action = _find_mixture(imfs[i], ratio_threshold)
            if not action.startswith("masked"):
                if action == "not-confirmed":
                    history.append(RoundRecord(i, action, est))
                continue
            if any(_same_pair(est, p) for p in handled):
                history.append(RoundRecord(i, "residual-modulation", est))
                continue
            target = (i, est, action)
            break
        if target is None:
            break
        i, est, action = target
        plan = design_mask(est, policy, x.nyquist, grid)
        if plan.predicted is Prediction.INFEASIBLE:
            history.append(RoundRecord(i, "infeasible", est, plan))
            log.info("IMF %d left as-is: %s", i + 1, plan.diagnosis)
            start = i + 1
            continue
        md = masked_emd(imfs[i], plan.mask, cfg, plan)
        tail = md.remainder.samples + residue.samples
        for later in imfs[i + 1:]:
            tail = tail + later.samples
        budget = max(1, cfg.max_imfs - (i + 1))
        sub = decompose(x.like(tail), replace(cfg, max_imfs=budget))
        imfs = imfs[:i] + [md.separated_imf] + list(sub.imfs)
        iters = iters[:i] + [max(md.iterations)] + list(sub.iterations)
        conv = conv[:i] + [not md.warnings] + list(sub.converged)
        residue = sub.residue
        handled.append((est.f1, est.f2))
        history.append(RoundRecord(i, action, est, plan, md.warnings))
        start = i + 1
        rounds += 1
    return ImfSet(tuple(imfs), residue, cfg, tuple(iters), tuple(conv), tuple(history))
