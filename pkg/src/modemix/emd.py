"""Standard empirical mode decomposition by envelope-mean sifting."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateEnvelopeError, InsufficientExtremaError, SignalError
from .signal import EndPolicy, Signal, envelope, find_extrema, zero_crossings

__all__ = [
    "SiftConfig",
    "ImfSet",
    "sift_once",
    "extract_imf",
    "decompose",
    "is_imf",
]


@dataclass(frozen=True)
class SiftConfig:
    """Sifting parameters.

    ``sd_threshold`` bounds the Cauchy-type criterion
    ``sum((h_prev - h)**2) / sum(h_prev**2)``. Because the sum is
    normalised by total energy rather than per sample, useful values are
    far below the 0.2-0.3 quoted for Huang's per-sample SD.
    """

    sd_threshold: float = 1e-3
    max_sift_iterations: int = 100
    max_imfs: int = 10
    end_policy: EndPolicy = EndPolicy.MIRROR

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ValueError("sd_threshold must be > 0")
        if self.max_sift_iterations < 1 or self.max_imfs < 1:
            raise ValueError("iteration and IMF caps must be >= 1")
        object.__setattr__(self, "end_policy", EndPolicy(self.end_policy))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["end_policy"] = self.end_policy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SiftConfig":
        keys = {"sd_threshold", "max_sift_iterations", "max_imfs", "end_policy"}
        return cls(**{k: v for k, v in d.items() if k in keys})


@dataclass(frozen=True, eq=False)
class ImfSet:
    imfs: tuple
    residue: Signal
    config: SiftConfig = field(default_factory=SiftConfig)
    iterations: tuple = ()
    converged: tuple = ()
    history: tuple = ()

    def __len__(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> Signal:
        total = self.residue.samples.copy()
        for imf in self.imfs:
            total = total + imf.samples
        return self.residue.like(total)

    def as_array(self) -> np.ndarray:
        """IMFs stacked row-wise, residue last."""
        return np.vstack([m.samples for m in self.imfs] + [self.residue.samples])

    def energy_fractions(self, reference: Signal | None = None) -> np.ndarray:
        ref = reference if reference is not None else self.reconstruct()
        total = ref.energy()
        if total == 0:
            return np.zeros(len(self.imfs))
        return np.array([m.energy() / total for m in self.imfs])


def _has_enough_extrema(ext, need: int = 2) -> bool:
    return len(ext.maxima) >= need and len(ext.minima) >= need


def is_imf(s) -> bool:
    """Extrema and zero-crossing counts differ by at most one."""
    x = np.asarray(getattr(s, "samples", s), dtype=float)
    if x.size < 3:
        return False
    return abs(find_extrema(x).count - zero_crossings(x)) <= 1


def sift_once(s: Signal, cfg: SiftConfig = SiftConfig()) -> Signal:
    """Subtract the mean of the upper and lower envelopes."""
    if len(s) < 3:
        raise InsufficientExtremaError("signal too short to sift")
    ext = find_extrema(s)
    if not _has_enough_extrema(ext):
        raise InsufficientExtremaError(
            f"need >= 2 maxima and minima, got {len(ext.maxima)}/{len(ext.minima)}"
        )
    try:
        upper = envelope(s, ext.maxima, cfg.end_policy)
        lower = envelope(s, ext.minima, cfg.end_policy)
    except DegenerateEnvelopeError as exc:
        raise InsufficientExtremaError(str(exc)) from None
    return s.like(s.samples - 0.5 * (upper.samples + lower.samples))


def _extract(s: Signal, cfg: SiftConfig) -> tuple[Signal, int, bool]:
    h = s
    for k in range(1, cfg.max_sift_iterations + 1):
        nxt = sift_once(h, cfg)
        prev_energy = h.energy()
        if prev_energy == 0:
            return nxt, k, True
        sd = float(np.sum((h.samples - nxt.samples) ** 2)) / prev_energy
        h = nxt
        if sd < cfg.sd_threshold and is_imf(h):
            return h, k, True
    return h, cfg.max_sift_iterations, False


def extract_imf(s: Signal, cfg: SiftConfig = SiftConfig(), return_info: bool = False):
    """Sift until the SD criterion holds and the result is an IMF.

    With ``return_info=True`` returns ``(imf, iterations, converged)``;
    ``converged`` is False when the iteration cap was hit first.
    """
    imf, k, ok = _extract(s, cfg)
    if return_info:
        return imf, k, ok
    return imf


def decompose(s: Signal, cfg: SiftConfig = SiftConfig()) -> ImfSet:
    """Full EMD: peel IMFs until the residue has < 2 maxima or minima."""
    if len(s) < 3:
        raise SignalError("signal too short to decompose")
    imfs, iters, conv = [], [], []
    residue = s
    while len(imfs) < cfg.max_imfs:
        if not _has_enough_extrema(find_extrema(residue)):
            break
        try:
            imf, k, ok = _extract(residue, cfg)
        except InsufficientExtremaError:
            break
        imfs.append(imf)
        iters.append(k)
        conv.append(ok)
        residue = residue.like(residue.samples - imf.samples)
    return ImfSet(tuple(imfs), residue, cfg, tuple(iters), tuple(conv))
