"""Empirical two-tone separation map over frequency and amplitude ratios.

Each cell renders ``sin(2 pi f_hi t) + 10**r_a sin(2 pi r_f f_hi t)``,
decomposes it and scores how cleanly the high tone comes out as IMF 1.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .emd import SiftConfig, decompose
from .errors import ModemixError
from .signal import Signal, ToneSpec, synthesize

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "MapGrid",
    "separation_score",
    "imf1_correlation",
    "two_sided_correlation",
    "generate_map",
    "default_axes",
    "save_map",
    "load_map",
    "default_map",
]

SCORE_TAG = "two_sided_correlation"


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def imf1_correlation(x: Signal, imfs, hi: np.ndarray, lo: np.ndarray | None, guard: int) -> float:
    """Normalised correlation of IMF 1 with the rendered high tone.

    Blind to a weak low tone absorbed into IMF 1, so it reads ~1 across
    the whole low-amplitude half of the map.
    """
    sl = slice(guard, hi.size - guard)
    return _corr(imfs[0].samples[sl], hi[sl])


def two_sided_correlation(x: Signal, imfs, hi: np.ndarray, lo: np.ndarray | None, guard: int) -> float:
    """min(corr(IMF 1, high tone), corr(x - IMF 1, low tone)).

    The second term drops to ~0 when IMF 1 swallows the low tone, however
    small it is. Without a low tone only the first term applies.
    """
    sl = slice(guard, hi.size - guard)
    first = imfs[0].samples[sl]
    score = _corr(first, hi[sl])
    if lo is not None:
        score = min(score, _corr(x.samples[sl] - first, lo[sl]))
    return score


@dataclass(frozen=True)
class ExperimentConfig:
    f_hi: float = 30.0
    duration: float = 2.0
    sample_rate: float = 1000.0
    trials: int = 1
    guard_fraction: float = 0.05
    sift: SiftConfig = field(default_factory=SiftConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sift"] = self.sift.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["sift"] = SiftConfig.from_dict(d.get("sift", {}))
        return cls(**d)


def separation_score(x: Signal, tone_hi: ToneSpec, tone_lo: ToneSpec | None,
                     cfg: SiftConfig = SiftConfig(), guard_fraction: float = 0.05,
                     score_fn: Callable = two_sided_correlation, return_flag: bool = False):
    """Score in [0, 1]: 1 when IMF 1 is the high tone, low under mixing.

    Pass ``tone_lo=None`` for single-tone controls. A failed decomposition
    scores 0; with ``return_flag=True`` the result is ``(score, ok)``.
    """
    if tone_lo is not None:
        if tone_lo.frequency >= tone_hi.frequency:
            raise ModemixError("tone_lo must be below tone_hi")
        if tone_hi.frequency >= x.nyquist:
            raise ModemixError("tone_hi at or above Nyquist")
    hi = tone_hi.render(x.t)
    guard = int(round(guard_fraction * len(x)))
    try:
        imfs = decompose(x, cfg).imfs
    except ModemixError as exc:
        log.debug("decomposition failed: %s", exc)
        imfs = ()
    if not imfs:
        return (0.0, False) if return_flag else 0.0
    lo = tone_lo.render(x.t) if tone_lo is not None else None
    score = float(np.clip(score_fn(x, imfs, hi, lo, guard), 0.0, 1.0))
    return (score, True) if return_flag else score


def _cell(args):
    ratio, log_amp, exp = args
    hi = ToneSpec(1.0, exp.f_hi)
    lo = ToneSpec(10.0 ** log_amp, ratio * exp.f_hi)
    x = synthesize([hi, lo], exp.duration, exp.sample_rate)
    return separation_score(x, hi, lo, exp.sift, exp.guard_fraction, return_flag=True)


@dataclass(frozen=True, eq=False)
class MapGrid:
    """Scores indexed ``[amp_index, freq_index]``."""

    freq_ratios: np.ndarray
    log_amp_ratios: np.ndarray
    scores: np.ndarray
    config: ExperimentConfig = field(default_factory=ExperimentConfig)
    failed: np.ndarray | None = None
    score_tag: str = SCORE_TAG

    def __post_init__(self):
        fr = np.asarray(self.freq_ratios, dtype=float)
        la = np.asarray(self.log_amp_ratios, dtype=float)
        sc = np.asarray(self.scores, dtype=float)
        if sc.shape != (la.size, fr.size):
            raise ModemixError(f"score matrix {sc.shape} does not match axes ({la.size}, {fr.size})")
        if not np.all(np.isfinite(sc)) or sc.min(initial=0) < 0 or sc.max(initial=0) > 1:
            raise ModemixError("scores must be finite and in [0, 1]")
        object.__setattr__(self, "freq_ratios", fr)
        object.__setattr__(self, "log_amp_ratios", la)
        object.__setattr__(self, "scores", sc)
        if self.failed is None:
            object.__setattr__(self, "failed", np.zeros(sc.shape, dtype=bool))

    def lookup(self, freq_ratio: float, log_amp_ratio: float) -> float:
        """Bilinear interpolation, clamped to the nearest edge outside the grid."""
        fr, la = self.freq_ratios, self.log_amp_ratios
        f = float(np.clip(freq_ratio, fr[0], fr[-1]))
        a = float(np.clip(log_amp_ratio, la[0], la[-1]))
        if fr.size == 1 and la.size == 1:
            return float(self.scores[0, 0])
        if fr.size == 1:
            return float(np.interp(a, la, self.scores[:, 0]))
        if la.size == 1:
            return float(np.interp(f, fr, self.scores[0, :]))
        interp = RegularGridInterpolator((la, fr), self.scores)
        return float(interp([[a, f]])[0])

    def band_mean(self, lo: float, hi: float) -> float:
        cols = (self.freq_ratios >= lo) & (self.freq_ratios <= hi)
        return float(self.scores[:, cols].mean())


def _check_axis(name, axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ModemixError(f"{name} must be a non-empty 1-D sequence")
    if axis.size > 1 and np.any(np.diff(axis) <= 0):
        raise ModemixError(f"{name} must be sorted ascending")
    return axis


def default_axes(freq_steps: int = 20, amp_steps: int = 20):
    fr = np.linspace(0.05, 0.98, freq_steps) if freq_steps > 1 else np.array([0.25])
    la = np.linspace(-2.0, 2.0, amp_steps) if amp_steps > 1 else np.array([0.0])
    return fr, la


def generate_map(freq_axis, amp_axis, experiment: ExperimentConfig = ExperimentConfig(),
                 workers: int | None = None) -> MapGrid:
    """Score every (frequency ratio, log amplitude ratio) cell.

    Cells are independent; with ``workers > 1`` they run in a process pool
    and are placed back by index, so the result does not depend on the
    schedule.
    """
    fr = _check_axis("freq_axis", freq_axis)
    la = _check_axis("amp_axis", amp_axis)
    if fr[0] <= 0 or fr[-1] >= 1:
        raise ModemixError("frequency ratios must lie in (0, 1)")
    jobs = [(float(f), float(a), experiment) for a in la for f in fr]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs, chunksize=8))
    else:
        results = [_cell(j) for j in jobs]
    scores = np.array([r[0] for r in results]).reshape(la.size, fr.size)
    failed = ~np.array([r[1] for r in results]).reshape(la.size, fr.size)
    return MapGrid(fr, la, scores, experiment, failed)


def save_map(grid: MapGrid, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "map.csv"
    json_path = out / "map.json"
    np.savetxt(csv_path, grid.scores, delimiter=",", fmt="%.17g")
    meta = {
        "freq_ratios": grid.freq_ratios.tolist(),
        "log_amp_ratios": grid.log_amp_ratios.tolist(),
        "rows": "log_amp_ratios",
        "columns": "freq_ratios",
        "score": grid.score_tag,
        "failed_cells": [[int(i), int(j)] for i, j in zip(*np.nonzero(grid.failed))],
        "config": grid.config.to_dict(),
    }
    json_path.write_text(json.dumps(meta, indent=2))
    return [csv_path, json_path]


def load_map(path_dir) -> MapGrid:
    d = Path(path_dir)
    meta = json.loads((d / "map.json").read_text())
    scores = np.loadtxt(d / "map.csv", delimiter=",", ndmin=2)
    fr = np.asarray(meta["freq_ratios"], dtype=float)
    la = np.asarray(meta["log_amp_ratios"], dtype=float)
    scores = scores.reshape(la.size, fr.size)
    failed = np.zeros(scores.shape, dtype=bool)
    for i, j in meta.get("failed_cells", []):
        failed[i, j] = True
    return MapGrid(fr, la, scores, ExperimentConfig.from_dict(meta["config"]), failed,
                   meta.get("score", SCORE_TAG))


_DEFAULT = None


def default_map() -> MapGrid:
    """The bundled 20x20 map generated with the default experiment."""
    global _DEFAULT
    if _DEFAULT is None:
        from importlib import resources

        with resources.as_file(resources.files("modemix") / "data") as d:
            _DEFAULT = load_map(d)
    return _DEFAULT
