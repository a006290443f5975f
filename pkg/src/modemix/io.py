"""Signal, IMF and track serialisation (CSV and JSON).

CSV files carry an optional ``# sample_rate=<Hz>`` comment line ahead of
the header. Values are written with ``repr`` precision so a write/read
round trip is exact.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .errors import FormatError, SignalError
from .signal import Signal

__all__ = [
    "read_signal",
    "write_signal",
    "write_imfs",
    "read_imfs",
    "write_tracks",
    "read_table",
]

STEP_JITTER = 1e-9


def _fmt(v: float) -> str:
    return repr(float(v))


def _infer_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("csv", "json"):
            raise FormatError(f"unknown signal format {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    return "json" if suffix == ".json" else "csv"


def read_table(path) -> tuple[dict, list[str], np.ndarray]:
    """Read a commented CSV into (metadata, column names, 2-D array)."""
    meta: dict = {}
    rows = []
    header = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            cells = next(csv.reader([stripped]))
            if header is None:
                header = [c.strip() for c in cells]
                continue
            if len(cells) != len(header):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if header is None:
        raise FormatError(f"{path}: no header row")
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return meta, header, np.asarray(rows, dtype=float)


def _rate_from_times(t: np.ndarray) -> float:
    if t.size < 2:
        raise FormatError("cannot infer sample_rate from a single time stamp")
    steps = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    if step <= 0:
        raise FormatError("time column must be increasing")
    if np.max(np.abs(steps - step)) > STEP_JITTER * step + 1e-12 * max(1.0, abs(t[-1])):
        raise FormatError("non-uniform sampling: time steps are irregular")
    return 1.0 / step


def _grid_from_csv(meta, header, data, path):
    rate = None
    if "sample_rate" in meta:
        try:
            rate = float(meta["sample_rate"])
        except ValueError:
            raise FormatError(f"{path}: bad sample_rate {meta['sample_rate']!r}") from None
    t0 = float(meta.get("t0", 0.0))
    if "t" in header:
        t = data[:, header.index("t")]
        t0 = float(t[0])
        if t.size >= 2:
            inferred = _rate_from_times(t)
            if rate is None:
                rate = inferred
            elif abs(inferred - rate) > 1e-6 * rate:
                raise FormatError(
                    f"{path}: t column implies {inferred:g} Hz but sample_rate={rate:g}"
                )
    if rate is None:
        raise FormatError(f"{path}: missing sample_rate metadata")
    return rate, t0


def read_signal(path, format: str | None = None) -> Signal:
    """Load a Signal from CSV (``t,value``) or JSON."""
    fmt = _infer_format(path, format)
    try:
        if fmt == "json":
            with open(path) as fh:
                try:
                    obj = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}: {exc}") from None
            if not isinstance(obj, dict) or "samples" not in obj:
                raise FormatError(f"{path}: expected an object with 'samples'")
            if "sample_rate" not in obj:
                raise FormatError(f"{path}: missing sample_rate")
            return Signal(obj["samples"], obj["sample_rate"], obj.get("t0", 0.0))
        meta, header, data = read_table(path)
        if "value" not in header:
            raise FormatError(f"{path}: no 'value' column")
        rate, t0 = _grid_from_csv(meta, header, data, path)
        return Signal(data[:, header.index("value")], rate, t0)
    except SignalError as exc:
        raise FormatError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from None


def _write_columns(path, names, columns, rate, t0=None):
    buf = io.StringIO()
    buf.write(f"# sample_rate={_fmt(rate)}\n")
    if t0 is not None:
        buf.write(f"# t0={_fmt(t0)}\n")
    buf.write(",".join(names) + "\n")
    for row in zip(*columns):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def write_signal(s: Signal, path, format: str | None = None) -> None:
    fmt = _infer_format(path, format)
    if fmt == "json":
        obj = {"sample_rate": s.sample_rate, "t0": s.t0, "samples": s.samples.tolist()}
        Path(path).write_text(json.dumps(obj))
        return
    _write_columns(path, ["t", "value"], [s.t, s.samples], s.sample_rate, s.t0)


def write_imfs(imfset, path) -> None:
    """Write an ImfSet as ``t,imf1,...,imfN,residue``."""
    res = imfset.residue
    names = ["t"] + [f"imf{k}" for k in range(1, len(imfset.imfs) + 1)] + ["residue"]
    cols = [res.t] + [m.samples for m in imfset.imfs] + [res.samples]
    _write_columns(path, names, cols, res.sample_rate, res.t0)


def read_imfs(path) -> tuple[list[Signal], Signal]:
    """Read an IMF CSV back into (imfs, residue)."""
    meta, header, data = read_table(path)
    if "residue" not in header:
        raise FormatError(f"{path}: no 'residue' column")
    rate, t0 = _grid_from_csv(meta, header, data, path)
    imf_cols = sorted(
        (h for h in header if h.startswith("imf") and h[3:].isdigit()),
        key=lambda h: int(h[3:]),
    )
    imfs = [Signal(data[:, header.index(h)], rate, t0) for h in imf_cols]
    residue = Signal(data[:, header.index("residue")], rate, t0)
    return imfs, residue


def write_tracks(track, path, t0: float = 0.0) -> None:
    """Write an InstTrack as ``t,inst_amplitude,inst_frequency``."""
    n = track.amplitude.size
    t = t0 + np.arange(n) / track.sample_rate
    _write_columns(
        path,
        ["t", "inst_amplitude", "inst_frequency"],
        [t, track.amplitude, track.frequency],
        track.sample_rate,
        t0,
    )


def ensure_dir(path, force: bool = False) -> Path:
    p = Path(path)
    if p.exists() and not p.is_dir():
        raise FormatError(f"{p} exists and is not a directory")
    p.mkdir(parents=True, exist_ok=True)
    return p


def same_file(a, b) -> bool:
    try:
        return os.path.samefile(a, b)
    except OSError:
        return False
