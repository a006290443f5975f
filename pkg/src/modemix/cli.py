"""``modemix`` command-line interface.

Every command writes its artifacts plus a ``manifest.json`` into ``--out``.
The manifest holds the fully resolved parameters, so ``modemix replay``
reproduces a run exactly.

Exit codes: 0 success (a diagnosed-infeasible separation included),
1 internal error, 2 invalid input.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import __version__
from .boundary_map import ExperimentConfig, default_axes, generate_map, save_map
from .emd import ImfSet, SiftConfig, decompose
from .errors import ModemixError
from .io import read_imfs, read_signal, read_table, same_file, write_imfs, write_signal, write_tracks
from .masking import MaskPolicy, design_mask, separate_all
from .signal import Signal, ToneSpec, Waveform, synthesize
from .spectral import analytic, fft_peaks, inst_track
from .twotone import AVERAGED, FMAX, FMIN, estimate_two_tone

log = logging.getLogger("modemix")

MANIFEST = "manifest.json"
SIGNIFICANT_ENERGY = 0.02


class InvalidInput(click.ClickException):
    exit_code = 2


class InternalError(click.ClickException):
    exit_code = 1


class _Group(click.Group):
    """Maps library errors onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except (ModemixError, OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(str(exc)) from exc
        except Exception as exc:  # noqa: BLE001
            log.debug("internal error", exc_info=True)
            raise InternalError(f"{type(exc).__name__}: {exc}") from exc


# ---------------------------------------------------------------- helpers

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=True) + "\n")


def _merge_config(params: dict) -> dict:
    """Apply ``--config`` on top of the command-line values."""
    cfg_path = params.pop("config", None)
    if not cfg_path:
        return params
    try:
        overrides = json.loads(Path(cfg_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {cfg_path}: {exc}") from None
    if not isinstance(overrides, dict):
        raise InvalidInput("config file must hold a JSON object")
    out = dict(params)
    for key, value in overrides.items():
        name = key.replace("-", "_")
        if name not in params or name == "out":
            raise InvalidInput(f"config key {key!r} is not an option of this command")
        out[name] = value
    return out


def _inputs(params: dict, keys) -> list[dict]:
    out = []
    for k in keys:
        p = params.get(k)
        if p:
            path = Path(p)
            out.append({"option": k, "path": str(path.resolve()), "sha256": _sha256(path)})
    return out


def _prepare_out(out) -> Path:
    d = Path(out)
    if d.exists() and not d.is_dir():
        raise InvalidInput(f"--out {d} exists and is not a directory")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _guard_inputs(out_dir: Path, names, inputs) -> None:
    for name in names:
        target = out_dir / name
        for item in inputs:
            if target.exists() and same_file(target, item["path"]):
                raise InvalidInput(f"refusing to overwrite input file {item['path']}")


def _sift_config(params: dict) -> SiftConfig:
    try:
        return SiftConfig(
            sd_threshold=float(params["sd_threshold"]),
            max_sift_iterations=int(params["max_sift"]),
            max_imfs=int(params["max_imfs"]),
            end_policy=params["end_policy"],
        )
    except ValueError as exc:
        raise InvalidInput(str(exc)) from None


def _finish(command: str, params: dict, out_dir: Path, inputs, artifacts, extra=None) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "params": _jsonable(params),
        "inputs": inputs,
        "out_dir": str(out_dir.resolve()),
        "artifacts": [{"path": a, "sha256": _sha256(out_dir / a)} for a in artifacts],
        "seed": os.environ.get("MODEMIX_SEED"),
    }
    if extra:
        manifest.update(_jsonable(extra))
    _write_json(out_dir / MANIFEST, manifest)
    for a in artifacts:
        click.echo(str(out_dir / a))
    return manifest


def _imf_summary(imfs: ImfSet, reference: Signal) -> dict:
    fractions = imfs.energy_fractions(reference)
    dominant = []
    for m in imfs.imfs:
        peaks = fft_peaks(m, 1) if len(m) >= 16 else []
        dominant.append(peaks[0].frequency if peaks else None)
    return {
        "n_imfs": len(imfs),
        "n_significant": int(np.sum(fractions > SIGNIFICANT_ENERGY)),
        "energy_fractions": fractions.tolist(),
        "dominant_frequency": dominant,
        "iterations": list(imfs.iterations),
        "converged": list(imfs.converged),
        "reconstruction_error": float(np.max(np.abs(imfs.reconstruct().samples - reference.samples)))
        if len(reference) else 0.0,
    }


# --------------------------------------------------------------- commands

def _parse_tone(text) -> ToneSpec:
    if isinstance(text, dict):
        return ToneSpec(**text)
    if isinstance(text, (list, tuple)):
        parts = [str(p) for p in text]
    else:
        parts = [p.strip() for p in str(text).split(",")]
    if not 2 <= len(parts) <= 4:
        raise InvalidInput(f"--tone expects A,F[,PHASE[,WAVE]], got {text!r}")
    try:
        amp, freq = float(parts[0]), float(parts[1])
        phase = float(parts[2]) if len(parts) > 2 else 0.0
        wave = Waveform(parts[3]) if len(parts) > 3 else Waveform.SINE
    except ValueError as exc:
        raise InvalidInput(f"bad --tone {text!r}: {exc}") from None
    return ToneSpec(amp, freq, phase, wave)


def _load_spec(spec, case_study: bool):
    if case_study:
        return json.loads((resources.files("modemix") / "data" / "case_study.json").read_text())
    if spec:
        return json.loads(Path(spec).read_text())
    return None


def run_synth(p: dict) -> dict:
    spec = _load_spec(p["spec"], p["case_study"])
    tones = [_parse_tone(t) for t in p["tone"]]
    dur, rate = p["dur"], p["rate"]
    if spec is not None:
        tones = [_parse_tone(t) for t in spec.get("tones", [])] + tones
        dur = spec.get("duration", dur) if p["dur_from_flag"] is False else dur
        rate = spec.get("sample_rate", rate) if p["rate_from_flag"] is False else rate
    if not tones:
        click.echo("warning: no tones given; writing an all-zero signal", err=True)
    s = synthesize(tones, float(dur), float(rate))
    inputs = _inputs(p, ["spec"])
    out = _prepare_out(p["out"])
    name = f"signal.{p['format']}"
    _guard_inputs(out, [name], inputs)
    write_signal(s, out / name, p["format"])
    return _finish("synth", p, out, inputs, [name], {
        "synthesis": {"duration": dur, "sample_rate": rate,
                      "tones": [dict(amplitude=t.amplitude, frequency=t.frequency, phase=t.phase,
                                     waveform=t.waveform.value) for t in tones]},
    })


def _mask_policy(p: dict) -> MaskPolicy:
    try:
        return MaskPolicy(
            name=p["policy"],
            frequency=p["mask_freq"],
            amplitude=p["mask_amp"],
            phase=float(p["mask_phase"]),
            waveform=Waveform(p["mask_waveform"]),
        )
    except ValueError as exc:
        raise InvalidInput(str(exc)) from None


def run_decompose(p: dict) -> dict:
    if p["mask_freq"] is not None or p["mask_amp"] is not None:
        log.info("mask flags present; delegating to separate")
        return run_separate(p, command="decompose")
    x = read_signal(p["input"])
    cfg = _sift_config(p)
    inputs = _inputs(p, ["input"])
    out = _prepare_out(p["out"])
    arts = ["imfs.csv", "summary.json"]
    _guard_inputs(out, arts, inputs)
    imfs = decompose(x, cfg)
    write_imfs(imfs, out / arts[0])
    _write_json(out / arts[1], _imf_summary(imfs, x))
    return _finish("decompose", p, out, inputs, arts, {"config": {"sift": cfg.to_dict()}})


def run_separate(p: dict, command: str = "separate") -> dict:
    x = read_signal(p["input"])
    cfg = _sift_config(p)
    policy = _mask_policy(p)
    if policy.frequency is not None and policy.frequency >= x.nyquist:
        raise InvalidInput(f"--mask-freq {policy.frequency:g} Hz is at or above Nyquist "
                           f"({x.nyquist:g} Hz)")
    inputs = _inputs(p, ["input"])
    out = _prepare_out(p["out"])
    arts = ["imfs.csv", "plan.json", "summary.json"]
    _guard_inputs(out, arts, inputs)
    result = separate_all(x, cfg, policy, max_rounds=int(p["max_rounds"]))
    rounds = [r.to_dict() for r in result.history]
    plans = [r for r in result.history if r.plan is not None]
    if plans:
        headline = plans[0].plan.to_dict()
    else:
        headline = {"predicted": None, "diagnosis": "no mixed IMF detected"}
    write_imfs(result, out / arts[0])
    _write_json(out / arts[1], {**headline, "policy": policy.to_dict(), "rounds": rounds})
    _write_json(out / arts[2], _imf_summary(result, x))
    for r in plans:
        if r.plan.predicted.value == "infeasible":
            click.echo(f"IMF {r.imf_index + 1}: infeasible ({r.plan.diagnosis}); left as-is", err=True)
    return _finish(command, p, out, inputs, arts,
                   {"config": {"sift": cfg.to_dict(), "policy": policy.to_dict()}})


def run_analyze(p: dict) -> dict:
    path = Path(p["input"])
    _, header, _ = read_table(path) if path.suffix.lower() != ".json" else ({}, [], None)
    k = int(p["imf"])
    if "residue" in header:
        imfs, _ = read_imfs(path)
        if not 1 <= k <= len(imfs):
            raise InvalidInput(f"--imf {k} out of range (file has {len(imfs)} IMFs)")
        target = imfs[k - 1]
    else:
        target = read_signal(path)
    track = inst_track(analytic(target))
    route = None if p["route"] == "auto" else p["route"]
    est = estimate_two_tone(track, route=route)
    inputs = _inputs(p, ["input"])
    out = _prepare_out(p["out"])
    arts = ["tracks.csv", "estimate.json"]
    _guard_inputs(out, arts, inputs)
    write_tracks(track, out / arts[0], target.t0)
    report = {"imf": k, "edge_guard": track.edge_guard, "estimate": est.to_dict()}
    if est.amp_lo_freq > 0 and est.f1 > est.f2 > 0:
        report["plan"] = design_mask(est, MaskPolicy(), target.nyquist).to_dict()
    _write_json(out / arts[1], report)
    return _finish("analyze", p, out, inputs, arts)


def run_map(p: dict) -> dict:
    fs, amp_steps = int(p["freq_steps"]), int(p["amp_steps"])
    if fs < 1 or amp_steps < 1:
        raise InvalidInput("grid steps must be >= 1")
    out = Path(p["out"])
    arts = ["map.csv", "map.json"]
    if not p["force"] and any((out / a).exists() for a in arts):
        raise InvalidInput(f"{out} already holds a map; pass --force to overwrite")
    out = _prepare_out(out)
    exp = ExperimentConfig(f_hi=float(p["f_hi"]), duration=float(p["dur"]),
                           sample_rate=float(p["rate"]), sift=_sift_config(p))
    grid = generate_map(*default_axes(fs, amp_steps), exp, workers=p["workers"])
    save_map(grid, out)
    return _finish("map", p, out, [], arts, {
        "config": {"experiment": exp.to_dict()},
        "summary": {
            "low_band_mean": grid.band_mean(0.0, 0.4) if np.any(grid.freq_ratios <= 0.4) else None,
            "high_band_mean": grid.band_mean(0.9, 1.0) if np.any(grid.freq_ratios >= 0.9) else None,
            "failed_cells": int(grid.failed.sum()),
        },
    })


RUNNERS = {
    "synth": run_synth,
    "decompose": run_decompose,
    "separate": run_separate,
    "analyze": run_analyze,
    "map": run_map,
}


def _run(ctx: click.Context, name: str, **fixups) -> None:
    params = _merge_config(dict(ctx.params))
    params.update(fixups)
    RUNNERS[name](params)


# ------------------------------------------------------------- click glue

def _common(f):
    f = click.option("--config", "config", type=click.Path(dir_okay=False),
                     help="JSON file whose keys override any option.")(f)
    f = click.option("--out", "out", required=True, type=click.Path(file_okay=False),
                     help="Output directory.")(f)
    return f


def _sift_options(f):
    f = click.option("--end-policy", default="mirror", show_default=True,
                     type=click.Choice(["mirror", "none"]))(f)
    f = click.option("--max-imfs", default=10, show_default=True, type=int)(f)
    f = click.option("--max-sift", default=100, show_default=True, type=int,
                     help="Sifting iteration cap per IMF.")(f)
    f = click.option("--sd-threshold", default=1e-3, show_default=True, type=float)(f)
    return f


def _mask_options(f):
    f = click.option("--max-rounds", default=4, show_default=True, type=int)(f)
    f = click.option("--mask-waveform", default="cosine", show_default=True,
                     type=click.Choice(["cosine", "sine"]))(f)
    f = click.option("--mask-phase", default=0.0, show_default=True, type=float)(f)
    f = click.option("--mask-amp", type=float, default=None, help="Override mask amplitude.")(f)
    f = click.option("--mask-freq", type=float, default=None, help="Override mask frequency (Hz).")(f)
    f = click.option("--policy", default="strict", show_default=True,
                     type=click.Choice(["strict", "relaxed"]))(f)
    return f


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="modemix")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def cli(verbose):
    """Mode-mixing analysis and masking-signal separation for EMD."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command("synth")
@click.option("--tone", multiple=True, help="A,F[,PHASE[,WAVE]]; repeatable.")
@click.option("--spec", type=click.Path(exists=True, dir_okay=False), help="JSON tone spec file.")
@click.option("--case-study", is_flag=True, help="Use the bundled 8/24/30 Hz tone set.")
@click.option("--dur", type=float, default=None, help="Duration in seconds [default: 2].")
@click.option("--rate", type=float, default=None, help="Sample rate in Hz [default: 1000].")
@click.option("--format", "format", default="csv", type=click.Choice(["csv", "json"]))
@_common
@click.pass_context
def cmd_synth(ctx, **_):
    """Render a sum of tones to a signal file."""
    p = ctx.params
    _run(ctx, "synth",
         dur_from_flag=p["dur"] is not None, rate_from_flag=p["rate"] is not None,
         dur=p["dur"] if p["dur"] is not None else 2.0,
         rate=p["rate"] if p["rate"] is not None else 1000.0)


@cli.command("decompose")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@_sift_options
@_mask_options
@_common
@click.pass_context
def cmd_decompose(ctx, **_):
    """Standard EMD of INPUT; with mask flags this runs ``separate``."""
    _run(ctx, "decompose")


@cli.command("separate")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@_sift_options
@_mask_options
@_common
@click.pass_context
def cmd_separate(ctx, **_):
    """EMD of INPUT with masking-signal separation of mixed IMFs."""
    _run(ctx, "separate")


@cli.command("analyze")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--imf", default=1, show_default=True, type=int, help="1-based IMF column.")
@click.option("--route", default="auto", show_default=True,
              type=click.Choice(["auto", FMAX, FMIN, AVERAGED]))
@_common
@click.pass_context
def cmd_analyze(ctx, **_):
    """Instantaneous tracks and two-tone estimate of one IMF (or a signal)."""
    _run(ctx, "analyze")


@cli.command("map")
@click.option("--freq-steps", default=20, show_default=True, type=int)
@click.option("--amp-steps", default=20, show_default=True, type=int)
@click.option("--f-hi", default=30.0, show_default=True, type=float)
@click.option("--dur", default=2.0, show_default=True, type=float)
@click.option("--rate", default=1000.0, show_default=True, type=float)
@click.option("--workers", default=None, type=int, help="Process pool size.")
@click.option("--force", is_flag=True, help="Overwrite an existing map in --out.")
@_sift_options
@_common
@click.pass_context
def cmd_map(ctx, **_):
    """Generate the frequency/amplitude ratio separation map."""
    _run(ctx, "map")


cli.add_command(cmd_map, "boundary-map")


@cli.command("replay")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
@click.option("--check", is_flag=True, help="Fail (exit 1) unless artifacts match bit for bit.")
def cmd_replay(manifest, out, check):
    """Re-run the command recorded in MANIFEST into --out."""
    m = json.loads(Path(manifest).read_text())
    name = m.get("command")
    runner = RUNNERS.get(name)
    if runner is None:
        raise InvalidInput(f"manifest command {name!r} cannot be replayed")
    params = dict(m["params"], out=out)
    if name == "map":
        params["force"] = True
    new = runner(params)
    if check:
        old = {a["path"]: a["sha256"] for a in m["artifacts"]}
        now = {a["path"]: a["sha256"] for a in new["artifacts"]}
        diff = sorted(k for k in old if old[k] != now.get(k))
        if diff:
            raise InternalError(f"replay differs in: {', '.join(diff)}")
        click.echo("replay identical", err=True)


def main(argv=None):
    cli.main(args=argv, prog_name="modemix")


if __name__ == "__main__":  # pragma: no cover
    main()
