import hashlib
import json

import numpy as np
import pytest
from click.testing import CliRunner

from modemix.cli import cli
from modemix.io import read_imfs, read_signal


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)

    return invoke


@pytest.fixture
def case_csv(run, tmp_path):
    out = tmp_path / "synth"
    assert run("synth", "--case-study", "--out", out).exit_code == 0
    return out / "signal.csv"


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


class TestSynth:
    def test_case_study(self, case_csv):
        s = read_signal(case_csv)
        assert s.sample_rate == 1000.0 and len(s) == 2000
        m = manifest(case_csv.parent)
        assert m["command"] == "synth" and len(m["synthesis"]["tones"]) == 3
        assert m["artifacts"][0]["sha256"] == sha(case_csv)

    def test_tones_and_json(self, run, tmp_path):
        r = run("synth", "--tone", "1,10", "--tone", "0.5,20,0.3", "--dur", 1, "--rate", 500,
                "--format", "json", "--out", tmp_path)
        assert r.exit_code == 0
        s = read_signal(tmp_path / "signal.json")
        t = np.arange(500) / 500.0
        assert np.allclose(s.samples, np.sin(2 * np.pi * 10 * t) + 0.5 * np.sin(2 * np.pi * 20 * t + 0.3))

    def test_no_tones_warns(self, run, tmp_path):
        r = run("synth", "--out", tmp_path)
        assert r.exit_code == 0 and "warning" in r.output
        assert not read_signal(tmp_path / "signal.csv").samples.any()

    @pytest.mark.parametrize("tone", ["1", "x,10", "1,600"])
    def test_bad_tone(self, run, tmp_path, tone):
        assert run("synth", "--tone", tone, "--out", tmp_path).exit_code == 2

    def test_seed_recorded(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MODEMIX_SEED", "7")
        r = CliRunner().invoke(cli, ["synth", "--tone", "1,10", "--out", str(tmp_path)])
        assert r.exit_code == 0 and manifest(tmp_path)["seed"] == "7"


class TestDecompose:
    def test_case_study(self, run, case_csv, tmp_path):
        out = tmp_path / "dec"
        assert run("decompose", case_csv, "--out", out).exit_code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_significant"] == 2 and summary["reconstruction_error"] < 1e-8
        imfs, res = read_imfs(out / "imfs.csv")
        assert len(imfs) == summary["n_imfs"]
        m = manifest(out)
        assert m["inputs"][0]["sha256"] == sha(case_csv)
        assert m["config"]["sift"]["sd_threshold"] == 1e-3

    def test_mask_flags_delegate(self, run, case_csv, tmp_path):
        out = tmp_path / "dec"
        assert run("decompose", case_csv, "--mask-freq", 41.5, "--mask-amp", 2.5, "--out", out).exit_code == 0
        assert (out / "plan.json").exists()
        assert manifest(out)["command"] == "decompose"

    def test_bad_sift_option(self, run, case_csv, tmp_path):
        assert run("decompose", case_csv, "--max-imfs", 0, "--out", tmp_path).exit_code == 2

    def test_malformed_input(self, run, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,x\n0,1\n0.1,2\n0.35,3\n")
        assert run("decompose", bad, "--out", tmp_path / "o").exit_code == 2

    def test_input_not_overwritten(self, run, tmp_path):
        r = run("synth", "--tone", "1,10", "--out", tmp_path)
        assert r.exit_code == 0
        (tmp_path / "signal.csv").rename(tmp_path / "imfs.csv")
        before = sha(tmp_path / "imfs.csv")
        assert run("decompose", tmp_path / "imfs.csv", "--out", tmp_path).exit_code == 2
        assert sha(tmp_path / "imfs.csv") == before


class TestSeparate:
    def test_case_study(self, run, case_csv, tmp_path):
        before = sha(case_csv)
        assert run("separate", case_csv, "--out", tmp_path).exit_code == 0
        plan = json.loads((tmp_path / "plan.json").read_text())
        assert plan["predicted"] == "separable" and 40.1 < plan["f_m"] < 42.9
        assert plan["policy"]["name"] == "strict" and plan["rounds"][0]["action"] == "masked"
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["n_significant"] == 3
        assert sha(case_csv) == before

    def test_nyquist_mask_rejected(self, run, case_csv, tmp_path):
        assert run("separate", case_csv, "--mask-freq", 600, "--mask-amp", 2.5, "--out", tmp_path).exit_code == 2

    def test_no_mixture(self, run, tmp_path):
        run("synth", "--tone", "1,5", "--tone", "1,40", "--out", tmp_path / "s")
        assert run("separate", tmp_path / "s" / "signal.csv", "--out", tmp_path / "o").exit_code == 0
        plan = json.loads((tmp_path / "o" / "plan.json").read_text())
        assert plan["predicted"] is None

    def test_config_overrides_flags(self, run, case_csv, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"policy": "relaxed", "max-rounds": 1}))
        out = tmp_path / "o"
        assert run("separate", case_csv, "--policy", "strict", "--config", cfg, "--out", out).exit_code == 0
        m = manifest(out)
        assert m["params"]["policy"] == "relaxed" and m["params"]["max_rounds"] == 1

    @pytest.mark.parametrize("text", ['{"bogus": 1}', "[1, 2]", "{not json"])
    def test_bad_config(self, run, case_csv, tmp_path, text):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(text)
        assert run("separate", case_csv, "--config", cfg, "--out", tmp_path / "o").exit_code == 2


class TestAnalyze:
    def test_first_imf(self, run, case_csv, tmp_path):
        run("decompose", case_csv, "--out", tmp_path / "d")
        out = tmp_path / "a"
        assert run("analyze", tmp_path / "d" / "imfs.csv", "--imf", 1, "--out", out).exit_code == 0
        rep = json.loads((out / "estimate.json").read_text())
        assert rep["estimate"]["amp_hi_freq"] == pytest.approx(1.41, abs=0.07)
        assert rep["plan"]["predicted"] in ("separable", "marginal")
        header = (out / "tracks.csv").read_text().splitlines()
        assert any(h.startswith("t,") for h in header)

    def test_route_option(self, run, case_csv, tmp_path):
        run("decompose", case_csv, "--out", tmp_path / "d")
        out = tmp_path / "a"
        assert run("analyze", tmp_path / "d" / "imfs.csv", "--route", "fmin_equation", "--out", out).exit_code == 0
        assert json.loads((out / "estimate.json").read_text())["estimate"]["via"] == "fmin_equation"

    def test_plain_signal(self, run, tmp_path):
        run("synth", "--tone", "2,30", "--tone", "1,24", "--out", tmp_path / "s")
        out = tmp_path / "a"
        assert run("analyze", tmp_path / "s" / "signal.csv", "--out", out).exit_code == 0
        est = json.loads((out / "estimate.json").read_text())["estimate"]
        assert est["f1"] == pytest.approx(30.0, abs=0.3)

    def test_imf_out_of_range(self, run, case_csv, tmp_path):
        run("decompose", case_csv, "--out", tmp_path / "d")
        assert run("analyze", tmp_path / "d" / "imfs.csv", "--imf", 99, "--out", tmp_path / "a").exit_code == 2

    def test_zero_signal(self, run, tmp_path):
        run("synth", "--out", tmp_path / "s")
        assert run("analyze", tmp_path / "s" / "signal.csv", "--out", tmp_path / "a").exit_code == 2


class TestMap:
    @pytest.mark.parametrize("name", ["map", "boundary-map"])
    def test_small_grid(self, run, tmp_path, name):
        out = tmp_path / name
        args = ("--freq-steps", 2, "--amp-steps", 1, "--dur", 1, "--out", out)
        assert run(name, *args).exit_code == 0
        meta = json.loads((out / "map.json").read_text())
        assert len(meta["freq_ratios"]) == 2 and len(meta["log_amp_ratios"]) == 1
        assert run(name, *args).exit_code == 2
        assert run(name, *args, "--force").exit_code == 0

    def test_bad_steps(self, run, tmp_path):
        assert run("map", "--freq-steps", 0, "--out", tmp_path).exit_code == 2


class TestReplay:
    @pytest.mark.parametrize("cmd", [("separate",), ("decompose",), ("analyze", "--imf", "1")])
    def test_identical(self, run, case_csv, tmp_path, cmd):
        src = case_csv
        if cmd[0] == "analyze":
            run("decompose", case_csv, "--out", tmp_path / "d")
            src = tmp_path / "d" / "imfs.csv"
        first = tmp_path / "first"
        assert run(cmd[0], src, *cmd[1:], "--out", first).exit_code == 0
        r = run("replay", first / "manifest.json", "--out", tmp_path / "second", "--check")
        assert r.exit_code == 0 and "identical" in r.output
        for a in manifest(first)["artifacts"]:
            assert sha(first / a["path"]) == sha(tmp_path / "second" / a["path"])

    def test_synth_and_map(self, run, tmp_path):
        run("synth", "--case-study", "--out", tmp_path / "s")
        assert run("replay", tmp_path / "s" / "manifest.json", "--out", tmp_path / "s2", "--check").exit_code == 0
        run("map", "--freq-steps", 2, "--amp-steps", 1, "--dur", 1, "--out", tmp_path / "m")
        assert run("replay", tmp_path / "m" / "manifest.json", "--out", tmp_path / "m2", "--check").exit_code == 0

    def test_tampered_artifact(self, run, case_csv, tmp_path):
        out = tmp_path / "first"
        run("decompose", case_csv, "--out", out)
        m = manifest(out)
        m["artifacts"][0]["sha256"] = "0" * 64
        (out / "manifest.json").write_text(json.dumps(m))
        assert run("replay", out / "manifest.json", "--out", tmp_path / "second", "--check").exit_code == 1

    def test_unknown_command(self, run, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text(json.dumps({"command": "replay", "params": {}}))
        assert run("replay", p, "--out", tmp_path / "o").exit_code == 2


def test_version(run):
    r = run("--version")
    assert r.exit_code == 0 and "0.1.0" in r.output
