import numpy as np
import pytest

from modemix.boundary_map import (
    ExperimentConfig,
    MapGrid,
    default_axes,
    default_map,
    generate_map,
    imf1_correlation,
    load_map,
    save_map,
    separation_score,
)
from modemix.errors import ModemixError
from modemix.signal import ToneSpec, synthesize

FS = 1000.0


def pair(ratio, log_amp=0.0, f_hi=30.0):
    hi, lo = ToneSpec(1.0, f_hi), ToneSpec(10.0 ** log_amp, ratio * f_hi)
    return synthesize([hi, lo], 2.0, FS), hi, lo


class TestScore:
    def test_well_separated(self):
        x, hi, lo = pair(0.125)
        assert separation_score(x, hi, lo) > 0.95

    def test_mixed(self):
        x, hi, lo = pair(0.97)
        assert separation_score(x, hi, lo) < 0.5

    def test_single_tone(self):
        hi = ToneSpec(1.0, 30.0)
        x = synthesize([hi], 2.0, FS)
        assert separation_score(x, hi, None) == pytest.approx(1.0, abs=1e-3)

    def test_weak_absorbed_tone_penalised(self):
        # IMF 1 alone looks clean; the two-sided score sees the lost tone.
        x, hi, lo = pair(0.9, -1.0)
        two_sided = separation_score(x, hi, lo)
        one_sided = separation_score(x, hi, lo, score_fn=imf1_correlation)
        assert one_sided > 0.95 and two_sided < 0.5

    def test_failed_decomposition_flagged(self):
        hi = ToneSpec(1.0, 30.0)
        x = synthesize([], 2.0, FS)
        assert separation_score(x, hi, None, return_flag=True) == (0.0, False)

    def test_rejects_order(self):
        x, hi, lo = pair(0.5)
        with pytest.raises(ModemixError):
            separation_score(x, lo, hi)

    @pytest.mark.parametrize("ratio,la", [(0.3, -1.5), (0.8, 0.5), (0.6, 2.0)])
    def test_in_unit_interval(self, ratio, la):
        x, hi, lo = pair(ratio, la)
        assert 0.0 <= separation_score(x, hi, lo) <= 1.0


class TestGrid:
    def test_single_cell(self):
        g = generate_map([0.25], [0.0])
        assert g.scores.shape == (1, 1) and g.scores[0, 0] > 0.95
        assert g.lookup(0.9, 3.0) == g.scores[0, 0]

    @pytest.mark.parametrize("fr,la", [([0.5, 0.3], [0.0]), ([0.3], [1.0, -1.0]), ([], [0.0]),
                                       ([0.0, 0.5], [0.0]), ([0.5, 1.0], [0.0])])
    def test_bad_axes(self, fr, la):
        with pytest.raises(ModemixError):
            generate_map(fr, la)

    def test_shape_checked(self):
        with pytest.raises(ModemixError):
            MapGrid(np.array([0.1, 0.2]), np.array([0.0]), np.zeros((2, 2)))
        with pytest.raises(ModemixError):
            MapGrid(np.array([0.1]), np.array([0.0]), np.array([[1.5]]))

    def test_workers_do_not_change_result(self):
        fr, la = default_axes(3, 2)
        serial = generate_map(fr, la)
        parallel = generate_map(fr, la, workers=2)
        assert np.array_equal(serial.scores, parallel.scores)

    def test_save_load_round_trip(self, tmp_path):
        g = generate_map([0.2, 0.7], [-1.0, 1.0], ExperimentConfig(duration=1.0))
        paths = save_map(g, tmp_path)
        assert sorted(p.name for p in paths) == ["map.csv", "map.json"]
        back = load_map(tmp_path)
        assert np.array_equal(back.scores, g.scores)
        assert np.array_equal(back.freq_ratios, g.freq_ratios)
        assert back.config == g.config and back.score_tag == g.score_tag

    def test_lookup_interpolates_and_clamps(self):
        g = MapGrid(np.array([0.2, 0.8]), np.array([-1.0, 1.0]), np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert g.lookup(0.5, 0.0) == pytest.approx(0.5)
        assert g.lookup(0.05, -5.0) == pytest.approx(1.0)
        assert g.lookup(0.99, 5.0) == pytest.approx(0.0)


class TestDefaultMap:
    def test_bundled_matches_fresh_generation(self):
        bundled = default_map()
        fresh = generate_map(bundled.freq_ratios, bundled.log_amp_ratios, bundled.config)
        assert np.allclose(bundled.scores, fresh.scores, atol=1e-12)

    def test_trend(self):
        g = default_map()
        low, high = g.band_mean(0.0, 0.4), g.band_mean(0.9, 1.0)
        assert low - high >= 0.3
        assert not g.failed.any()

    def test_low_ratio_band_separates(self):
        g = default_map()
        core = g.scores[np.ix_(np.abs(g.log_amp_ratios) <= 0.5, g.freq_ratios <= 0.5)]
        assert core.min() >= 0.8
