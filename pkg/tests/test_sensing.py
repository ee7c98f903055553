import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from foilskin.errors import CalibrationError
from foilskin.plant import rest_state
from foilskin.sensing import (BaselineReference, ElectrodePair, SkinModelParams, canonical_pairs,
                              compute_baseline, normalize_frame, normalize_values, rest_frame,
                              synth_capacitance, synth_values)
from foilskin.streams import CapacitanceFrame, CapacitanceStream

EXPECTED_PAIRS = [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5), (4, 5), (4, 6), (5, 6)]


def frame(values, t=0.0, kind="raw"):
    return CapacitanceFrame(t, np.asarray(values, dtype=float), kind)


class TestPairs:
    def test_canonical_list(self):
        pairs = canonical_pairs()
        assert len(pairs) == 9
        assert [(p.a, p.b) for p in pairs] == EXPECTED_PAIRS
        assert pairs[0].label == "c12" and pairs[-1].label == "c56"

    def test_unknown_pair(self):
        with pytest.raises(ValueError):
            ElectrodePair(1, 4)


class TestNormalize:
    def test_identity(self):
        ref = BaselineReference(np.linspace(1, 2, 9))
        assert np.all(normalize_frame(frame(ref.values), ref).values == 0)

    def test_double(self):
        ref = BaselineReference(np.linspace(1, 2, 9))
        assert np.allclose(normalize_frame(frame(2 * ref.values), ref).values, 1.0)

    def test_single_channel(self):
        ref = BaselineReference(np.ones(9))
        raw = np.ones(9)
        raw[4] = 1.10
        out = normalize_frame(frame(raw, t=3.5), ref)
        assert out.values[4] == pytest.approx(0.10) and out.kind == "normalized" and out.t == 3.5

    def test_rejects_normalized_input(self):
        ref = BaselineReference(np.ones(9))
        with pytest.raises(ValueError):
            normalize_frame(frame(np.zeros(9), kind="normalized"), ref)

    @pytest.mark.parametrize("bad", [np.zeros(9), -np.ones(9), np.ones(8)])
    def test_reference_must_be_positive(self, bad):
        with pytest.raises(CalibrationError):
            BaselineReference(bad)


class TestBaseline:
    def test_constant(self):
        assert np.allclose(compute_baseline([frame(np.full(9, 0.7), t) for t in range(5)]).values, 0.7)

    def test_two_frames(self):
        ref = compute_baseline([frame(np.ones(9)), frame(np.full(9, 3.0), 1.0)])
        assert np.allclose(ref.values, 2.0)

    def test_zero_channel(self):
        v = np.ones(9)
        v[2] = 0.0
        with pytest.raises(CalibrationError, match="c23"):
            compute_baseline(CapacitanceStream(np.arange(3.0), np.tile(v, (3, 1))))

    def test_empty(self):
        with pytest.raises(CalibrationError):
            compute_baseline([])


class TestSynthetic:
    def test_undeformed_equals_gains(self, plant):
        skin = SkinModelParams(noise_std=0.0)
        assert np.allclose(synth_values(0.0, skin, plant), skin.gains, rtol=1e-12)

    def test_five_vs_two_percent(self, plant, skin):
        lo = synth_values(2.0, skin, plant)
        hi = synth_values(5.0, skin, plant)
        assert np.all(lo != hi)
        # every channel drops as the tail bends further
        assert np.all(hi < lo)

    def test_monotone_per_channel(self, plant, skin):
        v = synth_values(np.linspace(0, 10, 201), skin, plant)
        assert np.all(np.diff(v, axis=0) < 0)

    def test_injective_on_grid(self, plant, skin):
        v = synth_values(np.arange(0, 9.01, 0.5), skin, plant)
        gaps = np.max(np.abs(v[:, None] - v[None]), axis=-1)
        np.fill_diagonal(gaps, np.inf)
        assert gaps.min() > 1e-3

    def test_deterministic_frames(self, plant, skin):
        state = rest_state(plant, 4.0, t=1.25)
        a = synth_capacitance(state, skin, plant)
        b = synth_capacitance(state, skin, plant)
        assert np.array_equal(a.values, b.values) and a.kind == "raw"
        other = synth_capacitance(state, SkinModelParams(seed=skin.seed + 1), plant)
        assert not np.array_equal(a.values, other.values)

    def test_noise_scale(self, plant, skin):
        rng = np.random.default_rng(0)
        clean = synth_values(np.full(20000, 5.0), SkinModelParams(noise_std=0), plant)
        noisy = synth_values(np.full(20000, 5.0), skin, plant, rng)
        assert np.std(noisy / clean - 1) == pytest.approx(skin.noise_std, rel=0.05)

    def test_rest_frame(self, plant, skin):
        ref = rest_frame(skin, plant)
        assert np.allclose(ref.values, synth_values(plant.camber_min, skin, plant))

    @pytest.mark.parametrize("kw", [dict(stations=(0.1, 0.2)), dict(noise_std=-1),
                                    dict(gains=(1.0,) * 8), dict(stations=(0.5, 0.4, 0.6, 0.7, 0.8, 0.9))])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            SkinModelParams(**kw)


positive = arrays(np.float64, (9,), elements=st.floats(1e-3, 1e3))


@settings(max_examples=100, deadline=None)
@given(window=arrays(np.float64, st.tuples(st.integers(1, 12), st.just(9)), elements=st.floats(1e-3, 1e3)))
def test_window_mean_normalises_to_zero(window):
    ref = compute_baseline([frame(row, i) for i, row in enumerate(window)])
    assert np.allclose(normalize_values(window.mean(axis=0), ref), 0.0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(raw=positive, ref=positive, scale=arrays(np.float64, (9,), elements=st.floats(1e-3, 1e3)))
def test_normalisation_scale_equivariance(raw, ref, scale):
    a = normalize_values(raw, BaselineReference(ref))
    b = normalize_values(raw * scale, BaselineReference(ref * scale))
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)
