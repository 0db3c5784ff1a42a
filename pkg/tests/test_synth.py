import numpy as np
import pytest

from multisine_bla.design import REFERENCE_DESIGN, MultisineSpec, generate_multisine
from multisine_bla.errors import PlantError
from multisine_bla.pipeline import analyze_records
from multisine_bla.spectral import dft_period
from multisine_bla.synth import (
    PlantSpec,
    analytic_frf,
    load_plant,
    noise_std_for_gap,
    run_experiment,
    save_plant,
    simulate_plant,
)


class TestPlantSpec:
    def test_unstable(self):
        with pytest.raises(PlantError, match="unstable"):
            PlantSpec(denominator=(1.0, -1.2))

    def test_bad_kind(self):
        with pytest.raises(PlantError):
            PlantSpec(kind="narx")

    def test_zero_leading_denominator(self):
        with pytest.raises(PlantError):
            PlantSpec(denominator=(0.0, 1.0))

    def test_json_roundtrip(self, tmp_path):
        p = PlantSpec(kind="hammerstein", numerator=(0.1, 0.2), denominator=(1, -0.3), poly=(0, 1, 0.5),
                      noise_std=0.01, seed=4)
        assert load_plant(save_plant(p, tmp_path / "p.json")) == p


class TestSimulate:
    def test_identity(self):
        u = generate_multisine(REFERENCE_DESIGN, 0).reference_samples
        y = simulate_plant(PlantSpec(), u, 400)
        np.testing.assert_array_equal(y, u)

    def test_cubic_single_tone(self):
        n = np.arange(64)
        u = np.cos(2 * np.pi * 3 * n / 64)
        y = simulate_plant(PlantSpec(kind="wiener", poly=(0, 0, 0, 1)), u, 64)
        X = dft_period(y).coefficients
        # cos^3 = 3/4 cos + 1/4 cos(3x); one-sided lines carry half the amplitude
        assert 2 * abs(X[3]) == pytest.approx(0.75, abs=1e-12)
        assert 2 * abs(X[9]) == pytest.approx(0.25, abs=1e-12)
        mask = np.ones(X.size, bool)
        mask[[3, 9]] = False
        assert np.max(np.abs(X[mask])) < 1e-14

    def test_one_pole_matches_analytic(self):
        ex = generate_multisine(REFERENCE_DESIGN, 0)
        plant = PlantSpec(numerator=(1.0,), denominator=(1.0, -0.5))
        y = simulate_plant(plant, np.tile(ex.period, 2), 400, periods_to_settle=3)[-400:]
        G = dft_period(y).coefficients[ex.excited_bins] / dft_period(ex.period).coefficients[ex.excited_bins]
        np.testing.assert_allclose(G, analytic_frf(plant, ex.excited_bins * REFERENCE_DESIGN.f0), atol=1e-8)

    def test_steady_state_reached(self):
        # slow pole: the automatic settling must still leave periods identical
        ex = generate_multisine(REFERENCE_DESIGN, 0)
        plant = PlantSpec(numerator=(0.01,), denominator=(1.0, -0.99))
        y = simulate_plant(plant, np.tile(ex.period, 2), 400, periods_to_settle=1)
        rms = np.sqrt(np.mean(y**2))
        assert np.max(np.abs(y[:400] - y[400:])) < 1e-10 * rms

    def test_hammerstein_order(self):
        u = np.cos(2 * np.pi * np.arange(32) / 32)
        plant = PlantSpec(kind="hammerstein", numerator=(0.0, 1.0), poly=(0, 0, 1))
        y = simulate_plant(plant, u, 32)
        np.testing.assert_allclose(y, np.roll(u**2, 1), atol=1e-14)

    def test_not_periodic(self):
        with pytest.raises(PlantError, match="periodic"):
            simulate_plant(PlantSpec(), np.arange(20.0), 10)

    def test_noise_reproducible(self):
        u = generate_multisine(REFERENCE_DESIGN, 0).period
        p = PlantSpec(noise_std=0.1, seed=3)
        a = simulate_plant(p, u, 400, noise_stream=1)
        b = simulate_plant(p, u, 400, noise_stream=1)
        c = simulate_plant(p, u, 400, noise_stream=2)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)
        assert np.std(a - u) == pytest.approx(0.1, rel=0.15)


class TestAnalyticFrf:
    def test_identity(self):
        np.testing.assert_array_equal(analytic_frf(PlantSpec(), [0.0, 1.0, 3.0]), 1.0)

    def test_delay(self):
        plant = PlantSpec(numerator=(0, 0, 0, 1.0))
        f = np.array([0.1, 0.5, 2.0])
        G = analytic_frf(plant, f)
        np.testing.assert_allclose(np.abs(G), 1.0, rtol=1e-14)
        np.testing.assert_allclose(G, np.exp(-2j * np.pi * f * 3 / 31.25), rtol=1e-13)

    def test_one_pole_dc(self):
        assert analytic_frf(PlantSpec(denominator=(1, -0.5)), [0.0])[0] == pytest.approx(2.0)

    def test_requires_lti(self):
        with pytest.raises(PlantError):
            analytic_frf(PlantSpec(kind="wiener"), [0.1])


class TestRunExperiment:
    def test_default_shape(self):
        recs = run_experiment(PlantSpec(noise_std=1e-3), REFERENCE_DESIGN, 3, 2)
        assert len(recs) == 2
        for m, r in enumerate(recs):
            assert r.metadata.realization_index == m
            assert r.metadata.sample_rate_hz == 1000.0
            assert r.metadata.samples_per_period == 12800
            assert r.metadata.prefix_samples == 3200
            assert len(r.load) == 41600

    def test_minimal(self):
        spec = MultisineSpec(num_realizations=1)
        recs = run_experiment(PlantSpec(), spec, 1, 1)
        assert len(recs) == 1 and len(recs[0].load) == 16000
        np.testing.assert_array_equal(recs[0].load, recs[0].indentation)

    def test_rate_mismatch(self):
        with pytest.raises(PlantError):
            run_experiment(PlantSpec(sample_rate_hz=100.0), REFERENCE_DESIGN, 1, 1)

    def test_noise_calibration(self):
        # pilot: the analytic noise level lands the noise curve at the target gap
        spec = MultisineSpec(num_realizations=4, seed=1)
        gaps = []
        for rep in range(10):
            sd = noise_std_for_gap(30.0, 1.0, spec, 3, 4)
            recs = run_experiment(PlantSpec(noise_std=sd, seed=rep), spec, 3, 4)
            r = analyze_records(recs, spec).bla
            gaps.append(np.mean(-10 * np.log10(r.var_noise)))
        assert np.mean(gaps) == pytest.approx(30.0, abs=0.5)


def test_lti_pipeline_coverage():
    # estimate lands within 3 reported standard deviations in most repetitions
    plant = PlantSpec(numerator=(0.5,), denominator=(1.0, -0.5), noise_std=0.02)
    hits = []
    for rep in range(100):
        spec = MultisineSpec(num_realizations=4, seed=rep, upsample_factor=1, prefix_samples=0)
        r = analyze_records(run_experiment(plant.with_(seed=rep), spec, 4, 4), spec).bla
        err = np.abs(r.G_bla - analytic_frf(plant, r.freq_hz))
        hits.append(np.max(err / np.sqrt(r.var_noise)) <= 3)
    assert np.mean(hits) >= 0.95


@pytest.mark.parametrize("kind", ["wiener", "hammerstein"])
def test_nl_variance_vanishes_with_cubic(kind):
    spec = MultisineSpec(num_realizations=6, seed=3, upsample_factor=1, prefix_samples=0)
    levels = []
    for c in (100.0, 10.0, 0.0):
        plant = PlantSpec(kind=kind, numerator=(0.5,), denominator=(1, -0.5), poly=(0, 1, 0, c),
                          noise_std=1e-3, seed=1)
        r = analyze_records(run_experiment(plant, spec, 4, 6), spec).bla
        levels.append(np.median(r.var_nl))
        if c == 100.0:
            assert np.mean(r.var_nl > r.var_noise) > 0.5
    assert levels[0] > levels[1] > levels[2] or levels[2] == 0
    assert levels[2] <= 0.1 * levels[1]
