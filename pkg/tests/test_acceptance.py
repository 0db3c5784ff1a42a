"""Acceptance suite: one test per criterion, each with its runtime budget."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from multisine_bla.bla import robust_bla, summary_metrics
from multisine_bla.cli import main
from multisine_bla.design import REFERENCE_DESIGN, generate_multisine
from multisine_bla.pipeline import analyze_records
from multisine_bla.records import MeasurementRecord
from multisine_bla.spectral import dft_period
from multisine_bla.synth import PlantSpec, analytic_frf, noise_std_for_gap, run_experiment, save_plant

pytestmark = pytest.mark.acceptance

ONE_POLE = dict(numerator=(0.5,), denominator=(1.0, -0.5))


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_excitation_fidelity(verdict):
    with Clock() as clk:
        ex = generate_multisine(REFERENCE_DESIGN, 0)
        mags = np.abs(dft_period(ex.period).coefficients[ex.excited_bins])
        rms = math.sqrt(np.mean(ex.period**2))
    ok = (
        ex.excited_bins.tolist() == list(range(1, 13))
        and ex.reference_samples.size == 500
        and ex.upsampled_samples.size == 16000
        and np.max(np.abs(mags - 0.01)) <= 1e-12
        # 0.04899 is 0.02*sqrt(6) rounded; compare with the exact value
        and abs(rms - 0.02 * math.sqrt(6)) <= 1e-10
        and clk.elapsed < 1.0
    )
    verdict(1, "excitation fidelity", ok,
            f"bins={ex.excited_bins.size} ref={ex.reference_samples.size} up={ex.upsampled_samples.size} "
            f"max|DFT-0.01|={np.max(np.abs(mags - 0.01)):.1e} rms={rms:.10f} t={clk.elapsed:.2f}s")
    assert ok


def test_linear_plant_oracle(verdict):
    plants = {
        "identity": PlantSpec(noise_std=0.005),
        "delay": PlantSpec(numerator=(0.0, 0.0, 1.0), noise_std=0.005),
        "one-pole": PlantSpec(**ONE_POLE, noise_std=0.005),
    }
    design = replace(REFERENCE_DESIGN, num_realizations=4)
    fractions = {}
    with Clock() as clk:
        for j, (name, plant) in enumerate(plants.items()):
            inside = []
            for rep in range(100):
                seed = 1000 * (j + 1) + rep
                d = replace(design, seed=seed)
                bla = analyze_records(run_experiment(plant.with_(seed=seed), d, 4, 4), d).bla
                err = np.abs(bla.G_bla - analytic_frf(plant, bla.freq_hz))
                inside.append(err <= 3 * np.sqrt(bla.var_noise))
            fractions[name] = float(np.mean(inside))
    ok = all(f >= 0.95 for f in fractions.values()) and clk.elapsed < 60
    verdict(2, "linear-plant oracle", ok,
            " ".join(f"{k}={v:.4f}" for k, v in fractions.items()) + f" t={clk.elapsed:.1f}s")
    assert ok


def test_noise_calibration(verdict):
    plant = PlantSpec(**ONE_POLE)
    P, M = 3, 2
    design = REFERENCE_DESIGN
    with Clock() as clk:
        freqs = generate_multisine(design, 0).excited_bins * design.f0
        gain = float(np.median(np.abs(analytic_frf(plant, freqs))))
        sd = noise_std_for_gap(30.0, gain, design, P, M)
        bla = analyze_records(run_experiment(plant.with_(noise_std=sd, seed=11), design, P, M), design).bla
        gap = summary_metrics(bla)["noise_gap_db"]
    ok = abs(gap - 30.0) <= 2.0 and clk.elapsed < 30
    verdict(3, "noise calibration", ok, f"noise gap={gap:.2f} dB (sigma={sd:.3e}) t={clk.elapsed:.2f}s")
    assert ok


def wiener(c, noise_std):
    return PlantSpec(kind="wiener", **ONE_POLE, poly=(0.0, 1.0, c, c), noise_std=noise_std, seed=21)


def test_nonlinearity_consistency(verdict):
    design, P, M = REFERENCE_DESIGN, 3, 2
    with Clock() as clk:
        sd = noise_std_for_gap(30.0, 1.0, design, P, M)

        def total_gap(log_c):
            bla = analyze_records(run_experiment(wiener(math.exp(log_c), sd), design, P, M), design).bla
            return summary_metrics(bla)["total_gap_db"] - 10.0

        # scan for the first sign change, then refine on the measured experiment
        grid = np.log(np.geomspace(0.1, 100.0, 16))
        vals = [total_gap(g) for g in grid]
        k = next(i for i in range(len(grid) - 1) if vals[i] > 0 >= vals[i + 1])
        log_c = brentq(total_gap, grid[k], grid[k + 1], xtol=1e-6)
        bla = analyze_records(run_experiment(wiener(math.exp(log_c), sd), design, P, M), design).bla
        s = summary_metrics(bla)
    ok = abs(s["total_gap_db"] - 10.0) <= 1.0 and abs(s["nl_fraction"] - 0.32) <= 0.05 and clk.elapsed < 60
    verdict(4, "10 dB vs 30% consistency", ok,
            f"c={math.exp(log_c):.3f} total gap={s['total_gap_db']:.3f} dB "
            f"NL fraction={s['nl_fraction']:.4f} t={clk.elapsed:.1f}s")
    assert ok


def test_transient_suppression(verdict):
    plant = PlantSpec(**ONE_POLE)
    design = replace(REFERENCE_DESIGN, num_realizations=1)
    with Clock() as clk:
        rec = run_experiment(plant, design, 1, 1)[0]
        meta = rec.metadata
        # decaying transient starting with the analysed period, held like the input
        n = np.arange(design.samples_per_period)
        tail = np.repeat(0.05 * 0.5**n, design.upsample_factor)
        y = rec.indentation.copy()
        y[meta.prefix_samples:] += tail
        rec = MeasurementRecord(meta, rec.time_s, rec.load, y)
        an = analyze_records([rec], design, method="lpm")
        G0 = analytic_frf(plant, an.bla.freq_hz)
        bias_div = float(np.median(np.abs(an.bla.G_bla - G0)))
        bias_lpm = float(np.median(np.abs(an.bla.G_lpm - G0)))
    ratio = bias_lpm / bias_div
    ok = ratio <= 0.1 and clk.elapsed < 30
    verdict(5, "LPM transient suppression", ok,
            f"median bias LPM={bias_lpm:.3e} division={bias_div:.3e} ratio={ratio:.4f} t={clk.elapsed:.2f}s")
    assert ok


def test_robust_statistics_exactness(verdict):
    g, d, e = 1.0 - 0.5j, 0.3 + 0.1j, 0.05 - 0.02j
    checks = {}
    with Clock() as clk:
        # realizations at g +- d, periods at +- e around each realization mean
        G = np.array([[[g + d + e], [g + d - e]], [[g - d + e], [g - d - e]]])
        r = robust_bla(G)
        checks["G_bla"] = r.G_bla[0] == g
        checks["sample var 2d^2"] = math.isclose(np.var(G.mean(1)[:, 0], ddof=1), 2 * abs(d) ** 2, rel_tol=1e-14)
        checks["var_total"] = math.isclose(r.var_total[0], 2 * abs(d) ** 2 / (2 * 1), rel_tol=1e-14)
        checks["var_noise"] = math.isclose(r.var_noise[0], (2 * abs(e) ** 2 / 2) * 2 / 4, rel_tol=1e-14)
        checks["var_nl"] = math.isclose(r.var_nl[0], abs(d) ** 2 - abs(e) ** 2 / 2, rel_tol=1e-12)

        rp = robust_bla(G[::-1, ::-1])
        checks["permutation"] = (np.allclose(rp.G_bla, r.G_bla, rtol=1e-15, atol=0)
                                 and math.isclose(rp.var_total[0], r.var_total[0], rel_tol=1e-14)
                                 and math.isclose(rp.var_noise[0], r.var_noise[0], rel_tol=1e-14))

        # period scatter larger than realization scatter: clamp to zero, keep raw
        big = np.array([[[g + 0.01 + 0.5], [g + 0.01 - 0.5]], [[g - 0.01 + 0.5], [g - 0.01 - 0.5]]])
        rc = robust_bla(big)
        checks["clamp"] = rc.var_nl[0] == 0.0 and math.isclose(rc.var_nl_raw[0], 0.01**2 - 0.125, rel_tol=1e-12)
    ok = all(checks.values()) and clk.elapsed < 1
    failed = [k for k, v in checks.items() if not v]
    verdict(6, "robust-statistics exactness", ok,
            f"{len(checks) - len(failed)}/{len(checks)} checks{' failed: ' + ','.join(failed) if failed else ''} "
            f"t={clk.elapsed * 1e3:.1f}ms")
    assert ok


def run_chain(root):
    plant = PlantSpec(kind="wiener", **ONE_POLE, poly=(0.0, 1.0, 5.0, 5.0), noise_std=1e-3, seed=3)
    save_plant(plant, root / "plant.json")
    codes = [
        main(["design", "--realizations", "2", "--seed", "7", "--out-dir", str(root)]),
        main(["simulate", "--design", str(root / "design.json"), "--plant", str(root / "plant.json"),
              "--periods", "3", "--out-dir", str(root)]),
        main(["analyze", str(root / "record_r0.csv"), str(root / "record_r1.csv"),
              "--design", str(root / "design.json"), "--out-dir", str(root)]),
        main(["report", "--report", str(root / "report.json"), "--out-dir", str(root / "figures")]),
    ]
    return codes


def test_determinism(tmp_path, verdict):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    with Clock() as clk:
        codes = run_chain(a) + run_chain(b)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    other = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    differing = [str(f) for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    ok = codes == [0] * 8 and files == other and not differing and len(files) >= 11 and clk.elapsed < 30
    verdict(7, "determinism", ok,
            f"{len(files)} files compared, {len(differing)} differ, exit codes={codes} t={clk.elapsed:.1f}s")
    assert ok
