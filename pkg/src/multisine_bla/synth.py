"""Synthetic plants standing in for the measured system.

Plants are block-structured: a rational discrete-time filter G(z) at the
reference rate and a static polynomial f(v) = c_0 + c_1 v + ... + c_D v^D.

    lti          y = G u + e
    wiener       y = f(G u) + e
    hammerstein  y = G f(u) + e

with e white Gaussian output noise. Simulated channels are brought to the
acquisition rate by zero-order hold, so records have the same shape as
laboratory data.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .design import MultisineSpec, generate_multisine, phase_rng, zoh_upsample
from .errors import PlantError
from .records import MeasurementRecord, RecordMetadata

__all__ = [
    "PlantSpec",
    "simulate_plant",
    "analytic_frf",
    "run_experiment",
    "noise_std_for_gap",
    "save_plant",
    "load_plant",
]

KINDS = ("lti", "wiener", "hammerstein")
# noise streams are offset from phase streams so the two never coincide
NOISE_STREAM_OFFSET = 1 << 20


@dataclass(frozen=True)
class PlantSpec:
    kind: str = "lti"
    numerator: tuple = (1.0,)
    denominator: tuple = (1.0,)
    poly: tuple = (0.0, 1.0)
    noise_std: float = 0.0
    seed: int = 0
    sample_rate_hz: float = 31.25

    def __post_init__(self):
        object.__setattr__(self, "numerator", tuple(float(c) for c in self.numerator))
        object.__setattr__(self, "denominator", tuple(float(c) for c in self.denominator))
        object.__setattr__(self, "poly", tuple(float(c) for c in self.poly))
        if self.kind not in KINDS:
            raise PlantError(f"unknown plant kind {self.kind!r}; expected one of {KINDS}")
        if not self.numerator or not self.denominator:
            raise PlantError("filter coefficients must be non-empty")
        if self.denominator[0] == 0:
            raise PlantError("leading denominator coefficient must be nonzero")
        if self.noise_std < 0:
            raise PlantError("noise_std must be non-negative")
        if self.sample_rate_hz <= 0:
            raise PlantError("sample_rate_hz must be positive")
        r = self.pole_radius
        if not r < 1:
            raise PlantError(f"unstable filter: largest pole magnitude {r:.6g}")

    @property
    def poles(self) -> np.ndarray:
        den = np.trim_zeros(np.asarray(self.denominator), "b")
        if den.size < 2:
            return np.empty(0, dtype=complex)
        return np.roots(den)

    @property
    def pole_radius(self) -> float:
        p = self.poles
        return float(np.max(np.abs(p))) if p.size else 0.0

    def static(self, v: np.ndarray) -> np.ndarray:
        # highest power first for polyval
        return np.polyval(self.poly[::-1], v)

    def filter(self, v: np.ndarray) -> np.ndarray:
        return lfilter(self.numerator, self.denominator, v)

    def with_(self, **changes) -> "PlantSpec":
        d = asdict(self)
        d.update(changes)
        return PlantSpec(**d)


def save_plant(plant: PlantSpec, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(asdict(plant), indent=2) + "\n", encoding="utf-8")
    return path


def load_plant(path) -> PlantSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(doc) - set(PlantSpec.__dataclass_fields__)
    if unknown:
        raise PlantError(f"unknown plant fields: {sorted(unknown)}")
    return PlantSpec(**doc)


def _settle_periods(plant: PlantSpec, period: int, requested: int) -> int:
    r = plant.pole_radius
    if r == 0:
        return requested
    # transient decays like r^n; push it below 1e-12 of its initial size
    need = math.ceil(math.log(1e-12) / (period * math.log(r)))
    return max(requested, need)


def simulate_plant(
    plant: PlantSpec,
    u,
    period: int,
    periods_to_settle: int = 3,
    noise_stream: int = 0,
) -> np.ndarray:
    """Steady-state response of the plant to a periodic input.

    Parameters
    ----------
    u : array_like
        Input samples at the plant rate; must satisfy ``u[i] = u[i + period]``
        (any prefix that is the tail of a period qualifies).
    period : int
        Period length in samples.
    periods_to_settle : int
        Minimum number of periods simulated and discarded before ``u``.
        More are added automatically when the slowest pole needs them.
    noise_stream : int
        Selects the noise generator stream together with ``plant.seed``.
    """
    u = np.asarray(u, dtype=float)
    if periods_to_settle < 1:
        raise ValueError("periods_to_settle must be >= 1")
    if period < 1 or u.size < period:
        raise PlantError(f"input of {u.size} samples shorter than one period ({period})")
    scale = max(float(np.max(np.abs(u))), 1.0)
    if u.size > period and not np.allclose(u[period:], u[:-period], rtol=0, atol=1e-12 * scale):
        raise PlantError(f"input is not periodic with period {period}")
    S = _settle_periods(plant, period, periods_to_settle)
    lead = u[np.arange(-S * period, 0) % period]
    x = np.concatenate([lead, u])
    if plant.kind == "lti":
        y = plant.filter(x)
    elif plant.kind == "wiener":
        y = plant.static(plant.filter(x))
    else:
        y = plant.filter(plant.static(x))
    y = y[S * period:]
    if plant.noise_std > 0:
        rng = phase_rng(plant.seed, NOISE_STREAM_OFFSET + int(noise_stream))
        y = y + plant.noise_std * rng.standard_normal(y.size)
    return y


def analytic_frf(plant: PlantSpec, freq_hz) -> np.ndarray:
    """G(e^{j 2 pi f / fs}) for an ``lti`` plant."""
    if plant.kind != "lti":
        raise PlantError(f"analytic FRF only defined for lti plants, got {plant.kind!r}")
    f = np.asarray(freq_hz, dtype=float)
    zinv = np.exp(-2j * np.pi * f / plant.sample_rate_hz)
    num = np.polyval(plant.numerator[::-1], zinv)
    den = np.polyval(plant.denominator[::-1], zinv)
    return num / den


def run_experiment(
    plant: PlantSpec,
    design: MultisineSpec,
    P: int,
    M: int,
    phases: list | None = None,
    periods_to_settle: int = 3,
) -> list[MeasurementRecord]:
    """Simulate M realizations of prefix + P periods, at the acquisition rate.

    ``load`` carries the excitation, ``indentation`` the plant output.
    """
    if P < 1 or M < 1:
        raise ValueError(f"P and M must be >= 1, got P={P}, M={M}")
    if M > design.num_realizations:
        raise ValueError(f"design has {design.num_realizations} realizations, {M} requested")
    if not math.isclose(plant.sample_rate_hz, design.reference_rate_hz, rel_tol=1e-12):
        raise PlantError(
            f"plant rate {plant.sample_rate_hz} Hz differs from reference rate {design.reference_rate_hz} Hz"
        )
    N, L, pre = design.samples_per_period, design.upsample_factor, design.prefix_samples
    fs = design.acquisition_rate_hz
    records = []
    for m in range(M):
        ex = generate_multisine(design, m, None if phases is None else phases[m])
        u = np.concatenate([ex.period[N - pre:], np.tile(ex.period, P)]) if pre else np.tile(ex.period, P)
        y = simulate_plant(plant, u, N, periods_to_settle, noise_stream=m)
        u_acq = zoh_upsample(u, L)
        y_acq = zoh_upsample(y, L)
        meta = RecordMetadata(
            sample_rate_hz=fs,
            samples_per_period=N * L,
            prefix_samples=pre * L,
            num_periods=P,
            realization_index=m,
            channel_units={"load": "reference units", "indentation": "reference units"},
        )
        t = np.arange(u_acq.size) / fs
        records.append(MeasurementRecord(meta, t, u_acq, y_acq))
    return records


def noise_std_for_gap(gap_db: float, gain: float, design: MultisineSpec, P: int, M: int) -> float:
    """Output noise level placing the BLA noise-variance curve ``gap_db``
    below ``20 log10(gain)``.

    White noise of variance s^2 gives DFT lines of variance s^2/N under the
    1/N convention, and each tone reads A/2, so the noise variance of the
    P- and M-averaged estimate is s^2 / (N (A/2)^2 P M).
    """
    target = gain**2 * 10 ** (-gap_db / 10)
    N, A = design.samples_per_period, design.amplitude
    return math.sqrt(target * N * (A / 2) ** 2 * P * M)
