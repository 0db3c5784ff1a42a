"""Random-phase multisine excitation design.

One period of the excitation is

    u(t_n) = sum_k A cos(2 pi k f0 t_n + phi_k),   t_n = n / fs,

with the tones placed on every DFT line inside ``[f_min_hz, f_max_hz]``
and phases drawn uniformly on ``[0, 2 pi)``. The reference-rate period is
preceded by a copy of its own tail (steady-state prefix) and finally
zero-order-hold upsampled to the acquisition rate.

Phases come from numpy's PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(realization_index,))``, so every
realization has its own reproducible stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DesignError

__all__ = [
    "MultisineSpec",
    "ExcitationSignal",
    "select_excited_bins",
    "generate_multisine",
    "phase_rng",
    "zoh_upsample",
    "crest_factor",
    "save_design",
    "load_design",
    "REFERENCE_DESIGN",
]


@dataclass(frozen=True)
class MultisineSpec:
    """Full parameterization of a multisine excitation design."""

    reference_rate_hz: float = 31.25
    samples_per_period: int = 400
    f_min_hz: float = 0.06
    f_max_hz: float = 1.0
    amplitude: float = 0.02
    num_realizations: int = 1
    seed: int = 0
    prefix_samples: int = 100
    upsample_factor: int = 32

    def __post_init__(self):
        if not (self.reference_rate_hz > 0 and math.isfinite(self.reference_rate_hz)):
            raise DesignError(f"reference_rate_hz must be positive, got {self.reference_rate_hz}")
        if int(self.samples_per_period) != self.samples_per_period or self.samples_per_period < 1:
            raise DesignError(f"samples_per_period must be a positive integer, got {self.samples_per_period}")
        if not 0 < self.f_min_hz <= self.f_max_hz:
            raise DesignError(
                f"band must satisfy 0 < f_min <= f_max, got [{self.f_min_hz}, {self.f_max_hz}]"
            )
        if self.f_max_hz >= self.reference_rate_hz / 2:
            raise DesignError(
                f"f_max_hz={self.f_max_hz} must lie below Nyquist ({self.reference_rate_hz / 2} Hz)"
            )
        if self.num_realizations < 1:
            raise DesignError("num_realizations must be >= 1")
        if not 0 <= self.prefix_samples < self.samples_per_period:
            raise DesignError("prefix_samples must satisfy 0 <= prefix < samples_per_period")
        if self.upsample_factor < 1:
            raise DesignError("upsample_factor must be >= 1")

    @property
    def f0(self) -> float:
        """Frequency resolution in Hz."""
        return self.reference_rate_hz / self.samples_per_period

    @property
    def acquisition_rate_hz(self) -> float:
        return self.reference_rate_hz * self.upsample_factor


# Values used for the single-cell measurements.
REFERENCE_DESIGN = MultisineSpec(
    reference_rate_hz=1000 / 32,
    samples_per_period=400,
    f_min_hz=0.06,
    f_max_hz=1.0,
    amplitude=0.02,
    num_realizations=2,
    seed=7,
    prefix_samples=100,
    upsample_factor=32,
)


@dataclass(frozen=True)
class ExcitationSignal:
    spec: MultisineSpec
    realization_index: int
    excited_bins: np.ndarray
    phases: np.ndarray
    period: np.ndarray
    reference_samples: np.ndarray
    upsampled_samples: np.ndarray = field(repr=False)


def select_excited_bins(spec: MultisineSpec) -> np.ndarray:
    """Return the DFT lines ``k`` with ``k * f0`` inside the excitation band.

    Band edges are rounded inward, so no tone falls outside
    ``[f_min_hz, f_max_hz]``. Bin 0 and lines at or above ``N/2`` are never
    returned.

    Raises
    ------
    DesignError
        If the band contains no DFT bin.
    """
    f0 = spec.f0
    n = spec.samples_per_period
    # tolerate round-off when a band edge sits exactly on a line
    lo = math.ceil(spec.f_min_hz / f0 - 1e-9)
    hi = math.floor(spec.f_max_hz / f0 + 1e-9)
    lo = max(lo, 1)
    hi = min(hi, (n - 1) // 2)
    if hi < lo:
        raise DesignError(
            f"band contains no DFT bin: [{spec.f_min_hz}, {spec.f_max_hz}] Hz with f0={f0} Hz"
        )
    return np.arange(lo, hi + 1)


def phase_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for one (seed, stream) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


def _multisine_period(bins, amplitude, phases, n):
    t = np.arange(n)
    # angle 2 pi k n / N evaluated on integers mod N keeps large k*n exact
    arg = 2 * np.pi * ((np.outer(bins, t)) % n) / n + phases[:, None]
    return (amplitude * np.cos(arg)).sum(axis=0)


def generate_multisine(
    spec: MultisineSpec, realization_index: int, phases: np.ndarray | None = None
) -> ExcitationSignal:
    """Generate one phase realization of the design.

    Parameters
    ----------
    spec : MultisineSpec
    realization_index : int
        Index in ``[0, spec.num_realizations)``.
    phases : array_like, optional
        Explicit phases (one per excited bin). When omitted they are drawn
        from ``phase_rng(spec.seed, realization_index)``.
    """
    if not 0 <= realization_index < spec.num_realizations:
        raise DesignError(
            f"realization_index {realization_index} outside [0, {spec.num_realizations})"
        )
    bins = select_excited_bins(spec)
    if phases is None:
        phases = phase_rng(spec.seed, realization_index).uniform(0.0, 2 * np.pi, size=bins.size)
    else:
        phases = np.asarray(phases, dtype=float)
        if phases.shape != bins.shape:
            raise DesignError(f"expected {bins.size} phases, got {phases.shape}")
    n = spec.samples_per_period
    period = _multisine_period(bins, spec.amplitude, phases, n)
    p = spec.prefix_samples
    reference = np.concatenate([period[n - p:], period]) if p else period.copy()
    return ExcitationSignal(
        spec=spec,
        realization_index=realization_index,
        excited_bins=bins,
        phases=phases,
        period=period,
        reference_samples=reference,
        upsampled_samples=zoh_upsample(reference, spec.upsample_factor),
    )


def zoh_upsample(samples, factor: int) -> np.ndarray:
    """Zero-order hold: repeat every sample ``factor`` times."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    return np.repeat(np.asarray(samples, dtype=float), int(factor))


def crest_factor(samples) -> float:
    """Peak-to-RMS ratio ``max|x| / rms(x)``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("crest factor of an empty sequence is undefined")
    rms = math.sqrt(float(np.mean(x * x)))
    if rms == 0:
        raise ValueError("crest factor undefined for zero-RMS signal")
    return float(np.max(np.abs(x))) / rms


def design_document(spec: MultisineSpec) -> dict:
    """JSON-ready design: spec fields, excited bins and all phase arrays."""
    bins = select_excited_bins(spec)
    doc = asdict(spec)
    doc["excited_bins"] = bins.tolist()
    doc["excited_freq_hz"] = (bins * spec.f0).tolist()
    doc["phases"] = [
        generate_multisine(spec, m).phases.tolist() for m in range(spec.num_realizations)
    ]
    return doc


def save_design(spec: MultisineSpec, path) -> dict:
    doc = design_document(spec)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def load_design(path) -> tuple[MultisineSpec, list[np.ndarray]]:
    """Read a design file; returns the spec and the stored phase arrays."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    fields = MultisineSpec.__dataclass_fields__
    try:
        spec = MultisineSpec(**{k: doc[k] for k in fields})
    except KeyError as exc:
        raise DesignError(f"design file {path} lacks field {exc}") from None
    phases = [np.asarray(p, dtype=float) for p in doc.get("phases", [])]
    if len(phases) != spec.num_realizations:
        raise DesignError(f"design file {path} stores {len(phases)} phase arrays, expected {spec.num_realizations}")
    stored = doc.get("excited_bins")
    if stored is not None and list(stored) != select_excited_bins(spec).tolist():
        raise DesignError(f"design file {path}: excited bins disagree with band definition")
    return spec, phases
