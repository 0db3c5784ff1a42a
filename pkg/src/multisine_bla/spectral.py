"""DFT spectra of steady-state periods.

Forward transform is scaled by 1/N and stored one-sided (bins 0..N//2):

    X[k] = (1/N) sum_n x[n] exp(-j 2 pi k n / N)

so a cosine of amplitude A on line k reads |X[k]| = A/2. No window is
applied.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import PeriodBlock

__all__ = [
    "Spectrum",
    "BlockSpectra",
    "dft_period",
    "spectra_of_block",
    "average_spectra",
    "write_spectrum_csv",
    "SCALING",
]

SCALING = "1/N, one-sided"


@dataclass(frozen=True)
class Spectrum:
    coefficients: np.ndarray
    n_samples: int
    sample_rate_hz: float = 1.0
    scaling: str = SCALING

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.coefficients.size)

    @property
    def bin_hz(self) -> np.ndarray:
        return self.bins * self.sample_rate_hz / self.n_samples

    def same_grid(self, other: "Spectrum") -> bool:
        return (
            self.n_samples == other.n_samples
            and self.sample_rate_hz == other.sample_rate_hz
            and self.scaling == other.scaling
        )

    def __getitem__(self, k):
        return self.coefficients[k]


@dataclass(frozen=True)
class BlockSpectra:
    """Per-period spectra of both channels; ``U[p]``, ``Y[p]``."""

    U: list[Spectrum]
    Y: list[Spectrum]

    def u_matrix(self) -> np.ndarray:
        return np.stack([s.coefficients for s in self.U])

    def y_matrix(self) -> np.ndarray:
        return np.stack([s.coefficients for s in self.Y])


def dft_period(samples, sample_rate_hz: float = 1.0) -> Spectrum:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft_period expects a non-empty 1-D sequence")
    X = np.fft.rfft(x) / x.size
    X[0] = X[0].real
    return Spectrum(X, x.size, float(sample_rate_hz))


def spectra_of_block(block: PeriodBlock, sample_rate_hz: float = 1.0) -> BlockSpectra:
    n = block.samples_per_period
    U = np.fft.rfft(block.periods_u, axis=1) / n
    Y = np.fft.rfft(block.periods_y, axis=1) / n
    U[:, 0] = U[:, 0].real
    Y[:, 0] = Y[:, 0].real
    fs = float(sample_rate_hz)
    return BlockSpectra(
        [Spectrum(row, n, fs) for row in U],
        [Spectrum(row, n, fs) for row in Y],
    )


def average_spectra(spectra) -> tuple[Spectrum, np.ndarray | None]:
    """Per-bin complex mean and sample variance over periods.

    The variance is ``1/(P-1) * sum_p |X_p - mean|^2``; it is ``None`` for a
    single spectrum (no degrees of freedom).
    """
    spectra = list(spectra)
    if not spectra:
        raise ValueError("need at least one spectrum")
    first = spectra[0]
    for s in spectra[1:]:
        if not first.same_grid(s) or s.coefficients.shape != first.coefficients.shape:
            raise ValueError("spectra are on different frequency grids")
    X = np.stack([s.coefficients for s in spectra])
    mean = X.mean(axis=0)
    var = None
    if len(spectra) > 1:
        var = np.sum(np.abs(X - mean) ** 2, axis=0) / (len(spectra) - 1)
    return Spectrum(mean, first.n_samples, first.sample_rate_hz, first.scaling), var


def write_spectrum_csv(spectrum: Spectrum, path) -> Path:
    """``bin,freq_hz,re,im`` rows for one channel of one period."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "freq_hz", "re", "im"])
        for k, f, c in zip(spectrum.bins.tolist(), spectrum.bin_hz.tolist(), spectrum.coefficients.tolist()):
            w.writerow([k, repr(f), repr(c.real), repr(c.imag)])
    return path
