"""FRF estimation at the excited lines.

Two estimators:

* ``etfe_frf`` divides output by input spectrum line by line.
* ``lpm_frf`` is the Local Polynomial Method. Around every excited line k
  it fits, over a window of 2n+1 neighbouring excited lines with offsets r,

      Y[k+r] = (g_0 + g_1 r + ... + g_R r^R) U[k+r] + (t_0 + t_1 r + ... + t_R r^R)

  by complex least squares and keeps G(k) = g_0. The second polynomial
  absorbs transient and leakage terms, which are smooth in frequency.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .spectral import Spectrum

__all__ = ["LpmConfig", "FrfEstimate", "etfe_frf", "lpm_frf", "write_frf_csv", "DIV_GUARD"]

DIV_GUARD = 1e-12
MIN_DOF = 4


@dataclass(frozen=True)
class LpmConfig:
    poly_order: int = 2
    half_width: int | str = "auto"

    def __post_init__(self):
        if self.poly_order < 0:
            raise ValueError("poly_order must be non-negative")
        if self.half_width != "auto":
            if int(self.half_width) != self.half_width or self.half_width < 1:
                raise ValueError(f"half_width must be a positive integer or 'auto', got {self.half_width!r}")
            if self.dof < MIN_DOF:
                raise ValueError(
                    f"half_width {self.half_width} with order {self.poly_order} leaves {self.dof} residual dof (< {MIN_DOF})"
                )

    @property
    def n(self) -> int:
        if self.half_width == "auto":
            # smallest n with (2n+1) - 2(R+1) >= MIN_DOF
            return math.ceil((2 * (self.poly_order + 1) + MIN_DOF - 1) / 2)
        return int(self.half_width)

    @property
    def window(self) -> int:
        return 2 * self.n + 1

    @property
    def num_params(self) -> int:
        return 2 * (self.poly_order + 1)

    @property
    def dof(self) -> int:
        return self.window - self.num_params


@dataclass(frozen=True)
class FrfEstimate:
    excited_bins: np.ndarray
    freq_hz: np.ndarray
    G: np.ndarray
    noise_variance: np.ndarray | None
    method: str
    dof: np.ndarray | None = None
    residual_variance: np.ndarray | None = None

    def __post_init__(self):
        k = len(self.excited_bins)
        if len(self.freq_hz) != k or len(self.G) != k:
            raise ValueError("inconsistent FRF lengths")
        if self.noise_variance is not None:
            if len(self.noise_variance) != k or np.any(self.noise_variance < 0):
                raise ValueError("noise_variance must be non-negative with one value per bin")


def _excited(spectrum: Spectrum, excited_bins) -> np.ndarray:
    bins = np.asarray(excited_bins, dtype=int)
    if bins.ndim != 1 or bins.size == 0:
        raise ValueError("excited_bins must be a non-empty 1-D sequence")
    if bins.min() < 0 or bins.max() >= spectrum.coefficients.size:
        raise ValueError("excited bin outside the spectrum")
    return bins


def _check_input(U: Spectrum, bins: np.ndarray) -> np.ndarray:
    Uk = U.coefficients[bins]
    guard = DIV_GUARD * np.max(np.abs(U.coefficients))
    weak = np.flatnonzero(np.abs(Uk) <= guard)
    if weak.size:
        raise NumericalError(
            f"input spectrum vanishes at excited bin(s) {bins[weak].tolist()} (|U| <= {guard:.3g})"
        )
    return Uk


def etfe_frf(U: Spectrum, Y: Spectrum, excited_bins) -> FrfEstimate:
    """Empirical transfer function Y[k]/U[k] at the excited lines."""
    if not U.same_grid(Y):
        raise ValueError("U and Y are on different grids")
    bins = _excited(U, excited_bins)
    Uk = _check_input(U, bins)
    G = Y.coefficients[bins] / Uk
    return FrfEstimate(bins, U.bin_hz[bins], G, None, "etfe")


def _window_start(i: int, count: int, width: int) -> int:
    # shift inward at the band edges so every window keeps `width` lines
    return min(max(i - (width - 1) // 2, 0), count - width)


def lpm_frf(U: Spectrum, Y: Spectrum, excited_bins, config: LpmConfig | None = None) -> FrfEstimate:
    """Local Polynomial Method FRF on the excited lines.

    The output noise level is estimated from the residuals as
    sigma2 = SSR / q with q = (2n+1) - 2(R+1) degrees of freedom
    (``residual_variance``). The variance of G(k) itself is
    sigma2 * [(A^H A)^-1]_00 for the local regressor matrix A, computed from
    its SVD.

    Raises
    ------
    ValueError
        Fewer excited lines than one window needs.
    NumericalError
        Vanishing input at an excited line or a rank-deficient local fit.
    """
    config = config or LpmConfig()
    if not U.same_grid(Y):
        raise ValueError("U and Y are on different grids")
    bins = _excited(U, excited_bins)
    _check_input(U, bins)
    K = bins.size
    width, R, n = config.window, config.poly_order, config.n
    if K < width:
        raise ValueError(f"LPM window needs {width} excited bins, only {K} available")
    Ue = U.coefficients[bins]
    Ye = Y.coefficients[bins]
    q = config.dof
    G = np.empty(K, dtype=complex)
    var = np.empty(K)
    sigma2 = np.empty(K)
    powers = np.arange(R + 1)
    for i in range(K):
        s = _window_start(i, K, width)
        sl = slice(s, s + width)
        # offsets scaled by n for conditioning; g_0 is unaffected
        r = (bins[sl] - bins[i]) / n
        V = r[:, None] ** powers[None, :]
        # normalise by the local input level: G is unchanged, the transient
        # coefficients absorb the scale, and U, Y -> cU, cY only rotates A
        scale = np.sqrt(np.mean(np.abs(Ue[sl]) ** 2))
        A = np.hstack([V * (Ue[sl, None] / scale), V.astype(complex)])
        b = Ye[sl] / scale
        Us, sv, Vh = np.linalg.svd(A, full_matrices=False)
        if sv[-1] <= sv[0] * max(A.shape) * np.finfo(float).eps:
            raise NumericalError(f"rank-deficient local regression at bin {bins[i]}")
        theta = Vh.conj().T @ ((Us.conj().T @ b) / sv)
        res = b - A @ theta
        G[i] = theta[0]
        s2 = float(np.vdot(res, res).real) / q
        sigma2[i] = s2 * scale**2
        # [(A^H A)^-1]_00 from the SVD
        var[i] = s2 * float(np.sum(np.abs(Vh[:, 0]) ** 2 / sv**2))
    return FrfEstimate(bins, U.bin_hz[bins], G, var, "lpm", np.full(K, q), sigma2)


def _db_power(v):
    return 10 * math.log10(v) if v > 0 else -math.inf


def write_frf_csv(frf: FrfEstimate, path) -> Path:
    """``freq_hz,re_G,im_G,mag_db,noise_var_db,method``"""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "re_G", "im_G", "mag_db", "noise_var_db", "method"])
        for j in range(len(frf.excited_bins)):
            g = complex(frf.G[j])
            nv = "nan" if frf.noise_variance is None else repr(_db_power(float(frf.noise_variance[j])))
            w.writerow([repr(float(frf.freq_hz[j])), repr(g.real), repr(g.imag),
                        repr(_db_power(abs(g) ** 2)), nv, frf.method])
    return path
