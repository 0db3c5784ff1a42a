"""Best linear approximation with noise / nonlinear-distortion split.

Input is a stack of FRFs ``G[m, p, k]`` measured for M phase realizations
and P periods each. Scatter over periods measures noise; scatter over
realizations measures noise plus the stochastic nonlinear contributions.
All variances refer to the final averaged BLA estimate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError

__all__ = [
    "BlaResult",
    "DbCurves",
    "robust_bla",
    "variance_to_db",
    "nl_output_fraction",
    "write_bla_csv",
    "bla_to_dict",
    "CURVES_HEADER",
    "DB_SENTINEL",
]

DB_SENTINEL = -math.inf
GAIN_GUARD = 1e-12
CURVES_HEADER = ("freq_hz", "mag_db", "noise_var_db", "total_var_db", "nl_var_db", "dof_noise", "dof_total")


@dataclass
class BlaResult:
    excited_bins: np.ndarray
    freq_hz: np.ndarray
    G_bla: np.ndarray
    var_noise: np.ndarray | None
    var_total: np.ndarray | None
    var_nl: np.ndarray | None
    var_nl_raw: np.ndarray | None
    P: int
    M: int
    G_realizations: np.ndarray
    frf_method: str = "etfe"
    # optional LPM curve computed on period-averaged spectra
    G_lpm: np.ndarray | None = None
    var_lpm: np.ndarray | None = None
    plotted: str = "etfe"
    extra: dict = field(default_factory=dict)

    @property
    def dof_noise(self) -> int:
        """Complex degrees of freedom behind ``var_noise``."""
        return self.M * (self.P - 1)

    @property
    def dof_total(self) -> int:
        return self.M - 1

    @property
    def G_plotted(self) -> np.ndarray:
        return self.G_lpm if self.plotted == "lpm" and self.G_lpm is not None else self.G_bla


def robust_bla(frfs, excited_bins=None, freq_hz=None) -> BlaResult:
    """Robust BLA estimate from per-realization, per-period FRFs.

    Parameters
    ----------
    frfs : array_like, complex, shape (M, P, K)
    excited_bins, freq_hz : array_like, optional
        Grid labels for the K bins.

    Notes
    -----
    Per bin::

        G_m       = mean_p G[m, p]
        s2_m      = sum_p |G[m, p] - G_m|^2 / (P (P-1))
        G_bla     = mean_m G_m
        var_total = sum_m |G_m - G_bla|^2 / (M (M-1))
        var_noise = sum_m s2_m / M^2
        var_nl    = max(0, var_total - var_noise)

    ``var_noise`` is ``None`` when P < 2 and ``var_total`` when M < 2.
    """
    G = np.asarray(frfs, dtype=complex)
    if G.ndim != 3:
        raise ValueError(f"expected an (M, P, K) array, got shape {G.shape}")
    M, P, K = G.shape
    if M < 1 or P < 1 or K < 1:
        raise ValueError(f"need M >= 1, P >= 1 and at least one bin, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise NumericalError("non-finite FRF values")
    bins = np.arange(K) if excited_bins is None else np.asarray(excited_bins)
    freq = bins.astype(float) if freq_hz is None else np.asarray(freq_hz, dtype=float)
    if len(bins) != K or len(freq) != K:
        raise ValueError("bin labels do not match the FRF grid")

    Gm = G.mean(axis=1)
    Gbla = Gm.mean(axis=0)
    var_noise = None
    if P >= 2:
        s2 = np.sum(np.abs(G - Gm[:, None, :]) ** 2, axis=1) / (P * (P - 1))
        var_noise = s2.sum(axis=0) / M**2
    var_total = None
    if M >= 2:
        var_total = np.sum(np.abs(Gm - Gbla) ** 2, axis=0) / (M * (M - 1))
    var_nl = raw = None
    if var_noise is not None and var_total is not None:
        raw = var_total - var_noise
        var_nl = np.maximum(raw, 0.0)
    return BlaResult(bins, freq, Gbla, var_noise, var_total, var_nl, raw, P, M, Gm)


@dataclass(frozen=True)
class DbCurves:
    mag_db: np.ndarray
    noise_db: np.ndarray | None
    total_db: np.ndarray | None
    nl_db: np.ndarray | None


def _power_db(v):
    if v is None:
        return None
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, DB_SENTINEL)
    pos = v > 0
    out[pos] = 10 * np.log10(v[pos])
    return out


def variance_to_db(result: BlaResult) -> DbCurves:
    """Magnitude in dB (20 log10) and variances in dB (10 log10).

    Zero variances map to ``DB_SENTINEL`` (-inf); unavailable ones stay
    ``None``.
    """
    mag = np.abs(result.G_plotted)
    with np.errstate(divide="ignore"):
        mag_db = np.where(mag > 0, 20 * np.log10(np.where(mag > 0, mag, 1.0)), DB_SENTINEL)
    return DbCurves(mag_db, _power_db(result.var_noise), _power_db(result.var_total), _power_db(result.var_nl))


@dataclass(frozen=True)
class NlFraction:
    median: float
    per_bin: np.ndarray
    excluded_bins: list


def nl_output_fraction(result: BlaResult) -> NlFraction:
    """Relative output-level contribution of distortions.

    Per bin ``sqrt(var_total) / |G_bla|``, i.e. the standard deviation of the
    total distortion projected back to the output, relative to the linear
    response. Summary is the median over bins; bins where ``|G_bla|`` is
    below ``1e-12 * max|G_bla|`` are excluded (NaN per bin) and listed.
    """
    if result.var_total is None:
        raise ValueError("total variance unavailable (M < 2)")
    g = np.abs(result.G_bla)
    guard = GAIN_GUARD * (g.max() if g.size else 0.0)
    ok = g > guard
    frac = np.full(g.shape, np.nan)
    frac[ok] = np.sqrt(result.var_total[ok]) / g[ok]
    excluded = [int(b) for b in np.asarray(result.excited_bins)[~ok]]
    if not ok.any():
        raise NumericalError("BLA magnitude vanishes at every excited bin")
    return NlFraction(float(np.median(frac[ok])), frac, excluded)


def summary_metrics(result: BlaResult) -> dict:
    """Median magnitude, noise and total gaps (dB), NL output fraction."""
    curves = variance_to_db(result)
    out = {"median_mag_db": float(np.median(curves.mag_db)), "noise_gap_db": None,
           "total_gap_db": None, "nl_fraction": None}
    mag_bla = 20 * np.log10(np.abs(result.G_bla))
    if curves.noise_db is not None:
        out["noise_gap_db"] = float(np.median(mag_bla - curves.noise_db))
    if curves.total_db is not None:
        out["total_gap_db"] = float(np.median(mag_bla - curves.total_db))
        out["nl_fraction"] = nl_output_fraction(result).median
    return out


def _fmt(v) -> str:
    return repr(float(v))


def write_bla_csv(result: BlaResult, path) -> Path:
    """Plot-ready curves; unavailable variances are written as ``nan``."""
    path = Path(path)
    c = variance_to_db(result)
    K = len(result.excited_bins)
    nan = [math.nan] * K
    dof_n = result.dof_noise if result.var_noise is not None else 0
    dof_t = result.dof_total if result.var_total is not None else 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVES_HEADER)
        cols = [result.freq_hz, c.mag_db,
                nan if c.noise_db is None else c.noise_db,
                nan if c.total_db is None else c.total_db,
                nan if c.nl_db is None else c.nl_db]
        for j in range(K):
            w.writerow([_fmt(col[j]) for col in cols] + [dof_n, dof_t])
    return path


def _json_floats(a):
    if a is None:
        return None
    return [v if math.isfinite(v) else None for v in np.asarray(a, dtype=float).tolist()]


def _json_complex(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def bla_to_dict(result: BlaResult) -> dict:
    """Full JSON-ready representation (dB sentinels become ``null``)."""
    c = variance_to_db(result)
    return {
        "P": result.P,
        "M": result.M,
        "frf_method": result.frf_method,
        "plotted": result.plotted,
        "excited_bins": np.asarray(result.excited_bins).tolist(),
        "freq_hz": np.asarray(result.freq_hz, dtype=float).tolist(),
        "G_bla": _json_complex(result.G_bla),
        "G_realizations": [_json_complex(g) for g in result.G_realizations],
        "G_lpm": _json_complex(result.G_lpm),
        "var_lpm": _json_floats(result.var_lpm),
        "var_noise": _json_floats(result.var_noise),
        "var_total": _json_floats(result.var_total),
        "var_nl": _json_floats(result.var_nl),
        "var_nl_raw": _json_floats(result.var_nl_raw),
        "dof_noise": result.dof_noise if result.var_noise is not None else 0,
        "dof_total": result.dof_total if result.var_total is not None else 0,
        "mag_db": _json_floats(c.mag_db),
        "noise_var_db": _json_floats(c.noise_db),
        "total_var_db": _json_floats(c.total_db),
        "nl_var_db": _json_floats(c.nl_db),
        "summary": summary_metrics(result),
    }


def bla_from_dict(doc: dict) -> BlaResult:
    def cplx(d):
        return None if d is None else np.asarray(d["re"]) + 1j * np.asarray(d["im"])

    def arr(v):
        return None if v is None else np.asarray([0.0 if x is None else x for x in v], dtype=float)

    return BlaResult(
        excited_bins=np.asarray(doc["excited_bins"]),
        freq_hz=np.asarray(doc["freq_hz"], dtype=float),
        G_bla=cplx(doc["G_bla"]),
        var_noise=arr(doc["var_noise"]),
        var_total=arr(doc["var_total"]),
        var_nl=arr(doc["var_nl"]),
        var_nl_raw=arr(doc["var_nl_raw"]),
        P=doc["P"],
        M=doc["M"],
        G_realizations=np.stack([cplx(g) for g in doc["G_realizations"]]),
        frf_method=doc["frf_method"],
        G_lpm=cplx(doc.get("G_lpm")),
        var_lpm=arr(doc.get("var_lpm")),
        plotted=doc.get("plotted", "etfe"),
    )


def write_bla_json(result: BlaResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(bla_to_dict(result), indent=2) + "\n", encoding="utf-8")
    return path
