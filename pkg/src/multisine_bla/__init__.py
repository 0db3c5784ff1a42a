"""Broadband frequency-domain identification with random-phase multisines.

Excitation design, record handling, DFT spectra, FRF estimation (per-period
division and the Local Polynomial Method), best linear approximation with
noise / nonlinear-distortion variance split, and synthetic block-structured
plants for end-to-end verification.
"""

__version__ = "0.1.0"

from .bla import BlaResult, nl_output_fraction, robust_bla, variance_to_db
from .design import (
    ExcitationSignal,
    MultisineSpec,
    crest_factor,
    generate_multisine,
    select_excited_bins,
    zoh_upsample,
)
from .errors import DesignError, MultisineBlaError, NumericalError, PlantError, RecordError
from .frf import FrfEstimate, LpmConfig, etfe_frf, lpm_frf
from .pipeline import analyze_records
from .records import (
    MeasurementRecord,
    PeriodBlock,
    RecordMetadata,
    drift_metric,
    read_record_csv,
    remove_mean,
    segment_periods,
    write_record_csv,
)
from .spectral import Spectrum, average_spectra, dft_period, spectra_of_block
from .synth import PlantSpec, analytic_frf, run_experiment, simulate_plant

__all__ = [
    "BlaResult",
    "DesignError",
    "ExcitationSignal",
    "FrfEstimate",
    "LpmConfig",
    "MeasurementRecord",
    "MultisineBlaError",
    "MultisineSpec",
    "NumericalError",
    "PeriodBlock",
    "PlantError",
    "PlantSpec",
    "RecordError",
    "RecordMetadata",
    "Spectrum",
    "analytic_frf",
    "analyze_records",
    "average_spectra",
    "crest_factor",
    "dft_period",
    "drift_metric",
    "etfe_frf",
    "generate_multisine",
    "lpm_frf",
    "nl_output_fraction",
    "read_record_csv",
    "remove_mean",
    "robust_bla",
    "run_experiment",
    "segment_periods",
    "select_excited_bins",
    "simulate_plant",
    "spectra_of_block",
    "variance_to_db",
    "write_record_csv",
    "zoh_upsample",
]
