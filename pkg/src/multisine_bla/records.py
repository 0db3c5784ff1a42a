"""Two-channel measurement records: CSV/JSON I/O, period segmentation,
mean removal and set-point drift.

Channel orientation follows the identification setup: ``load`` is the
input u(t), ``indentation`` the output y(t).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import RecordError

__all__ = [
    "RecordMetadata",
    "MeasurementRecord",
    "PeriodBlock",
    "SegmentedBlock",
    "CenteredBlock",
    "DriftSummary",
    "CSV_HEADER",
    "read_record_csv",
    "write_record_csv",
    "sidecar_path",
    "segment_periods",
    "remove_mean",
    "drift_metric",
]

CSV_HEADER = ("time_s", "load", "indentation")
DEFAULT_DRIFT_THRESHOLD = 0.05


@dataclass(frozen=True)
class RecordMetadata:
    sample_rate_hz: float = 1000.0
    samples_per_period: int = 12800
    prefix_samples: int = 3200
    num_periods: int = 1
    realization_index: int = 0
    channel_units: dict = field(default_factory=lambda: {"load": "", "indentation": ""})
    probe_stiffness_n_per_m: float | None = None
    tip_diameter_um: float | None = None

    @property
    def expected_length(self) -> int:
        return self.prefix_samples + self.num_periods * self.samples_per_period

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RecordMetadata":
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        meta = cls(**known)
        if meta.sample_rate_hz <= 0 or meta.samples_per_period < 1 or meta.num_periods < 1:
            raise RecordError(f"invalid record metadata: {doc}")
        if meta.prefix_samples < 0:
            raise RecordError("prefix_samples must be non-negative")
        return meta

    def acquisition_key(self) -> tuple:
        """Fields that must agree between records of one experiment."""
        return (self.sample_rate_hz, self.samples_per_period, self.prefix_samples, self.num_periods)


@dataclass(frozen=True)
class MeasurementRecord:
    metadata: RecordMetadata
    time_s: np.ndarray
    load: np.ndarray
    indentation: np.ndarray

    def __post_init__(self):
        n = len(self.time_s)
        if len(self.load) != n or len(self.indentation) != n:
            raise RecordError(
                f"channel lengths differ: time {n}, load {len(self.load)}, indentation {len(self.indentation)}"
            )
        for name in ("time_s", "load", "indentation"):
            bad = np.flatnonzero(~np.isfinite(getattr(self, name)))
            if bad.size:
                raise RecordError(f"non-finite {name} value at row {bad[0]}")
        if n > 1:
            steps = np.diff(self.time_s)
            if np.any(steps <= 0):
                row = int(np.flatnonzero(steps <= 0)[0]) + 1
                raise RecordError(f"time not strictly increasing at row {row}")
            dt = 1.0 / self.metadata.sample_rate_hz
            if abs(float(np.mean(steps)) - dt) > 1e-6 * dt:
                raise RecordError(
                    f"mean time step {np.mean(steps)!r} s disagrees with sample rate {self.metadata.sample_rate_hz} Hz"
                )
        if n < self.metadata.expected_length:
            raise RecordError(
                f"record has {n} samples, metadata requires {self.metadata.expected_length}"
            )


@dataclass(frozen=True)
class PeriodBlock:
    """P periods per channel, shape ``(P, N)``."""

    periods_u: np.ndarray
    periods_y: np.ndarray

    def __post_init__(self):
        if self.periods_u.ndim != 2 or self.periods_u.shape != self.periods_y.shape:
            raise RecordError(f"period arrays must share a 2-D shape, got {self.periods_u.shape} and {self.periods_y.shape}")
        if self.periods_u.shape[0] < 1:
            raise RecordError("a period block needs at least one period")

    @property
    def num_periods(self) -> int:
        return self.periods_u.shape[0]

    @property
    def samples_per_period(self) -> int:
        return self.periods_u.shape[1]


@dataclass(frozen=True)
class SegmentedBlock:
    block: PeriodBlock
    dropped_samples: int


@dataclass(frozen=True)
class CenteredBlock:
    block: PeriodBlock
    mean_u: float
    mean_y: float


def sidecar_path(path) -> Path:
    """``record.csv`` -> ``record.meta.json``."""
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def write_record_csv(record: MeasurementRecord, path) -> Path:
    """Write a record and its metadata sidecar.

    Floats are written with ``repr``, which round-trips binary64 exactly.
    """
    path = Path(path)
    rows = [",".join(CSV_HEADER)]
    rows.extend(
        f"{t!r},{u!r},{y!r}"
        for t, u, y in zip(record.time_s.tolist(), record.load.tolist(), record.indentation.tolist())
    )
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    sidecar_path(path).write_text(json.dumps(record.metadata.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_record_csv(path, metadata: RecordMetadata | None = None) -> MeasurementRecord:
    """Parse a ``time_s,load,indentation`` CSV into a validated record.

    When ``metadata`` is omitted it is read from the ``.meta.json`` sidecar.
    Row numbers in error messages count data rows from 0.
    """
    path = Path(path)
    if metadata is None:
        side = sidecar_path(path)
        if not side.exists():
            raise RecordError(f"metadata sidecar {side} not found")
        metadata = RecordMetadata.from_dict(json.loads(side.read_text(encoding="utf-8")))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RecordError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise RecordError(f"{path}: header {header!r} is not {','.join(CSV_HEADER)}")
        data = []
        for i, row in enumerate(reader):
            if len(row) != 3:
                raise RecordError(f"{path}: malformed row {i}: expected 3 fields, got {len(row)}")
            try:
                vals = tuple(float(v) for v in row)
            except ValueError:
                raise RecordError(f"{path}: malformed row {i}: {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise RecordError(f"{path}: non-finite value in row {i}")
            data.append(vals)
    if not data:
        raise RecordError(f"{path}: no data rows")
    arr = np.array(data, dtype=float)
    return MeasurementRecord(metadata, arr[:, 0], arr[:, 1], arr[:, 2])


def segment_periods(record: MeasurementRecord) -> SegmentedBlock:
    """Drop the prefix and cut ``num_periods`` contiguous periods per channel.

    Trailing samples beyond ``prefix + P * N`` are discarded; their count is
    returned as ``dropped_samples``.
    """
    meta = record.metadata
    need = meta.expected_length
    have = len(record.load)
    if have < need:
        raise RecordError(f"insufficient record length: need {need} samples, have {have}")
    p0, n, P = meta.prefix_samples, meta.samples_per_period, meta.num_periods
    u = np.asarray(record.load[p0:need], dtype=float).reshape(P, n).copy()
    y = np.asarray(record.indentation[p0:need], dtype=float).reshape(P, n).copy()
    return SegmentedBlock(PeriodBlock(u, y), have - need)


def remove_mean(block: PeriodBlock) -> CenteredBlock:
    """Subtract the grand mean of each channel over all periods jointly."""
    mu = float(np.mean(block.periods_u))
    my = float(np.mean(block.periods_y))
    u = block.periods_u - mu
    y = block.periods_y - my
    # second pass removes the rounding residue of the first
    u -= np.mean(u)
    y -= np.mean(y)
    return CenteredBlock(PeriodBlock(u, y), mu, my)


@dataclass(frozen=True)
class DriftSummary:
    period_mean_load: list[np.ndarray]
    period_mean_indentation: list[np.ndarray]
    record_mean_load: np.ndarray
    record_mean_indentation: np.ndarray
    absolute_shift: np.ndarray
    relative_shift: np.ndarray  # NaN where the reference mean load is zero
    flagged: list[int]
    threshold: float

    def to_dict(self) -> dict:
        def nan_to_none(a):
            return [None if not math.isfinite(v) else v for v in np.asarray(a, dtype=float).tolist()]

        return {
            "period_mean_load": [m.tolist() for m in self.period_mean_load],
            "period_mean_indentation": [m.tolist() for m in self.period_mean_indentation],
            "record_mean_load": self.record_mean_load.tolist(),
            "record_mean_indentation": self.record_mean_indentation.tolist(),
            "absolute_shift": self.absolute_shift.tolist(),
            "relative_shift": nan_to_none(self.relative_shift),
            "flagged": list(self.flagged),
            "threshold": self.threshold,
        }


def drift_metric(records, threshold: float = DEFAULT_DRIFT_THRESHOLD) -> DriftSummary:
    """Per-period set-point levels and the load shift of every record
    relative to the first one.

    ``relative_shift[0]`` is always 0. Records whose ``|relative_shift|``
    exceeds ``threshold`` are listed in ``flagged``. When the first record
    has zero mean load (e.g. a centred synthetic excitation) relative
    shifts are undefined (NaN) and nothing is flagged; absolute shifts are
    still reported.
    """
    records = list(records)
    if not records:
        raise RecordError("drift_metric needs at least one record")
    key = records[0].metadata.acquisition_key()
    for i, r in enumerate(records[1:], start=1):
        if r.metadata.acquisition_key() != key:
            raise RecordError(f"record {i} metadata inconsistent with record 0")
    per_u, per_y = [], []
    for r in records:
        blk = segment_periods(r).block
        per_u.append(blk.periods_u.mean(axis=1))
        per_y.append(blk.periods_y.mean(axis=1))
    mean_u = np.array([m.mean() for m in per_u])
    mean_y = np.array([m.mean() for m in per_y])
    shift = mean_u - mean_u[0]
    ref = abs(mean_u[0])
    scale = float(np.sqrt(np.mean(segment_periods(records[0]).block.periods_u ** 2)))
    if ref > 1e-12 * scale and ref > 0:
        rel = shift / ref
        flagged = [i for i, s in enumerate(rel) if abs(s) > threshold]
    else:
        rel = np.full(len(records), np.nan)
        rel[0] = 0.0
        flagged = []
    return DriftSummary(per_u, per_y, mean_u, mean_y, shift, rel, flagged, threshold)


def make_time_axis(n: int, sample_rate_hz: float) -> np.ndarray:
    return np.arange(n) / sample_rate_hz
