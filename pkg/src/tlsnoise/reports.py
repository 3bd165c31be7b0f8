"""CSV writers.  UTF-8, LF line endings, shortest round-trip float text.

Time is reported in units of ``1/Omega`` and frequency in units of ``Omega``.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ensemble import SpectrumGrid


def fmt(x) -> str:
    """Deterministic text for one cell."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))
    return path


def spectrum_rows(spec: SpectrumGrid, rabi: float = 1.0):
    norm = spec.peak_normalized()
    err = spec.errors if spec.errors is not None else np.full(len(spec.values), np.nan)
    for w, s, e, n in zip(spec.omegas / rabi, spec.values, err, norm):
        yield (w, s, e, n)


SPECTRUM_HEADER = ("omega_over_Omega", "S", "S_err", "S_peak_normalized")
PHASES_HEADER = ("t_over_inv_Omega", "dphi", "sphi", "valid")
JUMPS_HEADER = ("t_over_inv_Omega", "kind")
HISTOGRAM_HEADER = ("dphi_bin_center", "count", "density")
CORRELATION_HEADER = ("tau_over_inv_Omega", "C_cos")
COMPARISON_HEADER = ("t_over_inv_Omega", "observable", "mc_mean", "mc_stderr", "reference",
                     "z_score", "within_3se")


def write_spectrum(path, spec: SpectrumGrid, rabi: float = 1.0) -> Path:
    return write_csv(path, SPECTRUM_HEADER, spectrum_rows(spec, rabi))


def write_phases(path, record, rabi: float = 1.0) -> Path:
    rows = zip(record.times * rabi, record.dphi, record.sphi, record.valid)
    return write_csv(path, PHASES_HEADER, rows)


def write_jumps(path, record, rabi: float = 1.0) -> Path:
    rows = ((t * rabi, k) for t, k in record.jumps)
    return write_csv(path, JUMPS_HEADER, rows)


def write_histogram(path, stats) -> Path:
    total = max(int(stats.counts.sum()), 1)
    dens = stats.counts / (total * stats.bin_width)
    return write_csv(path, HISTOGRAM_HEADER, zip(stats.centers, stats.counts, dens))


def write_correlation(path, corr, rabi: float = 1.0, extra: dict | None = None) -> Path:
    """``extra`` maps column names to additional value arrays (e.g. a surrogate)."""
    extra = extra or {}
    header = CORRELATION_HEADER + tuple(extra)
    rows = zip(corr.taus * rabi, corr.values, *extra.values())
    return write_csv(path, header, rows)


def write_comparison(path, rows) -> Path:
    return write_csv(path, COMPARISON_HEADER, rows)
