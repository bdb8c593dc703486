"""Shannon-rate throughput comparisons against ingested SINR distributions.

The pipeline: an external CDF of user operating SINRs (multi-cell network
statistics, supplied as a CSV file) fixes the operating SNR at a chosen
percentile; each detector's simulated SINR-transfer curve maps that
operating SNR to a post-detection SINR; Shannon's SISO-AWGN capacity turns
SINRs into rates, and gains are reported as relative rate increases.

The two CDF files shipped under ``data/`` are synthetic stand-ins with
roughly cellular-shaped distributions, not measurements.
"""

import csv
from dataclasses import dataclass

import numpy as np


class CdfSupportError(ValueError):
    """Requested percentile (or SNR) outside the tabulated support."""


@dataclass(frozen=True)
class SinrCdf:
    """Tabulated CDF: strictly increasing sinr_db, nondecreasing cdf in [0,1]."""

    sinr_db: np.ndarray
    cdf: np.ndarray
    source: str = ""

    def __post_init__(self):
        if self.sinr_db.shape != self.cdf.shape or self.sinr_db.ndim != 1:
            raise ValueError("sinr_db and cdf must be matching 1-D arrays")
        if self.sinr_db.size == 0:
            raise ValueError("empty CDF")
        if np.any(np.diff(self.sinr_db) <= 0):
            raise ValueError("sinr_db values must be strictly increasing")
        if np.any(np.diff(self.cdf) < 0) or self.cdf[0] < 0 or self.cdf[-1] > 1:
            raise ValueError("cdf values must be nondecreasing within [0, 1]")


def load_cdf(path):
    """Read a ``sinr_db,cdf`` CSV file into a :class:`SinrCdf`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["sinr_db", "cdf"]:
            raise ValueError(f"{path}: expected header 'sinr_db,cdf', got {reader.fieldnames}")
        rows = [(float(r["sinr_db"]), float(r["cdf"])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: no CDF rows")
    sinr = np.array([r[0] for r in rows])
    cdf = np.array([r[1] for r in rows])
    return SinrCdf(sinr_db=sinr, cdf=cdf, source=str(path))


def shannon_rate(sinr_linear):
    """SISO-AWGN capacity log2(1 + sinr) in bits/s/Hz."""
    sinr_linear = np.asarray(sinr_linear, dtype=float)
    if np.any(sinr_linear < 0):
        raise ValueError("SINR must be nonnegative")
    out = np.log2(1.0 + sinr_linear)
    return float(out) if out.ndim == 0 else out


def percentile_sinr(cdf, percentile):
    """Operating SINR (dB) at a percentile, linearly interpolated on the CDF.

    Below the first tabulated probability the CDF is treated as a step at
    the first point (covers degenerate single-step tables); above the last
    one the percentile is outside the support.
    """
    p = percentile / 100.0
    if not 0.0 <= p <= 1.0:
        raise CdfSupportError(f"percentile {percentile} outside [0, 100]")
    if p > cdf.cdf[-1]:
        raise CdfSupportError(
            f"percentile {percentile} above the tabulated CDF range "
            f"(max {100 * cdf.cdf[-1]:g})"
        )
    if p <= cdf.cdf[0]:
        return float(cdf.sinr_db[0])
    return float(np.interp(p, cdf.cdf, cdf.sinr_db))


def interp_transfer(transfer, snr_db):
    """Post-detection SINR (linear) of a transfer curve at an input SNR.

    ``transfer`` is a sequence of (input_snr_db, output_sinr_linear) points;
    interpolation is linear in dB on both axes.  Extrapolation is refused.
    """
    pts = sorted(transfer)
    snrs = np.array([p[0] for p in pts], dtype=float)
    sinrs = np.array([p[1] for p in pts], dtype=float)
    if np.any(sinrs <= 0):
        raise ValueError("transfer-curve SINRs must be positive for dB interpolation")
    if snr_db < snrs[0] or snr_db > snrs[-1]:
        raise CdfSupportError(
            f"operating SNR {snr_db:g} dB outside the simulated transfer range "
            f"[{snrs[0]:g}, {snrs[-1]:g}] dB"
        )
    out_db = np.interp(snr_db, snrs, 10.0 * np.log10(sinrs))
    return float(10.0 ** (out_db / 10.0))


def relative_gain(transfer_a, transfer_b, cdf, percentile, floor_at_zero=False):
    """Throughput gain (percent) of detector A over B at a CDF percentile.

    Reads the operating SNR from the CDF, maps it through both SINR-transfer
    curves, converts to Shannon rates and returns 100 (rate_A/rate_B - 1);
    optionally floored at 0 to mirror gain-only reporting.
    """
    snr_db = percentile_sinr(cdf, percentile)
    rate_a = shannon_rate(interp_transfer(transfer_a, snr_db))
    rate_b = shannon_rate(interp_transfer(transfer_b, snr_db))
    if rate_b == 0.0:
        raise ValueError("baseline rate is zero at the operating point")
    gain = 100.0 * (rate_a / rate_b - 1.0)
    return max(gain, 0.0) if floor_at_zero else gain
