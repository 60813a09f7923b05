"""Scores in log10-life space and parity-plot export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

DEFAULT_FACTORS = (2.0, 5.0)


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, b


def r2(y_true, y_pred):
    a, b = _pair(y_true, y_pred)
    if a.size < 2:
        raise ValueError("r2 needs at least two samples")
    ss_tot = np.sum((a - a.mean()) ** 2)
    if ss_tot == 0.0:
        raise ValueError("r2 undefined for constant targets")
    return float(1.0 - np.sum((a - b) ** 2) / ss_tot)


def mse(y_true, y_pred):
    a, b = _pair(y_true, y_pred)
    return float(np.mean((a - b) ** 2))


def within_factor(y_true_log, y_pred_log, factor):
    """Fraction of predictions within [N/f, N*f]; the bound is closed."""
    if not factor > 1:
        raise ValueError("factor must be > 1")
    a, b = _pair(y_true_log, y_pred_log)
    # small slack so |dlog| == log10(f) computed from rounded logs still counts as inside
    tol = np.log10(factor) * (1.0 + 1e-12)
    return float(np.mean(np.abs(b - a) <= tol))


@dataclass
class MetricsRecord:
    r2: float
    mse: float
    n: int
    band_coverage: dict = field(default_factory=dict)

    def as_flat(self):
        d = {"n": self.n, "r2": self.r2, "mse": self.mse}
        for f, v in sorted(self.band_coverage.items()):
            d[f"within_factor_{f:g}"] = v
        return d


def compute_metrics(y_true_log, y_pred_log, factors=DEFAULT_FACTORS):
    a, b = _pair(y_true_log, y_pred_log)
    return MetricsRecord(
        r2=r2(a, b),
        mse=mse(a, b),
        n=int(a.size),
        band_coverage={float(f): within_factor(a, b, f) for f in factors},
    )


def write_report(records, path):
    """Flat ``key = value`` report; ``records`` maps a prefix (e.g. "test") to a MetricsRecord."""
    lines = []
    for prefix, rec in records.items():
        for k, v in rec.as_flat().items():
            lines.append(f"{prefix}.{k} = {v!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = float(v)
    return out


def parity_export(y_true, y_pred, path):
    a, b = _pair(y_true, y_pred)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true_log10", "pred_log10", "abs_log_error"])
        for t, p in zip(a, b):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(abs(p - t)))])
    return path
