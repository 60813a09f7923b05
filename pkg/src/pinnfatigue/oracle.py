"""Synthetic strain-life ground truth.

Life follows the Coffin-Manson-Basquin relation

    eps_a = sigma_ratio * (2N)^b + epsilon_f * (2N)^c

with multiplicative exponential knockdowns for test temperature above a
reference and for irradiation dose.  The generator parameters are settings
for desk-scale experiments, not calibrated alloy data.  Life is strictly
decreasing in strain amplitude and non-increasing in temperature and dose
everywhere, so every derivative-sign constraint holds by construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import RawTable
from .schema import NUMERIC, ONEHOT, FeatureSchema, FeatureSpec, onehot_name

LOG_N_MIN = 0.0
LOG_N_MAX = 9.0


@dataclass(frozen=True)
class CmbParams:
    sigma_ratio: float = 0.005
    b: float = -0.09
    epsilon_f: float = 0.5
    c: float = -0.6
    k_T: float = 0.002
    k_d: float = 0.03
    T_ref: float = 20.0
    noise_sd: float = 0.05

    def __post_init__(self):
        if not (self.b < 0 and self.c < 0):
            raise ValueError("b and c must be negative")
        if not (self.sigma_ratio > 0 and self.epsilon_f > 0):
            raise ValueError("sigma_ratio and epsilon_f must be positive")
        if self.k_T < 0 or self.k_d < 0 or self.noise_sd < 0:
            raise ValueError("k_T, k_d and noise_sd must be non-negative")


def strain_from_life(N0, p: CmbParams):
    """Total strain amplitude (fraction) at ``N0`` cycles before knockdowns."""
    two_n = 2.0 * np.asarray(N0, dtype=np.float64)
    return p.sigma_ratio * two_n**p.b + p.epsilon_f * two_n**p.c


def base_life(eps_a, p: CmbParams, rtol=1e-10):
    """Invert the strain-life relation by bisection on log10 N over [1, 1e9]."""
    eps = np.asarray(eps_a, dtype=np.float64)
    if np.any((eps <= 0) | (eps >= 0.1)):
        raise ValueError("strain amplitude (fraction) must lie in (0, 0.1)")
    hi_eps = strain_from_life(10.0**LOG_N_MIN, p)
    lo_eps = strain_from_life(10.0**LOG_N_MAX, p)
    if np.any((eps > hi_eps) | (eps < lo_eps)):
        raise ValueError(f"strain amplitude outside the attainable range [{lo_eps:.3g}, {hi_eps:.3g}] on N in [1, 1e9]")
    lo = np.full(eps.shape, LOG_N_MIN)
    hi = np.full(eps.shape, LOG_N_MAX)
    # interval in log10 N shrinks until the relative error in N is below rtol
    tol = rtol / math.log(10.0)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        above = strain_from_life(10.0**mid, p) > eps
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 10.0 ** (0.5 * (lo + hi))


def cmb_life(eps_a, T, d, p: CmbParams = CmbParams()):
    """Cycles to failure for strain amplitude ``eps_a`` (fraction), test temperature ``T`` (degC)
    and dose ``d`` (dpa)."""
    N0 = base_life(eps_a, p)
    T = np.asarray(T, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    N = N0 * np.exp(-p.k_T * np.maximum(0.0, T - p.T_ref)) * np.exp(-p.k_d * d)
    return float(N) if np.ndim(N) == 0 else N


DEFAULT_RANGES = {
    "strain_amplitude": (0.14, 6.15),  # %
    "test_temperature": (22.0, 700.0),
    "dose": (0.0, 71.0),
    "strain_rate": (0.003, 0.8),
}


def synthetic_schema():
    """Schema of generated datasets: the three constrained inputs, a nuisance
    strain-rate column the law ignores, and a specimen one-hot group."""
    feats = [
        FeatureSpec("strain_amplitude", NUMERIC, "%", 0.14, 6.15, role="strain_amplitude"),
        FeatureSpec("test_temperature", NUMERIC, "degC", 22.0, 700.0, role="test_temperature"),
        FeatureSpec("dose", NUMERIC, "dpa", 0.0, 71.0, role="dose"),
        FeatureSpec("strain_rate", NUMERIC, "1/s", 0.003, 0.8),
        FeatureSpec(onehot_name("sample_type", "hourglass"), ONEHOT, group="sample_type", category="hourglass"),
        FeatureSpec(onehot_name("sample_type", "cylinder"), ONEHOT, group="sample_type", category="cylinder"),
    ]
    return FeatureSchema(tuple(feats), "cycles_to_failure")


def generate_dataset(n, p: CmbParams = CmbParams(), seed=0, ranges=None, sample_type="cylinder"):
    """Uniformly sampled conditions with log-normal scatter on life.

    Returns ``(RawTable, schema, noiseless_cycles)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    r = dict(DEFAULT_RANGES)
    if ranges:
        r.update(ranges)
    eps_pct = rng.uniform(*r["strain_amplitude"], size=n)
    T = rng.uniform(*r["test_temperature"], size=n)
    d = rng.uniform(*r["dose"], size=n)
    rate = rng.uniform(*r["strain_rate"], size=n)
    noise = rng.normal(0.0, 1.0, size=n)
    N_true = np.atleast_1d(cmb_life(eps_pct / 100.0, T, d, p))
    N_obs = N_true * 10.0 ** (p.noise_sd * noise) if p.noise_sd > 0 else N_true.copy()
    cols = {
        "strain_amplitude": eps_pct,
        "test_temperature": T,
        "dose": d,
        "strain_rate": rate,
        "sample_type": [sample_type] * n,
    }
    return RawTable(cols, N_obs, "synthetic"), synthetic_schema(), N_true


def trend_sweep(predict_log, base_record, doses, eps_grid_pct, temperature,
                columns=("dose", "strain_amplitude", "test_temperature")):
    """Predicted life over (dose, strain amplitude) with everything else at ``base_record``.

    ``predict_log`` maps a RawTable to predicted log10 life; ``columns`` names
    the dose, strain-amplitude and test-temperature columns.  Returns rows
    ``(dose, eps_pct, pred_cycles)`` ordered dose-major.
    """
    c_dose, c_eps, c_temp = columns
    doses = [float(v) for v in doses]
    grid = [float(v) for v in eps_grid_pct]
    n = len(doses) * len(grid)
    cols = {}
    for k, v in base_record.items():
        cols[k] = [v] * n if isinstance(v, str) or v is None else np.full(n, float(v))
    cols[c_dose] = np.repeat(np.array(doses), len(grid))
    cols[c_eps] = np.tile(np.array(grid), len(doses))
    cols[c_temp] = np.full(n, float(temperature))
    table = RawTable(cols, np.ones(n), "trend_sweep")
    cycles = 10.0 ** np.asarray(predict_log(table), dtype=np.float64)
    return [(cols[c_dose][i], cols[c_eps][i], cycles[i]) for i in range(n)]


def write_trends(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dose", "eps_pct", "pred_cycles"])
        for dose, eps, cyc in rows:
            w.writerow([repr(float(dose)), repr(float(eps)), repr(float(cyc))])
    return path
