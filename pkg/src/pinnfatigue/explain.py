"""Shapley attribution with an interventional value function.

The value of a coalition S for an instance x is the mean model output over
background rows in which the columns in S are overwritten with x's values.
Exact attribution enumerates all coalitions of the chosen players; sampling
averages marginal contributions along random player orderings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

MAX_EXACT_PLAYERS = 15
_CHUNK_ROWS = 1 << 18


def _check_background(background):
    bg = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if bg.shape[0] == 0:
        raise ValueError("background set is empty")
    return bg


def _players(instance, features):
    d = len(instance)
    if features is None:
        return np.arange(d)
    p = np.asarray(features, dtype=np.int64)
    if len(set(p.tolist())) != len(p) or (len(p) and (p.min() < 0 or p.max() >= d)):
        raise ValueError("features must be distinct valid column indices")
    return p


def _coalition_values(model, instance, background, players, masks):
    """Value of every coalition in ``masks`` (bool array, one row per coalition over ``players``).

    Columns that are not players always take the instance's values.
    """
    x = np.asarray(instance, dtype=np.float64)
    B, d = background.shape
    base = background.copy()
    others = np.setdiff1d(np.arange(d), players)
    base[:, others] = x[others]
    vals = np.empty(len(masks))
    per = max(1, _CHUNK_ROWS // B)
    for s in range(0, len(masks), per):
        chunk = masks[s : s + per]
        rows = np.broadcast_to(base, (len(chunk), B, d)).copy()
        for c, m in enumerate(chunk):
            cols = players[m]
            rows[c][:, cols] = x[cols]
        out = np.asarray(model(rows.reshape(-1, d)), dtype=np.float64).reshape(len(chunk), B)
        vals[s : s + len(chunk)] = out.mean(axis=1)
    return vals


def value_function(model, instance, subset, background):
    """Mean of ``model`` over background rows with the columns in ``subset`` set from ``instance``."""
    bg = _check_background(background)
    x = np.asarray(instance, dtype=np.float64)
    rows = bg.copy()
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size:
        rows[:, idx] = x[idx]
    return float(np.mean(model(rows)))


def shapley_exact(model, instance, background, features=None):
    """Exact Shapley values of ``features`` (default: every column).

    Returns ``(phi, base_value)`` with ``base_value`` the value of the empty coalition.
    """
    bg = _check_background(background)
    x = np.asarray(instance, dtype=np.float64)
    players = _players(x, features)
    M = len(players)
    if M > MAX_EXACT_PLAYERS:
        raise ValueError(f"{M} players is too many for exact enumeration (max {MAX_EXACT_PLAYERS}); use shapley_sample")
    codes = np.arange(1 << M)
    masks = ((codes[:, None] >> np.arange(M)) & 1).astype(bool)
    v = _coalition_values(model, x, bg, players, masks)
    sizes = masks.sum(axis=1)
    weights = np.array([math.factorial(s) * math.factorial(M - s - 1) / math.factorial(M) for s in range(M)])
    phi = np.zeros(M)
    for i in range(M):
        without = codes[~masks[:, i]]
        with_i = without | (1 << i)
        phi[i] = np.sum(weights[sizes[without]] * (v[with_i] - v[without]))
    return phi, float(v[0])


def shapley_sample(model, instance, background, n_permutations=200, seed=0, features=None):
    """Permutation-sampling estimate.  Returns ``(phi, standard_error, base_value)``."""
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    bg = _check_background(background)
    x = np.asarray(instance, dtype=np.float64)
    players = _players(x, features)
    M = len(players)
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(M) for _ in range(n_permutations)])
    # coalition after adding the first k players of each permutation, k = 0..M
    masks = np.zeros((n_permutations, M + 1, M), dtype=bool)
    for k in range(1, M + 1):
        masks[:, k] = masks[:, k - 1]
        masks[np.arange(n_permutations), k, perms[:, k - 1]] = True
    v = _coalition_values(model, x, bg, players, masks.reshape(-1, M)).reshape(n_permutations, M + 1)
    contrib = np.empty((n_permutations, M))
    contrib[np.arange(n_permutations)[:, None], perms] = np.diff(v, axis=1)
    phi = contrib.mean(axis=0)
    if n_permutations > 1:
        se = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    else:
        se = np.full(M, math.inf)
    return phi, se, float(v[0, 0])


@dataclass
class ShapResult:
    base_value: float
    phi: np.ndarray  # (n_instances, d)
    values: np.ndarray  # feature values of the explained instances
    feature_names: list
    stderr: np.ndarray | None = None

    def write_values(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instance_id", "feature", "value", "phi"])
            for k in range(self.phi.shape[0]):
                for j, name in enumerate(self.feature_names):
                    w.writerow([k, name, repr(float(self.values[k, j])), repr(float(self.phi[k, j]))])


def explain(model, instances, background, feature_names, method="exact", n_permutations=200, seed=0):
    """Attributions for every row of ``instances`` over all columns."""
    X = np.atleast_2d(np.asarray(instances, dtype=np.float64))
    bg = _check_background(background)
    phis, ses = [], []
    base = float(np.mean(model(bg)))
    for k, x in enumerate(X):
        if method == "exact":
            phi, _ = shapley_exact(model, x, bg)
        elif method == "sample":
            phi, se, _ = shapley_sample(model, x, bg, n_permutations, seed=[seed, k])
            ses.append(se)
        else:
            raise ValueError(f"unknown method {method!r}")
        phis.append(phi)
    return ShapResult(base, np.array(phis), X, list(feature_names), np.array(ses) if ses else None)


def summary(result: ShapResult):
    """Rows ``(feature, rank, mean_abs_phi, value_phi_correlation)`` by decreasing mean |phi|.

    Ties keep column order.  The correlation is NaN where either side is constant.
    """
    if result.phi.size == 0:
        raise ValueError("empty result")
    mean_abs = np.abs(result.phi).mean(axis=0)
    order = sorted(range(len(result.feature_names)), key=lambda j: (-mean_abs[j], j))
    rows = []
    for rank, j in enumerate(order, start=1):
        v, p = result.values[:, j], result.phi[:, j]
        if v.std() > 0 and p.std() > 0:
            corr = float(np.corrcoef(v, p)[0, 1])
        else:
            corr = math.nan
        rows.append((result.feature_names[j], rank, float(mean_abs[j]), corr))
    return rows


def group_summary(result: ShapResult, groups):
    """Sum of mean |phi| over each one-hot group; ``groups`` maps group name -> column indices."""
    mean_abs = np.abs(result.phi).mean(axis=0)
    return {g: float(mean_abs[list(cols)].sum()) for g, cols in groups.items()}


def write_summary(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "rank", "mean_abs_phi", "value_phi_correlation"])
        for name, rank, m, c in rows:
            w.writerow([name, rank, repr(m), repr(c)])
