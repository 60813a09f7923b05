"""Constraint-penalised loss: Huber data term, mean-prediction regulariser,
bounded derivative transform and the derivative-sign penalty.

Derivatives are taken with respect to the encoded inputs.  Encoding is a
positive affine map of the raw feature, so derivative signs carry over to raw
units, and log10 is monotone, so they carry over to life in cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .network import MlpParams, forward

LITERAL = "literal"
HINGE = "hinge"


@dataclass
class LossConfig:
    delta: float = 1.0
    q: float = 0.01
    beta: float = 100.0
    omega: float = 0.2
    constraint_mode: str = HINGE
    constrained_cols: tuple = field(default=(0, 1, 2))

    def __post_init__(self):
        self.constrained_cols = tuple(int(c) for c in self.constrained_cols)
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if not self.q >= 0:
            raise ValueError("q must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.omega >= 0:
            raise ValueError("omega must be >= 0")
        if self.constraint_mode not in (LITERAL, HINGE):
            raise ValueError(f"constraint_mode must be {LITERAL!r} or {HINGE!r}")
        if len(self.constrained_cols) != 3:
            raise ValueError("constrained_cols must be (strain amplitude, temperature, dose)")

    def to_dict(self):
        return {
            "delta": self.delta,
            "q": self.q,
            "beta": self.beta,
            "omega": self.omega,
            "constraint_mode": self.constraint_mode,
            "constrained_cols": list(self.constrained_cols),
        }


def huber(y_true, y_pred, delta=1.0):
    e = np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64)
    a = np.abs(e)
    return np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))


def _huber_grad(e, delta):
    """dH/de."""
    return np.where(np.abs(e) <= delta, e, delta * np.sign(e))


def reg_r(predictions, q=0.01):
    p = np.asarray(predictions, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty prediction vector")
    return q * p.mean() ** 2


def data_loss(y_true, y_pred, cfg: LossConfig):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty batch")
    return float(huber(y_true, y_pred, cfg.delta).mean() + reg_r(y_pred, cfg.q))


def _data_loss_grad(y_true, y_pred, cfg):
    """d data_loss / d y_pred."""
    n = y_pred.size
    e = y_true - y_pred
    return -_huber_grad(e, cfg.delta) / n + 2.0 * cfg.q * y_pred.mean() / n


def _sig_neg(t):
    # 1/(1+e^t) for t >= 0 without overflow
    u = np.exp(-t)
    return u / (1.0 + u)


def g_transform(x, beta=100.0):
    x = np.asarray(x, dtype=np.float64)
    s = _sig_neg(beta * np.abs(x))
    out = x * s
    return float(out) if out.ndim == 0 else out


def g_transform_prime(x, beta=100.0):
    x = np.asarray(x, dtype=np.float64)
    t = beta * np.abs(x)
    s = _sig_neg(t)
    return s - t * s * (1.0 - s)


def _check_cols(params: MlpParams, cfg: LossConfig):
    cols = cfg.constrained_cols
    if len(set(cols)) != 3:
        raise ValueError(f"constrained columns must be distinct, got {cols}")
    if min(cols) < 0 or max(cols) >= params.n_inputs:
        raise IndexError(f"constrained columns {cols} out of range for {params.n_inputs} inputs")


def _jet_forward(params, X, cfg, theta=None):
    _check_cols(params, cfg)
    X = np.ascontiguousarray(X, dtype=np.float64)
    cols = np.asarray(cfg.constrained_cols, dtype=np.int64)
    if theta is None:
        theta = params.to_vector()
    dims = np.asarray(params.dims, dtype=np.int64)
    out, Z, Zt, Zs = _kernels.forward_jet(theta, dims, X, cols, True, params.act_id, params.selu_lambda, params.selu_alpha)
    return theta, dims, cols, X, out, (Z, Zt, Zs)


def _residuals_from_jet(out, mode):
    """Four residual vectors (strain slope, strain curvature, temperature slope, dose slope)
    and the derivative of each with respect to its raw jet column."""
    d_eps, d_T, d_d, dd_eps = out[:, 1], out[:, 2], out[:, 3], out[:, 4]
    if mode == LITERAL:
        res = [d_eps, dd_eps, d_T, d_d]
        dres = [np.ones_like(r) for r in res]
    else:
        res = [np.maximum(0.0, d_eps), np.maximum(0.0, -dd_eps), np.maximum(0.0, d_T), np.maximum(0.0, d_d)]
        dres = [
            (d_eps > 0).astype(np.float64),
            -(dd_eps < 0).astype(np.float64),
            (d_T > 0).astype(np.float64),
            (d_d > 0).astype(np.float64),
        ]
    return res, dres


def pde_residuals(params: MlpParams, X, cfg: LossConfig):
    """Return ``(r_eps, r_epseps, r_T, r_d)`` per sample."""
    out = _jet_forward(params, X, cfg)[4]
    res, _ = _residuals_from_jet(out, cfg.constraint_mode)
    return tuple(res)


def _pde_from_jet(out, cfg):
    res, _ = _residuals_from_jet(out, cfg.constraint_mode)
    total = 0.0
    for r in res:
        g = g_transform(r, cfg.beta)
        total += data_loss(np.zeros_like(g), g, cfg)
    return total


def loss_pde(params: MlpParams, X, cfg: LossConfig):
    return _pde_from_jet(_jet_forward(params, X, cfg)[4], cfg)


def loss_total(params: MlpParams, X, y, cfg: LossConfig):
    y_pred = np.asarray(_value_forward(params, X))
    total = data_loss(y, y_pred, cfg)
    if cfg.omega != 0.0:
        total += cfg.omega * loss_pde(params, X, cfg)
    return total


def _value_forward(params, X):
    return np.atleast_1d(forward(params, np.atleast_2d(X)))


@dataclass
class LossEval:
    total: float
    data: float
    pde: float
    grad: np.ndarray


def loss_components(params: MlpParams, X, y, cfg: LossConfig, theta=None):
    """``(total, data, pde)`` from one jet pass; total equals data exactly when omega is 0."""
    out = _jet_forward(params, np.atleast_2d(X), cfg, theta)[4]
    dl = data_loss(y, out[:, 0], cfg)
    pde = _pde_from_jet(out, cfg)
    total = dl + cfg.omega * pde if cfg.omega != 0.0 else dl
    return total, dl, pde


def loss_and_grad(params: MlpParams, X, y, cfg: LossConfig, with_pde=True, theta=None):
    """Total loss, its two components and the gradient w.r.t. the flat parameter vector.

    ``params`` supplies the architecture; ``theta`` (if given) overrides its
    parameter values.  With ``omega == 0`` the derivative path never enters
    the gradient, and the PDE term is only evaluated (for reporting) when
    ``with_pde`` is true.
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if theta is None:
        theta = params.to_vector()
    dims = np.asarray(params.dims, dtype=np.int64)
    act, lam, alpha = params.act_id, params.selu_lambda, params.selu_alpha
    no_cols = np.zeros(0, dtype=np.int64)
    need_jet = with_pde or cfg.omega != 0.0
    if need_jet:
        _, _, cols, X, out, cache = _jet_forward(params, X, cfg, theta)
    else:
        out, *cache = _kernels.forward_jet(theta, dims, X, no_cols, False, act, lam, alpha)
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite network output")
    y_pred = out[:, 0]
    dl = data_loss(y, y_pred, cfg)

    adj = np.zeros_like(out)
    adj[:, 0] = _data_loss_grad(y, y_pred, cfg)
    pde = 0.0
    if need_jet:
        res, dres = _residuals_from_jet(out, cfg.constraint_mode)
        # residual family -> jet column: strain slope, curvature, T slope, dose slope
        for r, dr, jc in zip(res, dres, (1, 4, 2, 3)):
            g = g_transform(r, cfg.beta)
            pde += data_loss(np.zeros_like(g), g, cfg)
            if cfg.omega != 0.0:
                dg = _huber_grad(g, cfg.delta) / n + 2.0 * cfg.q * g.mean() / n
                adj[:, jc] += cfg.omega * dg * g_transform_prime(r, cfg.beta) * dr

    if cfg.omega != 0.0:
        total = dl + cfg.omega * pde
        grad = _kernels.backward_jet(theta, dims, X, cols, True, act, lam, alpha, *cache, adj)
    else:
        total = dl
        if need_jet:
            _, *cache = _kernels.forward_jet(theta, dims, X, no_cols, False, act, lam, alpha)
        grad = _kernels.backward_jet(theta, dims, X, no_cols, False, act, lam, alpha, *cache, adj[:, :1])
    return LossEval(float(total), float(dl), float(pde), grad)
