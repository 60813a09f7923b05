"""Dense SELU regressor with analytic input derivatives.

The network maps an encoded feature vector to predicted log10 life.  Hidden
layers use SELU, the output neuron is affine.  Besides the usual parameter
gradients this module exposes first derivatives of the output with respect to
every input (one reverse sweep) and diagonal second derivatives with respect
to selected inputs (forward jet), both exact to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

SELU_LAMBDA = 1.05074
SELU_ALPHA = 1.67326
MODEL_FORMAT_VERSION = 1

_ACTIVATIONS = {"selu": _kernels.SELU, "identity": _kernels.IDENTITY}


class NonFiniteError(FloatingPointError):
    """Raised when a forward/backward intermediate stops being finite."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


def selu(x, lam=SELU_LAMBDA, alpha=SELU_ALPHA):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, lam * x, lam * alpha * np.expm1(np.minimum(x, 0.0)))


def selu_prime(x, lam=SELU_LAMBDA, alpha=SELU_ALPHA):
    """First derivative; the left branch is used at exactly 0."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, lam, lam * alpha * np.exp(np.minimum(x, 0.0)))


def selu_second(x, lam=SELU_LAMBDA, alpha=SELU_ALPHA):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, 0.0, lam * alpha * np.exp(np.minimum(x, 0.0)))


@dataclass
class MlpParams:
    """Layer sizes ``[d, h1, ..., 1]`` with one ``(out, in)`` weight matrix and bias per layer."""

    dims: tuple
    weights: list
    biases: list
    selu_lambda: float = SELU_LAMBDA
    selu_alpha: float = SELU_ALPHA
    activation: str = "selu"
    schema_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2 or self.dims[-1] != 1:
            raise ValueError(f"dims must end with a single output unit, got {self.dims}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.dims) - 1:
            raise ValueError("one weight matrix and one bias vector per layer expected")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.dims[l + 1], self.dims[l]) or b.shape != (self.dims[l + 1],):
                raise ValueError(f"layer {l}: shape mismatch with dims {self.dims}")

    @property
    def n_inputs(self):
        return self.dims[0]

    @property
    def act_id(self):
        return _ACTIVATIONS[self.activation]

    def to_vector(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts).astype(np.float64)

    @classmethod
    def from_vector(cls, dims, theta, **kwargs):
        dims = tuple(int(d) for d in dims)
        offs = _kernels.layer_offsets(dims)
        if len(theta) != offs[-1]:
            raise ValueError(f"expected {offs[-1]} parameters, got {len(theta)}")
        weights, biases = [], []
        for l in range(len(dims) - 1):
            o, n_out, n_in = offs[l], dims[l + 1], dims[l]
            weights.append(np.array(theta[o : o + n_out * n_in], dtype=np.float64).reshape(n_out, n_in))
            biases.append(np.array(theta[o + n_out * n_in : o + n_out * n_in + n_out], dtype=np.float64))
        return cls(dims, weights, biases, **kwargs)

    def with_vector(self, theta):
        return MlpParams.from_vector(
            self.dims,
            theta,
            selu_lambda=self.selu_lambda,
            selu_alpha=self.selu_alpha,
            activation=self.activation,
            schema_hash=self.schema_hash,
        )

    def is_finite(self):
        return all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in zip(self.weights, self.biases))

    # -- persistence -------------------------------------------------------

    def to_dict(self):
        return {
            "format": "pinnfatigue-mlp",
            "version": MODEL_FORMAT_VERSION,
            "dims": list(self.dims),
            "activation": self.activation,
            "selu_lambda": self.selu_lambda,
            "selu_alpha": self.selu_alpha,
            "schema_hash": self.schema_hash,
            "weights": [W.ravel().tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "pinnfatigue-mlp":
            raise ValueError("not a pinnfatigue model document")
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        dims = tuple(doc["dims"])
        weights = [np.array(w, dtype=np.float64).reshape(dims[l + 1], dims[l]) for l, w in enumerate(doc["weights"])]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        return cls(
            dims,
            weights,
            biases,
            selu_lambda=doc["selu_lambda"],
            selu_alpha=doc["selu_alpha"],
            activation=doc.get("activation", "selu"),
            schema_hash=doc.get("schema_hash"),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            # repr round-trips float64 exactly
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def init_params(dims, seed, activation="selu"):
    """LeCun-normal weights (variance 1/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in dims)
    weights, biases = [], []
    for l in range(len(dims) - 1):
        fan_in = dims[l]
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(dims[l + 1], fan_in)))
        biases.append(np.zeros(dims[l + 1]))
    return MlpParams(dims, weights, biases, activation=activation)


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != params.n_inputs:
        raise ValueError(f"expected {params.n_inputs} input features, got {X.shape[1]}")
    return X, single


def _layer_pass(params, X):
    """Plain forward keeping pre-activations and activations of every layer."""
    zs, acts = [], [X]
    a = X
    L = len(params.weights)
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = a @ W.T + b
        if not np.isfinite(z).all():
            raise NonFiniteError(f"non-finite pre-activation in layer {l}", layer=l)
        zs.append(z)
        if l < L - 1:
            a = _kernels.act_derivs_np(z, params.act_id, params.selu_lambda, params.selu_alpha)[0]
        else:
            a = z
        acts.append(a)
    return zs, acts


def forward(params, x):
    """Predicted log10 life for one input vector (scalar) or a batch (vector)."""
    X, single = _as_batch(params, x)
    _, acts = _layer_pass(params, X)
    y = acts[-1][:, 0]
    return float(y[0]) if single else y


def _backprop(params, zs, acts, gy):
    """Reverse sweep from output adjoints ``gy`` (n,); returns (dW list, db list, dX)."""
    L = len(params.weights)
    g = gy[:, None]
    dWs, dbs = [None] * L, [None] * L
    for l in range(L - 1, -1, -1):
        dWs[l] = g.T @ acts[l]
        dbs[l] = g.sum(axis=0)
        g = g @ params.weights[l]
        if l > 0:
            s1 = _kernels.act_derivs_np(zs[l - 1], params.act_id, params.selu_lambda, params.selu_alpha)[1]
            g = g * s1
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient entering layer {l}", layer=l)
    return dWs, dbs, g


def param_gradients(params, X, loss_gradient):
    """Gradient of ``sum_k loss_gradient[k] * yhat_k`` with respect to every weight and bias.

    Returned as an ``MlpParams`` whose arrays hold the gradients.
    """
    X, _ = _as_batch(params, X)
    gy = np.asarray(loss_gradient, dtype=np.float64).reshape(-1)
    if gy.shape[0] != X.shape[0]:
        raise ValueError("one loss gradient per sample expected")
    zs, acts = _layer_pass(params, X)
    dWs, dbs, _ = _backprop(params, zs, acts, gy)
    return MlpParams(
        params.dims,
        dWs,
        dbs,
        selu_lambda=params.selu_lambda,
        selu_alpha=params.selu_alpha,
        activation=params.activation,
    )


def input_gradient(params, x):
    """d yhat / d x for every input column, by one reverse sweep."""
    X, single = _as_batch(params, x)
    zs, acts = _layer_pass(params, X)
    _, _, gX = _backprop(params, zs, acts, np.ones(X.shape[0]))
    return gX[0] if single else gX


def jet(params, X, cols, second=False):
    """Output plus first derivatives along ``cols`` and optionally d2/dx_cols[0]^2.

    Returns an ``(n, 1 + len(cols) [+ 1])`` array.
    """
    X, _ = _as_batch(params, X)
    cols = np.asarray(cols, dtype=np.int64)
    if second and len(cols) == 0:
        raise ValueError("second derivative needs at least one column")
    if len(cols) and (cols.min() < 0 or cols.max() >= params.n_inputs):
        raise IndexError("column index out of range")
    out = _kernels.forward_jet(
        params.to_vector(), np.asarray(params.dims), X, cols, second, params.act_id, params.selu_lambda, params.selu_alpha
    )[0]
    return out


def input_second_diagonal(params, x, i):
    """d2 yhat / d x_i^2 at x (scalar for one vector, array for a batch)."""
    X, single = _as_batch(params, x)
    out = jet(params, X, [i], second=True)
    v = out[:, 2]
    return float(v[0]) if single else v
