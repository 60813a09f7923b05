import numpy as np
import pytest

from pinnfatigue.data import fit_preprocessor, transform
from pinnfatigue.network import MlpParams
from pinnfatigue.oracle import CmbParams, generate_dataset


def random_net(rng, dims, activation="selu", scale=1.0):
    weights = [rng.normal(0.0, scale / np.sqrt(dims[l]), size=(dims[l + 1], dims[l])) for l in range(len(dims) - 1)]
    biases = [rng.normal(0.0, 0.3, size=dims[l + 1]) for l in range(len(dims) - 1)]
    return MlpParams(tuple(dims), weights, biases, activation=activation)


def matmul_oracle(params, X):
    """Independent forward pass written directly from the layer recurrence."""
    lam, alpha = params.selu_lambda, params.selu_alpha
    a = np.atleast_2d(X).T
    L = len(params.weights)
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = W @ a + b[:, None]
        if l == L - 1 or params.activation == "identity":
            a = z
        else:
            a = lam * np.where(z > 0, z, alpha * np.expm1(np.minimum(z, 0.0)))
    return a[0]


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


@pytest.fixture(scope="session")
def small_synthetic():
    raw, schema, n_true = generate_dataset(200, CmbParams(), seed=11)
    state = fit_preprocessor(raw, schema)
    return raw, schema, state, transform(raw, state, schema)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion (shown in the terminal summary)."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
