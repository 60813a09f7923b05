"""Mini-batch training with warmup + sigmoid-decay learning rate, and random search."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics
from .data import EncodedDataset, train_test_split
from .loss import LossConfig, loss_and_grad, loss_components
from .network import MlpParams, forward, init_params

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLIP_NORM = 10.0


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch, step, detail=""):
        super().__init__(f"non-finite loss at epoch {epoch}, step {step}{': ' + detail if detail else ''}")
        self.epoch = epoch
        self.step = step


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 900
    weight_decay: float = 0.001
    kappa: float = 0.1
    lr_peak: float = 1e-3
    lr_end: float = 1e-5
    gamma: float = 10.0
    seed: int = 0
    hidden: tuple = (110, 70, 30)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.batch_size = int(self.batch_size)
        self.epochs = int(self.epochs)
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if not self.lr_end < self.lr_peak:
            raise ValueError("lr_end must be < lr_peak")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def warmup_steps(total_steps, kappa):
    return max(1, int(math.floor(kappa * total_steps + 0.5)))


def lr_at(step, total_steps, cfg: TrainConfig):
    """Linear warmup to ``lr_peak`` over the first kappa fraction of steps, then a
    sigmoid decay towards ``lr_end``."""
    if total_steps < 2 or not 0 <= step <= total_steps:
        raise ValueError("need 0 <= step <= total_steps and total_steps >= 2")
    tw = warmup_steps(total_steps, cfg.kappa)
    if step <= tw:
        return cfg.lr_peak * step / tw
    p = (step - tw) / (total_steps - tw)
    return cfg.lr_end + (cfg.lr_peak - cfg.lr_end) / (1.0 + math.exp(cfg.gamma * (p - 0.5)))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size), 0)


def decay_mask(dims):
    """1 for weights, 0 for biases, in flat-vector layout."""
    parts = []
    for l in range(len(dims) - 1):
        parts.append(np.ones(dims[l + 1] * dims[l]))
        parts.append(np.zeros(dims[l + 1]))
    return np.concatenate(parts)


def adamw_step(theta, grad, state: AdamState, lr, weight_decay, mask):
    """One decoupled-weight-decay Adam update (in place on ``theta``)."""
    state.t += 1
    state.m *= ADAM_BETA1
    state.m += (1.0 - ADAM_BETA1) * grad
    state.v *= ADAM_BETA2
    state.v += (1.0 - ADAM_BETA2) * grad * grad
    mhat = state.m / (1.0 - ADAM_BETA1**state.t)
    vhat = state.v / (1.0 - ADAM_BETA2**state.t)
    if weight_decay:
        theta *= 1.0 - lr * weight_decay * mask
    theta -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return theta


def clip_global_norm(grad, max_norm=CLIP_NORM):
    norm = float(np.sqrt(np.dot(grad, grad)))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    data_loss: list = field(default_factory=list)
    pde_loss: list = field(default_factory=list)
    total_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    initial: tuple = (math.nan, math.nan, math.nan)
    final_metrics: dict = field(default_factory=dict)

    def append(self, epoch, total, data, pde, lr):
        self.epoch.append(epoch)
        self.total_loss.append(total)
        self.data_loss.append(data)
        self.pde_loss.append(pde)
        self.lr.append(lr)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "data_loss", "pde_loss", "total_loss", "lr"])
            for row in zip(self.epoch, self.data_loss, self.pde_loss, self.total_loss, self.lr):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def train(params: MlpParams, train_set: EncodedDataset, loss_cfg: LossConfig, train_cfg: TrainConfig):
    """Train in place of a copy of ``params``; returns ``(trained params, history)``.

    History rows hold the full-training-set losses after each epoch.
    """
    if train_set.n == 0:
        raise ValueError("empty training set")
    X = np.ascontiguousarray(train_set.X, dtype=np.float64)
    y = np.asarray(train_set.y, dtype=np.float64)
    n = X.shape[0]
    bs = min(train_cfg.batch_size, n)
    steps_per_epoch = math.ceil(n / bs)
    total_steps = max(2, train_cfg.epochs * steps_per_epoch)
    rng = np.random.default_rng(train_cfg.seed)

    theta = params.to_vector()
    mask = decay_mask(params.dims)
    state = AdamState.zeros(theta.size)
    hist = TrainHistory()
    hist.initial = loss_components(params, X, y, loss_cfg, theta)
    step = 0
    lr = 0.0
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(n)
        for s in range(steps_per_epoch):
            idx = order[s * bs : (s + 1) * bs]
            try:
                ev = loss_and_grad(params, X[idx], y[idx], loss_cfg, with_pde=False, theta=theta)
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, step, str(exc)) from exc
            if not (math.isfinite(ev.total) and np.isfinite(ev.grad).all()):
                raise TrainingDiverged(epoch, step)
            step += 1
            lr = lr_at(min(step, total_steps), total_steps, train_cfg)
            adamw_step(theta, clip_global_norm(ev.grad), state, lr, train_cfg.weight_decay, mask)
        total, dl, pde = loss_components(params, X, y, loss_cfg, theta)
        if not math.isfinite(total):
            raise TrainingDiverged(epoch, step, "epoch-end evaluation")
        hist.append(epoch, total, dl, pde, lr)
        if epoch % 100 == 0:
            log.debug("epoch %d total=%.5g data=%.5g pde=%.5g lr=%.3g", epoch, total, dl, pde, lr)
    trained = params.with_vector(theta)
    return trained, hist


def build_and_train(train_set: EncodedDataset, loss_cfg: LossConfig, train_cfg: TrainConfig, schema_hash=None):
    """Initialise a network sized for ``train_set`` and train it."""
    dims = (train_set.d, *train_cfg.hidden, 1)
    params = init_params(dims, train_cfg.seed)
    params.schema_hash = schema_hash
    cfg = replace(loss_cfg, constrained_cols=train_set.constrained_cols)
    trained, hist = train(params, train_set, cfg, train_cfg)
    trained.schema_hash = schema_hash
    return trained, hist


def evaluate(params: MlpParams, dataset: EncodedDataset, preprocessor=None, factors=metrics.DEFAULT_FACTORS):
    if dataset.n == 0:
        raise ValueError("empty dataset")
    if preprocessor is not None and params.schema_hash and preprocessor.schema_hash != params.schema_hash:
        raise ValueError("model and preprocessor were built for different schemas")
    pred = np.atleast_1d(forward(params, dataset.X))
    return metrics.compute_metrics(dataset.y, pred, factors)


# -- random search -----------------------------------------------------------

NN_SPACE = {
    "hidden1": (100, 120),
    "hidden2": (60, 80),
    "hidden3": (20, 40),
    "kappa": (0.1, 0.9),
    "batch_size": (20, 50),
    "epochs": (900, 1000),
    "weight_decay": (0.001, 0.1),
}
PINN_SPACE = dict(NN_SPACE, omega=(0.01, 0.99))
_INT_KEYS = {"hidden1", "hidden2", "hidden3", "batch_size", "epochs"}


def sample_config(space, rng):
    out = {}
    for key in sorted(space):
        lo, hi = space[key]
        v = lo if lo == hi else rng.uniform(lo, hi)
        out[key] = int(math.floor(v + 0.5)) if key in _INT_KEYS else float(v)
    return out


def _apply(sample, loss_cfg, train_cfg, seed):
    tc = replace(
        train_cfg,
        hidden=tuple(sample.get(k, h) for k, h in zip(("hidden1", "hidden2", "hidden3"), train_cfg.hidden)),
        kappa=sample.get("kappa", train_cfg.kappa),
        batch_size=sample.get("batch_size", train_cfg.batch_size),
        epochs=sample.get("epochs", train_cfg.epochs),
        weight_decay=sample.get("weight_decay", train_cfg.weight_decay),
        seed=seed,
    )
    lc = replace(loss_cfg, omega=sample.get("omega", loss_cfg.omega))
    return lc, tc


@dataclass
class SearchResult:
    best: dict
    best_loss_cfg: LossConfig
    best_train_cfg: TrainConfig
    leaderboard: list
    failures: list

    def write_leaderboard(self, path):
        keys = sorted({k for row in self.leaderboard for k in row["config"]})
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "trial", "val_mse", "val_r2"] + keys)
            for rank, row in enumerate(self.leaderboard, start=1):
                w.writerow(
                    [rank, row["trial"], repr(row["val_mse"]), repr(row["val_r2"])]
                    + [repr(row["config"].get(k)) for k in keys]
                )


class SearchFailed(RuntimeError):
    pass


def random_search(space, trials, data: EncodedDataset, seed, loss_cfg=None, train_cfg=None, val_ratio=0.8):
    """Seeded uniform search; each trial trains on an 80:20 train/validation split of ``data``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    loss_cfg = loss_cfg or LossConfig(constrained_cols=data.constrained_cols)
    train_cfg = train_cfg or TrainConfig()
    fit_set, val_set = train_test_split(data, val_ratio, seed)
    board, failures = [], []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        sample = sample_config(space, rng)
        lc, tc = _apply(sample, loss_cfg, train_cfg, seed=int(rng.integers(2**31 - 1)))
        try:
            model, _ = build_and_train(fit_set, lc, tc)
            pred = np.atleast_1d(forward(model, val_set.X))
            val_mse = metrics.mse(val_set.y, pred)
            if not math.isfinite(val_mse):
                raise TrainingDiverged(tc.epochs, -1, "validation MSE not finite")
            val_r2 = metrics.r2(val_set.y, pred) if val_set.n >= 2 else math.nan
        except (FloatingPointError, ValueError) as exc:
            failures.append({"trial": trial, "config": sample, "error": str(exc)})
            continue
        board.append({"trial": trial, "config": sample, "val_mse": val_mse, "val_r2": val_r2, "cfgs": (lc, tc)})
    if not board:
        detail = "; ".join(f"trial {f['trial']}: {f['error']}" for f in failures)
        raise SearchFailed(f"all {trials} trials failed: {detail}")
    board.sort(key=lambda r: (r["val_mse"], r["trial"]))
    best = board[0]
    lc, tc = best["cfgs"]
    for row in board:
        del row["cfgs"]
    return SearchResult(best["config"], lc, tc, board, failures)
