"""Command-line entry point.

Every subcommand reads an optional TOML run config (``--config``) and writes
into one output directory (``--out``; default ``$PINNFATIGUE_OUTPUT_ROOT/run``).
Inputs not given explicitly are looked up in the output directory, so a
pipeline can be chained by reusing ``--out``:

    pinnfatigue synth --n 500 --seed 7 --out runs/demo
    pinnfatigue train --omega 0.2 --out runs/demo
    pinnfatigue eval --out runs/demo

Precedence is flag > config file > default.  Each command leaves a
``manifest_<command>.json`` with the resolved configuration and SHA-256
hashes of its inputs and outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels, explain, metrics, oracle
from .data import (
    DataError,
    PreprocessorState,
    correlation_prune,
    encode_matrix,
    fit_preprocessor,
    load_csv,
    split_indices,
    train_test_split,
    transform,
    write_csv,
)
from .loss import LossConfig, loss_pde
from .network import MlpParams, forward, init_params
from .schema import NUMERIC, ONEHOT, default_schema, load_schema, save_schema, tomllib
from .trainer import NN_SPACE, PINN_SPACE, TrainConfig, build_and_train, evaluate, random_search

log = logging.getLogger("pinnfatigue")

BETA_GRID = (1.0, 10.0, 100.0, 1000.0, 10000.0)


class ConfigError(ValueError):
    pass


# -- config plumbing -----------------------------------------------------------


def _load_config(path):
    if path is None:
        return {}, None
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        return tomllib.load(fh), p.parent


def _pick(flag, cfg, key, default=None):
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _path_from(flag, cfg, key, base, out, default_name):
    """Resolve an input path: flag, then config (relative to the config file), then out dir."""
    if flag is not None:
        return Path(flag)
    if key in cfg:
        p = Path(cfg[key])
        return p if p.is_absolute() or base is None else base / p
    return out / default_name


def _require(path, what):
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


def _dataclass_from(cls, section, overrides):
    names = {f.name for f in fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {', '.join(sorted(unknown))}")
    kw = dict(section)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out, command, config, inputs, outputs):
    doc = {
        "command": command,
        "package_version": __version__,
        "kernel_backend": _kernels.backend_name(),
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


class Context:
    """Resolved config, output directory and lazily loaded artifacts for one command."""

    def __init__(self, args):
        self.args = args
        self.cfg, self.base = _load_config(args.config)
        out = args.out or self.cfg.get("output")
        if out is None:
            out = Path(os.environ.get("PINNFATIGUE_OUTPUT_ROOT", "runs")) / "run"
        elif self.base is not None and args.out is None and not Path(out).is_absolute():
            out = self.base / out
        self.out = Path(out)
        self.inputs = []

    def section(self, name):
        sec = self.cfg.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        return sec

    def path(self, attr, key, default_name, what):
        p = _require(_path_from(getattr(self.args, attr, None), self.cfg, key, self.base, self.out, default_name), what)
        self.inputs.append(p)
        return p

    def schema(self):
        flag = getattr(self.args, "schema", None)
        p = _path_from(flag, self.cfg, "schema", self.base, self.out, "schema.toml")
        if flag is None and "schema" not in self.cfg and not p.is_file():
            return default_schema()
        self.inputs.append(_require(p, "schema file"))
        return load_schema(p)

    def records(self, schema, require_target=True):
        return load_csv(self.path("data", "dataset", "dataset.csv", "dataset"), schema, require_target)

    def preprocessor(self, schema, records):
        p = _path_from(getattr(self.args, "preprocessor", None), self.cfg, "preprocessor", self.base, self.out, "preprocessor.json")
        if p.is_file():
            self.inputs.append(p)
            state = PreprocessorState.load(p)
            if state.schema_hash != schema.hash():
                raise ConfigError(f"preprocessor {p} was fitted on a different schema")
            return state
        return fit_preprocessor(records, schema)

    def model(self):
        return MlpParams.load(self.path("model", "model", "model.json", "model file"))

    def split(self, dataset):
        ratio = float(_pick(getattr(self.args, "ratio", None), self.cfg, "split_ratio", 0.8))
        seed = int(_pick(getattr(self.args, "split_seed", None), self.cfg, "split_seed", 0))
        return train_test_split(dataset, ratio, seed), {"ratio": ratio, "seed": seed}

    def train_cfg(self, **overrides):
        return _dataclass_from(TrainConfig, self.section("train"), overrides)

    def loss_cfg(self, constrained_cols, **overrides):
        sec = dict(self.section("loss"))
        sec.pop("constrained_cols", None)
        overrides["constrained_cols"] = constrained_cols
        return _dataclass_from(LossConfig, sec, overrides)


def _predict_log(model, state, schema):
    def f(table):
        return np.atleast_1d(forward(model, encode_matrix(table, state, schema)))

    return f


def _check_model(model, state, dataset):
    if model.n_inputs != dataset.d:
        raise ConfigError(f"model expects {model.n_inputs} inputs, dataset encodes {dataset.d}")
    if model.schema_hash and model.schema_hash != state.schema_hash:
        raise ConfigError("model and preprocessor were built for different schemas")


# -- commands ------------------------------------------------------------------


def cmd_synth(ctx):
    a = ctx.args
    sec = ctx.section("synth")
    n = int(_pick(a.n, sec, "n", 500))
    seed = int(_pick(a.seed, sec, "seed", 0))
    params = dict(sec.get("params", {}))
    if a.noise_sd is not None:
        params["noise_sd"] = a.noise_sd
    elif "noise_sd" in sec:
        params["noise_sd"] = sec["noise_sd"]
    try:
        p = oracle.CmbParams(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid generator parameters: {exc}") from exc
    ranges = {k: tuple(v) for k, v in sec.get("ranges", {}).items()}
    table, schema, _ = oracle.generate_dataset(n, p, seed, ranges or None)
    ctx.out.mkdir(parents=True, exist_ok=True)
    data_path = ctx.out / "dataset.csv"
    schema_path = ctx.out / "schema.toml"
    write_csv(table, schema, data_path)
    save_schema(schema, schema_path)
    conf = {"n": n, "seed": seed, "params": vars(p), "ranges": ranges}
    _write_manifest(ctx.out, "synth", conf, [], [data_path, schema_path])
    return [data_path, schema_path]


def cmd_preprocess(ctx):
    schema = ctx.schema()
    records = ctx.records(schema)
    state = fit_preprocessor(records, schema)
    ds = transform(records, state, schema)
    ctx.out.mkdir(parents=True, exist_ok=True)
    state_path = ctx.out / "preprocessor.json"
    state.save(state_path)
    table_path = ctx.out / "feature_table.csv"
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "feature", "kind", "unit", "role", "fitted_min", "fitted_max", "n_missing", "n_infinite"])
        for j, f in enumerate(schema.features):
            lo, hi = state.ranges.get(f.name, ("", ""))
            col = ds.X[:, j]
            w.writerow(
                [j, f.name, f.kind, f.unit, f.role or "", repr(lo) if lo != "" else "", repr(hi) if hi != "" else "",
                 int(np.sum(col == state.sentinel_missing)) if f.kind != ONEHOT else 0,
                 int(np.sum(col == state.sentinel_infinite)) if f.kind != ONEHOT else 0]
            )
    _write_manifest(ctx.out, "preprocess", {"schema_hash": state.schema_hash}, ctx.inputs, [state_path, table_path])
    return [state_path, table_path]


def _encoded(ctx):
    schema = ctx.schema()
    records = ctx.records(schema)
    state = ctx.preprocessor(schema, records)
    return schema, records, state, transform(records, state, schema)


def cmd_train(ctx):
    a = ctx.args
    schema, records, state, ds = _encoded(ctx)
    (tr, te), split_conf = ctx.split(ds)
    tc = ctx.train_cfg(seed=a.seed, epochs=a.epochs, batch_size=a.batch_size)
    lc = ctx.loss_cfg(ds.constrained_cols, omega=a.omega, beta=a.beta, constraint_mode=a.mode)
    model, hist = build_and_train(tr, lc, tc, schema_hash=state.schema_hash)
    ctx.out.mkdir(parents=True, exist_ok=True)
    model_path = ctx.out / "model.json"
    model.save(model_path)
    state_path = ctx.out / "preprocessor.json"
    state.save(state_path)
    hist_path = ctx.out / "history.csv"
    hist.to_csv(hist_path)
    itr, ite = split_indices(ds.n, split_conf["ratio"], split_conf["seed"])
    split_path = ctx.out / "split.json"
    split_path.write_text(
        json.dumps(
            {"ratio": split_conf["ratio"], "seed": split_conf["seed"],
             "train": itr.tolist(), "test": ite.tolist()}
        ) + "\n",
        encoding="utf-8",
    )
    conf = {"train": tc.to_dict(), "loss": lc.to_dict(), "split": split_conf}
    outs = [model_path, state_path, hist_path, split_path]
    _write_manifest(ctx.out, "train", conf, ctx.inputs, outs)
    return outs


def _split_sets(ctx, ds):
    p = ctx.out / "split.json"
    if getattr(ctx.args, "data", None) is None and p.is_file():
        doc = json.loads(p.read_text(encoding="utf-8"))
        if len(doc["train"]) + len(doc["test"]) == ds.n:
            ctx.inputs.append(p)
            return ds.take(doc["train"]), ds.take(doc["test"])
    return ctx.split(ds)[0]


def cmd_eval(ctx):
    schema, records, state, ds = _encoded(ctx)
    model = ctx.model()
    _check_model(model, state, ds)
    factors = tuple(float(f) for f in _pick(ctx.args.factors, ctx.section("eval"), "factors", metrics.DEFAULT_FACTORS))
    tr, te = _split_sets(ctx, ds)
    ctx.out.mkdir(parents=True, exist_ok=True)
    recs, outs = {}, []
    for name, part in (("train", tr), ("test", te)):
        recs[name] = evaluate(model, part, state, factors)
        pp = ctx.out / f"parity_{name}.csv"
        metrics.parity_export(part.y, np.atleast_1d(forward(model, part.X)), pp)
        outs.append(pp)
    rep = ctx.out / "metrics.txt"
    metrics.write_report(recs, rep)
    mcsv = ctx.out / "metrics.csv"
    with open(mcsv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        keys = list(recs["test"].as_flat())
        w.writerow(["split"] + keys)
        for name, rec in recs.items():
            row = rec.as_flat()
            w.writerow([name] + [repr(row[k]) for k in keys])
    outs = [rep, mcsv] + outs
    _write_manifest(ctx.out, "eval", {"factors": list(factors)}, ctx.inputs, outs)
    return outs


def cmd_predict(ctx):
    schema = ctx.schema()
    records = ctx.records(schema, require_target=False)
    p = _path_from(ctx.args.preprocessor, ctx.cfg, "preprocessor", ctx.base, ctx.out, "preprocessor.json")
    state = PreprocessorState.load(_require(p, "preprocessor"))
    ctx.inputs.append(p)
    model = ctx.model()
    X = encode_matrix(records, state, schema)
    if model.n_inputs != X.shape[1]:
        raise ConfigError(f"model expects {model.n_inputs} inputs, dataset encodes {X.shape[1]}")
    ylog = np.atleast_1d(forward(model, X))
    ctx.out.mkdir(parents=True, exist_ok=True)
    path = ctx.out / "predictions.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "pred_log10", "pred_cycles"])
        for i, v in enumerate(ylog):
            w.writerow([i, repr(float(v)), repr(float(10.0**v))])
    _write_manifest(ctx.out, "predict", {}, ctx.inputs, [path])
    return [path]


def cmd_explain(ctx):
    a = ctx.args
    sec = ctx.section("explain")
    schema, records, state, ds = _encoded(ctx)
    model = ctx.model()
    _check_model(model, state, ds)
    tr, te = _split_sets(ctx, ds)
    seed = int(_pick(a.seed, sec, "seed", 0))
    n_bg = int(_pick(a.n_background, sec, "n_background", 100))
    n_inst = int(_pick(a.n_instances, sec, "n_instances", 50))
    method = _pick(a.method, sec, "method", "exact" if ds.d <= explain.MAX_EXACT_PLAYERS else "sample")
    n_perm = int(_pick(a.n_permutations, sec, "n_permutations", 200))
    rng = np.random.default_rng(seed)
    bg = tr.X[np.sort(rng.choice(tr.n, size=min(n_bg, tr.n), replace=False))]
    inst = te.X[: min(n_inst, te.n)]
    res = explain.explain(lambda X: np.atleast_1d(forward(model, X)), inst, bg, ds.columns, method, n_perm, seed)
    ctx.out.mkdir(parents=True, exist_ok=True)
    vpath = ctx.out / "shap_values.csv"
    spath = ctx.out / "shap_summary.csv"
    res.write_values(vpath)
    explain.write_summary(explain.summary(res), spath)
    outs = [vpath, spath]
    groups = {g: [j for _, j in cats] for g, cats in schema.groups().items()}
    if groups:
        gpath = ctx.out / "shap_groups.csv"
        with open(gpath, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "mean_abs_phi"])
            for g, v in explain.group_summary(res, groups).items():
                w.writerow([g, repr(v)])
        outs.append(gpath)
    conf = {"seed": seed, "n_background": len(bg), "n_instances": len(inst), "method": method, "n_permutations": n_perm}
    _write_manifest(ctx.out, "explain", conf, ctx.inputs, outs)
    return outs


def _default_base(schema, records, state):
    base = {}
    for f in schema.features:
        if f.kind == NUMERIC:
            lo, hi = state.ranges[f.name]
            base[f.name] = 0.5 * (lo + hi)
        elif f.kind != ONEHOT:
            base[f.name] = 0.0
    for g in schema.groups():
        labels = [v for v in records.columns[g] if v is not None]
        base[g] = max(sorted(set(labels)), key=labels.count) if labels else None
    return base


def cmd_trends(ctx):
    a = ctx.args
    sec = ctx.section("trends")
    schema, records, state, ds = _encoded(ctx)
    model = ctx.model()
    _check_model(model, state, ds)
    base = _default_base(schema, records, state)
    user_base = sec.get("base", {})
    unknown = set(user_base) - set(base)
    if unknown:
        raise ConfigError(f"base instance has unknown column(s): {', '.join(sorted(unknown))}")
    base.update(user_base)
    doses = _pick(a.doses, sec, "doses", [0.0, 10.0, 20.0, 30.0])
    lo, hi = state.ranges[schema.role_feature("strain_amplitude").name]
    eps_grid = _pick(a.eps_grid, sec, "eps_grid", None)
    if eps_grid is None:
        eps_grid = np.linspace(lo, hi, int(_pick(a.n_eps, sec, "n_eps", 25))).tolist()
    temperature = float(_pick(a.temperature, sec, "temperature", 300.0))
    names = tuple(schema.role_feature(r).name for r in ("dose", "strain_amplitude", "test_temperature"))
    rows = oracle.trend_sweep(_predict_log(model, state, schema), base, doses, eps_grid, temperature, names)
    ctx.out.mkdir(parents=True, exist_ok=True)
    path = oracle.write_trends(rows, ctx.out / "trends.csv")
    conf = {"doses": list(map(float, doses)), "eps_grid": list(map(float, eps_grid)), "temperature": temperature,
            "base": base}
    _write_manifest(ctx.out, "trends", _json_safe(conf), ctx.inputs, [path])
    return [path]


def cmd_prune(ctx):
    thr = float(_pick(ctx.args.threshold, ctx.section("prune"), "threshold", 0.7))
    _, _, _, ds = _encoded(ctx)
    pruned, removed = correlation_prune(ds, thr)
    ctx.out.mkdir(parents=True, exist_ok=True)
    path = ctx.out / "prune_report.csv"
    var = ds.X.var(axis=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "variance", "status"])
        for j, c in enumerate(ds.columns):
            w.writerow([c, repr(float(var[j])), "removed" if c in removed else "kept"])
    _write_manifest(ctx.out, "prune", {"threshold": thr, "removed": removed, "kept": pruned.columns}, ctx.inputs, [path])
    return [path]


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_search(ctx):
    a = ctx.args
    sec = ctx.section("search")
    _, _, state, ds = _encoded(ctx)
    (tr, _), _ = ctx.split(ds)
    kind = _pick(a.model, sec, "model", "pinn")
    space = dict(PINN_SPACE if kind == "pinn" else NN_SPACE)
    for k, v in sec.get("space", {}).items():
        if k not in space:
            raise ConfigError(f"unknown search dimension {k!r}")
        space[k] = tuple(v)
    if a.max_epochs is not None:
        space["epochs"] = (min(space["epochs"][0], a.max_epochs), a.max_epochs)
    trials = int(_pick(a.trials, sec, "trials", 10))
    seed = int(_pick(a.seed, sec, "seed", 0))
    lc = ctx.loss_cfg(ds.constrained_cols)
    if kind == "nn":
        lc = replace(lc, omega=0.0)
    res = random_search(space, trials, tr, seed, lc, ctx.train_cfg())
    ctx.out.mkdir(parents=True, exist_ok=True)
    board = ctx.out / "leaderboard.csv"
    res.write_leaderboard(board)
    best = ctx.out / "best_config.toml"
    tcd = res.best_train_cfg.to_dict()
    lcd = res.best_loss_cfg.to_dict()
    lcd.pop("constrained_cols")
    lines = ["[train]"] + [f"{k} = {_toml_value(v)}" for k, v in tcd.items()]
    lines += ["", "[loss]"] + [f"{k} = {_toml_value(v)}" for k, v in lcd.items()]
    best.write_text("\n".join(lines) + "\n", encoding="utf-8")
    conf = {"model": kind, "trials": trials, "seed": seed, "space": {k: list(v) for k, v in space.items()},
            "failures": res.failures}
    _write_manifest(ctx.out, "search", conf, ctx.inputs, [board, best])
    return [board, best]


def beta_sweep(ds, loss_cfg, train_cfg, betas=BETA_GRID, seeds=(0, 1, 2), ratio=0.8):
    """Retrain once per (beta, seed); every other setting stays fixed.

    Besides test/train R2 and MSE, each run records omega * loss_pde at the
    seed's initial parameters, so the beta dependence of the penalty is
    compared at identical network weights.
    """
    rows = []
    for beta in betas:
        runs = []
        for seed in seeds:
            tr, te = train_test_split(ds, ratio, seed)
            tc = replace(train_cfg, seed=seed)
            lc = replace(loss_cfg, beta=float(beta), constrained_cols=ds.constrained_cols)
            init = init_params((ds.d, *tc.hidden, 1), seed)
            pde_init = lc.omega * loss_pde(init, tr.X, lc)
            model, _ = build_and_train(tr, lc, tc)
            m_te = evaluate(model, te)
            m_tr = evaluate(model, tr)
            pde_trained = lc.omega * loss_pde(model, tr.X, lc)
            runs.append((m_te.r2, m_tr.r2, m_te.mse, m_tr.mse, pde_init, pde_trained))
        arr = np.array(runs)
        mean, sd = arr.mean(axis=0), arr.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(arr.shape[1])
        rows.append((float(beta), len(seeds), mean, sd))
    return rows


SWEEP_COLUMNS = ("test_r2", "train_r2", "test_mse", "train_mse", "pde_at_init", "pde_trained")


def write_beta_sweep(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["beta", "n_runs"]
        for c in SWEEP_COLUMNS:
            head += [f"{c}_mean", f"{c}_sd"]
        w.writerow(head)
        for beta, n, mean, sd in rows:
            row = [repr(beta), n]
            for m, s in zip(mean, sd):
                row += [repr(float(m)), repr(float(s))]
            w.writerow(row)
    return path


def cmd_sweep_beta(ctx):
    a = ctx.args
    sec = ctx.section("sweep_beta")
    _, _, _, ds = _encoded(ctx)
    betas = [float(b) for b in _pick(a.betas, sec, "betas", BETA_GRID)]
    seeds = [int(s) for s in _pick(a.seeds, sec, "seeds", [0, 1, 2])]
    ratio = float(_pick(a.ratio, ctx.cfg, "split_ratio", 0.8))
    tc = ctx.train_cfg(epochs=a.epochs)
    lc = ctx.loss_cfg(ds.constrained_cols, omega=a.omega)
    rows = beta_sweep(ds, lc, tc, betas, seeds, ratio)
    ctx.out.mkdir(parents=True, exist_ok=True)
    path = write_beta_sweep(rows, ctx.out / "beta_sweep.csv")
    conf = {"betas": betas, "seeds": seeds, "train": tc.to_dict(), "loss": lc.to_dict()}
    _write_manifest(ctx.out, "sweep-beta", conf, ctx.inputs, [path])
    return [path]


# -- argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser():
    p = _Parser(prog="pinnfatigue", description="Constraint-informed fatigue-life regression")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--config", help="TOML run config")
        sp.add_argument("--out", help="output directory")
        if data:
            sp.add_argument("--data", help="dataset CSV")
            sp.add_argument("--schema", help="schema TOML (default: out/schema.toml, else the built-in schema)")
            sp.add_argument("--preprocessor", help="fitted preprocessor JSON")
        return sp

    sp = common(sub.add_parser("synth", help="generate a synthetic strain-life dataset"), data=False)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--noise-sd", type=float)

    common(sub.add_parser("preprocess", help="fit and save the preprocessor"))

    sp = common(sub.add_parser("train", help="train the network"))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--mode", choices=("literal", "hinge"))
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--split-seed", type=int)

    sp = common(sub.add_parser("eval", help="metrics and parity CSVs"))
    sp.add_argument("--model")
    sp.add_argument("--factors", type=_floats)
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--split-seed", type=int)

    sp = common(sub.add_parser("predict", help="predict cycles to failure"))
    sp.add_argument("--model")

    sp = common(sub.add_parser("explain", help="Shapley attributions"))
    sp.add_argument("--model")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-background", type=int)
    sp.add_argument("--n-instances", type=int)
    sp.add_argument("--method", choices=("exact", "sample"))
    sp.add_argument("--n-permutations", type=int)
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--split-seed", type=int)

    sp = common(sub.add_parser("trends", help="life vs strain amplitude at several doses"))
    sp.add_argument("--model")
    sp.add_argument("--doses", type=_floats)
    sp.add_argument("--eps-grid", type=_floats, help="strain amplitudes in dataset units")
    sp.add_argument("--n-eps", type=int)
    sp.add_argument("--temperature", type=float)

    sp = common(sub.add_parser("prune", help="correlation-based feature pruning report"))
    sp.add_argument("--threshold", type=float)

    sp = common(sub.add_parser("search", help="random hyperparameter search"))
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--model", choices=("pinn", "nn"))
    sp.add_argument("--max-epochs", type=int, help="cap the epochs dimension of the search space")
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--split-seed", type=int)

    sp = common(sub.add_parser("sweep-beta", help="retrain across beta values"))
    sp.add_argument("--betas", type=_floats)
    sp.add_argument("--seeds", type=_ints)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--ratio", type=float)
    return p


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "explain": cmd_explain,
    "trends": cmd_trends,
    "prune": cmd_prune,
    "search": cmd_search,
    "sweep-beta": cmd_sweep_beta,
}


def run(argv=None):
    """Run one subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("no subcommand given (one of: " + ", ".join(COMMANDS) + ")")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
        ctx = Context(args)
        outputs = COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, FloatingPointError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in outputs:
        print(p)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
