"""CSV ingestion, min-max encoding with sentinels, splitting and pruning."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .schema import FLAG, NUMERIC, ONEHOT, FeatureSchema

SENTINEL_MISSING = -10.0
SENTINEL_INFINITE = 10.0
DPA_PER_FLUENCE = 7.0e-22  # dpa per n/cm^2 (E >= 0.1 MeV)
STATE_FORMAT_VERSION = 1


class DataError(ValueError):
    pass


def fluence_to_dpa(fluence):
    """Convert neutron fluence (n/cm^2, E >= 0.1 MeV) to displacements per atom."""
    f = np.asarray(fluence, dtype=np.float64)
    if np.any(f < 0):
        raise DataError("fluence must be non-negative")
    d = DPA_PER_FLUENCE * f
    return float(d) if d.ndim == 0 else d


def log_target(cycles):
    c = np.asarray(cycles, dtype=np.float64)
    if np.any(~(c > 0)):
        raise DataError("cycles to failure must be positive")
    return np.log10(c)


def inverse_transform_target(y_log):
    return np.power(10.0, y_log)


@dataclass
class RawTable:
    """Raw records keyed by schema input column.

    Numeric and flag columns are float arrays (NaN = missing, +inf = the
    literal ``inf``).  One-hot group columns are lists of labels (``None`` =
    empty cell).
    """

    columns: dict
    target: np.ndarray
    source: str = ""

    @property
    def n(self):
        return len(self.target)

    def take(self, rows):
        rows = np.asarray(rows)
        cols = {}
        for k, v in self.columns.items():
            cols[k] = v[rows] if isinstance(v, np.ndarray) else [v[i] for i in rows]
        return RawTable(cols, self.target[rows], self.source)


def _parse_number(cell, row, col):
    s = cell.strip()
    if s == "":
        return math.nan
    if s.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        v = float(s)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: cannot parse {cell!r} as a number") from None
    if math.isnan(v):
        return math.nan
    return math.inf if math.isinf(v) else v


def load_csv(path, schema: FeatureSchema, require_target=True):
    """Read a dataset CSV laid out per ``schema``.

    Without ``require_target`` the target column may be absent (inference
    input); its values then come back as NaN.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        rows = [r for r in reader if any(c.strip() for c in r)]

    seen = set()
    for h in header:
        if h in seen:
            raise DataError(f"{path}: duplicate header column {h!r}")
        seen.add(h)
    required = schema.input_columns() + [schema.target_name]
    missing = [c for c in required if c not in seen]
    if not require_target and missing == [schema.target_name]:
        missing = []
    if missing:
        raise DataError(f"{path}: missing required column(s): {', '.join(missing)}")
    unknown = [h for h in header if h not in required]
    if unknown:
        raise DataError(f"{path}: unknown column(s): {', '.join(unknown)}")

    pos = {h: i for i, h in enumerate(header)}
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")

    kinds = {}
    for f in schema.features:
        kinds[f.group if f.kind == ONEHOT else f.name] = f
    columns = {}
    for col in schema.input_columns():
        spec = kinds[col]
        j = pos[col]
        if spec.kind == ONEHOT:
            columns[col] = [row[j].strip() or None for row in rows]
        else:
            vals = np.array([_parse_number(row[j], r, col) for r, row in enumerate(rows, start=2)], dtype=np.float64)
            if spec.kind == NUMERIC and spec.convert == "fluence_to_dpa":
                finite = np.isfinite(vals)
                vals[finite] = fluence_to_dpa(vals[finite])
            columns[col] = vals

    target = np.full(len(rows), np.nan)
    if schema.target_name not in pos:
        return RawTable(columns, target, str(path))
    jt = pos[schema.target_name]
    for r, row in enumerate(rows, start=2):
        if not require_target and not row[jt].strip():
            continue
        v = _parse_number(row[jt], r, schema.target_name)
        if not (math.isfinite(v) and v > 0):
            raise DataError(f"row {r}: cycles to failure must be a positive finite number, got {row[jt]!r}")
        target[r - 2] = v
    return RawTable(columns, target, str(path))


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if math.isinf(v):
        return "inf"
    return repr(float(v))


def write_csv(table: RawTable, schema: FeatureSchema, path):
    cols = schema.input_columns()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + [schema.target_name])
        for i in range(table.n):
            w.writerow([_fmt(table.columns[c][i]) for c in cols] + [_fmt(table.target[i])])


@dataclass
class PreprocessorState:
    ranges: dict
    schema_hash: str
    sentinel_missing: float = SENTINEL_MISSING
    sentinel_infinite: float = SENTINEL_INFINITE
    target_transform: str = "log10"

    def to_dict(self):
        return {
            "format": "pinnfatigue-preprocessor",
            "version": STATE_FORMAT_VERSION,
            "schema_hash": self.schema_hash,
            "sentinel_missing": self.sentinel_missing,
            "sentinel_infinite": self.sentinel_infinite,
            "target_transform": self.target_transform,
            "ranges": {k: [lo, hi] for k, (lo, hi) in self.ranges.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "pinnfatigue-preprocessor" or doc.get("version") != STATE_FORMAT_VERSION:
            raise DataError("unsupported preprocessor document")
        return cls(
            ranges={k: (float(v[0]), float(v[1])) for k, v in doc["ranges"].items()},
            schema_hash=doc["schema_hash"],
            sentinel_missing=doc["sentinel_missing"],
            sentinel_infinite=doc["sentinel_infinite"],
            target_transform=doc["target_transform"],
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_preprocessor(records: RawTable, schema: FeatureSchema):
    """Fit per-feature (min, max) over finite, non-missing numeric values."""
    ranges = {}
    for f in schema.features:
        if f.kind != NUMERIC:
            continue
        v = records.columns[f.name]
        v = v[np.isfinite(v)]
        if v.size == 0 or v.min() == v.max():
            raise DataError(f"feature {f.name!r} has fewer than two distinct finite values; cannot normalise")
        ranges[f.name] = (float(v.min()), float(v.max()))
    return PreprocessorState(ranges, schema.hash())


@dataclass
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray
    columns: list
    constrained_cols: tuple
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def feature_index(self):
        return {c: j for j, c in enumerate(self.columns)}

    def take(self, rows):
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], y=self.y[rows])

    def drop(self, names):
        names = set(names)
        keep = [j for j, c in enumerate(self.columns) if c not in names]
        cols = [self.columns[j] for j in keep]
        role_names = [self.columns[j] for j in self.constrained_cols]
        if any(r in names for r in role_names):
            raise DataError("cannot drop a constrained column")
        return replace(
            self,
            X=self.X[:, keep],
            columns=cols,
            constrained_cols=tuple(cols.index(r) for r in role_names),
        )


def encode_matrix(records: RawTable, state: PreprocessorState, schema: FeatureSchema):
    if state.schema_hash != schema.hash():
        raise DataError("preprocessor was fitted on a different schema")
    n = records.n
    X = np.empty((n, len(schema)))
    groups = schema.groups()
    for j, f in enumerate(schema.features):
        if f.kind == NUMERIC:
            raw = records.columns[f.name]
            lo, hi = state.ranges[f.name]
            with np.errstate(invalid="ignore"):
                col = (raw - lo) / (hi - lo)
            col[np.isnan(raw)] = state.sentinel_missing
            col[np.isinf(raw)] = state.sentinel_infinite
            X[:, j] = col
        elif f.kind == FLAG:
            raw = records.columns[f.name]
            bad = np.isfinite(raw) & (raw != 0) & (raw != 1)
            if bad.any():
                raise DataError(f"flag {f.name!r} must be 0 or 1 (row {int(np.argmax(bad)) + 2})")
            col = raw.copy()
            col[np.isnan(raw)] = state.sentinel_missing
            col[np.isinf(raw)] = state.sentinel_infinite
            X[:, j] = col
    for group, cats in groups.items():
        labels = records.columns[group]
        colmap = {c: j for c, j in cats}
        for _, j in cats:
            X[:, j] = 0.0
        for i, lab in enumerate(labels):
            if lab is None:
                continue
            if lab not in colmap:
                raise DataError(f"row {i + 2}: unseen category {lab!r} for group {group!r}")
            X[i, colmap[lab]] = 1.0
    return X


def transform(records: RawTable, state: PreprocessorState, schema: FeatureSchema):
    X = encode_matrix(records, state, schema)
    y = log_target(records.target)
    return EncodedDataset(
        X=X,
        y=y,
        columns=schema.names,
        constrained_cols=schema.role_columns(),
        provenance={"source": records.source, "schema_hash": schema.hash()},
    )


def split_indices(n, ratio, seed):
    """Sorted (train, test) row indices: a seeded shuffle whose first
    ``round(ratio * n)`` rows (half-up) go to train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    n_train = int(math.floor(ratio * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def train_test_split(dataset: EncodedDataset, ratio, seed):
    tr, te = split_indices(dataset.n, ratio, seed)
    return dataset.take(tr), dataset.take(te)


def correlation_prune(dataset: EncodedDataset, threshold=0.7):
    """Drop one member of every column pair with |Pearson r| >= threshold.

    The lower-variance member goes; on a variance tie the later column goes.
    Zero-variance columns are dropped up front.  Constrained columns are
    never dropped.  Returns ``(pruned dataset, removed names)``.
    """
    if dataset.d < 2:
        raise ValueError("need at least two columns")
    protected = {dataset.columns[j] for j in dataset.constrained_cols}
    X = dataset.X
    names = list(dataset.columns)
    var = X.var(axis=0)
    removed = [c for j, c in enumerate(names) if var[j] == 0.0 and c not in protected]
    alive = [j for j, c in enumerate(names) if c not in removed]
    while True:
        sub = X[:, alive]
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.corrcoef(sub, rowvar=False)
        r = np.atleast_2d(r)
        drop = None
        for a in range(len(alive)):
            for b in range(a + 1, len(alive)):
                rho = r[a, b]
                if not (np.isfinite(rho) and abs(rho) >= threshold):
                    continue
                ja, jb = alive[a], alive[b]
                pa, pb = names[ja] in protected, names[jb] in protected
                if pa and pb:
                    continue
                if pa:
                    drop = jb
                elif pb:
                    drop = ja
                else:
                    drop = ja if var[ja] < var[jb] else jb
                break
            if drop is not None:
                break
        if drop is None:
            break
        removed.append(names[drop])
        alive.remove(drop)
    if not removed:
        return dataset, []
    return dataset.drop(removed), removed
