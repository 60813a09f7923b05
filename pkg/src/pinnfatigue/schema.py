"""Declarative feature schema.

A schema is an ordered list of ``FeatureSpec``; each spec becomes exactly one
column of the encoded design matrix, in schema order.  One-hot groups are
written compactly in the TOML file and expand to one spec per category.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

NUMERIC = "numeric"
ONEHOT = "onehot"
FLAG = "binary_flag"

ROLES = ("strain_amplitude", "test_temperature", "dose")
CONVERSIONS = ("fluence_to_dpa",)


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    unit: str = ""
    min: float = -math.inf
    max: float = math.inf
    role: str | None = None
    group: str | None = None
    category: str | None = None
    convert: str | None = None

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind, "unit": self.unit}
        if self.kind == NUMERIC:
            d["min"], d["max"] = self.min, self.max
        for key in ("role", "group", "category", "convert"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple
    target_name: str = "cycles_to_failure"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        self.validate()

    def validate(self):
        names = [f.name for f in self.features]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SchemaError(f"duplicate feature names: {sorted(dup)}")
        if self.target_name in names:
            raise SchemaError("target name collides with a feature name")
        for f in self.features:
            if f.kind not in (NUMERIC, ONEHOT, FLAG):
                raise SchemaError(f"{f.name}: unknown kind {f.kind!r}")
            if f.kind == NUMERIC and math.isfinite(f.min) and math.isfinite(f.max) and not f.min < f.max:
                raise SchemaError(f"{f.name}: min must be < max")
            if f.kind == ONEHOT and (not f.group or f.category is None):
                raise SchemaError(f"{f.name}: one-hot feature needs group and category")
            if f.role is not None:
                if f.role not in ROLES:
                    raise SchemaError(f"{f.name}: unknown role {f.role!r}")
                if f.kind != NUMERIC:
                    raise SchemaError(f"{f.name}: constrained features must be numeric")
            if f.convert is not None and f.convert not in CONVERSIONS:
                raise SchemaError(f"{f.name}: unknown conversion {f.convert!r}")
        for role in ROLES:
            k = sum(f.role == role for f in self.features)
            if k != 1:
                raise SchemaError(f"exactly one feature must carry role {role!r}, found {k}")
        groups = {}
        for f in self.features:
            if f.kind == ONEHOT:
                groups.setdefault(f.group, []).append(f.category)
        for g in groups:
            if g in names:
                raise SchemaError(f"one-hot group {g!r} collides with a feature name")

    @property
    def names(self):
        return [f.name for f in self.features]

    def __len__(self):
        return len(self.features)

    def index(self, name):
        return self.names.index(name)

    def role_feature(self, role):
        for f in self.features:
            if f.role == role:
                return f
        raise KeyError(role)

    def role_columns(self):
        """Column indices of (strain amplitude, test temperature, dose)."""
        return tuple(self.index(self.role_feature(r).name) for r in ROLES)

    def groups(self):
        """Ordered mapping group name -> list of (category, column)."""
        out = {}
        for j, f in enumerate(self.features):
            if f.kind == ONEHOT:
                out.setdefault(f.group, []).append((f.category, j))
        return out

    def input_columns(self):
        """CSV columns a dataset must provide (excluding the target)."""
        cols, seen = [], set()
        for f in self.features:
            key = f.group if f.kind == ONEHOT else f.name
            if key not in seen:
                seen.add(key)
                cols.append(key)
        return cols

    def hash(self):
        doc = {"target": self.target_name, "features": [f.to_dict() for f in self.features]}
        text = json.dumps(doc, sort_keys=True, allow_nan=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def subset(self, names):
        """Schema restricted to ``names`` (kept in original order)."""
        keep = set(names)
        return FeatureSchema(tuple(f for f in self.features if f.name in keep), self.target_name)


def onehot_name(group, category):
    return f"{group}={category}"


def schema_from_dict(doc):
    feats = []
    for entry in doc.get("feature", []):
        kind = entry.get("kind", NUMERIC)
        if kind == ONEHOT:
            group = entry["group"]
            for cat in entry["categories"]:
                feats.append(FeatureSpec(onehot_name(group, cat), ONEHOT, unit="", group=group, category=str(cat)))
        elif kind == NUMERIC:
            feats.append(
                FeatureSpec(
                    entry["name"],
                    NUMERIC,
                    unit=entry.get("unit", ""),
                    min=float(entry.get("min", -math.inf)),
                    max=float(entry.get("max", math.inf)),
                    role=entry.get("role"),
                    convert=entry.get("convert"),
                )
            )
        elif kind == FLAG:
            feats.append(FeatureSpec(entry["name"], FLAG, unit=entry.get("unit", "")))
        else:
            raise SchemaError(f"unknown feature kind {kind!r}")
    return FeatureSchema(tuple(feats), doc.get("target", "cycles_to_failure"))


def load_schema(path):
    with open(path, "rb") as fh:
        return schema_from_dict(tomllib.load(fh))


def default_schema():
    text = resources.files("pinnfatigue").joinpath("resources/default_schema.toml").read_text(encoding="utf-8")
    return schema_from_dict(tomllib.loads(text))


def _toml_float(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def schema_to_toml(schema):
    """Serialise back to the compact TOML layout (one-hot groups re-collapsed)."""
    lines = [f'target = "{schema.target_name}"', ""]
    emitted = set()
    groups = schema.groups()
    for f in schema.features:
        if f.kind == ONEHOT:
            if f.group in emitted:
                continue
            emitted.add(f.group)
            cats = ", ".join(json.dumps(c) for c, _ in groups[f.group])
            lines += ["[[feature]]", 'kind = "onehot"', f'group = "{f.group}"', f"categories = [{cats}]", ""]
            continue
        lines += ["[[feature]]", f'name = "{f.name}"', f'kind = "{f.kind}"', f'unit = "{f.unit}"']
        if f.kind == NUMERIC:
            lines.append(f"min = {_toml_float(f.min)}")
            lines.append(f"max = {_toml_float(f.max)}")
        if f.role:
            lines.append(f'role = "{f.role}"')
        if f.convert:
            lines.append(f'convert = "{f.convert}"')
        lines.append("")
    return "\n".join(lines)


def save_schema(schema, path):
    Path(path).write_text(schema_to_toml(schema), encoding="utf-8")
