import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnfatigue.data import (
    DataError,
    EncodedDataset,
    PreprocessorState,
    correlation_prune,
    fit_preprocessor,
    fluence_to_dpa,
    inverse_transform_target,
    load_csv,
    log_target,
    split_indices,
    train_test_split,
    transform,
    write_csv,
)
from pinnfatigue.schema import SchemaError, default_schema, load_schema, save_schema, schema_from_dict, tomllib

SMALL_SCHEMA = """
target = "cycles_to_failure"

[[feature]]
name = "strain_amplitude"
unit = "%"
role = "strain_amplitude"

[[feature]]
name = "test_temperature"
unit = "degC"
role = "test_temperature"

[[feature]]
name = "fluence"
unit = "n/cm2"
role = "dose"
convert = "fluence_to_dpa"

[[feature]]
name = "irradiation_temperature"

[[feature]]
name = "radius_of_curvature"

[[feature]]
kind = "onehot"
group = "sample_type"
categories = ["hourglass", "cylinder"]
"""

HEADER = "strain_amplitude,test_temperature,fluence,irradiation_temperature,radius_of_curvature,sample_type,cycles_to_failure"


@pytest.fixture
def schema():
    return schema_from_dict(tomllib.loads(SMALL_SCHEMA))


def write(tmp_path, body, header=HEADER):
    p = tmp_path / "d.csv"
    p.write_text(header + "\n" + body)
    return p


ROWS = """0.5,22,0,,10,hourglass,1000
1.0,361,1e22,300,inf,cylinder,200
2.0,700,1.01e23,400,3,,50
"""


def test_fluence_anchors():
    assert fluence_to_dpa(1e22) == pytest.approx(7.0, rel=1e-12)
    assert fluence_to_dpa(1.01e23) == pytest.approx(70.7, rel=1e-12)
    assert fluence_to_dpa(0.0) == 0.0


def test_target_transform():
    assert log_target(1000.0) == pytest.approx(3.0, abs=1e-15)
    assert inverse_transform_target(3.0) == pytest.approx(1000.0, rel=1e-15)
    assert inverse_transform_target(0.0) == 1.0
    assert inverse_transform_target(1.0414) == pytest.approx(11.0, abs=0.1)


@given(st.floats(1.0, 1e9))
def test_target_round_trip(c):
    assert inverse_transform_target(log_target(c)) == pytest.approx(c, rel=1e-12)


def test_load_three_rows(tmp_path, schema):
    t = load_csv(write(tmp_path, ROWS), schema)
    assert t.n == 3
    assert math.isinf(t.columns["radius_of_curvature"][1])
    assert math.isnan(t.columns["irradiation_temperature"][0])
    np.testing.assert_allclose(t.columns["fluence"], [0.0, 7.0, 70.7], rtol=1e-12)
    assert t.columns["sample_type"] == ["hourglass", "cylinder", None]


def test_missing_column_named(tmp_path, schema):
    header = HEADER.replace("strain_amplitude,", "")
    body = "\n".join(",".join(r.split(",")[1:]) for r in ROWS.strip().splitlines())
    with pytest.raises(DataError, match="strain_amplitude"):
        load_csv(write(tmp_path, body, header), schema)


def test_bad_cell_reports_location(tmp_path, schema):
    with pytest.raises(DataError, match="row 2"):
        load_csv(write(tmp_path, "abc,22,0,1,1,hourglass,10\n"), schema)


def test_nonpositive_target_rejected(tmp_path, schema):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, "0.5,22,0,1,1,hourglass,0\n"), schema)


def test_unknown_and_duplicate_columns(tmp_path, schema):
    with pytest.raises(DataError, match="unknown"):
        load_csv(write(tmp_path, "0.5,22,0,1,1,hourglass,10,7\n", HEADER + ",extra"), schema)
    with pytest.raises(DataError, match="duplicate"):
        load_csv(write(tmp_path, "0.5,22,0,1,1,hourglass,10,7\n", HEADER + ",fluence"), schema)


def test_prediction_input_without_target(tmp_path, schema):
    header = HEADER.replace(",cycles_to_failure", "")
    body = "\n".join(r.rsplit(",", 1)[0] for r in ROWS.strip().splitlines())
    t = load_csv(write(tmp_path, body, header), schema, require_target=False)
    assert t.n == 3 and np.isnan(t.target).all()


def test_fit_and_encode(tmp_path, schema):
    t = load_csv(write(tmp_path, ROWS), schema)
    st_ = fit_preprocessor(t, schema)
    assert st_.ranges["test_temperature"] == (22.0, 700.0)
    assert st_.ranges["radius_of_curvature"] == (3.0, 10.0)  # inf excluded
    ds = transform(t, st_, schema)
    j = ds.feature_index
    np.testing.assert_allclose(ds.X[:, j["test_temperature"]], [0.0, 0.5, 1.0], atol=1e-15)
    assert ds.X[0, j["irradiation_temperature"]] == -10.0
    assert ds.X[1, j["radius_of_curvature"]] == 10.0
    assert ds.X[2, j["sample_type=hourglass"]] == 0 and ds.X[2, j["sample_type=cylinder"]] == 0
    assert ds.X[0, j["sample_type=hourglass"]] == 1
    np.testing.assert_allclose(ds.y, [3.0, math.log10(200), math.log10(50)], rtol=1e-15)
    finite = ds.X[(ds.X != -10) & (ds.X != 10)]
    assert finite.min() >= 0 and finite.max() <= 1
    assert ds.constrained_cols == (0, 1, 2)


def test_constant_feature_rejected(tmp_path, schema):
    body = "0.5,22,0,5,1,hourglass,10\n0.6,30,1,5,2,hourglass,10\n"
    with pytest.raises(DataError, match="irradiation_temperature"):
        fit_preprocessor(load_csv(write(tmp_path, body), schema), schema)


def test_unseen_category(tmp_path, schema):
    t = load_csv(write(tmp_path, ROWS.replace("cylinder", "plate")), schema)
    with pytest.raises(DataError, match="plate"):
        transform(t, fit_preprocessor(t, schema), schema)


def test_state_round_trip(tmp_path, schema):
    t = load_csv(write(tmp_path, ROWS), schema)
    s = fit_preprocessor(t, schema)
    s.save(tmp_path / "p.json")
    assert PreprocessorState.load(tmp_path / "p.json") == s


def test_csv_write_read_round_trip(tmp_path, schema):
    t = load_csv(write(tmp_path, ROWS), schema)
    out = tmp_path / "o.csv"
    # fluence column now holds dpa; write with a schema lacking the conversion
    plain = schema_from_dict(tomllib.loads(SMALL_SCHEMA.replace('convert = "fluence_to_dpa"', "")))
    write_csv(t, plain, out)
    u = load_csv(out, plain)
    for k, v in t.columns.items():
        if isinstance(v, list):
            assert u.columns[k] == v
        else:
            np.testing.assert_array_equal(u.columns[k], v)
    np.testing.assert_array_equal(u.target, t.target)


def test_schema_toml_round_trip(tmp_path):
    s = default_schema()
    save_schema(s, tmp_path / "s.toml")
    assert load_schema(tmp_path / "s.toml") == s
    assert load_schema(tmp_path / "s.toml").hash() == s.hash()


def test_schema_requires_roles():
    with pytest.raises(SchemaError):
        schema_from_dict(tomllib.loads(SMALL_SCHEMA.replace('role = "dose"', "")))


def _dataset(X, cols=(0, 1, 2)):
    return EncodedDataset(np.asarray(X, float), np.zeros(len(X)), [f"c{j}" for j in range(np.shape(X)[1])], cols)


def test_split_sizes():
    ds = _dataset(np.arange(30.0).reshape(10, 3))
    tr, te = train_test_split(ds, 0.8, 3)
    assert tr.n == 8 and te.n == 2
    assert not set(tr.X[:, 0]) & set(te.X[:, 0])
    tr2, _ = train_test_split(ds, 0.8, 3)
    assert np.array_equal(tr.X, tr2.X)
    a, b = split_indices(495, 0.7, 0)
    assert len(a) == 347 and len(b) == 148


def test_prune_identical_columns():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(50, 3))
    x = rng.normal(size=50)
    ds = _dataset(np.column_stack([base, x, x]))
    pruned, removed = correlation_prune(ds)
    assert removed == ["c4"] and pruned.d == 4


def test_prune_independent_columns_untouched():
    rng = np.random.default_rng(1)
    ds = _dataset(rng.normal(size=(400, 6)))
    pruned, removed = correlation_prune(ds)
    assert removed == [] and pruned is ds


def test_prune_drops_lower_variance_member():
    rng = np.random.default_rng(2)
    b = rng.normal(size=60)
    ds = _dataset(np.column_stack([rng.normal(size=(60, 3)), 2 * b, b, rng.normal(size=60)]))
    _, removed = correlation_prune(ds)
    assert removed == ["c4"]


def test_prune_never_drops_constrained_column():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 4))
    X[:, 3] = 5 * X[:, 0]
    _, removed = correlation_prune(_dataset(X))
    assert removed == ["c3"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_prune_idempotent(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(30, 4))
    mix = rng.normal(size=(4, 7))
    ds = _dataset(Z @ mix + 0.3 * rng.normal(size=(30, 7)))
    once, _ = correlation_prune(ds, 0.7)
    twice, removed = correlation_prune(once, 0.7)
    assert removed == [] and twice.columns == once.columns


def test_drop_rejects_constrained():
    with pytest.raises(DataError):
        _dataset(np.ones((3, 4))).drop(["c0"])
