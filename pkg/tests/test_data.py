import json
import math

import numpy as np
import pytest

from auglearn.data import (
    ColumnSpec,
    DatasetSchema,
    flip_transforms,
    load_csv,
    synthesize_biased,
    train_test_split,
)

SCHEMA = DatasetSchema(
    [
        ColumnSpec("age", "feature", "numeric"),
        ColumnSpec("sex", "protected", "binary", values=["M", "F"]),
        ColumnSpec("race", "protected", "category", values=["A", "B", "C"]),
        ColumnSpec("label", "label", "numeric"),
    ]
)

CSV = "age,sex,race,label\n10,M,A,0\n20,F,B,1\n30,M,C,0\n"


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_hand_fixture(tmp_path):
    ds = load_csv(write(tmp_path, CSV), SCHEMA)
    assert ds.n == 3
    assert ds.width == 4  # age, sex, race=B, race=C
    # age z-scored over the file; protected columns unscaled
    s = math.sqrt(200.0 / 3.0)
    want = np.array(
        [
            [-10.0 / s, 0.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
            [10.0 / s, 0.0, 0.0, 1.0],
        ]
    )
    assert np.allclose(ds.features(), want, atol=1e-12)
    assert np.array_equal(ds.labels(), [0, 1, 0])
    assert ds.meta["dropped_rows"] == 0


def test_load_csv_decode_round_trip(tmp_path):
    ds = load_csv(write(tmp_path, CSV), SCHEMA)
    assert ds.decode_row(0) == {"age": 10.0, "sex": "M", "race": "A", "label": 0}
    assert ds.decode_row(1) == {"age": 20.0, "sex": "F", "race": "B", "label": 1}
    assert ds.decode_row(2) == {"age": 30.0, "sex": "M", "race": "C", "label": 0}


def test_load_csv_missing_cell_dropped(tmp_path):
    ds = load_csv(write(tmp_path, CSV + ",F,B,1\n"), SCHEMA)
    assert ds.n == 3
    assert ds.meta["dropped_rows"] == 1
    assert ds.meta["source_rows"] == 4  # lossless modulo documented drops


def test_load_csv_empty_data_section(tmp_path):
    with pytest.raises(ValueError, match="no rows"):
        load_csv(write(tmp_path, "age,sex,race,label\n"), SCHEMA)


def test_load_csv_unknown_column(tmp_path):
    with pytest.raises(ValueError, match="unknown column"):
        load_csv(write(tmp_path, "age,sex,label\n1,M,0\n"), SCHEMA)


def test_load_csv_extra_columns_ignored(tmp_path):
    text = "age,sex,race,label,junk\n10,M,A,0,x\n20,F,B,1,y\n"
    ds = load_csv(write(tmp_path, text), SCHEMA)
    assert ds.meta["ignored_columns"] == ["junk"]
    assert ds.n == 2


def test_load_csv_unparseable_cell(tmp_path):
    with pytest.raises(ValueError, match="data row 1"):
        load_csv(write(tmp_path, "age,sex,race,label\n10,M,A,0\nxx,F,B,1\n"), SCHEMA)


def test_load_csv_bad_label(tmp_path):
    with pytest.raises(ValueError, match="label outside"):
        load_csv(write(tmp_path, "age,sex,race,label\n10,M,A,2\n"), SCHEMA)


def test_schema_validation():
    with pytest.raises(ValueError, match="exactly one label"):
        DatasetSchema([ColumnSpec("a", "feature", "numeric")])
    with pytest.raises(ValueError, match="two values"):
        ColumnSpec("b", "protected", "binary", values=["only"])
    with pytest.raises(ValueError, match="role"):
        ColumnSpec("c", "target", "numeric")


def test_schema_from_json(tmp_path):
    payload = {
        "columns": [
            {"name": "age", "role": "feature", "encoding": "numeric"},
            {"name": "label", "role": "label", "encoding": "numeric"},
        ]
    }
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    schema = DatasetSchema.from_json(path)
    assert schema.label.name == "label"


def test_split_sizes_and_determinism():
    ds = synthesize_biased(10, seed=1, bias_strength=1.0)
    tr, te = train_test_split(ds, 0.8, seed=7)
    assert (tr.n, te.n) == (8, 2)
    tr2, te2 = train_test_split(ds, 0.8, seed=7)
    assert np.array_equal(tr.raw, tr2.raw) and np.array_equal(te.raw, te2.raw)


def test_split_partition_property():
    ds = synthesize_biased(25, seed=3, bias_strength=0.5)
    tr, te = train_test_split(ds, 0.6, seed=11)
    combined = np.vstack([tr.raw, te.raw])
    assert combined.shape == ds.raw.shape
    # union equals the original multiset of rows
    key = lambda M: sorted(map(tuple, np.round(M, 12)))
    assert key(combined) == key(ds.raw)


def test_split_degenerate_rejected():
    ds = synthesize_biased(4, seed=0, bias_strength=0.0)
    with pytest.raises(ValueError):
        train_test_split(ds, 0.05, seed=0)
    with pytest.raises(ValueError):
        train_test_split(ds, 1.5, seed=0)


def test_split_normalization_train_only():
    ds = synthesize_biased(200, seed=5, bias_strength=1.0)
    tr, te = train_test_split(ds, 0.75, seed=2)
    numeric = slice(0, 3)
    assert np.allclose(tr.mu[numeric], tr.raw[:, numeric].mean(axis=0))
    assert np.allclose(tr.sigma[numeric], tr.raw[:, numeric].std(axis=0))
    assert np.array_equal(tr.mu, te.mu) and np.array_equal(tr.sigma, te.sigma)
    # test-side statistics play no role
    assert not np.allclose(tr.mu[numeric], te.raw[:, numeric].mean(axis=0))
    # protected column untouched by scaling
    assert tr.mu[3] == 0.0 and tr.sigma[3] == 1.0
    assert set(np.unique(tr.features()[:, 3])) <= {0.0, 1.0}


def test_flip_transforms_from_schema(tmp_path):
    ds = load_csv(write(tmp_path, CSV), SCHEMA)
    flips = flip_transforms(ds)
    names = [f.name for f in flips]
    assert names == ["sex-flip", "race->B", "race->C"]
    toggled = flips[0].apply(ds.features())
    assert np.array_equal(toggled[:, 1], 1.0 - ds.features()[:, 1])
    assigned = flips[2].apply(ds.features())
    assert np.all(assigned[:, 2] == 0.0) and np.all(assigned[:, 3] == 1.0)


def test_synthesize_deterministic():
    a = synthesize_biased(100, seed=9, bias_strength=2.0)
    b = synthesize_biased(100, seed=9, bias_strength=2.0)
    assert np.array_equal(a.raw, b.raw) and np.array_equal(a.y, b.y)
    assert a.meta["bias_strength"] == 2.0


def test_synthesize_bias_controls_label_correlation():
    fair = synthesize_biased(4000, seed=13, bias_strength=0.0)
    biased = synthesize_biased(4000, seed=13, bias_strength=2.0)
    corr = lambda ds: abs(np.corrcoef(ds.raw[:, 3], ds.y)[0, 1])
    assert corr(fair) < 0.05  # protected bit independent of the label
    assert corr(biased) > 0.3


def test_synthesize_rejects_bad_n():
    with pytest.raises(ValueError):
        synthesize_biased(0, seed=0, bias_strength=1.0)
