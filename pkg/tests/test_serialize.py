import json
import math
import os

import numpy as np
import pytest

from fleetrisk import mfsvm
from fleetrisk.errors import InputError
from fleetrisk.hierarchy import HierarchyConfig, predict_probs, train_hierarchy
from fleetrisk.kernels import KernelSpec
from fleetrisk.membership import MembershipSpec
from fleetrisk.serialize import (
    HIERARCHY_SCHEMA,
    MFSVM_SCHEMA,
    atomic_write_text,
    dumps_doc,
    hexf,
    hierarchy_from_doc,
    hierarchy_to_doc,
    load_doc,
    load_model,
    mfsvm_from_doc,
    mfsvm_to_doc,
    model_from_doc,
    model_to_doc,
    save_model,
    unhexf,
)


def test_hex_floats_round_trip_bit_patterns():
    values = [0.1, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, math.pi, 3.0]
    for v in values:
        back = unhexf(hexf(v))
        assert back == v
        assert math.copysign(1.0, back) == math.copysign(1.0, v)  # -0.0 preserved


def test_dumps_doc_is_canonical():
    assert dumps_doc({"b": 1, "a": [2, 3]}) == '{\n "a": [\n  2,\n  3\n ],\n "b": 1\n}\n'


def _train_toy(calibrate=True, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(12, 2)) + 1.5, rng.normal(size=(12, 2)) - 1.5])
    y = np.array([1.0] * 12 + [-1.0] * 12)
    return X, train(X, y, calibrate)


def train(X, y, calibrate):
    return mfsvm.train(
        X, y, KernelSpec("rbf", gamma=0.6), C=2.0,
        membership_spec=MembershipSpec("kernel_space"), calibrate=calibrate,
    )


def test_mfsvm_document_round_trip_preserves_predictions():
    X, model = _train_toy(calibrate=True)
    doc = mfsvm_to_doc(model)
    assert doc["schema"] == MFSVM_SCHEMA
    back = mfsvm_from_doc(json.loads(dumps_doc(doc)))  # through actual JSON text
    queries = np.random.default_rng(1).normal(size=(10, 2))
    assert np.array_equal(model.decision_values(queries), back.decision_values(queries))
    assert np.array_equal(model.predict_probs(queries), back.predict_probs(queries))
    assert back.kernel == model.kernel
    assert back.platt_a == model.platt_a and back.platt_b == model.platt_b
    # re-serializing the loaded model reproduces the document byte for byte
    assert dumps_doc(mfsvm_to_doc(back)) == dumps_doc(doc)


def test_uncalibrated_model_round_trips_none_calibration():
    _, model = _train_toy(calibrate=False)
    back = mfsvm_from_doc(mfsvm_to_doc(model))
    assert back.platt_a is None and back.platt_b is None
    assert not back.calibrated


def test_hierarchy_document_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(size=(25, 3)) + 2.0, rng.normal(size=(25, 3)) - 2.0])
    y = np.array([1.0] * 25 + [-1.0] * 25)
    config = HierarchyConfig(codebook_sizes=(4, 4, 4, 4), bmu_units=4,
                             kernel=KernelSpec("rbf", gamma=0.4), seed=5)
    model = train_hierarchy(X, y, config)
    doc = hierarchy_to_doc(model)
    assert doc["schema"] == HIERARCHY_SCHEMA
    back = hierarchy_from_doc(json.loads(dumps_doc(doc)))
    assert np.array_equal(predict_probs(model, X), predict_probs(back, X))
    assert back.config == model.config
    assert dumps_doc(hierarchy_to_doc(back)) == dumps_doc(doc)


def test_save_and_load_model_file(tmp_path):
    _, model = _train_toy()
    path = str(tmp_path / "model.json")
    save_model(model, path)
    loaded = load_model(path)
    assert isinstance(loaded, mfsvm.MfsvmModel)
    with open(path) as fh:
        on_disk = fh.read()
    assert on_disk == dumps_doc(mfsvm_to_doc(model))
    assert on_disk.endswith("\n")
    # no temp droppings left beside the model
    assert sorted(os.listdir(tmp_path)) == ["model.json"]


def test_model_dispatch_and_schema_errors(tmp_path):
    _, model = _train_toy()
    doc = model_to_doc(model)
    assert model_from_doc(doc).n_support == model.n_support
    with pytest.raises(InputError):
        model_to_doc(object())
    with pytest.raises(InputError, match="unsupported model document"):
        model_from_doc({"schema": "fleetrisk.unknown/9"})
    wrong = dict(doc, schema=HIERARCHY_SCHEMA)
    with pytest.raises(InputError):
        mfsvm_from_doc(wrong)
    with pytest.raises(InputError):
        load_model(str(tmp_path / "absent.json"))
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    with pytest.raises(InputError, match="not valid JSON"):
        load_doc(str(garbled))


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "sub" / "out.json"
    with pytest.raises(FileNotFoundError):
        atomic_write_text(str(target), "content\n")
    assert not target.exists()
    ok = tmp_path / "ok.json"
    atomic_write_text(str(ok), "content\n")
    assert ok.read_text() == "content\n"
    atomic_write_text(str(ok), "replaced\n")  # overwrite goes through rename too
    assert ok.read_text() == "replaced\n"
    assert sorted(os.listdir(tmp_path)) == ["ok.json"]
