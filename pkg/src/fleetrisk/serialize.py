"""Versioned, lossless model documents.

Models are stored as JSON with every float encoded via ``float.hex()``, so a
round trip preserves exact bit patterns and retraining with a fixed seed
produces byte-identical files.  Keys are sorted and files are written
atomically (temp file + rename) so a crash never leaves a half-written
model.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from . import hierarchy as hr
from . import mfsvm as mf
from .errors import InputError
from .kernels import KernelSpec
from .membership import MembershipSpec
from .solver import TrainedSvm

MFSVM_SCHEMA = "fleetrisk.mfsvm/1"
HIERARCHY_SCHEMA = "fleetrisk.hmfsvm/1"
PIPELINE_SCHEMA = "fleetrisk.pipeline/1"


def hexf(x: float) -> str:
    return float(x).hex()


def unhexf(s: str) -> float:
    return float.fromhex(s)


def hex_vector(v) -> list:
    return [float(x).hex() for x in np.asarray(v, dtype=np.float64)]


def unhex_vector(items) -> np.ndarray:
    return np.array([float.fromhex(s) for s in items], dtype=np.float64)


def hex_matrix(M) -> list:
    return [hex_vector(row) for row in np.asarray(M, dtype=np.float64)]


def unhex_matrix(rows, width: int | None = None) -> np.ndarray:
    if not rows:
        return np.empty((0, width or 0), dtype=np.float64)
    return np.array([[float.fromhex(s) for s in row] for row in rows], dtype=np.float64)


def _kernel_doc(spec: KernelSpec) -> dict:
    return {"family": spec.family, "gamma": hexf(spec.gamma), "coef0": hexf(spec.coef0)}


def _kernel_from(doc: dict) -> KernelSpec:
    return KernelSpec(doc["family"], unhexf(doc["gamma"]), unhexf(doc["coef0"]))


def _membership_doc(spec: MembershipSpec | None):
    if spec is None:
        return None
    return {
        "scheme": spec.scheme,
        "theta": hexf(spec.theta),
        "epsilon": hexf(spec.epsilon),
        "floor": hexf(spec.floor),
    }


def _membership_from(doc) -> MembershipSpec | None:
    if doc is None:
        return None
    return MembershipSpec(
        doc["scheme"], unhexf(doc["theta"]), unhexf(doc["epsilon"]), unhexf(doc["floor"])
    )


def mfsvm_to_doc(model: mf.MfsvmModel) -> dict:
    """Self-contained document for one fuzzy SVM (support set only)."""
    svm = model.svm
    sv = svm.support_indices
    return {
        "schema": MFSVM_SCHEMA,
        "kernel": _kernel_doc(model.kernel),
        "membership_spec": _membership_doc(model.membership_spec),
        "support_x": hex_matrix(model.training_X),
        "support_y": hex_vector(model.training_y),
        "alpha": hex_vector(svm.alpha[sv]),
        "caps": hex_vector(svm.caps[sv]),
        "memberships": hex_vector(model.memberships[sv]),
        "bias": hexf(svm.bias),
        "objective": hexf(svm.objective),
        "iterations": int(svm.iterations),
        "converged": bool(svm.converged),
        "n_features": int(model.training_X.shape[1]),
        "platt_a": None if model.platt_a is None else hexf(model.platt_a),
        "platt_b": None if model.platt_b is None else hexf(model.platt_b),
    }


def _check_schema(doc: dict, expected: str) -> None:
    got = doc.get("schema")
    if got != expected:
        raise InputError(f"unsupported model document: expected schema {expected!r}, found {got!r}")


def mfsvm_from_doc(doc: dict) -> mf.MfsvmModel:
    _check_schema(doc, MFSVM_SCHEMA)
    X = unhex_matrix(doc["support_x"], width=int(doc["n_features"]))
    alpha = unhex_vector(doc["alpha"])
    svm = TrainedSvm(
        alpha=alpha,
        bias=unhexf(doc["bias"]),
        support_indices=np.arange(alpha.shape[0]),
        objective=unhexf(doc["objective"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        caps=unhex_vector(doc["caps"]),
    )
    return mf.MfsvmModel(
        kernel=_kernel_from(doc["kernel"]),
        membership_spec=_membership_from(doc["membership_spec"]),
        svm=svm,
        memberships=unhex_vector(doc["memberships"]),
        training_X=X,
        training_y=unhex_vector(doc["support_y"]),
        platt_a=None if doc["platt_a"] is None else unhexf(doc["platt_a"]),
        platt_b=None if doc["platt_b"] is None else unhexf(doc["platt_b"]),
    )


def _config_doc(config: hr.HierarchyConfig) -> dict:
    return {
        "register_len": config.register_len,
        "tap_interval": config.tap_interval,
        "codebook_sizes": list(config.codebook_sizes),
        "bmu_units": config.bmu_units,
        "impurity_threshold": hexf(config.impurity_threshold),
        "min_unit_examples": config.min_unit_examples,
        "kernel": _kernel_doc(config.kernel),
        "C": hexf(config.C),
        "membership": _membership_doc(config.membership),
        "layer_kernels": None if config.layer_kernels is None
        else [_kernel_doc(k) for k in config.layer_kernels],
        "layer_C": None if config.layer_C is None
        else [hexf(c) for c in config.layer_C],
        "seed": config.seed,
    }


def _config_from(doc: dict) -> hr.HierarchyConfig:
    return hr.HierarchyConfig(
        register_len=int(doc["register_len"]),
        tap_interval=int(doc["tap_interval"]),
        codebook_sizes=tuple(doc["codebook_sizes"]),
        bmu_units=int(doc["bmu_units"]),
        impurity_threshold=unhexf(doc["impurity_threshold"]),
        min_unit_examples=int(doc["min_unit_examples"]),
        kernel=_kernel_from(doc["kernel"]),
        C=unhexf(doc["C"]),
        membership=_membership_from(doc["membership"]),
        layer_kernels=None if doc["layer_kernels"] is None
        else tuple(_kernel_from(k) for k in doc["layer_kernels"]),
        layer_C=None if doc["layer_C"] is None
        else tuple(unhexf(c) for c in doc["layer_C"]),
        seed=int(doc["seed"]),
    )


def hierarchy_to_doc(model: hr.HierarchyModel) -> dict:
    return {
        "schema": HIERARCHY_SCHEMA,
        "config": _config_doc(model.config),
        "n_features": model.n_features,
        "feature_models": [mfsvm_to_doc(m) for m in model.feature_models],
        "codebooks": [hex_matrix(cb.prototypes) for cb in model.codebooks],
        "layer_models": [mfsvm_to_doc(m) for m in model.layer_models],
        "bmu_codebook": hex_matrix(model.bmu_codebook.prototypes),
        "cell_counts": [int(c) for c in model.cell_counts],
        "cell_pos": [int(c) for c in model.cell_pos],
        "cell_members": [[int(i) for i in idx] for idx in model.cell_members],
        "specialists": {str(u): mfsvm_to_doc(m) for u, m in sorted(model.specialists.items())},
        "majority_cells": sorted(int(u) for u in model.majority_cells),
    }


def hierarchy_from_doc(doc: dict) -> hr.HierarchyModel:
    _check_schema(doc, HIERARCHY_SCHEMA)
    return hr.HierarchyModel(
        config=_config_from(doc["config"]),
        n_features=int(doc["n_features"]),
        feature_models=tuple(mfsvm_from_doc(d) for d in doc["feature_models"]),
        codebooks=tuple(hr.Codebook(prototypes=unhex_matrix(m)) for m in doc["codebooks"]),
        layer_models=tuple(mfsvm_from_doc(d) for d in doc["layer_models"]),
        bmu_codebook=hr.Codebook(prototypes=unhex_matrix(doc["bmu_codebook"])),
        cell_counts=np.array(doc["cell_counts"], dtype=np.int64),
        cell_pos=np.array(doc["cell_pos"], dtype=np.int64),
        cell_members=tuple(np.array(idx, dtype=np.intp) for idx in doc["cell_members"]),
        specialists={int(u): mfsvm_from_doc(d) for u, d in doc["specialists"].items()},
        majority_cells=frozenset(int(u) for u in doc["majority_cells"]),
    )


def model_to_doc(model) -> dict:
    if isinstance(model, mf.MfsvmModel):
        return mfsvm_to_doc(model)
    if isinstance(model, hr.HierarchyModel):
        return hierarchy_to_doc(model)
    raise InputError(f"cannot serialize object of type {type(model).__name__}")


def model_from_doc(doc: dict):
    schema = doc.get("schema")
    if schema == MFSVM_SCHEMA:
        return mfsvm_from_doc(doc)
    if schema == HIERARCHY_SCHEMA:
        return hierarchy_from_doc(doc)
    raise InputError(
        f"unsupported model document: found schema {schema!r}, "
        f"expected one of {MFSVM_SCHEMA!r}, {HIERARCHY_SCHEMA!r}"
    )


def dumps_doc(doc: dict) -> str:
    """Canonical text form: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_model(model, path: str) -> None:
    atomic_write_text(path, dumps_doc(model_to_doc(model)))


def load_doc(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"model file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"model file {path} is not valid JSON: {e}") from None


def load_model(path: str):
    return model_from_doc(load_doc(path))
