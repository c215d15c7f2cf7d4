"""Versioned JSON model files.

A model file is self-describing: schema version, model family, the
parameter schema with transformed values (hex-encoded floats, so repeated
save/load cycles are lossless), standardization statistics, the training
data, and a fingerprint of that data. Loading refits the stored parameters
on the stored data, which reproduces the in-process model.
"""

import hashlib
import json

import numpy as np

from . import training
from .coregionalization import CoregionalizationTerm, MultiTaskKernelSpec
from .data import MultiTaskDataset
from .errors import ValidationError
from .gp import GPModel, gp_fit
from .kernels import KERNEL_KINDS, ScalarKernelSpec
from .multitask import MTGPModel, mtgp_fit, mtgp_parameter_names

SCHEMA_VERSION = 1


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(s: str) -> float:
    try:
        return float.fromhex(s)
    except (TypeError, ValueError):
        raise ValidationError(f"bad hex float {s!r} in model file") from None


def _decimal(x: float):
    """Informational decimal mirror of a hex float; None when not JSON-safe."""
    return float(x) if np.isfinite(x) else None


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {
        "shape": list(arr.shape),
        "hex": [_hex(v) for v in arr.reshape(-1)],
    }


def _decode_array(doc: dict) -> np.ndarray:
    flat = np.asarray([_unhex(s) for s in doc["hex"]], dtype=float)
    return flat.reshape(doc["shape"])


def dataset_fingerprint(dataset: MultiTaskDataset) -> str:
    digest = hashlib.sha256(b"mtgp-dataset-v1")
    for X, Y in zip(dataset.inputs, dataset.targets):
        digest.update(np.asarray(X.shape, dtype="<i8").tobytes())
        digest.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(Y, dtype="<f8").tobytes())
    return "sha256:" + digest.hexdigest()


def _encode_dataset(dataset: MultiTaskDataset) -> list:
    return [
        {"x": _encode_array(X), "y": _encode_array(Y)}
        for X, Y in zip(dataset.inputs, dataset.targets)
    ]


def _decode_dataset(tasks_doc: list) -> MultiTaskDataset:
    inputs = tuple(_decode_array(t["x"]) for t in tasks_doc)
    targets = tuple(_decode_array(t["y"]) for t in tasks_doc)
    return MultiTaskDataset(inputs, targets)


def _full_mtgp_schema(spec: MultiTaskKernelSpec) -> training.ParameterSchema:
    entries = tuple(
        training.ParamSpec(n, training.IDENTITY if ".W[" in n else training.LOG)
        for n in mtgp_parameter_names(spec)
    )
    return training.ParameterSchema(entries)


def _full_mtgp_vector(model: MTGPModel) -> np.ndarray:
    raw = []
    for term in model.kernel.terms:
        raw.extend(np.log(term.base_kernel.lengthscales))
        raw.append(np.log(term.base_kernel.signal_variance))
        raw.extend(term.W.reshape(-1))
        with np.errstate(divide="ignore"):
            raw.extend(np.log(term.gamma))  # gamma 0 -> -inf -> exact 0 on reload
    with np.errstate(divide="ignore"):
        raw.extend(np.log(model.noise_variances))
    return np.asarray(raw, dtype=float)


def model_document(model, family: str) -> dict:
    """Serializable dict for a fitted GP or MTGP model."""
    if isinstance(model, GPModel):
        schema = training.gp_schema(model.kernel.input_dim)
        vector = training.gp_vector(model.kernel, model.noise_variance)
        dataset = MultiTaskDataset((model.X,), (model.Y,))
        doc = {
            "schema_version": SCHEMA_VERSION,
            "family": family,
            "model_type": "gp",
            "input_dim": model.kernel.input_dim,
            "num_tasks": 1,
            "kernel_kinds": [model.kernel.kind],
            "parameters": {
                "schema": [[e.name, e.transform] for e in schema.entries],
                "values_hex": [_hex(v) for v in vector],
                "values": [_decimal(v) for v in vector],
            },
            "mean_const": {"hex": _hex(model.mean_const), "value": model.mean_const},
            "data": {"tasks": _encode_dataset(dataset)},
            "dataset_fingerprint": dataset_fingerprint(dataset),
        }
        return doc
    if isinstance(model, MTGPModel):
        schema = _full_mtgp_schema(model.kernel)
        vector = _full_mtgp_vector(model)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "family": family,
            "model_type": "mtgp",
            "input_dim": model.input_dim,
            "num_tasks": model.num_tasks,
            "kernel_kinds": [t.base_kernel.kind for t in model.kernel.terms],
            "ranks": [t.rank for t in model.kernel.terms],
            "standardize": bool(model.standardized),
            "standardization": {
                "task_means": [float(v) for v in model.task_means],
                "task_stds": [float(v) for v in model.task_stds],
                "task_means_hex": [_hex(v) for v in model.task_means],
                "task_stds_hex": [_hex(v) for v in model.task_stds],
            },
            "parameters": {
                "schema": [[e.name, e.transform] for e in schema.entries],
                "values_hex": [_hex(v) for v in vector],
                "values": [_decimal(v) for v in vector],
            },
            "data": {"tasks": _encode_dataset(model.dataset)},
            "dataset_fingerprint": dataset_fingerprint(model.dataset),
        }
        return doc
    raise TypeError(f"cannot serialize {type(model).__name__}")


def save_model(model, path, family: str) -> dict:
    doc = model_document(model, family)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _require(doc: dict, key: str):
    if key not in doc:
        raise ValidationError(f"model file missing key {key!r}")
    return doc[key]


def load_model(path):
    """Load and refit a model file; returns a GPModel or MTGPModel."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    version = _require(doc, "schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"{path}: unsupported model schema version {version} (supported: {SCHEMA_VERSION})"
        )
    model_type = _require(doc, "model_type")
    kinds = _require(doc, "kernel_kinds")
    for kind in kinds:
        if kind not in KERNEL_KINDS:
            raise ValidationError(f"{path}: unknown kernel kind {kind!r}")
    params = _require(doc, "parameters")
    vector = np.asarray([_unhex(s) for s in params["values_hex"]], dtype=float)
    dataset = _decode_dataset(_require(doc, "data")["tasks"])
    input_dim = int(_require(doc, "input_dim"))

    if model_type == "gp":
        template = ScalarKernelSpec(kinds[0], np.ones(input_dim), 1.0)
        if vector.shape[0] != input_dim + 2:
            raise ValidationError(f"{path}: parameter vector has wrong length")
        kernel, noise = training.gp_materialize(template, vector)
        mean_const = _unhex(_require(doc, "mean_const")["hex"])
        return gp_fit(kernel, noise, dataset.inputs[0], dataset.targets[0], mean_const)

    if model_type == "mtgp":
        num_tasks = int(_require(doc, "num_tasks"))
        ranks = _require(doc, "ranks")
        terms = []
        for kind, rank in zip(kinds, ranks):
            base = ScalarKernelSpec(kind, np.ones(input_dim), 1.0)
            terms.append(
                CoregionalizationTerm(np.zeros((num_tasks, rank)), np.zeros(num_tasks), base)
            )
        template = MultiTaskKernelSpec(num_tasks, tuple(terms))
        schema = _full_mtgp_schema(template)
        if vector.shape[0] != schema.size:
            raise ValidationError(f"{path}: parameter vector has wrong length")
        spec, noise = training.mtgp_materialize(
            template, np.ones(num_tasks), schema, vector
        )
        return mtgp_fit(spec, noise, dataset, standardize=bool(_require(doc, "standardize")))

    raise ValidationError(f"{path}: unknown model_type {model_type!r}")
