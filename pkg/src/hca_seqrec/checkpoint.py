"""Checkpoint and run-manifest documents.

Checkpoints are JSON with every array stored as a shape plus a flat list of
decimal floats.  Python's float repr is the shortest string that reads back
to the same double, so save -> load -> save reproduces the file byte for byte.
"""
import json
from dataclasses import asdict

import numpy as np

from .baselines import MfModel, PopModel, RandomModel, SequenceModel
from .seqmodel import PARAM_ORDER, HyperParams, ModelParams

FORMAT_VERSION = 1
MODEL_KINDS = ("hca", "gru", "bprmf", "pop", "random")


class CheckpointError(ValueError):
    pass


def _encode(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "values": a.ravel().tolist()}


def _decode(entry, dtype=np.float64):
    shape = tuple(entry["shape"])
    values = np.asarray(entry["values"], dtype=dtype)
    if values.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"array of shape {shape} holds {values.size} values")
    return values.reshape(shape)


def to_document(kind, model, vocabulary, config=None, users=None):
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    doc = {"format_version": FORMAT_VERSION, "model": kind, "vocabulary": list(vocabulary),
           "config": config or {}, "hyper": None, "arrays": {}}
    if kind in ("hca", "gru"):
        doc["hyper"] = asdict(model.hyper)
        doc["arrays"] = {n: _encode(a) for n, a in model.params.items()}
    elif kind == "bprmf":
        doc["users"] = list(users)
        doc["arrays"] = {"user_factors": _encode(model.user_factors),
                         "item_factors": _encode(model.item_factors)}
    elif kind == "pop":
        doc["arrays"] = {"counts": _encode(model.counts)}
    else:
        doc["random_seed"] = model.seed
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def from_document(text):
    """Parse a checkpoint; returns (kind, model, doc)."""
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    kind = doc.get("model")
    n_items = len(doc["vocabulary"])
    arrays = doc.get("arrays", {})
    if kind in ("hca", "gru"):
        hyper = HyperParams(**doc["hyper"])
        if hyper.n_items != n_items:
            raise CheckpointError("hyper n_items disagrees with the stored vocabulary")
        missing = [n for n in PARAM_ORDER if n not in arrays]
        if missing:
            raise CheckpointError(f"checkpoint lacks parameters: {', '.join(missing)}")
        params = ModelParams(**{n: _decode(arrays[n]) for n in PARAM_ORDER})
        try:
            params.check_shapes(hyper)
        except ValueError as exc:
            raise CheckpointError(str(exc)) from None
        model = SequenceModel(params, hyper)
    elif kind == "bprmf":
        model = MfModel(_decode(arrays["user_factors"]), _decode(arrays["item_factors"]))
        if model.item_factors.shape[0] != n_items or model.user_factors.shape[0] != len(doc["users"]):
            raise CheckpointError("factor shapes disagree with the stored vocabulary / users")
    elif kind == "pop":
        model = PopModel(_decode(arrays["counts"], dtype=np.int64))
        if model.counts.shape != (n_items,):
            raise CheckpointError("popularity counts disagree with the stored vocabulary")
    elif kind == "random":
        model = RandomModel(n_items, int(doc["random_seed"]))
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")
    return kind, model, doc


def load(path):
    with open(path, encoding="utf-8") as fh:
        return from_document(fh.read())
