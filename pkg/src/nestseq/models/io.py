"""Parameter (de)serialization.

Two layouts carrying the same document: JSON (``.json``, values written with
``repr`` so they round-trip exactly) and numpy ``.npz`` (raw float64 bytes).
Both record a format tag, version, model kind, H, D and every tensor's shape
with row-major data.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .params import MlpParams, ModelError, RnnParams

FORMAT = "nestseq-params"
VERSION = 1


def model_kind(p):
    if isinstance(p, MlpParams):
        return "MLP"
    if isinstance(p, RnnParams):
        return "NEST" if p.nested else "RNN"
    raise ModelError(f"not a parameter object: {type(p).__name__}")


def params_to_dict(p):
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model_kind(p),
        "H": int(p.H),
        "D": int(p.D),
        "arrays": {
            name: {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}
            for name, a in p.arrays().items()
        },
    }


def params_from_dict(d):
    if d.get("format") != FORMAT:
        raise ModelError(f"not a {FORMAT} document")
    if d.get("version") != VERSION:
        raise ModelError(f"unsupported params version {d.get('version')}")
    arrays = {
        k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d["arrays"].items()
    }
    kind = d["kind"]
    p = MlpParams(**arrays) if kind == "MLP" else RnnParams(**arrays)
    if model_kind(p) != kind or p.H != d["H"] or p.D != d["D"]:
        raise ModelError("params document header does not match its arrays")
    return p


def save_params(p, path):
    path = Path(path)
    if path.suffix == ".npz":
        doc = params_to_dict(p)
        meta = {k: v for k, v in doc.items() if k != "arrays"}
        np.savez(path, __meta__=np.array(json.dumps(meta)), **p.arrays())
    else:
        path.write_text(json.dumps(params_to_dict(p), indent=1) + "\n")


def load_params(path):
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            arrays = {k: z[k] for k in z.files if k != "__meta__"}
        doc = dict(meta, arrays={k: {"shape": list(a.shape), "data": a.reshape(-1)} for k, a in arrays.items()})
        return params_from_dict(doc)
    return params_from_dict(json.loads(path.read_text()))
