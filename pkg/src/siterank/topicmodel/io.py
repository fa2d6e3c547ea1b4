"""Versioned model snapshots.

Layout: one UTF-8 JSON header line, then the raw arrays back to back. Each
array is little-endian, row-major (C order); the header lists every array's
name, dtype and shape in payload order, plus a SHA-256 of the payload.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from siterank.topicmodel.lda import LdaModel
from siterank.topicmodel.nmf import NmfModel

MODEL_FORMAT = "siterank-topicmodel"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _pack(meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    specs, chunks = [], []
    for name, arr in arrays.items():
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        arr = np.ascontiguousarray(arr, dtype=dtype)
        specs.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        chunks.append(arr.tobytes(order="C"))
    payload = b"".join(chunks)
    header = dict(meta, format=MODEL_FORMAT, version=MODEL_VERSION, arrays=specs,
                  sha256=hashlib.sha256(payload).hexdigest())
    return json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8") + b"\n" + payload


def _unpack(blob: bytes, path) -> tuple[dict, dict[str, np.ndarray]]:
    line, sep, payload = blob.partition(b"\n")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        header = None
    if not sep or not isinstance(header, dict) or header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} v{MODEL_VERSION} file")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: {MODEL_FORMAT} version {header.get('version')} unsupported "
            f"(expected {MODEL_VERSION})")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise ModelFormatError(f"{path}: payload checksum mismatch (truncated or corrupt "
                               f"{MODEL_FORMAT} v{MODEL_VERSION} file)")
    arrays, offset = {}, 0
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
        arrays[spec["name"]] = arr.reshape(spec["shape"]).astype(dtype.newbyteorder("="))
        offset += count * dtype.itemsize
    return header, arrays


def dumps_model(model: NmfModel | LdaModel) -> bytes:
    if isinstance(model, NmfModel):
        meta = {"kind": "nmf", "k": model.k, "seed": model.seed, "terms": model.terms}
        arrays = {"W": model.W, "H": model.H,
                  "objective_trace": np.asarray(model.objective_trace, dtype=np.float64)}
    elif isinstance(model, LdaModel):
        meta = {"kind": "lda", "k": model.k, "seed": model.seed, "terms": model.terms,
                "alpha": model.alpha, "eta": model.eta}
        arrays = {"beta": model.beta, "theta": model.theta,
                  "assignments": np.asarray(model.assignments, dtype=np.int64),
                  "doc_ptr": np.asarray(model.doc_ptr, dtype=np.int64)}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return _pack(meta, arrays)


def loads_model(blob: bytes, path="<bytes>") -> NmfModel | LdaModel:
    header, arrays = _unpack(blob, path)
    try:
        if header["kind"] == "nmf":
            return NmfModel(arrays["W"], arrays["H"], arrays["objective_trace"].tolist(),
                            header.get("seed"), header.get("terms"))
        if header["kind"] == "lda":
            return LdaModel(arrays["beta"], arrays["theta"], header["alpha"], header["eta"],
                            arrays["assignments"], arrays["doc_ptr"], header.get("seed"),
                            header.get("terms"))
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing field {exc}") from None
    raise ModelFormatError(f"{path}: unknown model kind {header.get('kind')!r}")


def save_model(model: NmfModel | LdaModel, path: str | Path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path: str | Path) -> NmfModel | LdaModel:
    return loads_model(Path(path).read_bytes(), path)
