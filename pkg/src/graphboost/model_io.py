"""Ensemble model files.

A small self-describing binary container: magic and version, one canonical
JSON metadata block, then the weight tensors (stored fit rows followed by
each round's layers) as little-endian float64, row-major, each preceded by
a shape header. Saving a loaded file reproduces it byte for byte.
"""

import json
import struct

import numpy as np

from .appnp import AppnpConfig, AppnpModel
from .boost import Ensemble, WeakRound
from .data import EncodingMeta
from .errors import ModelFormatError

MAGIC = b"GBEN"
VERSION = 1


def _dump_json(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_tensor(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.tobytes())


def _read_exact(fh, count: int) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise ModelFormatError("truncated model file")
    return buf


def _read_tensor(fh) -> np.ndarray:
    ndim = struct.unpack("<B", _read_exact(fh, 1))[0]
    shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8")
    return data.reshape(shape).astype(np.float64)


def save_ensemble(ensemble: Ensemble, path: str) -> None:
    meta = {
        "encoder": ensemble.encoder.to_dict(),
        "feature_names": list(ensemble.feature_names),
        "n_classes": int(ensemble.n_classes),
        "n_stored_rows": int(ensemble.train_x.shape[0]),
        "n_features": int(ensemble.train_x.shape[1]),
        "stop_reason": ensemble.stop_reason,
        "stop_error": None if ensemble.stop_error is None
                      else float(ensemble.stop_error),
        "rounds": [{
            "feature": int(r.feature),
            "feature_name": r.feature_name,
            "gamma": float(r.gamma),
            "alpha": float(r.alpha),
            "error": float(r.error),
            "expert": bool(r.expert),
            "config": r.model.config.to_dict(),
        } for r in ensemble.rounds],
    }
    blob = _dump_json(meta)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        _write_tensor(fh, ensemble.train_x)
        for r in ensemble.rounds:
            for arr in (r.model.w1, r.model.b1, r.model.w2, r.model.b2):
                _write_tensor(fh, arr)


def load_ensemble(path: str) -> Ensemble:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ModelFormatError(f"not a model file: bad magic {magic!r}")
        version = struct.unpack("<I", _read_exact(fh, 4))[0]
        if version != VERSION:
            raise ModelFormatError(f"unsupported model file version {version} "
                                   f"(expected {VERSION})")
        blob_len = struct.unpack("<Q", _read_exact(fh, 8))[0]
        try:
            meta = json.loads(_read_exact(fh, blob_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"corrupt metadata block: {exc}") from exc

        train_x = _read_tensor(fh)
        rounds = []
        for rec in meta["rounds"]:
            w1 = _read_tensor(fh)
            b1 = _read_tensor(fh)
            w2 = _read_tensor(fh)
            b2 = _read_tensor(fh)
            config = AppnpConfig.from_dict(rec["config"])
            model = AppnpModel(w1, b1, w2, b2, config)
            rounds.append(WeakRound(rec["feature"], rec["feature_name"],
                                    rec["gamma"], model, rec["alpha"],
                                    rec["error"], rec["expert"]))
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError("trailing bytes after model payload")

    if train_x.shape != (meta["n_stored_rows"], meta["n_features"]):
        raise ModelFormatError("stored row matrix shape mismatch")
    encoder = EncodingMeta.from_dict(meta["encoder"])
    return Ensemble(rounds, meta["n_classes"], encoder, meta["feature_names"],
                    train_x, meta["stop_reason"], meta["stop_error"])
