"""Bit-exact checkpoint container.

Layout: magic ``NAVG`` | version uint32 LE | header length uint32 LE |
UTF-8 JSON header | little-endian float32 payload arrays in header order.
The header fully describes the payload (names and shapes), so a save/load
round trip is byte-identical and unknown versions are rejected up front.
"""

import json
import os
import tempfile

import numpy as np

from .directions import DirectionSet
from .generator import ALL_LAYERS, GeneratorModel
from .scenes import DatasetSpec

MAGIC = b"NAVG"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, or incompatible checkpoint file."""


def write_container(path, kind: str, arrays: list, meta: dict):
    """Write named float32 arrays plus a JSON meta block, atomically."""
    entries = []
    payload = bytearray()
    for name, arr in arrays:
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
        entries.append({"name": name, "shape": list(arr.shape)})
        payload += arr.tobytes()
    header = json.dumps({"kind": kind, "arrays": entries, "meta": meta},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = MAGIC + np.uint32(VERSION).tobytes() + np.uint32(len(header)).tobytes() \
        + header + bytes(payload)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path):
    """Read a container: (kind, ordered name->array dict, meta)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic in {path!r}")
    version = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    hlen = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    if len(blob) < 12 + hlen:
        raise CheckpointError("truncated header")
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable header: {e}") from e
    offset = 12 + hlen
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        end = offset + 4 * n
        if end > len(blob):
            raise CheckpointError(f"truncated payload for array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after declared payload")
    return header["kind"], arrays, header["meta"]


# ---------------------------------------------------------------------------
# per-object serialization


def _model_arrays(model: GeneratorModel):
    out = []
    for layer in ALL_LAYERS:
        for name in sorted(model.params[layer]):
            out.append((f"{layer}.{name}", model.params[layer][name]))
    return out


def save_checkpoint(obj, path):
    """Persist a GeneratorModel, DirectionSet, dataset tuple, or feature metric."""
    from .metrics import RandomFeatureMetric  # local import: metrics uses tensor only

    if isinstance(obj, GeneratorModel):
        write_container(path, "model", _model_arrays(obj),
                        {"arch": "toygen-v1", **obj.meta})
    elif isinstance(obj, RandomFeatureMetric):
        write_container(path, "model", [(n, a) for n, a in obj.weights()],
                        {"arch": "randfeat-v1", **obj.meta})
    elif isinstance(obj, DirectionSet):
        arrays = [("basis", obj.basis)]
        for name in ("scores", "eigenvectors", "svd_u", "svd_s", "svd_v"):
            val = getattr(obj, name)
            if val is not None:
                arrays.append((name, val))
        write_container(path, "directions", arrays, {
            "layer": obj.layer,
            "parametrization": obj.parametrization,
            "method": obj.method,
            "magnitude_range": obj.magnitude_range,
            "labels": list(obj.labels),
            "extra": obj.meta,
        })
    elif isinstance(obj, tuple) and len(obj) == 3 and isinstance(obj[0], DatasetSpec):
        spec, images, params = obj
        write_container(path, "dataset",
                        [("images", images), ("params", params)],
                        {"count": spec.count, "seed": spec.seed, "size": spec.size,
                         "radius_mode": spec.radius_mode})
    else:
        raise CheckpointError(f"don't know how to checkpoint {type(obj).__name__}")


def load_checkpoint(path):
    from .metrics import RandomFeatureMetric

    kind, arrays, meta = read_container(path)
    if kind == "model":
        arch = meta.get("arch")
        if arch == "toygen-v1":
            params = {}
            for full, arr in arrays.items():
                layer, name = full.split(".")
                params.setdefault(layer, {})[name] = arr
            extra = {k: v for k, v in meta.items() if k != "arch"}
            return GeneratorModel(params, extra)
        if arch == "randfeat-v1":
            extra = {k: v for k, v in meta.items() if k != "arch"}
            return RandomFeatureMetric.from_arrays(arrays, extra)
        raise CheckpointError(f"unknown model arch {arch!r}")
    if kind == "directions":
        return DirectionSet(
            layer=meta["layer"],
            parametrization=meta["parametrization"],
            basis=arrays["basis"],
            method=meta["method"],
            magnitude_range=meta["magnitude_range"],
            labels=list(meta["labels"]),
            scores=arrays.get("scores"),
            eigenvectors=arrays.get("eigenvectors"),
            svd_u=arrays.get("svd_u"),
            svd_s=arrays.get("svd_s"),
            svd_v=arrays.get("svd_v"),
            meta=meta.get("extra", {}),
        )
    if kind == "dataset":
        spec = DatasetSpec(count=int(meta["count"]), seed=int(meta["seed"]),
                           size=int(meta["size"]), radius_mode=meta["radius_mode"])
        return spec, arrays["images"], arrays["params"]
    raise CheckpointError(f"unknown checkpoint kind {kind!r}")
