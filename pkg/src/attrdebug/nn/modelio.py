"""Binary model container.

Layout:
    bytes 0-3    magic b"ADNN"
    bytes 4-7    format version, uint32 little-endian (currently 1)
    bytes 8-11   header length L, uint32 little-endian
    bytes 12..   L bytes of UTF-8 JSON header
    remainder    parameter payload, float64 little-endian, in the order
                 declared by header["params"]

The header records input shape, class count, seed, init scheme, layer
descriptors, training provenance, and one entry per parameter array with
its layer index, name, and shape. Round-trips are bit-exact.
"""

import json
import struct

import numpy as np

from .network import Network
from .layers import layer_from_descriptor

MAGIC = b"ADNN"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def save(net: Network, path) -> None:
    with open(path, "wb") as fh:
        _save_to(net, fh)


def serialize(net: Network) -> bytes:
    """In-memory form of save(); used for byte-equality checks."""
    import io

    buf = io.BytesIO()
    _save_to(net, buf)
    return buf.getvalue()


def _save_to(net, fh):
    params = []
    payload = []
    for i, layer in enumerate(net.layers):
        for name, arr in sorted(layer.param_arrays().items()):
            params.append({"layer": i, "name": name, "shape": list(arr.shape)})
            payload.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    header = {
        "input_shape": list(net.input_shape),
        "class_count": net.class_count,
        "seed": net.seed,
        "init_scheme": net.init_scheme,
        "arch_id": net.arch_id,
        "trained_on": net.trained_on,
        "layers": [layer.descriptor() for layer in net.layers],
        "params": params,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, len(blob)))
    fh.write(blob)
    for chunk in payload:
        fh.write(chunk)


def load(path) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 12:
        raise ModelFormatError(f"truncated header: expected at least 12 bytes, got {len(data)}")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}, this build reads version {VERSION}")
    if len(data) < 12 + hlen:
        raise ModelFormatError(f"truncated header: expected {12 + hlen} bytes, got {len(data)}")
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    payload = data[12 + hlen :]
    expected = sum(int(np.prod(p["shape"])) for p in header["params"]) * 8
    if len(payload) != expected:
        raise ModelFormatError(f"truncated payload: expected {expected} bytes, got {len(payload)}")

    layers = [layer_from_descriptor(d) for d in header["layers"]]
    net = Network(
        layers,
        tuple(header["input_shape"]),
        header["class_count"],
        header["seed"],
        header["init_scheme"],
        header["arch_id"],
    )
    net.trained_on = header["trained_on"]
    offset = 0
    per_layer = {}
    for p in header["params"]:
        count = int(np.prod(p["shape"]))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(p["shape"])
        per_layer.setdefault(p["layer"], {})[p["name"]] = arr.astype(np.float64)
        offset += count * 8
    for i, params in per_layer.items():
        net.layers[i].set_param_arrays(params)
    return net
