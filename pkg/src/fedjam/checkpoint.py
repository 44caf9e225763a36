"""Model checkpoint files: layer specs plus float32 parameter blob.

Layout (little-endian): magic "FJCK", u16 version, u32 n_layers, then per
layer u8 kind (0=dense 1=relu 2=dropout 3=sigmoid), u32 in_dim,
u32 out_dim, u8 frozen, f32 rate; then the flat parameters as f32 in the
canonical weights-then-bias layer order.
"""

import struct
from dataclasses import replace

import numpy as np

from .errors import DataFormatError
from .nn import LayerSpec, ModelState, param_count, validate_chain

_MAGIC = b"FJCK"
_VERSION = 1
_HEAD = struct.Struct("<4sHI")
_LAYER = struct.Struct("<BIIBf")

_KIND_CODE = {"dense": 0, "relu": 1, "dropout": 2, "sigmoid": 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def canonical_layers(layers) -> tuple:
    """Layer specs as they compare after a save/load cycle.

    Dropout rates are stored as f32 on disk, so in-memory f64 rates must be
    rounded the same way before comparing against a loaded checkpoint.
    """
    return tuple(replace(spec, rate=float(np.float32(spec.rate))) for spec in layers)


def save_checkpoint(path, model: ModelState) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(_MAGIC, _VERSION, len(model.layers)))
        for spec in model.layers:
            fh.write(
                _LAYER.pack(
                    _KIND_CODE[spec.kind],
                    spec.in_dim,
                    spec.out_dim,
                    int(spec.frozen),
                    spec.rate,
                )
            )
        fh.write(model.params.astype("<f4").tobytes())


def load_checkpoint(path) -> ModelState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEAD.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, n_layers = _HEAD.unpack_from(blob)
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")

    layers = []
    off = _HEAD.size
    for i in range(n_layers):
        if off + _LAYER.size > len(blob):
            raise DataFormatError(f"{path}: truncated at layer {i}")
        code, in_dim, out_dim, frozen, rate = _LAYER.unpack_from(blob, off)
        off += _LAYER.size
        if code not in _CODE_KIND:
            raise DataFormatError(f"{path}: layer {i} has unknown kind code {code}")
        layers.append(
            LayerSpec(
                _CODE_KIND[code],
                in_dim=in_dim,
                out_dim=out_dim,
                rate=float(rate),
                frozen=bool(frozen),
            )
        )
    layers = tuple(layers)
    try:
        validate_chain(layers)
        expected = param_count(layers)
    except Exception as exc:
        raise DataFormatError(f"{path}: inconsistent layer table: {exc}") from exc

    blob_params = blob[off:]
    if len(blob_params) != 4 * expected:
        raise DataFormatError(
            f"{path}: expected {4 * expected} parameter bytes, got {len(blob_params)}"
        )
    params = np.frombuffer(blob_params, dtype="<f4").astype(np.float64)
    return ModelState(layers=layers, params=params, mode="eval")
