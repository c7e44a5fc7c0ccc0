"""Named trainable parameters, seeded initialization, checkpoint I/O.

Initialization: weights draw from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
using a PCG64 generator seeded from the model seed; biases start at zero
and normalization gains at one.  Parameter creation order is fixed by
model construction order, so a given (config, seed) pair always produces
bit-identical initial parameters.

Checkpoint format (little-endian throughout)::

    magic   4 bytes  b"AVCK"
    version u32      currently 1
    count   u32      number of parameters
    then per parameter, in registration order:
        name_len u16, name utf-8 bytes
        ndim     u8,  ndim x u32 extents
        data     prod(extents) x f32, row-major

Round-tripping a checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from .errors import DimensionError, InputError, UsageError
from .tensor import Tensor, default_dtype

_MAGIC = b"AVCK"
_VERSION = 1


class ParamSet:
    """Ordered name -> Tensor registry with a seeded init stream."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def weight(self, name: str, shape, fan_in: int) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        data = self._rng.uniform(-bound, bound, size=shape)
        return self._register(name, data)

    def zeros(self, name: str, shape) -> Tensor:
        return self._register(name, np.zeros(shape))

    def ones(self, name: str, shape) -> Tensor:
        return self._register(name, np.ones(shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def items(self):
        return self._params.items()

    def count(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, t.data) for n, t in self._params.items())

    def load_state(self, arrays: "OrderedDict[str, np.ndarray]") -> None:
        missing = [n for n in self._params if n not in arrays]
        extra = [n for n in arrays if n not in self._params]
        if missing or extra:
            raise InputError(
                f"checkpoint does not match model: missing={missing}, extra={extra}")
        for name, t in self._params.items():
            arr = arrays[name]
            if tuple(arr.shape) != t.shape:
                raise DimensionError(
                    f"parameter {name!r}: checkpoint shape {tuple(arr.shape)} "
                    f"vs model shape {t.shape}")
            t.data = arr.astype(default_dtype())


def save_checkpoint(path, arrays: "OrderedDict[str, np.ndarray]") -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(arrays)))
        for name, arr in arrays.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise InputError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        out[name] = arr.copy()
    if off != len(blob):
        raise InputError(f"{path}: trailing bytes after last parameter")
    return out
