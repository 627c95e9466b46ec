"""Named parameter sets and their binary file format.

A stage's learned parameters are an ordered collection of named tensors,
each tagged with a role (kernel, bias or dense-matrix). Files start with
the magic bytes "AMEW", a u16 format version and a u32 entry count; each
entry stores the UTF-8 name, the rank as u8, the dims as u32 and the raw
little-endian float32 values. Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import IoFailure

MAGIC = b"AMEW"
FORMAT_VERSION = 1

ROLE_KERNEL = "kernel"
ROLE_BIAS = "bias"
ROLE_DENSE = "dense-matrix"
_ROLES = (ROLE_KERNEL, ROLE_BIAS, ROLE_DENSE)

# Role is not stored in the file; within this layer set it is implied by
# rank (1 -> bias, 2 -> dense matrix, 4 -> convolution kernel).
_RANK_TO_ROLE = {1: ROLE_BIAS, 2: ROLE_DENSE, 4: ROLE_KERNEL}


@dataclass
class WeightEntry:
    tensor: Tensor
    role: str


class StageWeights:
    """Ordered, uniquely named (tensor, role) pairs for one network stage."""

    def __init__(self):
        self._entries: dict[str, WeightEntry] = {}

    def add(self, name: str, tensor: Tensor, role: str) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate weight name {name!r}")
        if role not in _ROLES:
            raise ValueError(f"unknown role {role!r}")
        self._entries[name] = WeightEntry(tensor, role)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self):
        return list(self._entries)

    def items(self):
        return [(n, e.tensor, e.role) for n, e in self._entries.items()]

    def tensors(self):
        return [e.tensor for e in self._entries.values()]

    def role(self, name: str) -> str:
        return self._entries[name].role

    def zero_grads(self) -> None:
        for e in self._entries.values():
            e.tensor.grad = None

    def set_requires_grad(self, flag: bool) -> None:
        for e in self._entries.values():
            e.tensor.requires_grad = flag

    def astype(self, dtype) -> "StageWeights":
        """Copy with converted value dtype (float64 for gradient checks)."""
        out = StageWeights()
        for n, e in self._entries.items():
            t = Tensor(e.tensor.data.astype(dtype), requires_grad=e.tensor.requires_grad)
            out.add(n, t, e.role)
        return out

    def copy(self) -> "StageWeights":
        out = StageWeights()
        for n, e in self._entries.items():
            t = Tensor(e.tensor.data.copy(), requires_grad=e.tensor.requires_grad)
            out.add(n, t, e.role)
        return out

    # -- serialization ------------------------------------------------------

    def save(self, path) -> None:
        blob = bytearray()
        blob += MAGIC
        blob += struct.pack("<HI", FORMAT_VERSION, len(self._entries))
        for name, entry in self._entries.items():
            arr = np.ascontiguousarray(entry.tensor.data, dtype="<f4")
            encoded = name.encode("utf-8")
            blob += struct.pack("<H", len(encoded))
            blob += encoded
            blob += struct.pack("<B", arr.ndim)
            blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
            blob += arr.tobytes()
        try:
            with open(path, "wb") as fh:
                fh.write(blob)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc

    @classmethod
    def load(cls, path, requires_grad: bool = False) -> "StageWeights":
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        if blob[:4] != MAGIC:
            raise IoFailure(f"{path}: bad magic {blob[:4]!r}")
        version, count = struct.unpack_from("<HI", blob, 4)
        if version != FORMAT_VERSION:
            raise IoFailure(f"{path}: unsupported format version {version}")
        pos = 10
        out = cls()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            n_vals = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f4", count=n_vals, offset=pos)
            pos += 4 * n_vals
            tensor = Tensor(arr.reshape(dims).copy(), requires_grad=requires_grad)
            role = _RANK_TO_ROLE.get(rank, ROLE_DENSE)
            out.add(name, tensor, role)
        if pos != len(blob):
            raise IoFailure(f"{path}: {len(blob) - pos} trailing bytes")
        return out


def uniform_init(rng: np.random.Generator, shape, fan_in: int,
                 dtype=np.float32) -> np.ndarray:
    """Seeded uniform init scaled by 1/sqrt(fan-in)."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
