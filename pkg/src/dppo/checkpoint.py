"""Binary checkpoint format.

Layout (little-endian)::

    b"DPPO"  u32 version=1
    u32 input_dim  u32 n_trunk  u32 width * n_trunk  u32 action_count  u32 activation
    u64 n_params   f64 * n_params
    u8 has_adam
    [ u64 step_count  f64 beta1 beta2 epsilon  u64 n  f64 * n (m)  u64 n  f64 * n (v) ]
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .adam import AdamState
from .errors import FormatError
from .network import ACTIVATIONS, NetworkArchitecture, ParameterVector

MAGIC = b"DPPO"
VERSION = 1


def _arch_bytes(arch: NetworkArchitecture) -> bytes:
    widths = arch.trunk_layers
    return struct.pack(
        f"<II{len(widths)}III",
        arch.input_dim,
        len(widths),
        *widths,
        arch.action_count,
        ACTIVATIONS.index(arch.activation),
    )


def _f64(values) -> bytes:
    return np.asarray(values, dtype="<f8").tobytes()


def save_checkpoint(path, params: ParameterVector, adam_state: AdamState | None = None) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION), _arch_bytes(params.architecture)]
    parts += [struct.pack("<Q", len(params)), _f64(params.values)]
    if adam_state is None:
        parts.append(b"\x00")
    else:
        s = adam_state
        parts += [
            b"\x01",
            struct.pack("<Qddd", s.step_count, s.beta1, s.beta2, s.epsilon),
            struct.pack("<Q", s.first_moment.size), _f64(s.first_moment),
            struct.pack("<Q", s.second_moment.size), _f64(s.second_moment),
        ]
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(
                f"truncated checkpoint: need {size} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def floats(self, n: int) -> np.ndarray:
        size = 8 * n
        if self.pos + size > len(self.data):
            raise FormatError(
                f"truncated checkpoint: need {size} bytes of float data at offset "
                f"{self.pos}, file has {len(self.data)}"
            )
        arr = np.frombuffer(self.data, dtype="<f8", count=n, offset=self.pos).astype(np.float64)
        self.pos += size
        return arr


def load_checkpoint(path, expected: NetworkArchitecture | None = None):
    """Returns ``(params, adam_state_or_None)``."""
    r = _Reader(Path(path).read_bytes())
    (magic,) = r.take("<4s")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    (version,) = r.take("<I")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4, expected {VERSION}")
    input_dim, n_trunk = r.take("<II")
    widths = r.take(f"<{n_trunk}I") if n_trunk else ()
    action_count, act_code = r.take("<II")
    if act_code >= len(ACTIVATIONS):
        raise FormatError(f"unknown activation code {act_code} at offset {r.pos - 4}")
    arch = NetworkArchitecture(input_dim, tuple(widths), action_count, ACTIVATIONS[act_code])
    if expected is not None and expected != arch:
        raise FormatError(
            f"architecture mismatch: file has {_describe(arch)}, expected {_describe(expected)}"
        )
    count_pos = r.pos
    (n,) = r.take("<Q")
    if n != arch.param_count:
        raise FormatError(
            f"parameter count {n} at offset {count_pos} does not match architecture "
            f"({arch.param_count})"
        )
    params = ParameterVector(r.floats(n), arch)
    (has_adam,) = r.take("<B")
    adam = None
    if has_adam:
        step, b1, b2, eps = r.take("<Qddd")
        (nm,) = r.take("<Q")
        m = r.floats(nm)
        (nv,) = r.take("<Q")
        v = r.floats(nv)
        if nm != n or nv != n:
            raise FormatError(f"Adam moment lengths ({nm}, {nv}) differ from parameter count {n}")
        adam = AdamState(m, v, step, b1, b2, eps)
    if r.pos != len(r.data):
        raise FormatError(f"trailing bytes after offset {r.pos}")
    return params, adam


def _describe(arch: NetworkArchitecture) -> str:
    return (
        f"input {arch.input_dim}, trunk {list(arch.trunk_layers)}, "
        f"actions {arch.action_count}, {arch.activation}"
    )
