"""Binary persistence for embedding matrices and alignment rotations.

Embedding file (``.temb``), little-endian::

    b"TEMB" | u32 version=1 | u32 dim | u32 vocab_size | i32 period
    vocab_size x (u32 byte length, UTF-8 token)
    vocab_size x dim f32 input vectors, row-major
    u8 flag (1 when output vectors follow) [| vocab_size x dim f32]

Rotation file (``.trot``)::

    b"TROT" | u32 version=1 | u32 dim | u32 n_steps
    n_steps x (i32 from_period | i32 to_period | dim x dim f64, row-major)
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedder import EmbeddingMatrix, Vocabulary

EMB_MAGIC = b"TEMB"
ROT_MAGIC = b"TROT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIi")
_ROT_HEADER = struct.Struct("<4sIII")
_STEP = struct.Struct("<ii")

_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def embedding_to_bytes(emb: EmbeddingMatrix, include_output: bool = False) -> bytes:
    n, d = emb.input_vectors.shape
    buf = io.BytesIO()
    buf.write(_HEADER.pack(EMB_MAGIC, VERSION, d, n, emb.period))
    for tok in emb.vocab.tokens:
        raw = tok.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(np.ascontiguousarray(emb.input_vectors, dtype="<f4").tobytes())
    if include_output and emb.output_vectors is not None:
        buf.write(b"\x01")
        buf.write(np.ascontiguousarray(emb.output_vectors, dtype="<f4").tobytes())
    else:
        buf.write(b"\x00")
    return buf.getvalue()


def embedding_from_bytes(data: bytes) -> EmbeddingMatrix:
    if len(data) < _HEADER.size:
        raise ValueError("truncated embedding file")
    magic, version, d, n, period = _HEADER.unpack_from(data, 0)
    if magic != EMB_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported embedding file version {version}")
    pos = _HEADER.size
    tokens = []
    for _ in range(n):
        if len(data) < pos + 4:
            raise ValueError("truncated embedding file")
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if len(data) < pos + length:
            raise ValueError("truncated embedding file")
        tokens.append(data[pos:pos + length].decode("utf-8"))
        pos += length
    size = n * d * 4
    if len(data) < pos + size:
        raise ValueError("truncated embedding file")
    w_in = np.frombuffer(data, dtype="<f4", count=n * d, offset=pos).reshape(n, d).astype(np.float32)
    pos += size
    w_out = None
    if pos < len(data) and data[pos] == 1:
        pos += 1
        w_out = np.frombuffer(data, dtype="<f4", count=n * d, offset=pos).reshape(n, d).astype(np.float32)
    # counts are not part of the format
    vocab = Vocabulary(tokens, np.zeros(n, dtype=np.int64))
    return EmbeddingMatrix(period, vocab, w_in, w_out)


def write_embedding(emb: EmbeddingMatrix, path: str | Path, include_output: bool = False) -> None:
    atomic_write_bytes(path, embedding_to_bytes(emb, include_output))


def read_embedding(path: str | Path) -> EmbeddingMatrix:
    return embedding_from_bytes(Path(path).read_bytes())


def rotations_to_bytes(rotations: Sequence[np.ndarray], steps: Sequence[tuple[int, int]]) -> bytes:
    if len(rotations) != len(steps):
        raise ValueError("one (from, to) period pair is needed per rotation")
    d = rotations[0].shape[0] if rotations else 0
    buf = io.BytesIO()
    buf.write(_ROT_HEADER.pack(ROT_MAGIC, VERSION, d, len(rotations)))
    for r, (a, b) in zip(rotations, steps):
        if r.shape != (d, d):
            raise ValueError(f"rotation for step {a}->{b} has shape {r.shape}, expected {(d, d)}")
        buf.write(_STEP.pack(a, b))
        buf.write(np.ascontiguousarray(r, dtype="<f8").tobytes())
    return buf.getvalue()


def rotations_from_bytes(data: bytes) -> tuple[list[np.ndarray], list[tuple[int, int]]]:
    magic, version, d, n_steps = _ROT_HEADER.unpack_from(data, 0)
    if magic != ROT_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {ROT_MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported rotation file version {version}")
    pos = _ROT_HEADER.size
    rotations, steps = [], []
    for _ in range(n_steps):
        steps.append(_STEP.unpack_from(data, pos))
        pos += _STEP.size
        rotations.append(
            np.frombuffer(data, dtype="<f8", count=d * d, offset=pos).reshape(d, d).copy()
        )
        pos += d * d * 8
    return rotations, steps


def write_rotations(rotations, steps, path: str | Path) -> None:
    atomic_write_bytes(path, rotations_to_bytes(rotations, steps))


def read_rotations(path: str | Path):
    return rotations_from_bytes(Path(path).read_bytes())
