"""Binary checkpoint of the trainable embeddings.

Layout: ``SOCGCF1\\n``, then ``n m d\\n`` in decimal, then the user block and
the item block as little-endian float32, row-major.
"""
from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .model import EmbeddingState

MAGIC = b"SOCGCF1"


def save_checkpoint(state: EmbeddingState, path: Union[str, Path]) -> None:
    header = MAGIC + b"\n" + f"{state.n_users} {state.n_items} {state.dim}\n".encode("ascii")
    body = np.concatenate([state.e_users, state.e_items]).astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(body).tobytes())


def load_checkpoint(path: Union[str, Path]) -> EmbeddingState:
    raw = Path(path).read_bytes()
    first = raw.find(b"\n")
    if raw[:first] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    second = raw.find(b"\n", first + 1)
    try:
        n, m, d = (int(x) for x in raw[first + 1:second].split())
    except ValueError as exc:
        raise ValueError(f"{path}: malformed checkpoint header") from exc
    body = raw[second + 1:]
    if len(body) != 4 * (n + m) * d:
        raise ValueError(f"{path}: expected {4 * (n + m) * d} payload bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(n + m, d)
    return EmbeddingState(flat[:n].copy(), flat[n:].copy())
