"""Deterministic, model-free request handlers for the mock mode.

Vectors are derived purely from a SHA-256 expansion of the input text, so
they are identical on every platform and never require model downloads.
"""

import hashlib
import math
import struct

MOCK_DIM = 768


def mock_embedding(text: str, dim: int = MOCK_DIM) -> list[float]:
    seed = hashlib.sha256(text.encode("utf-8")).digest()
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        block = hashlib.sha256(seed + struct.pack("<I", counter)).digest()
        for offset in range(0, len(block) - 3, 4):
            (word,) = struct.unpack_from("<I", block, offset)
            values.append(word / 2147483647.5 - 1.0)
            if len(values) == dim:
                break
        counter += 1
    norm = math.sqrt(sum(v * v for v in values)) or 1.0
    return [round(v / norm, 8) for v in values]


def mock_translation(text: str, tgt: str) -> str:
    return f"[{tgt}] {text}"
