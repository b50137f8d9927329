"""Embedding-file I/O and the client side of the external model protocol."""

from __future__ import annotations

import json
import logging
import struct
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EmbeddingMatrix",
    "EmbeddingFileError",
    "ProviderError",
    "ProviderHandle",
    "load_embeddings",
    "save_embeddings",
    "embed_texts",
    "translate_texts",
]

log = logging.getLogger(__name__)

MAGIC = b"EMB1"
_HEADER = struct.Struct("<QI")  # n as u64, dim as u32, little-endian


class EmbeddingFileError(ValueError):
    pass


class ProviderError(RuntimeError):
    pass


class EmbeddingMatrix:
    """n x dim float32 matrix with L2-normalized rows, aligned 1:1 with a corpus."""

    def __init__(self, data: np.ndarray, normalize: bool = True):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise EmbeddingFileError(f"expected a 2-D matrix, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise EmbeddingFileError("matrix contains non-finite values")
        if normalize:
            norms = np.linalg.norm(data, axis=1)
            zero = np.flatnonzero(norms == 0.0)
            if zero.size:
                raise EmbeddingFileError(f"zero vector at row {zero[0]}")
            data = data / norms[:, None]
        self.data = data

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n


def save_embeddings(matrix: EmbeddingMatrix | np.ndarray, path) -> None:
    data = matrix.data if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix, np.float32)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(data.shape[0], data.shape[1]))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_embeddings(path) -> EmbeddingMatrix:
    """Load and validate the binary embedding format, normalizing rows."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic bytes {blob[:4]!r}")
    if len(blob) < 4 + _HEADER.size:
        raise EmbeddingFileError(f"{path}: truncated header")
    n, dim = _HEADER.unpack_from(blob, 4)
    payload = blob[4 + _HEADER.size :]
    expected = n * dim * 4
    if len(payload) != expected:
        raise EmbeddingFileError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} (n={n}, dim={dim})"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n, dim)
    return EmbeddingMatrix(data)


@dataclass
class ProviderHandle:
    """Transport to an external embed/translate provider.

    Exactly one of `command` (child process over stdio) or `base_url`
    (HTTP POST <base_url>/rpc) must be set. Requests are serialized: one
    in flight per handle.
    """

    command: list[str] | None = None
    base_url: str | None = None
    timeout: float = 120.0
    embed_batch: int = 100
    translate_batch: int = 32
    _proc: subprocess.Popen | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _next_id: int = field(default=0, repr=False)

    def __post_init__(self):
        if bool(self.command) == bool(self.base_url):
            raise ValueError("exactly one of command or base_url must be set")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.embed_batch < 1 or self.translate_batch < 1:
            raise ValueError("batch sizes must be >= 1")

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        return self._proc

    def request(self, payload: dict) -> dict:
        """Send one protocol request and return the matching response object."""
        with self._lock:
            self._next_id += 1
            payload = {**payload, "id": self._next_id}
            line = json.dumps(payload, ensure_ascii=False)
            if self.command:
                proc = self._ensure_proc()
                try:
                    proc.stdin.write(line + "\n")
                    proc.stdin.flush()
                    raw = proc.stdout.readline()
                except (BrokenPipeError, OSError) as exc:
                    raise ProviderError(f"provider process I/O failed: {exc}") from exc
                if not raw:
                    raise ProviderError("provider process closed its output")
                try:
                    resp = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ProviderError(f"malformed provider response: {raw!r}") from exc
            else:
                import requests

                try:
                    http = requests.post(
                        self.base_url.rstrip("/") + "/rpc",
                        data=(line + "\n").encode("utf-8"),
                        headers={"Content-Type": "application/x-ndjson"},
                        timeout=self.timeout,
                    )
                    http.raise_for_status()
                    resp = json.loads(http.text)
                except (requests.RequestException, json.JSONDecodeError) as exc:
                    raise ProviderError(f"HTTP provider request failed: {exc}") from exc
            if resp.get("id") != payload["id"]:
                raise ProviderError(
                    f"response id {resp.get('id')} does not match request id {payload['id']}"
                )
            if not resp.get("ok"):
                raise ProviderError(f"provider error: {resp.get('error', 'unknown')}")
            return resp

    def ping(self) -> bool:
        return bool(self.request({"op": "ping"}).get("ok"))

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _batches(items: list, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def embed_texts(provider: ProviderHandle, texts: list[str]) -> EmbeddingMatrix:
    """Embed texts in batches; rows come back in input order, L2-normalized.

    The dimension is taken from the first response and enforced thereafter.
    """
    if not texts:
        raise ProviderError("embed_texts: empty input")
    rows: list[list[float]] = []
    dim: int | None = None
    for batch in _batches(texts, provider.embed_batch):
        resp = provider.request({"op": "embed", "texts": batch})
        vectors = resp.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            raise ProviderError(
                f"embed response has {len(vectors) if isinstance(vectors, list) else 'no'} "
                f"vectors for {len(batch)} texts"
            )
        for vec in vectors:
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ProviderError(
                    f"embedding dimension drifted from {dim} to {len(vec)} mid-stream"
                )
            rows.append(vec)
    return EmbeddingMatrix(np.array(rows, dtype=np.float32))


def translate_texts(
    provider: ProviderHandle, texts: list[str], src: str, tgt: str
) -> list[str]:
    """Translate texts in batches; output order and length match the input."""
    out: list[str] = []
    for batch in _batches(texts, provider.translate_batch):
        resp = provider.request(
            {"op": "translate", "src": src, "tgt": tgt, "texts": batch}
        )
        translated = resp.get("texts")
        if not isinstance(translated, list) or len(translated) != len(batch):
            raise ProviderError(
                f"translate response has {len(translated) if isinstance(translated, list) else 'no'} "
                f"texts for {len(batch)} inputs"
            )
        out.extend(str(t) for t in translated)
    return out
