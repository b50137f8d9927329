"""Request loop for the provider protocol, over stdio or HTTP.

Protocol: one JSON object per line. Requests carry "op" (ping | embed |
translate) and "id"; responses echo the id and set "ok". Malformed
requests produce an ok:false response and the process stays alive.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, HTTPServer

from .mock import MOCK_DIM, mock_embedding, mock_translation

DEFAULT_EMBED_MODEL = "sentence-transformers/LaBSE"
DEFAULT_TRANSLATE_MODEL = "Helsinki-NLP/opus-mt-{src}-{tgt}"


@dataclass
class SidecarConfig:
    mode: str = "mock"                      # mock | real
    embed_model: str = DEFAULT_EMBED_MODEL
    translate_model: str = DEFAULT_TRANSLATE_MODEL
    device: str = "cpu"
    max_embed_batch: int = 256
    max_translate_batch: int = 64
    dim: int = MOCK_DIM

    def __post_init__(self):
        if self.mode not in ("mock", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_embed_batch < 1 or self.max_translate_batch < 1:
            raise ValueError("batch sizes must be >= 1")


class RealModels:
    """Lazy holder for the actual encoder and translators (real mode only)."""

    def __init__(self, config: SidecarConfig):
        from sentence_transformers import SentenceTransformer

        self.config = config
        self.encoder = SentenceTransformer(config.embed_model, device=config.device)
        self._translators: dict[tuple[str, str], object] = {}

    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = self.encoder.encode(texts, convert_to_numpy=True)
        return [[float(v) for v in row] for row in vectors]

    def translate(self, texts: list[str], src: str, tgt: str) -> list[str]:
        from transformers import pipeline

        key = (src, tgt)
        if key not in self._translators:
            model = self.config.translate_model.format(src=src, tgt=tgt)
            self._translators[key] = pipeline("translation", model=model,
                                              device=-1)
        outputs = self._translators[key](texts)
        return [o["translation_text"] for o in outputs]


class Sidecar:
    def __init__(self, config: SidecarConfig):
        self.config = config
        self.models = RealModels(config) if config.mode == "real" else None

    def handle_line(self, line: str) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"id": None, "ok": False, "error": f"malformed JSON: {exc}"}
        if not isinstance(request, dict):
            return {"id": None, "ok": False, "error": "request must be a JSON object"}
        rid = request.get("id")
        try:
            return self._dispatch(request, rid)
        except Exception as exc:  # keep the loop alive on any handler error
            return {"id": rid, "ok": False, "error": f"{type(exc).__name__}: {exc}"}

    def _dispatch(self, request: dict, rid) -> dict:
        op = request.get("op")
        if op == "ping":
            return {"id": rid, "ok": True}
        if op == "embed":
            texts = request.get("texts")
            if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
                return {"id": rid, "ok": False, "error": "embed: 'texts' must be a list of strings"}
            if len(texts) > self.config.max_embed_batch:
                return {"id": rid, "ok": False,
                        "error": f"embed batch {len(texts)} exceeds max {self.config.max_embed_batch}"}
            if self.models is not None:
                vectors = self.models.embed(texts)
            else:
                vectors = [mock_embedding(t, self.config.dim) for t in texts]
            return {"id": rid, "ok": True, "vectors": vectors}
        if op == "translate":
            texts = request.get("texts")
            src = request.get("src")
            tgt = request.get("tgt")
            if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
                return {"id": rid, "ok": False, "error": "translate: 'texts' must be a list of strings"}
            if not src or not tgt:
                return {"id": rid, "ok": False, "error": "translate: 'src' and 'tgt' are required"}
            if len(texts) > self.config.max_translate_batch:
                return {"id": rid, "ok": False,
                        "error": f"translate batch {len(texts)} exceeds max {self.config.max_translate_batch}"}
            if self.models is not None:
                translated = self.models.translate(texts, src, tgt)
            else:
                translated = [mock_translation(t, tgt) for t in texts]
            return {"id": rid, "ok": True, "texts": translated}
        return {"id": rid, "ok": False, "error": f"unknown op: {op!r}"}


def serve_stdio(sidecar: Sidecar) -> None:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        response = sidecar.handle_line(line)
        sys.stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        sys.stdout.flush()


def serve_http(sidecar: Sidecar, port: int) -> None:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/rpc":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            response = sidecar.handle_line(body.strip())
            payload = (json.dumps(response, ensure_ascii=False) + "\n").encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args):
            print(f"http: {fmt % args}", file=sys.stderr)

    server = HTTPServer(("127.0.0.1", port), Handler)
    print(f"listening on 127.0.0.1:{server.server_port}", file=sys.stderr, flush=True)
    server.serve_forever()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="provider-sidecar")
    parser.add_argument("--mode", choices=["mock", "real"], default="mock")
    parser.add_argument("--http", type=int, metavar="PORT",
                        help="serve HTTP on PORT instead of stdio (0 = ephemeral)")
    parser.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL)
    parser.add_argument("--translate-model", default=DEFAULT_TRANSLATE_MODEL)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-embed-batch", type=int, default=256)
    parser.add_argument("--max-translate-batch", type=int, default=64)
    args = parser.parse_args(argv)
    config = SidecarConfig(
        mode=args.mode,
        embed_model=args.embed_model,
        translate_model=args.translate_model,
        device=args.device,
        max_embed_batch=args.max_embed_batch,
        max_translate_batch=args.max_translate_batch,
    )
    try:
        sidecar = Sidecar(config)
    except Exception as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    if args.http is not None:
        serve_http(sidecar, args.http)
    else:
        serve_stdio(sidecar)
    return 0


if __name__ == "__main__":
    sys.exit(main())
