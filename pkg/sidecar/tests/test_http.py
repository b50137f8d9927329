"""HTTP transport: POST /rpc carries the same one-object-per-line payloads."""

import json
import re
import subprocess
import sys
import urllib.request
from pathlib import Path

import pytest

SRC = str(Path(__file__).resolve().parent.parent / "src")


@pytest.fixture(scope="module")
def http_server():
    proc = subprocess.Popen(
        [sys.executable, "-m", "sidecar.server", "--http", "0"],
        stderr=subprocess.PIPE,
        text=True,
        encoding="utf-8",
        env={"PYTHONPATH": SRC},
    )
    line = proc.stderr.readline()
    match = re.search(r"listening on 127\.0\.0\.1:(\d+)", line)
    assert match, f"unexpected startup line: {line!r}"
    yield f"http://127.0.0.1:{match.group(1)}/rpc"
    proc.terminate()
    proc.wait(timeout=10)


def rpc(url, request):
    body = json.dumps(request).encode("utf-8")
    with urllib.request.urlopen(urllib.request.Request(url, data=body)) as resp:
        return json.loads(resp.read())


def test_http_ping(http_server):
    assert rpc(http_server, {"op": "ping", "id": 1}) == {"id": 1, "ok": True}


def test_http_embed_matches_stdio_mock(http_server):
    from sidecar.mock import mock_embedding

    resp = rpc(http_server, {"op": "embed", "id": 2, "texts": ["hej"]})
    assert resp["ok"] is True
    assert resp["vectors"][0] == mock_embedding("hej")


def test_http_translate(http_server):
    resp = rpc(http_server, {"op": "translate", "id": 3,
                             "texts": ["farvel"], "src": "da", "tgt": "en"})
    assert resp == {"id": 3, "ok": True, "texts": ["[en] farvel"]}
