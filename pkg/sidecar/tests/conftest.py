import json
import subprocess
import sys
from pathlib import Path

import pytest

SIDECAR_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(SIDECAR_DIR / "src"))


class StdioClient:
    """Drives a sidecar subprocess over newline-delimited JSON."""

    def __init__(self, extra_args=None):
        cmd = [sys.executable, "-m", "sidecar.server"] + (extra_args or [])
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            env={"PYTHONPATH": str(SIDECAR_DIR / "src")},
        )

    def send_raw(self, line: str) -> dict:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        out = self.proc.stdout.readline()
        assert out, "sidecar closed its output stream"
        return json.loads(out)

    def send(self, request: dict) -> dict:
        return self.send_raw(json.dumps(request))

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)


@pytest.fixture
def client():
    c = StdioClient()
    yield c
    c.close()
