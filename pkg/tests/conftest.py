import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from ceceval.embedder import reset_embedders

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def corpus20_path() -> Path:
    return FIXTURES / "corpus20.jsonl"


@pytest.fixture(autouse=True)
def _fresh_embedders():
    """Per-test embedder registry so cache-path tests stay isolated."""
    reset_embedders()
    yield
    reset_embedders()


class ScriptedServer:
    """HTTP server that replays a scripted list of (status, payload) steps.

    Once the script is exhausted the last step repeats. Request bodies and
    paths are recorded for assertions.
    """

    def __init__(self, script):
        self.script = list(script)
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                try:
                    body = json.loads(raw) if raw else {}
                except json.JSONDecodeError:
                    body = {"_raw": raw.decode("utf-8", "replace")}
                with outer._lock:
                    index = len(outer.requests)
                    outer.requests.append(
                        {
                            "path": self.path,
                            "body": body,
                            "headers": dict(self.headers),
                        }
                    )
                    step = outer.script[min(index, len(outer.script) - 1)]
                status, payload = step
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def scripted_server():
    """Factory fixture: returns a context manager constructor."""
    servers = []

    def make(script):
        server = ScriptedServer(script)
        servers.append(server)
        server.__enter__()
        return server

    yield make
    for server in servers:
        server.__exit__()
