from __future__ import annotations

import json
import threading
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from hptune.ledger import Ledger, Task, TrialRecord, new_uid
from hptune.space import HyperparameterSet, default_search_space, sample_uniform

BASE_TIME = datetime(2026, 1, 1, tzinfo=timezone.utc)


def make_record(
    accuracy: float,
    model_id: str = "ResNet",
    epochs: int = 1,
    lr: float = 0.01,
    momentum: float = 0.9,
    batch: int = 32,
    source: str = "tpe",
    cycle: int = 0,
    task: Task = Task.IMAGE_CLASSIFICATION,
    offset_seconds: int = 0,
) -> TrialRecord:
    return TrialRecord(
        uid=new_uid(),
        model_id=model_id,
        task=task,
        epochs=epochs,
        params=HyperparameterSet(learning_rate=lr, momentum=momentum, batch_size=batch),
        accuracy=accuracy,
        source=source,
        created_at=BASE_TIME + timedelta(seconds=offset_seconds),
        cycle=cycle,
    )


def random_record(rng: np.random.Generator, **overrides) -> TrialRecord:
    space = default_search_space()
    params = sample_uniform(space, rng)
    fields = dict(
        accuracy=float(rng.uniform(0.0, 1.0)),
        model_id=str(rng.choice(["ResNet", "VGG", "MobileNetV2", "LSTM"])),
        epochs=int(rng.choice([1, 2, 5])),
        lr=params.learning_rate,
        momentum=params.momentum,
        batch=params.batch_size,
        source=str(rng.choice(["tpe", "random", "manual"])),
        offset_seconds=int(rng.integers(0, 10_000)),
    )
    fields.update(overrides)
    return make_record(**fields)


def random_ledger(rng: np.random.Generator, n: int) -> Ledger:
    return Ledger(random_record(rng) for _ in range(n))


class _StubChatHandler(BaseHTTPRequestHandler):
    """Chat-completions stub: pops scripted completion texts in order,
    repeating the last one when the script runs dry."""

    server_version = "StubChat/0.1"

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", "0"))
        self.rfile.read(length)
        script = self.server.script  # type: ignore[attr-defined]
        with self.server.lock:  # type: ignore[attr-defined]
            self.server.calls += 1  # type: ignore[attr-defined]
            index = min(self.server.calls - 1, len(script) - 1)  # type: ignore[attr-defined]
        body = json.dumps(
            {
                "id": "stub-1",
                "model": "stub-model",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": script[index]}}],
            }
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # silence request logging
        pass


class StubChatServer:
    def __init__(self, script: list[str]):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _StubChatHandler)
        self._server.script = script  # type: ignore[attr-defined]
        self._server.calls = 0  # type: ignore[attr-defined]
        self._server.lock = threading.Lock()  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    @property
    def calls(self) -> int:
        return self._server.calls  # type: ignore[attr-defined]

    def __enter__(self) -> "StubChatServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_chat_server():
    def _make(script: list[str]) -> StubChatServer:
        return StubChatServer(script)

    return _make
