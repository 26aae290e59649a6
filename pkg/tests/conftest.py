from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from cgec_kit import ErrorType, ParallelPair

# The six example sentence pairs, keyed by error type code: (incorrect, correct).
TABLE1 = {
    "RC": ("这座卫星城的人口估计超过一百万左右。", "这座卫星城的人口估计超过一百万。"),
    "SC": ("这次网络故障的原因是由服务器故障引起的。", "这次网络故障的原因是服务器故障。"),
    "IC": ("西湖区正全面提升区域产城融合发展的步伐。", "西湖区正全面加快区域产城融合发展的步伐。"),
    "IWO": ("学校三个月内要求每名学生完成20个小时的义工服务。", "学校要求每名学生三个月内完成20个小时的义工服务。"),
    "IL": ("集团向社会各界人士、沿途村庄百姓表示歉意。", "集团向社会各界人士表示歉意。"),
    "MC": ("这篇报告控诉了人类破坏大自然。", "这篇报告控诉了人类破坏大自然的罪行。"),
}


def table1_pair(code: str, pair_id: str | None = None) -> ParallelPair:
    incorrect, correct = TABLE1[code]
    return ParallelPair(
        id=pair_id or f"t1-{code.lower()}",
        ungrammatical=incorrect,
        grammatical=correct,
        error_type=ErrorType(code),
    )


@pytest.fixture
def rc_pair() -> ParallelPair:
    return table1_pair("RC")


@pytest.fixture
def ic_pair() -> ParallelPair:
    return table1_pair("IC")


class ChatCompletionStub:
    """Local chat-completions endpoint with scripted responses and counters.

    Script entries are (status, content) pairs consumed per request; with an
    empty script every request answers 200 with ``content``.  Bytes content
    is written verbatim (for malformed-body tests).
    """

    def __init__(self, script=None, content="1. 句子A", delay=0.0):
        self.script = list(script or [])
        self.content = content
        self.delay = delay
        self.lock = threading.Lock()
        self.total_requests = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.auth_headers: list[str | None] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:
                with stub.lock:
                    stub.total_requests += 1
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                    step = stub.script.pop(0) if stub.script else (200, stub.content)
                    stub.auth_headers.append(self.headers.get("Authorization"))
                try:
                    if stub.delay:
                        time.sleep(stub.delay)
                    length = int(self.headers.get("Content-Length", 0))
                    self.rfile.read(length)
                    status, content = step
                    if isinstance(content, bytes):
                        body = content
                    elif status == 200:
                        body = json.dumps(
                            {"choices": [{"message": {"content": content}}]},
                            ensure_ascii=False,
                        ).encode("utf-8")
                    else:
                        body = json.dumps({"error": content}).encode("utf-8")
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                finally:
                    with stub.lock:
                        stub.in_flight -= 1

            def log_message(self, *args) -> None:
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.server.server_port}/v1"

    def start(self) -> "ChatCompletionStub":
        self.thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def chat_stub():
    created = []

    def factory(**kwargs) -> ChatCompletionStub:
        stub = ChatCompletionStub(**kwargs).start()
        created.append(stub)
        return stub

    yield factory
    for stub in created:
        stub.stop()
