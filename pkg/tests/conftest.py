"""Shared fixtures: a configurable local HTTP service and synthetic corpora."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from medshot.corpus import Corpus, QAPair
from medshot.embedding import hash_bucket


class LocalService:
    """A local HTTP JSON endpoint whose behaviour each test configures.

    ``handler`` is a callable ``(path, payload) -> (status, body)`` where
    ``body`` is JSON-serialisable (or a raw string, sent verbatim for
    malformed-response tests).  Setting ``drop_next`` makes the service
    close the next N connections without replying, which clients see as
    a transport failure.
    """

    def __init__(self) -> None:
        self.requests: list[tuple[str, dict]] = []
        self.handler = None
        self.drop_next = 0
        self._lock = threading.Lock()
        service = self

        class _Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                with service._lock:
                    if service.drop_next > 0:
                        service.drop_next -= 1
                        self.connection.close()
                        return
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                with service._lock:
                    service.requests.append((self.path, payload))
                status, body = service.handler(self.path, payload)
                raw = body.encode() if isinstance(body, str) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def log_message(self, *args) -> None:
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def start(self) -> "LocalService":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def service():
    svc = LocalService().start()
    yield svc
    svc.stop()


@pytest.fixture
def dead_url():
    """A URL that refuses connections (a port that was bound, then closed)."""
    import socket

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return f"http://127.0.0.1:{port}"


def make_typed_corpus(
    n_types: int,
    per_type: int,
    dim: int,
    name: str = "synthetic",
    source: str = "synthetic",
) -> Corpus:
    """Build a corpus whose types occupy disjoint hash buckets.

    Each type gets two shared topic tokens plus one unique token per
    question; all tokens of a type hash into buckets no other type uses,
    so mock-embedded questions of different types are exactly
    orthogonal.  Construction is deterministic and raises if the bucket
    budget cannot be met at the given ``dim``.
    """
    used_buckets: set[int] = set()
    pairs: list[QAPair] = []
    for t in range(n_types):
        label = f"type{t:02d}"
        needed = 2 + per_type
        tokens: list[str] = []
        j = 0
        while len(tokens) < needed:
            token = f"t{t}w{j}"
            j += 1
            if j > 100 * needed:
                raise RuntimeError(
                    f"cannot find {needed} disjoint buckets for {label} at dim {dim}"
                )
            bucket = hash_bucket(token, dim)
            if bucket in used_buckets:
                continue
            used_buckets.add(bucket)
            tokens.append(token)
        topic_a, topic_b = tokens[0], tokens[1]
        uniques = tokens[2:]
        for i in range(per_type):
            uniq = uniques[i]
            pairs.append(
                QAPair(
                    id=f"{label}-q{i:03d}",
                    question=f"{topic_a} {topic_b} {uniq}",
                    answer=f"{label} answer covers {uniq} with care and detail",
                    qtype=label,
                    source=source,
                )
            )
    return Corpus(name=name, pairs=pairs, word_cap=16)
