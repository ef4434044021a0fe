# =============================================================
# WordProb — JSON-lines LM Backend (reference server)
# =============================================================
# Menyajikan TabularLM lewat protokol yang sama dengan RemoteLM:
#   → {"id": 7, "context": [3, 1]}
#   ← {"id": 7, "logprobs": [...]}      (-inf ditulis null)
#   ← {"id": 7, "error": "..."}
#
# Mode:
# - TCP: LMServer(lm).start() di background thread (dipakai test)
# - stdio: python -m app.lm_server lm.tsv --vocab-size N --stdio
# =============================================================

import argparse
import asyncio
import json
import logging
import math
import sys
import threading
from typing import Optional

from app.errors import LMError
from app.lm import TabularLM, load_tabular

logger = logging.getLogger("WordProb.LMServer")


def respond(lm: TabularLM, packet) -> dict:
    """Satu request → satu response dict (tidak pernah melempar)."""
    if not isinstance(packet, dict):
        return {"id": None, "error": "request must be a JSON object"}
    request_id = packet.get("id")
    context = packet.get("context")
    if not isinstance(context, list) or not all(isinstance(u, int) and not isinstance(u, bool) for u in context):
        return {"id": request_id, "error": "context must be a list of subword ids"}
    if any(not 0 <= u < lm.vocab_size for u in context):
        return {"id": request_id, "error": f"context id outside 0..{lm.vocab_size - 1}"}
    try:
        dist = lm.next_distribution(context)
    except LMError as e:
        return {"id": request_id, "error": str(e)}
    return {"id": request_id, "logprobs": [None if v == -math.inf else float(v) for v in dist]}


def _encode(response: dict) -> bytes:
    return (json.dumps(response) + "\n").encode("utf-8")


class LMServer:
    """
    Server TCP JSON-lines di event loop thread sendiri.

    Usage:
        with LMServer(lm) as server:
            RemoteLM(server.endpoint, vocab_size=lm.vocab_size)
    """

    def __init__(self, lm: TabularLM, host: str = "127.0.0.1", port: int = 0):
        self.lm = lm
        self.host = host
        self.port = port
        self.requests_served = 0
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._server: Optional[asyncio.AbstractServer] = None

    @property
    def endpoint(self) -> str:
        return f"tcp://{self.host}:{self.port}"

    def start(self) -> "LMServer":
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, name="LMServer-Loop", daemon=True)
        self._thread.start()
        asyncio.run_coroutine_threadsafe(self._open(), self._loop).result(timeout=5)
        logger.info("✓ LM server listening on %s", self.endpoint)
        return self

    def close(self):
        if self._loop is None:
            return
        asyncio.run_coroutine_threadsafe(self._close(), self._loop).result(timeout=5)
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=5)
        self._loop.close()
        self._loop = None
        logger.info("LM server closed | requests=%d", self.requests_served)

    def __enter__(self) -> "LMServer":
        return self.start()

    def __exit__(self, *exc):
        self.close()

    async def _open(self):
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def _close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    packet = json.loads(line.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    writer.write(_encode({"id": None, "error": "invalid JSON"}))
                    continue
                self.requests_served += 1
                writer.write(_encode(respond(self.lm, packet)))
                await writer.drain()
        except ConnectionError:
            pass
        finally:
            writer.close()


def serve_stdio(lm: TabularLM, stdin=None, stdout=None):
    """Loop blocking stdin → stdout sampai EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            response = respond(lm, json.loads(line))
        except json.JSONDecodeError:
            response = {"id": None, "error": "invalid JSON"}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wordprob-lm-server")
    parser.add_argument("lm", help="tabular LM TSV")
    parser.add_argument("--vocab-size", dest="vocab_size", type=int, required=True)
    parser.add_argument("--order", type=int, default=None)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9100)
    parser.add_argument("--stdio", action="store_true", help="serve on stdin/stdout instead of TCP")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(asctime)s [%(name)s] %(levelname)s: %(message)s")
    lm = load_tabular(args.lm, args.vocab_size, order=args.order)
    if args.stdio:
        serve_stdio(lm)
        return 0
    server = LMServer(lm, args.host, args.port).start()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
