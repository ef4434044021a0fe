# =============================================================
# WordProb — Remote LM Client (JSON-lines)
# =============================================================
# Klien backend LM eksternal yang berjalan non-blocking di
# background thread (asyncio event loop sendiri).
#
# Fitur:
# - Transport TCP (tcp://host:port) atau subprocess stdio (stdio:<cmd>)
# - Request id + future: response boleh datang tidak berurutan
# - Cache per konteks → konteks sama selalu distribusi sama
# - Validasi ulang normalisasi (toleransi 1e-4, output softmax)
#
# Protokol:
#   → {"id": 7, "context": [3, 1]}
#   ← {"id": 7, "logprobs": [...]}   (panjang vocab_size + 1, terakhir eos)
#   ← {"id": 7, "error": "..."}
# =============================================================

import asyncio
import concurrent.futures
import itertools
import json
import logging
import math
import shlex
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from app.errors import BackendUnavailable, MalformedResponse

logger = logging.getLogger("WordProb.NetworkClient")

# ── Constants ──────────────────────────────────────────────────
CONNECT_TIMEOUT = 5          # Detik timeout saat connect
REQUEST_TIMEOUT = 60         # Detik timeout per request
REMOTE_TOLERANCE = 1e-4      # Toleransi normalisasi output softmax


def parse_endpoint(endpoint: str) -> Tuple[str, str]:
    """
    "tcp://host:port" → ("tcp", "host:port")
    "stdio:python serve.py" → ("stdio", "python serve.py")
    """
    if endpoint.startswith("tcp://"):
        return "tcp", endpoint[len("tcp://"):]
    if endpoint.startswith("stdio:"):
        return "stdio", endpoint[len("stdio:"):].strip()
    raise BackendUnavailable(f"unsupported endpoint {endpoint!r} (use tcp://host:port or stdio:<command>)")


class RemoteLM:
    """
    ConditionalLM di atas backend JSON-lines.

    Gunakan:
        with RemoteLM("tcp://127.0.0.1:9100", vocab_size=50257) as lm:
            lm.next_distribution([464, 3290])

    Thread-safe: boleh dipanggil dari banyak thread scoring sekaligus;
    semua request di-serialisasi lewat satu koneksi.
    """

    def __init__(
        self,
        endpoint: str,
        vocab_size: int,
        timeout: float = REQUEST_TIMEOUT,
        exact: bool = False,
    ):
        self.endpoint = endpoint
        self.vocab_size = vocab_size
        self.exact = exact
        self._timeout = timeout
        self._transport, self._target = parse_endpoint(endpoint)

        # ── State ──
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None
        self._process: Optional[asyncio.subprocess.Process] = None
        self._writer_lock: Optional[asyncio.Lock] = None
        self._listener: Optional[asyncio.Task] = None
        self._pending: Dict[int, asyncio.Future] = {}
        self._ids = itertools.count(1)
        self._connected = False

        # ── Cache ──
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {}
        self._cache_lock = threading.Lock()
        self._requests_sent = 0

        logger.info("RemoteLM initialized | endpoint=%s | vocab_size=%d", endpoint, vocab_size)

    # ── Public API ──────────────────────────────────────────

    def start(self) -> "RemoteLM":
        """Start event loop thread dan buka koneksi (blocking sampai siap)."""
        if self._connected:
            return self
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, name="RemoteLM-Loop", daemon=True)
        self._thread.start()
        future = asyncio.run_coroutine_threadsafe(self._connect(), self._loop)
        try:
            future.result(timeout=CONNECT_TIMEOUT + 1)
        except BackendUnavailable:
            self.close()
            raise
        except Exception as e:
            self.close()
            raise BackendUnavailable(f"cannot reach {self.endpoint}: {e}") from e
        logger.info("✓ Connected to backend %s", self.endpoint)
        return self

    def close(self):
        """Tutup koneksi + hentikan loop. Aman dipanggil berulang."""
        if self._loop is None:
            return
        if self._loop.is_running():
            try:
                asyncio.run_coroutine_threadsafe(self._shutdown(), self._loop).result(timeout=CONNECT_TIMEOUT)
            except Exception as e:
                logger.debug("Shutdown error ignored: %s", e)
            self._loop.call_soon_threadsafe(self._loop.stop)
        if self._thread is not None:
            self._thread.join(timeout=CONNECT_TIMEOUT)
        self._loop.close()
        self._loop = None
        self._thread = None
        self._connected = False
        logger.info("RemoteLM closed | requests=%d | cached=%d", self._requests_sent, len(self._cache))

    def __enter__(self) -> "RemoteLM":
        return self.start()

    def __exit__(self, *exc):
        self.close()

    @property
    def is_connected(self) -> bool:
        return self._connected

    @property
    def requests_sent(self) -> int:
        return self._requests_sent

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        """
        Raises:
            BackendUnavailable: belum terhubung / koneksi putus / timeout.
            MalformedResponse: payload rusak, error reply, atau tidak ternormalisasi.
        """
        key = tuple(int(u) for u in context)
        with self._cache_lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        if not self._connected or self._loop is None:
            raise BackendUnavailable(f"not connected to {self.endpoint}")

        future = asyncio.run_coroutine_threadsafe(self._request(key), self._loop)
        try:
            raw = future.result(timeout=self._timeout + 1)
        except (BackendUnavailable, MalformedResponse):
            raise
        except concurrent.futures.TimeoutError as e:
            raise BackendUnavailable(f"request timed out after {self._timeout}s") from e

        dist = self._validate(key, raw)
        with self._cache_lock:
            dist = self._cache.setdefault(key, dist)
        return dist

    # ── Internal: validation ─────────────────────────────────

    def _validate(self, context: Tuple[int, ...], raw) -> np.ndarray:
        if not isinstance(raw, list) or len(raw) != self.vocab_size + 1:
            size = len(raw) if isinstance(raw, list) else type(raw).__name__
            raise MalformedResponse(f"context {list(context)}: expected {self.vocab_size + 1} logprobs, got {size}")
        try:
            values = [-math.inf if v is None else float(v) for v in raw]
        except (TypeError, ValueError) as e:
            raise MalformedResponse(f"context {list(context)}: non-numeric logprob ({e})") from None
        dist = np.array(values, dtype=float)
        if np.any(np.isnan(dist)) or np.any(dist == math.inf):
            raise MalformedResponse(f"context {list(context)}: NaN or +inf logprob")
        total = float(logsumexp(dist)) if np.any(np.isfinite(dist)) else -math.inf
        deviation = 1.0 - math.exp(total)
        if abs(deviation) > REMOTE_TOLERANCE:
            raise MalformedResponse(f"context {list(context)}: distribution deviates from 1 by {deviation:.3g}")
        dist.setflags(write=False)
        return dist

    # ── Internal: event loop side ────────────────────────────

    async def _connect(self):
        try:
            if self._transport == "tcp":
                host, _, port = self._target.rpartition(":")
                self._reader, self._writer = await asyncio.wait_for(
                    asyncio.open_connection(host, int(port)),
                    timeout=CONNECT_TIMEOUT,
                )
            else:
                argv = shlex.split(self._target)
                self._process = await asyncio.create_subprocess_exec(
                    *argv,
                    stdin=asyncio.subprocess.PIPE,
                    stdout=asyncio.subprocess.PIPE,
                )
                self._reader, self._writer = self._process.stdout, self._process.stdin
        except asyncio.TimeoutError:
            raise BackendUnavailable(f"connection timeout to {self.endpoint}") from None
        except (OSError, ValueError) as e:
            raise BackendUnavailable(f"cannot reach {self.endpoint}: {e}") from None

        self._writer_lock = asyncio.Lock()
        self._connected = True
        self._listener = asyncio.ensure_future(self._listen_loop())

    async def _shutdown(self):
        self._connected = False
        if self._listener is not None:
            self._listener.cancel()
        if self._writer is not None:
            try:
                self._writer.close()
                if self._transport == "tcp":
                    await self._writer.wait_closed()
            except Exception:
                pass
        if self._process is not None and self._process.returncode is None:
            self._process.terminate()
            await self._process.wait()
        self._fail_pending(BackendUnavailable("client closed"))

    async def _send(self, data: dict):
        """Send satu packet JSON (satu baris)."""
        payload = json.dumps(data, ensure_ascii=False) + "\n"
        async with self._writer_lock:
            self._writer.write(payload.encode("utf-8"))
            await self._writer.drain()

    async def _request(self, context: Tuple[int, ...]) -> List:
        request_id = next(self._ids)
        future = asyncio.get_running_loop().create_future()
        self._pending[request_id] = future
        try:
            await self._send({"id": request_id, "context": list(context)})
            self._requests_sent += 1
            return await asyncio.wait_for(future, timeout=self._timeout)
        except asyncio.TimeoutError:
            raise BackendUnavailable(f"no response for request {request_id} within {self._timeout}s") from None
        except (ConnectionError, OSError) as e:
            raise BackendUnavailable(f"write to {self.endpoint} failed: {e}") from None
        finally:
            self._pending.pop(request_id, None)

    def _fail_pending(self, error: Exception):
        for future in self._pending.values():
            if not future.done():
                future.set_exception(error)
        self._pending.clear()

    async def _listen_loop(self):
        """Terima response dan cocokkan dengan request berdasarkan id."""
        try:
            while self._connected:
                line = await self._reader.readline()
                if not line:
                    logger.warning("✗ Backend closed the connection")
                    break
                try:
                    packet = json.loads(line.decode("utf-8").strip())
                except (json.JSONDecodeError, UnicodeDecodeError):
                    logger.warning("Invalid packet from backend: %s", line[:80])
                    continue

                future = self._pending.get(packet.get("id")) if isinstance(packet, dict) else None
                if future is None or future.done():
                    logger.warning("Unmatched response from backend: %s", str(packet)[:80])
                    continue
                if "error" in packet:
                    future.set_exception(MalformedResponse(f"backend error: {packet['error']}"))
                elif "logprobs" in packet:
                    future.set_result(packet["logprobs"])
                else:
                    future.set_exception(MalformedResponse(f"response without logprobs: {str(packet)[:80]}"))
        except asyncio.CancelledError:
            pass
        finally:
            self._connected = False
            self._fail_pending(BackendUnavailable(f"connection to {self.endpoint} lost"))
