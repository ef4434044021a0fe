# =============================================================
# Tests — app/network_client.py (RemoteLM) + app/lm_server.py
# =============================================================

import io
import json
import math
import os
import shlex
import sys

import numpy as np
import pytest

from app._paths import APP_ROOT, TOY1_DIR
from app.errors import BackendUnavailable, MalformedResponse
from app.lm_server import LMServer, respond, serve_stdio
from app.network_client import RemoteLM, parse_endpoint
from app.wordprob import score_sentence


def test_parse_endpoint():
    assert parse_endpoint("tcp://127.0.0.1:9100") == ("tcp", "127.0.0.1:9100")
    assert parse_endpoint("stdio: python serve.py") == ("stdio", "python serve.py")
    with pytest.raises(BackendUnavailable):
        parse_endpoint("http://localhost")


def test_not_started_client_refuses():
    client = RemoteLM("tcp://127.0.0.1:9", vocab_size=3)
    with pytest.raises(BackendUnavailable):
        client.next_distribution([])


def test_connection_refused():
    with LMServer_port_closed() as endpoint:
        with pytest.raises(BackendUnavailable):
            RemoteLM(endpoint, vocab_size=3).start()


class LMServer_port_closed:
    """Endpoint TCP yang pasti tidak listening (port server yang sudah ditutup)."""

    def __enter__(self):
        from app.lm import TabularLM

        server = LMServer(TabularLM(1, 0, {(): [0.5, 0.5]})).start()
        endpoint = server.endpoint
        server.close()
        return endpoint

    def __exit__(self, *exc):
        return False


# ── Server side ──

def test_respond_encodes_zero_as_null(toy1_lm):
    response = respond(toy1_lm, {"id": 1, "context": []})
    assert response["id"] == 1
    assert response["logprobs"][2] is None
    assert math.isclose(math.exp(response["logprobs"][0]), 0.5, rel_tol=1e-12)


def test_respond_rejects_bad_context(toy1_lm):
    assert "error" in respond(toy1_lm, {"id": 2, "context": [9]})
    assert "error" in respond(toy1_lm, {"id": 3, "context": "0"})
    assert "error" in respond(toy1_lm, [1, 2])


def test_serve_stdio_round_trip(toy1_lm):
    stdin = io.StringIO('{"id": 5, "context": [0]}\nnot json\n')
    stdout = io.StringIO()
    serve_stdio(toy1_lm, stdin, stdout)
    first, second = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert first["id"] == 5 and len(first["logprobs"]) == 4
    assert "error" in second


# ── Client over TCP ──

@pytest.fixture
def server(toy1_lm):
    with LMServer(toy1_lm) as running:
        yield running


def test_remote_matches_tabular(server, toy1_lm):
    with RemoteLM(server.endpoint, vocab_size=3) as remote:
        assert remote.is_connected
        for context in ([], [0], [1, 2], [0, 2, 1]):
            np.testing.assert_allclose(remote.next_distribution(context), toy1_lm.next_distribution(context))
    assert not remote.is_connected


def test_remote_caches_contexts(server):
    with RemoteLM(server.endpoint, vocab_size=3) as remote:
        first = remote.next_distribution([0])
        second = remote.next_distribution([0])
        assert first is second
        assert remote.requests_sent == 1


def test_wrong_vocab_size_is_malformed(server):
    with RemoteLM(server.endpoint, vocab_size=4) as remote:
        with pytest.raises(MalformedResponse, match="expected 5"):
            remote.next_distribution([])


def test_error_reply_is_malformed(server):
    with RemoteLM(server.endpoint, vocab_size=3) as remote:
        with pytest.raises(MalformedResponse, match="backend error"):
            remote.next_distribution([7])


def test_validate_rejects_bad_payloads():
    client = RemoteLM("tcp://127.0.0.1:9", vocab_size=1)
    with pytest.raises(MalformedResponse, match="deviates"):
        client._validate((), [math.log(0.5), math.log(0.4)])
    with pytest.raises(MalformedResponse, match="NaN"):
        client._validate((), [float("nan"), 0.0])
    with pytest.raises(MalformedResponse, match="non-numeric"):
        client._validate((), ["x", 0.0])
    dist = client._validate((), [None, 0.0])
    assert dist[0] == -math.inf


def test_scoring_through_remote_matches_local(server, toy1_spec, toy1_lm):
    with RemoteLM(server.endpoint, vocab_size=3) as remote:
        remote_scores = score_sentence(remote, toy1_spec, ["ac", "b"])
    local_scores = score_sentence(toy1_lm, toy1_spec, ["ac", "b"])
    assert [r.p_fixed for r in remote_scores] == pytest.approx([r.p_fixed for r in local_scores], abs=1e-12)


# ── Client over stdio ──

def test_stdio_backend(monkeypatch, toy1_lm):
    monkeypatch.chdir(APP_ROOT)
    command = " ".join(
        shlex.quote(part)
        for part in (sys.executable, "-m", "app.lm_server", os.path.join(TOY1_DIR, "lm.tsv"), "--vocab-size", "3", "--stdio")
    )
    with RemoteLM(f"stdio:{command}", vocab_size=3, timeout=30) as remote:
        np.testing.assert_allclose(remote.next_distribution([1]), toy1_lm.next_distribution([1]))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
