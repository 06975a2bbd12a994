"""The server must pass the consumer's protocol conformance suite.

The correction engine ships a fuzzing harness for scorer servers
(veriedit.protocol.check_server); here it runs against a real scorerd
process over stdio: valid probes for every request type plus 10^4
malformed frames, each of which must come back as a well-formed error
frame with the connection still alive afterwards.
"""

import sys

import numpy as np
import pytest

veriedit_protocol = pytest.importorskip(
    "veriedit.protocol", reason="consumer package not installed"
)

N_MALFORMED = 10_000


@pytest.fixture()
def transport():
    t = veriedit_protocol.StdioTransport(f"{sys.executable} -m scorerd.cli serve")
    yield t
    t.close()


def test_full_fuzz_suite(transport):
    rng = np.random.default_rng(2025)
    report = veriedit_protocol.check_server(transport, rng, n_malformed=N_MALFORMED, timeout=60.0)
    assert report.ok, "\n".join(report.failures)
    fuzz_checks = [c for c in report.checks if "malformed" in c]
    assert fuzz_checks == [f"malformed frame fuzz x{N_MALFORMED}"]


def test_server_survives_binary_garbage(transport):
    rng = np.random.default_rng(7)
    client = veriedit_protocol.ScorerClient(transport, timeout=30.0)
    for _ in range(100):
        junk = bytes(rng.integers(32, 127, size=rng.integers(1, 60))).decode("ascii")
        transport.send_line(junk)
        frame = veriedit_protocol.decode_frame(transport.recv_line(30.0))
        assert frame["type"] == "error"
    out = client.request("verify", {"claim": "a b", "evidence": ["a b"]})
    assert 0.0 < out["prob"] < 1.0
