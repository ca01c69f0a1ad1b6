"""Wire mode: framing, transcripts, referee enforcement, equivalence."""

import json
import socket
import threading
import time

import numpy as np
import pytest

from qbcsim.protocol import Decision, SessionConfig, run_honest_session
from qbcsim.referee import parse_address, party_run, referee_serve
from qbcsim.wire import (
    SessionTranscript,
    WireProtocolError,
    encode_message,
    hello_message,
    parse_message,
)


# -- framing -------------------------------------------------------------------

def test_message_round_trip():
    msg = {"type": "commit", "bits": [0, 1, 1]}
    line = encode_message(msg)
    assert line.endswith("\n") and line.count("\n") == 1
    assert parse_message(line) == msg


def test_unknown_type_rejected():
    with pytest.raises(WireProtocolError, match="unknown message type"):
        parse_message('{"type": "teleport"}\n')


def test_malformed_payloads_rejected():
    bad = [
        "not json at all\n",
        '["a", "list"]\n',
        '{"type": "hello", "role": "mallory"}\n',
        '{"type": "measure", "bases": [0, 2]}\n',
        '{"type": "prepare", "states": [{"basis": 0}]}\n',
        '{"type": "decision", "value": "maybe"}\n',
        '{"type": "error"}\n',
    ]
    for line in bad:
        with pytest.raises(WireProtocolError):
            parse_message(line)


def test_parse_address():
    assert parse_address("127.0.0.1:9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_address("9000")


# -- transcripts -----------------------------------------------------------------

def test_transcript_write_and_load(tmp_path):
    t = SessionTranscript()
    t.record("bob->referee", hello_message("bob"))
    t.record("referee->bob", hello_message("referee"))
    t.record("bob->referee", {"type": "decision", "value": "bit1"})
    path = tmp_path / "t.jsonl"
    t.write(path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert first["seq"] == 0 and first["dir"] == "bob->referee"
    again = SessionTranscript.load(path)
    assert again.entries == t.entries
    assert again.outcome == "bit1"
    assert not again.violated


def test_transcript_ordering_checker():
    good = SessionTranscript()
    for mtype in ("prepare", "measure", "outcomes", "commit", "unveil", "decision"):
        good.record("x->referee", {"type": mtype})
    assert good.check_ordering()
    bad = SessionTranscript()
    bad.record("alice->referee", {"type": "measure", "bases": []})
    bad.record("bob->referee", {"type": "prepare", "states": []})
    assert not bad.check_ordering()


def test_transcript_visibility_checker():
    leak = SessionTranscript()
    leak.record("referee->alice", {"type": "prepare", "states": []})
    assert not leak.check_visibility()
    leak2 = SessionTranscript()
    leak2.record("referee->bob", {"type": "measure", "bases": []})
    assert not leak2.check_visibility()


# -- live sessions ----------------------------------------------------------------

def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _serve(addr, results, **kwargs):
    results["transcript"] = referee_serve(addr, **kwargs)


def _start_referee(results, seed=0, timeout=10.0, transcript_path=None):
    addr = f"127.0.0.1:{_free_port()}"
    thread = threading.Thread(
        target=_serve, args=(addr, results),
        kwargs=dict(seed=seed, timeout=timeout, transcript_path=transcript_path),
        daemon=True,
    )
    thread.start()
    time.sleep(0.15)  # let the listener bind
    return addr, thread


def _raw_client(addr):
    host, port = parse_address(addr)
    sock = socket.create_connection((host, port), timeout=5)
    sock.settimeout(5)
    return sock, sock.makefile("r", encoding="utf-8", newline="\n")


def test_wire_session_matches_in_process_run(tmp_path):
    seed, n, bit, e = 1234, 256, 1, 0.5
    results = {}
    addr, ref_thread = _start_referee(
        results, seed=seed, transcript_path=tmp_path / "t.jsonl"
    )

    party_results = {}
    bob = threading.Thread(
        target=lambda: party_results.setdefault(
            "bob", party_run("bob", addr, n=n, seed=seed, timeout=10)
        )
    )
    alice = threading.Thread(
        target=lambda: party_results.setdefault(
            "alice",
            party_run("alice", addr, n=n, bit=bit, error_fraction=e, seed=seed, timeout=10),
        )
    )
    bob.start()
    alice.start()
    bob.join(15)
    alice.join(15)
    ref_thread.join(15)

    inproc = run_honest_session(
        SessionConfig(n=n, committed_bit=bit, error_fraction=e, seed=seed)
    )
    bob_result = party_results["bob"]
    alice_result = party_results["alice"]
    assert bob_result.exit_code == 0 and alice_result.exit_code == 0
    assert bob_result.decision is inproc.decision
    assert alice_result.decision is inproc.decision
    assert bob_result.alignment == inproc.alignment
    assert bob_result.raw_direct == inproc.raw_direct_correlation
    assert bob_result.raw_reverse == inproc.raw_reverse_correlation

    transcript = results["transcript"]
    assert not transcript.violated
    assert transcript.outcome == inproc.decision.value
    assert transcript.check_ordering()
    assert transcript.check_visibility()
    # the file round-trips to the same transcript
    loaded = SessionTranscript.load(tmp_path / "t.jsonl")
    assert loaded.entries == transcript.entries


def test_measure_before_prepare_is_an_ordering_violation():
    results = {}
    addr, ref_thread = _start_referee(results, timeout=5.0)
    sock, rfile = _raw_client(addr)
    try:
        sock.sendall(encode_message(hello_message("alice")).encode())
        # fire measure without waiting for the channel-ready hello
        sock.sendall(encode_message({"type": "measure", "bases": [0, 1]}).encode())
        reply = parse_message(rfile.readline())
        assert reply["type"] == "error"
        assert "out-of-order" in reply["message"]
    finally:
        sock.close()
    ref_thread.join(10)
    transcript = results["transcript"]
    assert transcript.violated
    assert transcript.outcome is None


def test_duplicate_role_is_rejected():
    results = {}
    addr, ref_thread = _start_referee(results, timeout=5.0)
    first, first_file = _raw_client(addr)
    second, second_file = _raw_client(addr)
    try:
        first.sendall(encode_message(hello_message("alice")).encode())
        time.sleep(0.1)  # ensure registration order
        second.sendall(encode_message(hello_message("alice")).encode())
        reply = parse_message(second_file.readline())
        assert reply["type"] == "error"
        assert "rejected" in reply["message"]
        assert second_file.readline() == ""  # connection closed
    finally:
        second.close()
        first.close()  # registered party drops -> session ends
    ref_thread.join(10)
    assert results["transcript"].violated


def test_party_without_referee_exits_one():
    result = party_run("bob", f"127.0.0.1:{_free_port()}", n=8, timeout=2)
    assert result.exit_code == 1
    assert "refused" in result.diagnostic or "failed" in result.diagnostic


def test_party_on_malformed_referee_exits_one():
    port = _free_port()
    listener = socket.socket()
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind(("127.0.0.1", port))
    listener.listen(1)

    def fake_referee():
        conn, _ = listener.accept()
        conn.makefile("r").readline()  # swallow the hello
        conn.sendall(b"{this is not json\n")
        time.sleep(0.3)
        conn.close()

    thread = threading.Thread(target=fake_referee, daemon=True)
    thread.start()
    result = party_run("alice", f"127.0.0.1:{port}", n=4, timeout=3)
    listener.close()
    assert result.exit_code == 1
    assert "JSON" in result.diagnostic or "valid" in result.diagnostic


def test_mismatched_session_sizes_abort():
    # alice announces fewer bases than bob prepared photons
    results = {}
    addr, ref_thread = _start_referee(results, timeout=6.0)
    bob_result = {}
    bob = threading.Thread(
        target=lambda: bob_result.setdefault(
            "r", party_run("bob", addr, n=16, seed=5, timeout=6)
        )
    )
    bob.start()
    time.sleep(0.3)
    alice_result = party_run("alice", addr, n=8, seed=5, timeout=6)
    bob.join(10)
    ref_thread.join(10)
    assert alice_result.exit_code == 1
    assert "size mismatch" in alice_result.diagnostic
    assert results["transcript"].violated


def test_wire_equivalence_across_parameters():
    # includes the scripted error-free committed-1 session at n=256
    for seed, n, bit, e in ((2, 256, 1, 0.0), (3, 128, 0, 0.25)):
        results = {}
        addr, ref_thread = _start_referee(results, seed=seed)
        outcomes = {}
        threads = [
            threading.Thread(
                target=lambda: outcomes.setdefault(
                    "bob", party_run("bob", addr, n=n, seed=seed, timeout=10)
                )
            ),
            threading.Thread(
                target=lambda: outcomes.setdefault(
                    "alice",
                    party_run(
                        "alice", addr, n=n, bit=bit, error_fraction=e,
                        seed=seed, timeout=10,
                    ),
                )
            ),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join(15)
        ref_thread.join(15)
        inproc = run_honest_session(
            SessionConfig(n=n, committed_bit=bit, error_fraction=e, seed=seed)
        )
        assert outcomes["bob"].decision is inproc.decision
        assert outcomes["bob"].alignment == inproc.alignment
        if (n, bit, e) == (256, 1, 0.0):
            assert outcomes["bob"].decision is Decision.BIT1


def test_alice_commit_message_masks_a_quarter_of_her_outcomes(tmp_path):
    # With half the results randomized and a direct-order commitment, the
    # commit message differs from the outcomes message in about n/4
    # positions (each selected result changes with probability 1/2).
    n, e, seed = 2000, 0.5, 606
    results = {}
    addr, ref_thread = _start_referee(
        results, seed=seed, transcript_path=tmp_path / "t.jsonl"
    )
    threads = [
        threading.Thread(
            target=lambda: party_run("bob", addr, n=n, seed=seed, timeout=10)
        ),
        threading.Thread(
            target=lambda: party_run(
                "alice", addr, n=n, bit=0, error_fraction=e, seed=seed, timeout=10
            )
        ),
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join(15)
    ref_thread.join(15)

    by_type = {}
    for entry in results["transcript"].entries:
        by_type.setdefault(entry.message.get("type"), entry.message)
    outcomes = np.asarray(by_type["outcomes"]["bits"])
    committed = np.asarray(by_type["commit"]["bits"])
    distance = int(np.sum(outcomes != committed))
    sigma = (n / 8) ** 0.5  # Binomial(n/2, 1/2) changes
    assert abs(distance - n / 4) <= 4 * sigma
