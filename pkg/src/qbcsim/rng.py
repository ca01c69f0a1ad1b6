"""Deterministic seed derivation and named random substreams.

Every random decision in a session comes from its own named substream, so
replaying a session with one participant's behaviour changed leaves every
other participant's draws untouched.  A substream seed is derived by
hashing the master seed together with a label path (SHA-256, first 8 bytes
little-endian); the derivation is pure arithmetic on the label strings, so
it is stable across platforms, processes, and interpreter sessions.

The networked mode relies on this: the sender, the committer, and the
channel referee each hold only the master seed and rebuild exactly the
substreams they own, which makes a wire session reproduce the in-process
session draw for draw.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Substream labels used by a protocol session.  In wire mode they are split
# across processes: the sender keeps PREPARE, the committer keeps BASES and
# ERROR, and the channel owner (the referee) keeps MEASURE.
PREPARE = "bob-prepare"
BASES = "alice-bases"
MEASURE = "channel-measure"
ERROR = "alice-error"
ADVERSARY = "adversary"
COMMITTED_BIT = "committed-bit"


def derive_seed(master: int, *labels: int | str) -> int:
    """Derive a 64-bit child seed from ``master`` and a label path.

    Labels may be strings or integers (e.g. cell and trial indices); they
    are joined with ``/`` separators before hashing, so ``("a", 1)`` and
    ``("a1",)`` derive different seeds.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


def substream(master: int, *labels: int | str) -> np.random.Generator:
    """Return an independent generator for the given label path."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
