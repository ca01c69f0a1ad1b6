"""Attack strategies for both parties, and their Monte Carlo evaluation.

Two directions:

* The receiver reads the committed bit off the raw correlations as soon as
  the results are revealed, before any bases are unveiled.  This always
  beats guessing, so the scheme hides nothing; result randomization only
  lowers his confidence (3/4 - e/4 against the 1/2 of the wrong pairing).

* The committer tries to rebind after the fact.  Her commitment is
  immutable; all she controls at unveil time is the basis list, and she
  never learns the sender's preparation bases or bits, so every
  implemented strategy is a blind basis-lying schedule.  A rebind counts
  as a success only if the receiver cleanly decodes the opposite bit;
  suspicion or ambiguity defeats the cheat.

No optimality claim is made for the strategy menu: these are the natural
blind schedules, evaluated empirically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rng as streams
from .channel import flip_bit
from .protocol import (
    Commitment,
    Decision,
    DecisionPolicy,
    ErrorMask,
    MeasurementRecord,
    SessionConfig,
    Unveil,
    raw_correlations,
    run_commit_phase,
    score_and_decide,
)


class RebindKind(Enum):
    HONEST_BASES = "honest-bases"
    FLIP_ALL_BASES = "flip-all-bases"
    RANDOM_LIES = "random-lies"


@dataclass(frozen=True)
class RebindStrategy:
    """A blind basis-lying schedule for the unveil message."""

    kind: RebindKind
    lie_probability: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lie_probability <= 1.0:
            raise ValueError("lie_probability must be in [0, 1]")

    @classmethod
    def honest_bases(cls) -> "RebindStrategy":
        return cls(RebindKind.HONEST_BASES)

    @classmethod
    def flip_all_bases(cls) -> "RebindStrategy":
        return cls(RebindKind.FLIP_ALL_BASES)

    @classmethod
    def random_lies(cls, p: float) -> "RebindStrategy":
        return cls(RebindKind.RANDOM_LIES, lie_probability=p)

    @property
    def label(self) -> str:
        if self.kind is RebindKind.RANDOM_LIES:
            return f"random-lies:{self.lie_probability:g}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "RebindStrategy":
        """Parse a strategy label: honest-bases, flip-all-bases, or
        random-lies:P with P a fraction in [0, 1]."""
        text = text.strip()
        if text == RebindKind.HONEST_BASES.value:
            return cls.honest_bases()
        if text == RebindKind.FLIP_ALL_BASES.value:
            return cls.flip_all_bases()
        if text.startswith(RebindKind.RANDOM_LIES.value + ":"):
            return cls.random_lies(float(text.split(":", 1)[1]))
        raise ValueError(
            f"unknown strategy {text!r}; expected honest-bases, flip-all-bases, "
            "or random-lies:P"
        )


@dataclass(frozen=True)
class PreUnveilGuess:
    """The receiver's early read of the committed bit from raw pairings."""

    guessed_bit: int
    direct_raw: float
    reverse_raw: float
    margin: float


@dataclass(frozen=True)
class AttackReport:
    """Tallies from a batch of rebind attempts.

    success: the receiver cleanly decoded the flipped bit.
    detection: the receiver flagged the session as suspicious.
    ambiguous: the receiver could not read a bit at all.
    decoded_original: the receiver decoded the originally committed bit,
    i.e. the rebind changed nothing.
    """

    n: int
    error_fraction: float
    noise_rate: float
    strategy: RebindStrategy
    trials: int
    seed: int
    success_count: int
    detection_count: int
    ambiguous_count: int
    decoded_original_count: int

    def __post_init__(self) -> None:
        total = (
            self.success_count
            + self.detection_count
            + self.ambiguous_count
            + self.decoded_original_count
        )
        if total != self.trials:
            raise ValueError(f"outcome tallies sum to {total}, expected {self.trials}")

    @property
    def success_rate(self) -> float:
        return self.success_count / self.trials if self.trials else 0.0

    @property
    def detection_rate(self) -> float:
        return self.detection_count / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "error_fraction": self.error_fraction,
            "noise_rate": self.noise_rate,
            "strategy": self.strategy.label,
            "trials": self.trials,
            "seed": self.seed,
            "success_count": self.success_count,
            "detection_count": self.detection_count,
            "ambiguous_count": self.ambiguous_count,
            "decoded_original_count": self.decoded_original_count,
            "success_rate": self.success_rate,
            "detection_rate": self.detection_rate,
        }


def bob_preunveil_guess(
    sent_bits, commitment: Commitment, rng: np.random.Generator
) -> PreUnveilGuess:
    """Guess the committed bit from raw correlations alone (no sifting).

    Direct pairing stronger -> 0, reverse stronger -> 1; an exact tie is
    broken by one coin from the adversary stream (the only case where a
    draw is consumed).
    """
    direct, reverse = raw_correlations(sent_bits, commitment)
    margin = direct - reverse
    if margin > 0:
        guessed = 0
    elif margin < 0:
        guessed = 1
    else:
        guessed = int(rng.integers(0, 2))
    return PreUnveilGuess(
        guessed_bit=guessed, direct_raw=direct, reverse_raw=reverse, margin=margin
    )


def alice_rebind_attack(
    record: MeasurementRecord,
    mask: ErrorMask,
    commitment: Commitment,
    original_bit: int,
    strategy: RebindStrategy,
    rng: np.random.Generator,
) -> Unveil:
    """Produce a (possibly dishonest) unveil message for a past commitment.

    The commitment itself is read-only; lying is confined to the basis
    list, in direct order.  The committer's full knowledge (her record,
    her mask, her commitment, her bit) is available to the strategy, but
    the implemented schedules are blind in the sender's bases.
    """
    if original_bit not in (0, 1):
        raise ValueError("original_bit must be 0 or 1")
    bases = record.bases
    if strategy.kind is RebindKind.HONEST_BASES:
        lied = bases.copy()
    elif strategy.kind is RebindKind.FLIP_ALL_BASES:
        lied = (bases ^ 1).astype(np.uint8)
    else:
        lies = (rng.random(len(bases)) < strategy.lie_probability).astype(np.uint8)
        lied = (bases ^ lies).astype(np.uint8)
    return Unveil(bases=lied)


def run_preunveil_trial(
    n: int,
    error_fraction: float,
    seed: int,
    noise_rate: float = 0.0,
) -> tuple[int, PreUnveilGuess]:
    """One seeded session up to commitment, then the early-recovery guess.

    The committed bit is drawn uniformly from its own substream; returns
    (committed_bit, guess).
    """
    bit = int(streams.substream(seed, streams.COMMITTED_BIT).integers(0, 2))
    config = SessionConfig(
        n=n,
        committed_bit=bit,
        error_fraction=error_fraction,
        noise_rate=noise_rate,
        seed=seed,
    )
    seq, _record, _mask, commitment = run_commit_phase(config)
    guess = bob_preunveil_guess(
        seq.bits, commitment, streams.substream(seed, streams.ADVERSARY)
    )
    return bit, guess


def estimate_preunveil_success(
    n: int,
    error_fraction: float,
    trials: int,
    seed: int,
    noise_rate: float = 0.0,
) -> float:
    """Fraction of seeded trials where the early guess hits the committed bit."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    hits = 0
    for t in range(trials):
        bit, guess = run_preunveil_trial(
            n, error_fraction, streams.derive_seed(seed, t), noise_rate=noise_rate
        )
        hits += guess.guessed_bit == bit
    return hits / trials


def run_rebind_trial(
    n: int,
    error_fraction: float,
    strategy: RebindStrategy,
    seed: int,
    policy: DecisionPolicy | None = None,
    noise_rate: float = 0.0,
) -> tuple[int, Decision]:
    """One seeded rebind attempt: honest commit, lying unveil, receiver decode.

    Returns (original_bit, the receiver's decision against the lying bases).
    """
    policy = policy or DecisionPolicy()
    bit = int(streams.substream(seed, streams.COMMITTED_BIT).integers(0, 2))
    config = SessionConfig(
        n=n,
        committed_bit=bit,
        error_fraction=error_fraction,
        noise_rate=noise_rate,
        seed=seed,
    )
    seq, record, mask, commitment = run_commit_phase(config)
    lying = alice_rebind_attack(
        record, mask, commitment, bit, strategy, streams.substream(seed, streams.ADVERSARY)
    )
    _score, decision = score_and_decide(seq, commitment, lying, policy)
    return bit, decision


def evaluate_binding(
    n: int,
    error_fraction: float,
    strategy: RebindStrategy,
    trials: int,
    seed: int,
    policy: DecisionPolicy | None = None,
    noise_rate: float = 0.0,
) -> AttackReport:
    """Tally rebind outcomes over seeded trials.

    A trial succeeds for the committer only when the receiver cleanly
    decodes the flipped bit.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    policy = policy or DecisionPolicy()
    success = detection = ambiguous = original = 0
    for t in range(trials):
        bit, decision = run_rebind_trial(
            n,
            error_fraction,
            strategy,
            streams.derive_seed(seed, t),
            policy=policy,
            noise_rate=noise_rate,
        )
        target = Decision.BIT1 if flip_bit(bit) == 1 else Decision.BIT0
        if decision is Decision.CHEAT_SUSPECTED:
            detection += 1
        elif decision is Decision.AMBIGUOUS:
            ambiguous += 1
        elif decision is target:
            success += 1
        else:
            original += 1
    return AttackReport(
        n=n,
        error_fraction=error_fraction,
        noise_rate=noise_rate,
        strategy=strategy,
        trials=trials,
        seed=seed,
        success_count=success,
        detection_count=detection,
        ambiguous_count=ambiguous,
        decoded_original_count=original,
    )
