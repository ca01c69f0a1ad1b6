"""Monte Carlo experiment runner: sweeps, aggregation, report files.

A sweep enumerates the (n, error_fraction, noise_rate) grid in row-major
order (n outermost) and runs trials_per_cell independent trials per cell.
Trial substreams are derived as hash(master_seed, cell_index, trial_index),
so results do not depend on scheduling and a sweep rerun with the same
master seed reproduces its report byte for byte (timestamps excluded: the
CSV carries none, the JSON carries one provenance field).

Per-cell statistic by mode:

* honest   - mean correct-pairing raw correlation, pooled over all
             trials * n positions (the committed bit is drawn uniformly
             per trial; "correct pairing" is direct for 0, reverse for 1).
* preunveil - fraction of trials where the early guess hits the bit.
* binding  - fraction of trials where the rebind cleanly flips the bit.

Confidence intervals are Wilson at 95% on the underlying proportion.
Decision tallies count the receiver's verdicts (for preunveil, the guess
fills the bit0/bit1 columns).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from itertools import product
from pathlib import Path

from . import __version__
from . import rng as streams
from .adversary import RebindStrategy, run_preunveil_trial, run_rebind_trial
from .protocol import Decision, DecisionPolicy, SessionConfig, run_honest_session
from .stats import binomial_ci

CSV_COLUMNS = (
    "n",
    "error_fraction",
    "noise_rate",
    "mode",
    "trials",
    "statistic_mean",
    "ci_low",
    "ci_high",
    "decide_bit0",
    "decide_bit1",
    "ambiguous",
    "cheat_suspected",
)

JSON_SCHEMA_VERSION = 1


class SweepMode(Enum):
    HONEST = "honest"
    PREUNVEIL = "preunveil"
    BINDING = "binding"


@dataclass(frozen=True)
class SweepSpec:
    n_values: tuple[int, ...]
    error_fractions: tuple[float, ...]
    noise_rates: tuple[float, ...] = (0.0,)
    trials_per_cell: int = 1
    master_seed: int = 0
    mode: SweepMode = SweepMode.HONEST
    strategy: RebindStrategy = RebindStrategy.honest_bases()
    policy: DecisionPolicy = DecisionPolicy()

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_values", tuple(int(v) for v in self.n_values))
        object.__setattr__(
            self, "error_fractions", tuple(float(v) for v in self.error_fractions)
        )
        object.__setattr__(
            self, "noise_rates", tuple(float(v) for v in self.noise_rates)
        )
        if not self.n_values or not self.error_fractions or not self.noise_rates:
            raise ValueError("sweep axes must be nonempty")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")

    @property
    def mode_label(self) -> str:
        if self.mode is SweepMode.BINDING:
            return f"binding:{self.strategy.label}"
        return self.mode.value


@dataclass(frozen=True)
class SweepRow:
    n: int
    error_fraction: float
    noise_rate: float
    mode: str
    trials: int
    statistic_mean: float
    ci_low: float
    ci_high: float
    decide_bit0: int
    decide_bit1: int
    ambiguous: int
    cheat_suspected: int


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    master_seed: int
    tool_version: str
    timestamp: str


def _tally(counts: dict[Decision, int], decision: Decision) -> None:
    counts[decision] = counts.get(decision, 0) + 1


def _run_cell(
    spec: SweepSpec, cell_index: int, n: int, e: float, noise: float
) -> SweepRow:
    trials = spec.trials_per_cell
    counts: dict[Decision, int] = {}
    successes = 0
    denominator = trials

    if spec.mode is SweepMode.HONEST:
        # Pool match counts over every revealed position of every trial.
        denominator = trials * n
        for t in range(trials):
            seed = streams.derive_seed(spec.master_seed, cell_index, t)
            bit = int(streams.substream(seed, streams.COMMITTED_BIT).integers(0, 2))
            report = run_honest_session(
                SessionConfig(
                    n=n,
                    committed_bit=bit,
                    error_fraction=e,
                    noise_rate=noise,
                    seed=seed,
                    policy=spec.policy,
                )
            )
            correct_raw = (
                report.raw_direct_correlation
                if bit == 0
                else report.raw_reverse_correlation
            )
            successes += round(correct_raw * n)
            _tally(counts, report.decision)
    elif spec.mode is SweepMode.PREUNVEIL:
        for t in range(trials):
            seed = streams.derive_seed(spec.master_seed, cell_index, t)
            bit, guess = run_preunveil_trial(n, e, seed, noise_rate=noise)
            successes += guess.guessed_bit == bit
            _tally(counts, Decision.BIT0 if guess.guessed_bit == 0 else Decision.BIT1)
    else:
        for t in range(trials):
            seed = streams.derive_seed(spec.master_seed, cell_index, t)
            bit, decision = run_rebind_trial(
                n, e, spec.strategy, seed, policy=spec.policy, noise_rate=noise
            )
            flipped = Decision.BIT1 if bit == 0 else Decision.BIT0
            successes += decision is flipped
            _tally(counts, decision)

    if denominator > 0:
        ci = binomial_ci(successes, denominator, 0.95)
        mean, low, high = successes / denominator, ci.low, ci.high
    else:
        mean, low, high = 0.0, 0.0, 1.0
    return SweepRow(
        n=n,
        error_fraction=e,
        noise_rate=noise,
        mode=spec.mode_label,
        trials=trials,
        statistic_mean=round(mean, 6),
        ci_low=round(low, 6),
        ci_high=round(high, 6),
        decide_bit0=counts.get(Decision.BIT0, 0),
        decide_bit1=counts.get(Decision.BIT1, 0),
        ambiguous=counts.get(Decision.AMBIGUOUS, 0),
        cheat_suspected=counts.get(Decision.CHEAT_SUSPECTED, 0),
    )


def run_sweep(spec: SweepSpec) -> SweepReport:
    """Run every cell of the grid; one report row per cell."""
    rows = []
    cells = product(spec.n_values, spec.error_fractions, spec.noise_rates)
    for cell_index, (n, e, noise) in enumerate(cells):
        rows.append(_run_cell(spec, cell_index, n, e, noise))
    return SweepReport(
        rows=tuple(rows),
        master_seed=spec.master_seed,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def _row_record(row: SweepRow) -> dict:
    return {
        "n": row.n,
        "error_fraction": f"{row.error_fraction:.6f}",
        "noise_rate": f"{row.noise_rate:.6f}",
        "mode": row.mode,
        "trials": row.trials,
        "statistic_mean": f"{row.statistic_mean:.6f}",
        "ci_low": f"{row.ci_low:.6f}",
        "ci_high": f"{row.ci_high:.6f}",
        "decide_bit0": row.decide_bit0,
        "decide_bit1": row.decide_bit1,
        "ambiguous": row.ambiguous,
        "cheat_suspected": row.cheat_suspected,
    }


def write_report(report: SweepReport, format: str, path) -> None:
    """Write a sweep report as CSV (fixed column order) or JSON (versioned).

    Fractions are rendered with six decimal places so report files are
    byte-stable across platforms and reruns.
    """
    path = Path(path)
    if format == "csv":
        try:
            handle = path.open("w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc}") from exc
        with handle:
            writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in report.rows:
                writer.writerow(_row_record(row))
    elif format == "json":
        doc = {
            "schema_version": JSON_SCHEMA_VERSION,
            "tool_version": report.tool_version,
            "master_seed": report.master_seed,
            "timestamp": report.timestamp,
            "rows": [_row_record(row) for row in report.rows],
        }
        try:
            path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc}") from exc
    else:
        raise ValueError(f"unknown report format {format!r}; expected csv or json")


def read_report(path) -> SweepReport:
    """Re-read a JSON report written by write_report."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != JSON_SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    rows = tuple(
        SweepRow(
            n=int(r["n"]),
            error_fraction=float(r["error_fraction"]),
            noise_rate=float(r["noise_rate"]),
            mode=r["mode"],
            trials=int(r["trials"]),
            statistic_mean=float(r["statistic_mean"]),
            ci_low=float(r["ci_low"]),
            ci_high=float(r["ci_high"]),
            decide_bit0=int(r["decide_bit0"]),
            decide_bit1=int(r["decide_bit1"]),
            ambiguous=int(r["ambiguous"]),
            cheat_suspected=int(r["cheat_suspected"]),
        )
        for r in doc["rows"]
    )
    return SweepReport(
        rows=rows,
        master_seed=int(doc["master_seed"]),
        tool_version=doc["tool_version"],
        timestamp=doc["timestamp"],
    )
