"""Per-trial result record and its CSV projection.

A TrialReport is the single value a finished trial communicates outward; the
sweep CSVs, the summary statistics, and the acceptance checks are all folds
over these records.  The trial CSV column set is part of the package's
external contract and must not be reordered or renamed:

    n, trial, seed, protocol, adversary, msgs_total, msgs_request, msgs_reply,
    msgs_decide, msgs_leader, time, rounds, outcome, trace_hash
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

TRIAL_CSV_COLUMNS = (
    "n", "trial", "seed", "protocol", "adversary",
    "msgs_total", "msgs_request", "msgs_reply", "msgs_decide", "msgs_leader",
    "time", "rounds", "outcome", "trace_hash",
)

OUTCOME_SUCCESS = "success"
OUTCOME_MULTI_LEADER = "multi-leader"
OUTCOME_NO_LEADER = "no-leader"
OUTCOME_NONTERMINATING = "nonterminating"


@dataclass
class TrialReport:
    protocol: str
    n: int
    trial: int
    seed: int
    adversary: str
    unique_ids: bool
    message_counts: dict[str, int]
    total_remote_messages: int
    elapsed_virtual_time: float          # time units; rounds for sync runs
    round_count: Optional[int]           # sync only
    leader_ranks: list[int]              # distinct accepted leader ranks
    elected_count: int                   # nodes that declared themselves leader
    per_phase_candidate_counts: Optional[dict[int, int]]  # async only
    invariant_violations: list[str]
    trace_hash: Optional[str]            # 16 hex chars, None when hashing was off
    outcome: str
    max_phase_span: Optional[float] = None  # async only; time units
    first_wake_time: Optional[float] = None
    events_processed: int = 0

    def to_row(self) -> list[str]:
        c = self.message_counts
        msgs_request = c.get("REQUEST", 0) + c.get("SYNC_REQUEST", 0)
        msgs_reply = c.get("APPROVED", 0) + c.get("DECLINED", 0) + c.get("SYNC_REPLY", 0)
        msgs_decide = c.get("DECIDE", 0) + c.get("DECIDE_REPLY", 0)
        msgs_leader = c.get("LEADER", 0) + c.get("WINNER", 0)
        return [
            str(self.n),
            str(self.trial),
            str(self.seed),
            self.protocol,
            self.adversary,
            str(self.total_remote_messages),
            str(msgs_request),
            str(msgs_reply),
            str(msgs_decide),
            str(msgs_leader),
            f"{self.elapsed_virtual_time:.6f}",
            "" if self.round_count is None else str(self.round_count),
            self.outcome,
            self.trace_hash or "",
        ]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "trial": self.trial,
            "seed": self.seed,
            "adversary": self.adversary,
            "uniqueIds": self.unique_ids,
            "messageCounts": dict(sorted(self.message_counts.items())),
            "totalRemoteMessages": self.total_remote_messages,
            "elapsedVirtualTime": self.elapsed_virtual_time,
            "roundCount": self.round_count,
            "leaderRanks": self.leader_ranks,
            "electedCount": self.elected_count,
            "perPhaseCandidateCounts": self.per_phase_candidate_counts,
            "invariantViolations": self.invariant_violations,
            "traceHash": self.trace_hash,
            "outcome": self.outcome,
            "maxPhaseSpan": self.max_phase_span,
            "firstWakeTime": self.first_wake_time,
            "eventsProcessed": self.events_processed,
        }


def classify_outcome(elected_count: int, agreed: bool, budget_hit: bool) -> str:
    """Outcome taxonomy: budget exhaustion dominates, then leader counting."""
    if budget_hit:
        return OUTCOME_NONTERMINATING
    if elected_count == 0:
        return OUTCOME_NO_LEADER
    if elected_count > 1 or not agreed:
        return OUTCOME_MULTI_LEADER
    return OUTCOME_SUCCESS
