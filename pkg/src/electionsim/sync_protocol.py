"""Synchronous leader election: three activation attempts, one polling wave.

Spontaneously woken nodes become *silent* candidates: each draws a rank from
[1, n^4] and tosses a coin at its wake round and, if still silent, 3 and 6
rounds later (success probabilities n^-2/3, n^-1/3, 1).  A successful toss
makes it *active*: it polls ceil(2 sqrt(n) log2 n) random peers (plus itself,
locally) with its rank.  A referee groups the requests that reach it in one
round and answers every requester with the largest rank in the group; a
referee's own rank competes only through its own self-request.  An active
candidate whose every reply echoes its own rank broadcasts WINNER(rank) to the
whole network; any other reply retires it.  A silent candidate retires the
moment any request reaches it, and every node that receives a WINNER adopts
the largest announced rank as leader and terminates (a winner keeps itself).

Rounds are lockstep: a message sent in round r is delivered at the start of
round r+1, and deliveries take effect before anything else happens in the
round, in this order:

    WINNER deliveries -> reply evaluation -> request batches
    -> spontaneous wake-ups -> activation attempts

Putting boundary deliveries first is what makes the nine-round bound sharp: a
straggler activating late is already terminated by the winner's broadcast in
the very round it would have polled.  The trace mirrors this order line for
line, with t equal to the round number.
"""

from __future__ import annotations

from random import Random
from typing import Optional

from .adversary import AdversaryConfig, build_wake_entries, sample_targets
from .engine import (
    DEFAULT_EVENT_BUDGET,
    MSG_NAMES,
    MSG_SYNC_REPLY,
    MSG_SYNC_REQUEST,
    MSG_WINNER,
    TICKS_PER_UNIT,
    TraceBuffer,
    derive_seed,
)
from .phases import SYNC_ATTEMPT_OFFSETS, sync_attempt_probabilities, sync_referee_count
from .report import TrialReport, classify_outcome

# node states
SLEEP = 0
SILENT = 1
ACTIVE = 2
REFEREE = 3   # retired candidate or woken by a request
DONE = 4      # leader known (or self-elected); ignores everything


def render_sync_msg(msg: tuple) -> tuple[str, str]:
    """Canonical (msgType, msgFields-JSON) for one message; part of the trace
    format, so any change here changes every trace hash."""
    name = MSG_NAMES[msg[0]]
    if msg[2] < 0:
        return name, f'{{"rank":{msg[1]}}}'
    return name, f'{{"rank":{msg[1]},"tb":{msg[2]}}}'


def run_sync_trial(
    n: int,
    seed: int,
    adversary: AdversaryConfig,
    unique_ids: bool = False,
    trial: int = 0,
    budget: int = DEFAULT_EVENT_BUDGET,
    collect_trace: bool = False,
    hash_trace: bool = True,
) -> tuple[TrialReport, Optional[list[str]]]:
    """Run one seeded trial; returns the report and, if collected, the trace lines.

    The delay policy in `adversary` is ignored: rounds are lockstep by
    definition, so only the wake schedule and the adversary seed matter here.
    """
    if n < 1:
        raise ValueError("network size must be positive")
    adv_rng = Random(derive_seed(seed, "adv", adversary.seed))
    trace = TraceBuffer(collect_trace, hash_trace) if (collect_trace or hash_trace) else None
    tracing = trace is not None and trace.active

    k = sync_referee_count(n)
    p1, p2, p3 = sync_attempt_probabilities(n)
    probs = (p1, p2, p3)
    n4 = n**4

    state = [SLEEP] * n
    rank = [0] * n
    tb = list(range(n)) if unique_ids else [-1] * n
    leader_of = [-1] * n
    leader_tb = [-1] * n
    exp_replies = [0] * n
    got_replies = [0] * n
    best_rank = [0] * n
    best_tb = [-1] * n
    attempt_idx = [0] * n

    node_rngs: dict[int, Random] = {}

    def _rng(u: int) -> Random:
        r = node_rngs.get(u)
        if r is None:
            r = node_rngs[u] = Random(derive_seed(seed, "node", u))
        return r

    # round -> pending work, all insertion-ordered
    winners_at: dict[int, list[tuple[int, int, tuple]]] = {}
    replies_at: dict[int, list[tuple[int, int, tuple]]] = {}
    requests_at: dict[int, list[tuple[int, int, tuple]]] = {}
    wakes_at: dict[int, list[int]] = {}
    attempts_at: dict[int, list[int]] = {}

    for tick, node in build_wake_entries(adversary.wake, n, adv_rng):
        wakes_at.setdefault(tick // TICKS_PER_UNIT, []).append(node)

    counts = [0] * len(MSG_NAMES)
    violations: list[str] = []
    elected = 0
    delivered = 0
    processed = 0
    budget_hit = False
    first_wake = -1
    last_delivery = -1
    seq = 0

    def _emit(line: str) -> None:
        trace.emit(line)

    def _emit_delivery(r: int, kind: str, src: int, dst: int, msg: tuple) -> None:
        nonlocal seq
        if tracing:
            name, fields = render_sync_msg(msg)
            _emit(
                f'{{"t":{r},"seq":{seq},"kind":"{kind}","from":{src},'
                f'"to":{dst},"msgType":"{name}","msgFields":{fields}}}'
            )
        seq += 1

    def _declare_winner(u: int, r: int) -> None:
        nonlocal elected
        elected += 1
        leader_of[u] = rank[u]
        leader_tb[u] = tb[u]
        state[u] = DONE
        if n > 1:
            msg = (MSG_WINNER, rank[u], tb[u])
            batch = winners_at.setdefault(r + 1, [])
            for v in range(n):
                if v != u:
                    batch.append((u, v, msg))

    def _evaluate(u: int, r: int) -> None:
        if (best_rank[u], best_tb[u]) == (rank[u], tb[u]):
            _declare_winner(u, r)
        else:
            state[u] = REFEREE

    def _activate(u: int, r: int) -> None:
        state[u] = ACTIVE
        req = (MSG_SYNC_REQUEST, rank[u], tb[u])
        if k:
            batch = requests_at.setdefault(r + 1, [])
            for v in sample_targets(_rng(u), n, u, k):
                batch.append((u, v, req))
        exp_replies[u] = k + 1
        # the self-appointed referee hears only this one request this round,
        # so its reply is the candidate's own rank, recorded directly
        got_replies[u] = 1
        best_rank[u], best_tb[u] = rank[u], tb[u]
        _emit_delivery(r, "local", u, u, req)
        _emit_delivery(r, "local", u, u, (MSG_SYNC_REPLY, rank[u], tb[u]))
        if got_replies[u] == exp_replies[u]:
            _evaluate(u, r)

    while winners_at or replies_at or requests_at or wakes_at or attempts_at:
        r = min(
            key
            for d in (winners_at, replies_at, requests_at, wakes_at, attempts_at)
            for key in d.keys()
        )
        if processed >= budget:
            budget_hit = True
            break

        # 1. winner announcements land before anything else this round
        for src, dst, msg in winners_at.pop(r, ()):
            processed += 1
            delivered += 1
            counts[MSG_WINNER] += 1
            last_delivery = r
            _emit_delivery(r, "deliver", src, dst, msg)
            if state[dst] == DONE:
                continue
            if (msg[1], msg[2]) > (leader_of[dst], leader_tb[dst]):
                leader_of[dst], leader_tb[dst] = msg[1], msg[2]
            state[dst] = DONE

        # 2. poll replies, then completed candidates judge their wave
        evaluators = []
        for src, dst, msg in replies_at.pop(r, ()):
            processed += 1
            delivered += 1
            counts[MSG_SYNC_REPLY] += 1
            last_delivery = r
            _emit_delivery(r, "deliver", src, dst, msg)
            if state[dst] != ACTIVE:
                continue
            got_replies[dst] += 1
            if (msg[1], msg[2]) > (best_rank[dst], best_tb[dst]):
                best_rank[dst], best_tb[dst] = msg[1], msg[2]
            if got_replies[dst] == exp_replies[dst]:
                evaluators.append(dst)
            elif got_replies[dst] > exp_replies[dst]:
                violations.append(f"candidate {dst}: more replies than referees")
        for u in evaluators:
            if state[u] == ACTIVE:
                _evaluate(u, r)

        # 3. request batches: one group-max reply per requester
        batches: dict[int, list[tuple[int, tuple]]] = {}
        for src, dst, msg in requests_at.pop(r, ()):
            processed += 1
            delivered += 1
            counts[MSG_SYNC_REQUEST] += 1
            last_delivery = r
            _emit_delivery(r, "deliver", src, dst, msg)
            batches.setdefault(dst, []).append((src, msg))
        for w in sorted(batches):
            if state[w] == DONE:
                continue
            group = batches[w]
            if state[w] == SLEEP:
                state[w] = REFEREE
            elif state[w] == SILENT:
                state[w] = REFEREE  # a silent candidate retires on first contact
            hi_rank, hi_tb = group[0][1][1], group[0][1][2]
            for _, m in group:
                if (m[1], m[2]) > (hi_rank, hi_tb):
                    hi_rank, hi_tb = m[1], m[2]
            reply = (MSG_SYNC_REPLY, hi_rank, hi_tb)
            out = replies_at.setdefault(r + 1, [])
            for src, _ in group:
                out.append((w, src, reply))

        # 4. spontaneous wake-ups
        for u in wakes_at.pop(r, ()):
            processed += 1
            if state[u] != SLEEP:
                continue
            state[u] = SILENT
            rank[u] = _rng(u).randint(1, n4)
            if first_wake < 0:
                first_wake = r
            if tracing:
                _emit(
                    f'{{"t":{r},"seq":{seq},"kind":"wake","from":null,'
                    f'"to":{u},"msgType":null,"msgFields":'
                    f'{{"cause":"spontaneous","rank":{rank[u]}}}}}'
                )
            seq += 1
            attempts_at.setdefault(r, []).append(u)

        # 5. activation attempts (a coin is tossed even for the sure third try)
        for u in attempts_at.pop(r, ()):
            processed += 1
            if state[u] != SILENT:
                continue
            i = attempt_idx[u]
            attempt_idx[u] = i + 1
            if _rng(u).random() < probs[i]:
                _activate(u, r)
            elif i + 1 < len(SYNC_ATTEMPT_OFFSETS):
                nxt = r + SYNC_ATTEMPT_OFFSETS[i + 1] - SYNC_ATTEMPT_OFFSETS[i]
                attempts_at.setdefault(nxt, []).append(u)
            else:
                violations.append(f"candidate {u}: sure activation attempt failed")

    believed = {leader_of[u] for u in range(n)}
    agreed = len(believed) == 1 and -1 not in believed
    rounds = 0
    if first_wake >= 0 and last_delivery >= 0:
        rounds = last_delivery - first_wake
    msg_counts = {MSG_NAMES[i]: c for i, c in enumerate(counts) if c}
    report = TrialReport(
        protocol="sync",
        n=n,
        trial=trial,
        seed=seed,
        adversary=adversary.label(),
        unique_ids=unique_ids,
        message_counts=msg_counts,
        total_remote_messages=delivered,
        elapsed_virtual_time=float(rounds),
        round_count=rounds,
        leader_ranks=sorted(x for x in believed if x >= 0),
        elected_count=elected,
        per_phase_candidate_counts=None,
        invariant_violations=violations,
        trace_hash=trace.hash_hex() if trace else None,
        outcome=classify_outcome(elected, agreed, budget_hit),
        max_phase_span=None,
        first_wake_time=None if first_wake < 0 else float(first_wake),
        events_processed=processed,
    )
    return report, (trace.lines if trace else None)
