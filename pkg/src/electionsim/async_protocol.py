"""Asynchronous leader election by phased candidacy and referee arbitration.

Every node woken spontaneously becomes a *candidate*: it draws a rank uniformly
from [1, n^4] and works through up to K phases.  In phase i < K it asks a
random sample of peers (its *referees* for that phase, plus itself via a local
request) for approval; in phase K it asks everyone.  A candidate that collects
only approvals advances; one that sees any decline retires.  A candidate that
completes phase K becomes Elected, broadcasts a LEADER announcement, and
terminates; everyone else terminates on receiving that announcement.  Nodes
woken by a message never become candidates — they serve only as referees.

Candidates are ordered by position: (phase, rank), with the node id appended
as a third component when unique ids are enabled.  A referee remembers one
*chosen* candidate (the last one it approved, identified by the edge it talks
to it over) and declines any request from a candidate behind its chosen.  A
request from a candidate ahead of the chosen opens a *dispute*: the referee
forwards the challenger's position to the chosen (DECIDE) and the chosen
compares it against its own current position (DECIDE_REPLY), retiring itself
if it has fallen behind.  While a dispute is in flight the referee keeps
exactly one *contender* — a stronger challenger displaces (and retires) the
current contender immediately.  Referee bookkeeping is a four-state machine:

    C0 — no candidate seen yet
    C1 — chosen held, no dispute pending
    C2 — dispute in flight about the current contender
    C3 — dispute in flight about a displaced, already-retired contender

A request arriving over the chosen's own edge is that candidate's next-phase
request: the referee refreshes its record and approves directly (the chosen
cannot be behind itself, and without a reply the candidate could never finish
the phase).
"""

from __future__ import annotations

from random import Random
from typing import Optional

from .adversary import AdversaryConfig, build_wake_entries, compile_delay, sample_targets
from .engine import (
    DEFAULT_EVENT_BUDGET,
    MSG_APPROVED,
    MSG_DECIDE,
    MSG_DECIDE_REPLY,
    MSG_DECLINED,
    MSG_LEADER,
    MSG_NAMES,
    MSG_REQUEST,
    TICKS_PER_UNIT,
    EventEngine,
    TraceBuffer,
    derive_seed,
)
from .phases import phase_count, referee_count
from .report import TrialReport, classify_outcome

# candidate states
CAND = 0
NON_ELECTED = 1
ELECTED = 2

# referee states
C0, C1, C2, C3 = 0, 1, 2, 3

#: Legal referee-state transitions; anything else in a run is a bug.
REFEREE_TRANSITIONS = frozenset(
    [(C0, C1), (C1, C1), (C1, C2), (C2, C1), (C2, C3), (C3, C1), (C3, C2), (C3, C3)]
)


def _pos_json(rank: int, phase: int, tb: int) -> str:
    if tb < 0:
        return f'{{"rank":{rank},"phase":{phase}}}'
    return f'{{"rank":{rank},"phase":{phase},"tb":{tb}}}'


def render_async_msg(msg: tuple) -> tuple[str, str]:
    """Canonical (msgType, msgFields-JSON) for one message; part of the trace
    format, so any change here changes every trace hash."""
    mt = msg[0]
    name = MSG_NAMES[mt]
    if mt == MSG_REQUEST:
        return name, _pos_json(msg[1], msg[2], msg[3])
    if mt == MSG_APPROVED or mt == MSG_DECLINED:
        return name, f'{{"rank":{msg[1]},"phase":{msg[2]}}}'
    if mt == MSG_DECIDE:
        return name, f'{{"contender":{_pos_json(msg[1], msg[2], msg[3])}}}'
    if mt == MSG_DECIDE_REPLY:
        wins = "true" if msg[4] else "false"
        return name, (
            f'{{"contender":{_pos_json(msg[1], msg[2], msg[3])},'
            f'"contenderWins":{wins},'
            f'"chosen":{_pos_json(msg[5], msg[6], msg[7])}}}'
        )
    if mt == MSG_LEADER:
        if msg[2] < 0:
            return name, f'{{"rank":{msg[1]}}}'
        return name, f'{{"rank":{msg[1]},"tb":{msg[2]}}}'
    raise ValueError(f"unexpected message type {mt}")


def run_async_trial(
    n: int,
    seed: int,
    adversary: AdversaryConfig,
    unique_ids: bool = False,
    trial: int = 0,
    budget: int = DEFAULT_EVENT_BUDGET,
    collect_trace: bool = False,
    hash_trace: bool = True,
) -> tuple[TrialReport, Optional[list[str]]]:
    """Run one seeded trial; returns the report and, if collected, the trace lines."""
    if n < 1:
        raise ValueError("network size must be positive")
    delay_code, eps_ticks = compile_delay(adversary.delay)
    adv_rng = Random(derive_seed(seed, "adv", adversary.seed))
    trace = TraceBuffer(collect_trace, hash_trace) if (collect_trace or hash_trace) else None
    eng = EventEngine(n, adv_rng, delay_code, eps_ticks, budget, trace)
    for tick, node in build_wake_entries(adversary.wake, n, adv_rng):
        eng.schedule_wake(node, tick)

    K = phase_count(n)
    n4 = n**4
    send = eng.send
    violations = eng.violations

    awake = [False] * n
    cstate = [NON_ELECTED] * n
    rank = [0] * n
    tb = list(range(n)) if unique_ids else [-1] * n
    phase = [0] * n
    pending = [0] * n
    declined = [False] * n
    phase_start = [0] * n
    span_open = [False] * n
    done = [False] * n
    leader_of = [-1] * n

    # referee side
    rstate = [C0] * n
    ch_via = [-1] * n
    ch_rank = [0] * n
    ch_phase = [0] * n
    ch_tb = [-1] * n
    co_via = [-1] * n
    co_rank = [0] * n
    co_phase = [0] * n
    co_tb = [-1] * n

    phase_entries = [0] * K
    elected = [0]  # boxed for closure assignment
    max_span = [0]
    node_rngs: dict[int, Random] = {}

    def _rng(u: int) -> Random:
        r = node_rngs.get(u)
        if r is None:
            r = node_rngs[u] = Random(derive_seed(seed, "node", u))
        return r

    def _close_span(u: int) -> None:
        if span_open[u]:
            span_open[u] = False
            d = eng.now - phase_start[u]
            if d > max_span[0]:
                max_span[0] = d

    def _set_rstate(r: int, new: int) -> None:
        if (rstate[r], new) not in REFEREE_TRANSITIONS:
            violations.append(f"referee {r}: illegal transition C{rstate[r]}->C{new}")
        rstate[r] = new

    def _start_phase(u: int) -> None:
        p = phase[u] + 1
        phase[u] = p
        phase_start[u] = eng.now
        span_open[u] = True
        phase_entries[p - 1] += 1
        k = referee_count(p, n)
        req = (MSG_REQUEST, rank[u], p, tb[u])
        if k:
            for t in sample_targets(_rng(u), n, u, k):
                send(u, t, req)
        pending[u] = k + 1
        declined[u] = False
        send(u, u, req)  # the candidate referees itself, locally

    def _become_leader(u: int) -> None:
        cstate[u] = ELECTED
        elected[0] += 1
        leader_of[u] = rank[u]
        done[u] = True
        msg = (MSG_LEADER, rank[u], tb[u])
        for v in range(n):
            if v != u:
                send(u, v, msg)

    def _phase_complete(u: int) -> None:
        _close_span(u)
        if declined[u]:
            cstate[u] = NON_ELECTED
        elif phase[u] < K:
            _start_phase(u)
        else:
            _become_leader(u)

    def on_wake(u: int) -> int:
        if awake[u]:
            return -1
        awake[u] = True
        cstate[u] = CAND
        r = _rng(u).randint(1, n4)
        rank[u] = r
        eng.note_rank(u, r)
        _start_phase(u)
        return r

    def _request(r: int, via: int, msg: tuple) -> None:
        _, u_rank, u_phase, u_tb = msg
        if rstate[r] == C0:
            ch_via[r] = via
            ch_rank[r], ch_phase[r], ch_tb[r] = u_rank, u_phase, u_tb
            send(r, via, (MSG_APPROVED, u_rank, u_phase))
            _set_rstate(r, C1)
            return
        if via == ch_via[r]:
            # Next-phase request from the current chosen: refresh and approve.
            if u_rank != ch_rank[r] or u_phase <= ch_phase[r]:
                violations.append(
                    f"referee {r}: chosen refresh from {via} went backwards "
                    f"({ch_rank[r]},{ch_phase[r]}) -> ({u_rank},{u_phase})"
                )
            ch_rank[r], ch_phase[r], ch_tb[r] = u_rank, u_phase, u_tb
            send(r, via, (MSG_APPROVED, u_rank, u_phase))
            return
        u_key = (u_phase, u_rank, u_tb)
        if rstate[r] == C1:
            if u_key < (ch_phase[r], ch_rank[r], ch_tb[r]):
                send(r, via, (MSG_DECLINED, u_rank, u_phase))
            else:
                co_via[r] = via
                co_rank[r], co_phase[r], co_tb[r] = u_rank, u_phase, u_tb
                send(r, ch_via[r], (MSG_DECIDE, u_rank, u_phase, u_tb))
                _set_rstate(r, C2)
            return
        # C2 or C3: measure the newcomer against the current contender.
        if u_key < (co_phase[r], co_rank[r], co_tb[r]):
            send(r, via, (MSG_DECLINED, u_rank, u_phase))
        else:
            send(r, co_via[r], (MSG_DECLINED, co_rank[r], co_phase[r]))
            co_via[r] = via
            co_rank[r], co_phase[r], co_tb[r] = u_rank, u_phase, u_tb
            _set_rstate(r, C3)

    def _reply(u: int, msg: tuple, is_decline: bool) -> None:
        _, e_rank, e_phase = msg
        if e_rank != rank[u] or e_phase != phase[u]:
            violations.append(
                f"candidate {u}: reply echoes ({e_rank},{e_phase}), "
                f"expected ({rank[u]},{phase[u]})"
            )
        if pending[u] <= 0:
            violations.append(f"candidate {u}: reply with no request outstanding")
            return
        pending[u] -= 1
        if is_decline:
            declined[u] = True
        if pending[u] == 0 and cstate[u] == CAND:
            _phase_complete(u)

    def _decide(v: int, via: int, msg: tuple) -> None:
        _, c_rank, c_phase, c_tb = msg
        if cstate[v] == CAND and (c_phase, c_rank, c_tb) > (phase[v], rank[v], tb[v]):
            cstate[v] = NON_ELECTED
            _close_span(v)
        c_wins = cstate[v] != CAND
        send(v, via, (MSG_DECIDE_REPLY, c_rank, c_phase, c_tb, c_wins, rank[v], phase[v], tb[v]))

    def _decide_reply(r: int, via: int, msg: tuple) -> None:
        _, c_rank, c_phase, c_tb, c_wins, v_rank, v_phase, v_tb = msg
        if rstate[r] != C2 and rstate[r] != C3:
            violations.append(f"referee {r}: dispute reply in state C{rstate[r]}")
            return
        if via != ch_via[r]:
            violations.append(f"referee {r}: dispute reply from {via}, not its chosen")
            return
        if rstate[r] == C2 and (c_rank != co_rank[r] or c_phase != co_phase[r]):
            violations.append(
                f"referee {r}: reply disputes ({c_rank},{c_phase}), "
                f"contender is ({co_rank[r]},{co_phase[r]})"
            )
        ch_rank[r], ch_phase[r], ch_tb[r] = v_rank, v_phase, v_tb
        if c_wins:
            send(r, co_via[r], (MSG_APPROVED, co_rank[r], co_phase[r]))
            ch_via[r] = co_via[r]
            ch_rank[r], ch_phase[r], ch_tb[r] = co_rank[r], co_phase[r], co_tb[r]
            co_via[r] = -1
            _set_rstate(r, C1)
        elif rstate[r] == C2 or (v_phase, v_rank, v_tb) > (co_phase[r], co_rank[r], co_tb[r]):
            send(r, co_via[r], (MSG_DECLINED, co_rank[r], co_phase[r]))
            co_via[r] = -1
            _set_rstate(r, C1)
        else:
            # The displaced contender outranks the refreshed chosen: new dispute.
            send(r, ch_via[r], (MSG_DECIDE, co_rank[r], co_phase[r], co_tb[r]))
            _set_rstate(r, C2)

    def _leader(u: int, msg: tuple) -> None:
        leader_of[u] = msg[1]
        if cstate[u] == CAND:
            _close_span(u)
        cstate[u] = NON_ELECTED
        done[u] = True

    def on_message(src: int, dst: int, msg: tuple) -> None:
        if done[dst]:
            return
        if not awake[dst]:
            awake[dst] = True  # woken by a message: referee only, never a candidate
        mt = msg[0]
        if mt == MSG_REQUEST:
            _request(dst, src, msg)
        elif mt == MSG_APPROVED:
            _reply(dst, msg, False)
        elif mt == MSG_DECLINED:
            _reply(dst, msg, True)
        elif mt == MSG_DECIDE:
            _decide(dst, src, msg)
        elif mt == MSG_DECIDE_REPLY:
            _decide_reply(dst, src, msg)
        elif mt == MSG_LEADER:
            _leader(dst, msg)
        else:
            violations.append(f"node {dst}: unknown message type {mt}")

    eng.run(on_wake, on_message, render_async_msg)

    if not eng.budget_hit:
        for u in range(n):
            if awake[u] and cstate[u] == CAND and pending[u] > 0:
                violations.append(f"candidate {u}: still waiting at quiescence")
    for u in range(n):
        if span_open[u]:  # only after a budget stop or a hang
            d = eng.last_time - phase_start[u]
            if d > max_span[0]:
                max_span[0] = d

    believed = {leader_of[u] for u in range(n)}
    agreed = len(believed) == 1 and -1 not in believed
    counts = {MSG_NAMES[i]: c for i, c in enumerate(eng.counts) if c}
    elapsed = 0.0 if eng.first_wake < 0 else (eng.last_time - eng.first_wake) / TICKS_PER_UNIT
    report = TrialReport(
        protocol="async",
        n=n,
        trial=trial,
        seed=seed,
        adversary=adversary.label(),
        unique_ids=unique_ids,
        message_counts=counts,
        total_remote_messages=eng.delivered,
        elapsed_virtual_time=elapsed,
        round_count=None,
        leader_ranks=sorted(r for r in believed if r >= 0),
        elected_count=elected[0],
        per_phase_candidate_counts={p + 1: c for p, c in enumerate(phase_entries)},
        invariant_violations=violations,
        trace_hash=trace.hash_hex() if trace else None,
        outcome=classify_outcome(elected[0], agreed, eng.budget_hit),
        max_phase_span=max_span[0] / TICKS_PER_UNIT,
        first_wake_time=None if eng.first_wake < 0 else eng.first_wake / TICKS_PER_UNIT,
        events_processed=eng.processed,
    )
    return report, (trace.lines if trace else None)
