"""Discrete-event core: virtual clock, FIFO channels, seeded streams, tracing.

Virtual time is integer ticks at 1e6 ticks per time unit, so every delay and
delivery instant is exact and runs are bit-reproducible across platforms.  The
event queue is a binary heap of tuples ordered by (tick, sequence number);
sequence numbers are assigned at scheduling time, which makes queue order total
and makes same-instant deliveries on a channel follow send order.

Channels are FIFO with per-message adversarial delay in (0, 1] time units: a
message sent at `now` with delay d is delivered at max(now + d, t_prev) where
t_prev is the channel's previous delivery tick.  t_prev never exceeds an
earlier send time plus one unit, so the clamp preserves the delay bound.
Self-addressed messages bypass the channel entirely: they are delivered at the
current tick (after the running handler returns) and are not counted as
messages.

Tracing, when enabled, records one canonical JSON line per processed event and
folds the lines through 64-bit FNV-1a; the hash is the trial's fingerprint for
reproducibility checks.
"""

from __future__ import annotations

import heapq
from hashlib import blake2b
from random import Random
from typing import Callable, Optional

TICKS_PER_UNIT = 1_000_000
DEFAULT_EVENT_BUDGET = 10**9

# --- message type codes (shared by both protocols and the trace format) ------
MSG_REQUEST = 0
MSG_APPROVED = 1
MSG_DECLINED = 2
MSG_DECIDE = 3
MSG_DECIDE_REPLY = 4
MSG_LEADER = 5
MSG_SYNC_REQUEST = 6
MSG_SYNC_REPLY = 7
MSG_WINNER = 8

MSG_NAMES = (
    "REQUEST", "APPROVED", "DECLINED", "DECIDE", "DECIDE_REPLY", "LEADER",
    "SYNC_REQUEST", "SYNC_REPLY", "WINNER",
)

# --- delay policy codes (compiled from adversary configs) --------------------
DELAY_UNIT = 0        # always exactly one time unit
DELAY_UNIFORM = 1     # uniform over (0, 1], tick-quantized
DELAY_FIXED = 2       # fixed epsilon
DELAY_RANK = 3        # one unit from the highest-ranked known candidate, epsilon otherwise

# event kinds (internal)
_WAKE = 0
_DELIVER = 1
_LOCAL = 2

# --- FNV-1a, 64 bit ----------------------------------------------------------
FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, h: int = FNV64_OFFSET) -> int:
    """Fold `data` into a running 64-bit FNV-1a hash."""
    prime = _FNV64_PRIME
    for b in data:
        h = ((h ^ b) * prime) & _MASK64
    return h


def derive_seed(*parts) -> int:
    """Stable 64-bit substream seed from a tuple of labels and integers.

    Keyed hashing keeps node streams, adversary streams, and per-trial seeds
    statistically unrelated even for adjacent inputs.
    """
    h = blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("ascii"))
        h.update(b"|")
    return int.from_bytes(h.digest(), "big")


class TraceBuffer:
    """Canonical trace line sink: optional line retention plus running hash."""

    __slots__ = ("lines", "hash", "hashing")

    def __init__(self, collect: bool, hashing: bool):
        self.lines: Optional[list[str]] = [] if collect else None
        self.hashing = hashing
        self.hash = FNV64_OFFSET

    @property
    def active(self) -> bool:
        return self.hashing or self.lines is not None

    def emit(self, line: str) -> None:
        if self.hashing:
            self.hash = fnv1a64(line.encode("ascii") + b"\n", self.hash)
        if self.lines is not None:
            self.lines.append(line)

    def hash_hex(self) -> Optional[str]:
        return f"{self.hash:016x}" if self.hashing else None


class EventEngine:
    """Single-trial event queue with adversarial delays and FIFO channels.

    The protocol driver supplies two callbacks to :meth:`run`:

    * ``on_wake(node) -> int`` — handle a spontaneous wake-up; return the rank
      drawn for the new candidate, or -1 if the node was already awake and the
      wake-up is to be ignored.
    * ``on_message(src, dst, msg) -> None`` — handle a delivery; ``msg`` is an
      opaque tuple whose first element is the message type code.
    """

    __slots__ = (
        "n", "now", "counts", "delivered", "processed", "first_wake",
        "last_time", "budget", "budget_hit", "violations", "trace",
        "_heap", "_seq", "_chan", "_fifo_seen", "_delay_code", "_delay_ticks",
        "_adv_random", "hi_rank", "hi_rank_node",
    )

    def __init__(
        self,
        n: int,
        adv_rng: Random,
        delay_code: int = DELAY_UNIT,
        delay_ticks: int = TICKS_PER_UNIT,
        budget: int = DEFAULT_EVENT_BUDGET,
        trace: Optional[TraceBuffer] = None,
    ):
        if not 1 <= delay_ticks <= TICKS_PER_UNIT:
            raise ValueError("fixed delay must lie in (0, 1] time units")
        self.n = n
        self.now = 0
        self.counts = [0] * len(MSG_NAMES)
        self.delivered = 0
        self.processed = 0
        self.first_wake = -1
        self.last_time = 0
        self.budget = budget
        self.budget_hit = False
        self.violations: list[str] = []
        self.trace = trace
        self._heap: list[tuple] = []
        self._seq = 0
        self._chan: dict[int, int] = {}
        self._fifo_seen: dict[int, int] = {}
        self._delay_code = delay_code
        self._delay_ticks = delay_ticks
        self._adv_random = adv_rng.random
        self.hi_rank = 0
        self.hi_rank_node = -1

    # --- scheduling ----------------------------------------------------------

    def schedule_wake(self, node: int, ticks: int) -> None:
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (ticks, seq, _WAKE, node, node, None))

    def note_rank(self, node: int, rank: int) -> None:
        """Expose a drawn rank to the adaptive delay policy."""
        if rank > self.hi_rank:
            self.hi_rank = rank
            self.hi_rank_node = node

    def send(self, src: int, dst: int, msg: tuple) -> None:
        """Queue a message; self-addressed messages take the local path."""
        seq = self._seq
        self._seq = seq + 1
        if src == dst:
            heapq.heappush(self._heap, (self.now, seq, _LOCAL, src, dst, msg))
            return
        code = self._delay_code
        if code == DELAY_UNIT:
            d = TICKS_PER_UNIT
        elif code == DELAY_UNIFORM:
            d = int(self._adv_random() * TICKS_PER_UNIT) + 1
        elif code == DELAY_FIXED:
            d = self._delay_ticks
        else:  # DELAY_RANK
            d = TICKS_PER_UNIT if src == self.hi_rank_node else self._delay_ticks
        t = self.now + d
        key = src * self.n + dst
        chan = self._chan
        prev = chan.get(key, 0)
        if prev > t:
            t = prev
        chan[key] = t
        heapq.heappush(self._heap, (t, seq, _DELIVER, src, dst, msg))

    send_local = send  # explicit alias for intent at call sites

    # --- main loop -----------------------------------------------------------

    def run(
        self,
        on_wake: Callable[[int], int],
        on_message: Callable[[int, int, tuple], None],
        render_msg: Optional[Callable[[tuple], tuple[str, str]]] = None,
    ) -> None:
        heap = self._heap
        pop = heapq.heappop
        counts = self.counts
        fifo_seen = self._fifo_seen
        n = self.n
        budget = self.budget
        trace = self.trace
        tracing = trace is not None and trace.active
        if tracing and render_msg is None:
            raise ValueError("tracing requires a message renderer")
        emit = trace.emit if tracing else None
        processed = self.processed
        while heap:
            if processed >= budget:
                self.budget_hit = True
                break
            processed += 1
            t, seq, kind, src, dst, msg = pop(heap)
            self.now = t
            self.last_time = t
            if kind == _DELIVER:
                key = src * n + dst
                prev = fifo_seen.get(key, -1)
                if t < prev:
                    self.violations.append(
                        f"fifo: edge {src}->{dst} delivered tick {t} after tick {prev}"
                    )
                else:
                    fifo_seen[key] = t
                self.delivered += 1
                counts[msg[0]] += 1
                on_message(src, dst, msg)
                if tracing:
                    name, fields = render_msg(msg)
                    emit(
                        f'{{"t":{t},"seq":{seq},"kind":"deliver","from":{src},'
                        f'"to":{dst},"msgType":"{name}","msgFields":{fields}}}'
                    )
            elif kind == _LOCAL:
                on_message(src, dst, msg)
                if tracing:
                    name, fields = render_msg(msg)
                    emit(
                        f'{{"t":{t},"seq":{seq},"kind":"local","from":{src},'
                        f'"to":{dst},"msgType":"{name}","msgFields":{fields}}}'
                    )
            else:  # _WAKE
                rank = on_wake(dst)
                if rank >= 0:
                    if self.first_wake < 0:
                        self.first_wake = t
                    if tracing:
                        emit(
                            f'{{"t":{t},"seq":{seq},"kind":"wake","from":null,'
                            f'"to":{dst},"msgType":null,"msgFields":'
                            f'{{"cause":"spontaneous","rank":{rank}}}}}'
                        )
        self.processed = processed
