"""Closed-form schedule math shared by both election protocols.

All logarithms are base 2.  ``phase_count`` (K) is the number of candidacy
phases in the asynchronous protocol; a candidate in phase i < K polls
``referee_count(i, n)`` randomly chosen peers and in phase K polls everyone.
``attrition_cutoff`` (rho) is the largest phase index for which the
quarter-per-phase candidate attrition bound is guaranteed; at the network
sizes this package targets it is 0 or 1, i.e. the bound only has bite
asymptotically.

The synchronous protocol has a fixed three-attempt activation schedule
(offsets 0, +3, +6 rounds; success probabilities n^-2/3, n^-1/3, 1) and a
single referee-pool size per network.
"""

from __future__ import annotations

import math

#: Round offsets, relative to a node's wake-up round, of its activation attempts.
SYNC_ATTEMPT_OFFSETS: tuple[int, int, int] = (0, 3, 6)


def referee_cap(n: int) -> int:
    """Upper bound ceil(sqrt(4 n log2 n)) on the per-phase referee pool."""
    if n < 2:
        raise ValueError("referee cap undefined below n=2")
    return math.ceil(math.sqrt(4 * n * math.log2(n)))


def phase_count(n: int) -> int:
    """Number of phases K a candidate must complete to declare itself leader.

    K = ceil(log2 sqrt(4 n log2 n)) + 1, clamped to 1 at n=1 where the
    expression is undefined (a lone node approves itself and wins at once).
    """
    if n < 1:
        raise ValueError("network size must be positive")
    if n == 1:
        return 1
    return math.ceil(math.log2(math.sqrt(4 * n * math.log2(n)))) + 1


def referee_count(phase: int, n: int) -> int:
    """Number of remote referees a candidate samples in the given phase.

    Doubles as min{10 * 2^phase, referee_cap(n)} until the final phase, where
    every other node is polled.  Always clamped to the n-1 available peers.
    The candidate additionally serves as its own referee via a local,
    zero-delay request that is not part of this count.
    """
    if phase < 1:
        raise ValueError("phases are numbered from 1")
    if n == 1:
        return 0
    if phase >= phase_count(n):
        return n - 1
    return min(10 * 2**phase, referee_cap(n), n - 1)


def attrition_cutoff(n: int) -> int:
    """Largest phase index rho = K - ceil(log2 log2 n) - 5 covered by the
    attrition guarantee, clamped to 0 when the formula goes negative."""
    if n < 3:
        return 0
    return max(0, phase_count(n) - math.ceil(math.log2(math.log2(n))) - 5)


def attrition_bound(phase: int, n: int) -> int:
    """Upper bound ceil(n / 4^(phase-1)) on candidates participating in a phase."""
    if phase < 1:
        raise ValueError("phases are numbered from 1")
    return math.ceil(n / 4 ** (phase - 1))


def sync_referee_count(n: int) -> int:
    """Referee-pool size ceil(2 sqrt(n) log2 n) of the synchronous protocol,
    clamped to the n-1 available peers (the candidate also polls itself
    locally, outside this count)."""
    if n < 2:
        return 0
    return min(n - 1, math.ceil(2 * math.sqrt(n) * math.log2(n)))


def sync_attempt_probabilities(n: int) -> tuple[float, float, float]:
    """Success probabilities of the three activation attempts: n^-2/3, n^-1/3, 1."""
    if n < 1:
        raise ValueError("network size must be positive")
    return (n ** (-2.0 / 3.0), n ** (-1.0 / 3.0), 1.0)
