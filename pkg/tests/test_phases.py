"""Frozen expected values for the phase/referee schedule math.

The tables below were computed by hand from the closed-form definitions
(K = ceil(log2 sqrt(4 n log2 n)) + 1, referee count min{10*2^i, ceil(sqrt(4 n log2 n))}
clamped to n-1, attrition cutoff rho = K - ceil(log2 log2 n) - 5) and cross-checked
with a direct one-off evaluation before being frozen here.  If an implementation
change breaks one of these, the implementation is wrong, not the table.
"""

from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from electionsim import phases


# === phase count K ===========================================================

K_TABLE = {
    1: 1,  # formula undefined at n=1 (log of 0); clamped so a lone node elects itself
    2: 3,
    4: 4,
    8: 5,
    16: 5,
    64: 7,
    256: 8,
    729: 9,
    1024: 9,
    4096: 10,
}


@pytest.mark.parametrize("n,expected", sorted(K_TABLE.items()))
def test_phase_count_frozen(n, expected):
    assert phases.phase_count(n) == expected


# === referee cap and per-phase referee counts ================================

REFCAP_TABLE = {2: 3, 4: 6, 8: 10, 16: 16, 64: 40, 256: 91, 729: 167, 1024: 203, 4096: 444}


@pytest.mark.parametrize("n,expected", sorted(REFCAP_TABLE.items()))
def test_referee_cap_frozen(n, expected):
    assert phases.referee_cap(n) == expected


def test_referee_counts_n1024():
    # 10*2^i doubling until the sqrt cap bites at phase 5, final phase polls everyone
    assert [phases.referee_count(i, 1024) for i in range(1, 10)] == [
        20, 40, 80, 160, 203, 203, 203, 203, 1023,
    ]


def test_referee_counts_n16():
    # min{20, 16} = 16 exceeds n-1, so every phase is clamped to all 15 peers
    assert [phases.referee_count(i, 16) for i in range(1, 6)] == [15] * 5


def test_referee_counts_n64():
    assert [phases.referee_count(i, 64) for i in range(1, 8)] == [20, 40, 40, 40, 40, 40, 63]


def test_referee_counts_n4096():
    assert [phases.referee_count(i, 4096) for i in range(1, 11)] == [
        20, 40, 80, 160, 320, 444, 444, 444, 444, 4095,
    ]


def test_final_phase_polls_everyone():
    for n in (2, 16, 64, 256, 1024):
        assert phases.referee_count(phases.phase_count(n), n) == n - 1


# === attrition cutoff rho ====================================================

def test_rho_desk_scale():
    # rho <= 0 at every desk-scale n: the attrition guarantee only bites
    # asymptotically.  4096 is the first size where even the trivial phase-1
    # bound is in range.
    assert phases.attrition_cutoff(256) == 0
    assert phases.attrition_cutoff(1024) == 0
    assert phases.attrition_cutoff(4096) == 1
    assert phases.attrition_cutoff(64) == 0


def test_attrition_bound():
    assert phases.attrition_bound(1, 1024) == 1024
    assert phases.attrition_bound(2, 1024) == 256
    assert phases.attrition_bound(3, 1024) == 64
    assert phases.attrition_bound(4, 100) == math.ceil(100 / 64)


# === sync schedule ===========================================================

def test_sync_referee_counts_frozen():
    assert phases.sync_referee_count(1024) == 640
    assert phases.sync_referee_count(4) == 3      # ceil(2*2*2)=8 clamped to n-1
    assert phases.sync_referee_count(64) == 63    # 96 clamped
    assert phases.sync_referee_count(729) == 514
    assert phases.sync_referee_count(4096) == 1536
    assert phases.sync_referee_count(1) == 0


def test_sync_attempt_probabilities():
    # perfect cube makes the first two attempts exact
    p1, p2, p3 = phases.sync_attempt_probabilities(729)
    assert p1 == pytest.approx(1 / 81)
    assert p2 == pytest.approx(1 / 9)
    assert p3 == 1.0
    p1, p2, p3 = phases.sync_attempt_probabilities(64)
    assert p1 == pytest.approx(1 / 16)
    assert p2 == pytest.approx(1 / 4)
    assert p3 == 1.0


def test_sync_attempt_offsets():
    assert phases.SYNC_ATTEMPT_OFFSETS == (0, 3, 6)


# === structural properties ===================================================

@given(st.integers(min_value=2, max_value=200_000))
def test_referee_count_monotone_and_clamped(n):
    k = phases.phase_count(n)
    counts = [phases.referee_count(i, n) for i in range(1, k + 1)]
    assert all(1 <= c <= n - 1 for c in counts)
    # non-decreasing through the schedule, everyone polled at the end
    assert counts == sorted(counts)
    assert counts[-1] == n - 1


@given(st.integers(min_value=2, max_value=200_000))
def test_phase_count_covers_cap(n):
    # by construction 10*2^(K-1) is at least the sqrt cap: the doubling
    # schedule reaches the cap before the final everyone-phase
    k = phases.phase_count(n)
    assert 10 * 2 ** (k - 1) >= phases.referee_cap(n)


@given(st.integers(min_value=3, max_value=200_000))
def test_rho_below_phase_count(n):
    assert 0 <= phases.attrition_cutoff(n) < phases.phase_count(n)
