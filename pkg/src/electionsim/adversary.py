"""Adversary model: wake-up schedules, delay policies, referee sampling.

The environment controls two things: which nodes wake spontaneously and when
(the wake schedule), and how long each message is in flight (the delay policy,
always within (0, 1] time units).  Both are chosen before the run from a named
spec with parameters; the delay policy `slow-high-rank` is additionally
adaptive — it watches the ranks candidates draw and slows down whichever node
currently holds the largest one.

Specs serialize to/from the `name:key=value,key=value` CLI syntax and to plain
JSON objects `{"name": ..., <params>}` for config files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .engine import DELAY_FIXED, DELAY_RANK, DELAY_UNIFORM, DELAY_UNIT, TICKS_PER_UNIT

WAKE_SCHEDULES = ("all-at-zero", "single", "staggered", "random-subset")
DELAY_POLICIES = ("unit", "uniform-random", "epsilon-rush", "slow-high-rank")

_DELAY_CODES = {
    "unit": DELAY_UNIT,
    "uniform-random": DELAY_UNIFORM,
    "epsilon-rush": DELAY_FIXED,
    "slow-high-rank": DELAY_RANK,
}

DEFAULT_EPSILON = 0.01


@dataclass(frozen=True)
class Spec:
    """A named scheme with numeric parameters (wake schedule or delay policy)."""

    name: str
    params: tuple[tuple[str, float], ...] = ()

    def param(self, key: str, default: float) -> float:
        for k, v in self.params:
            if k == key:
                return v
        return default

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={_fmt_num(v)}" for k, v in self.params)
        return f"{self.name}:{inner}"

    def to_json(self) -> dict:
        out: dict = {"name": self.name}
        for k, v in self.params:
            out[k] = v
        return out


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def parse_spec(text: str) -> Spec:
    """Parse `name` or `name:key=val,key=val` into a Spec."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if not name:
        raise ValueError(f"empty scheme name in {text!r}")
    params = []
    if rest:
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"malformed parameter {item!r} in {text!r}")
            params.append((key.strip(), float(val)))
    return Spec(name, tuple(params))


def spec_from_json(obj: dict) -> Spec:
    name = obj.get("name")
    if not isinstance(name, str):
        raise ValueError(f"scheme object needs a string 'name': {obj!r}")
    params = tuple((k, float(v)) for k, v in obj.items() if k != "name")
    return Spec(name, params)


@dataclass(frozen=True)
class AdversaryConfig:
    wake: Spec = Spec("all-at-zero")
    delay: Spec = Spec("unit")
    seed: int = 0

    def label(self) -> str:
        return f"{self.wake.label()}+{self.delay.label()}"

    def to_json(self) -> dict:
        return {"wake": self.wake.to_json(), "delay": self.delay.to_json(), "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "AdversaryConfig":
        wake = spec_from_json(obj["wake"]) if "wake" in obj else Spec("all-at-zero")
        delay = spec_from_json(obj["delay"]) if "delay" in obj else Spec("unit")
        return cls(wake=wake, delay=delay, seed=int(obj.get("seed", 0)))


# === wake schedules ==========================================================

def build_wake_entries(spec: Spec, n: int, rng: Random) -> list[tuple[int, int]]:
    """Materialize a wake schedule as (tick, node) pairs, in scheduling order.

    `rng` is the adversary's stream; only random-subset consumes it.  A node
    woken earlier by a message ignores its spontaneous wake-up, and a schedule
    may legitimately wake nobody (random-subset with an unlucky draw), in which
    case the trial ends immediately without a leader.
    """
    name = spec.name
    if name == "all-at-zero":
        return [(0, v) for v in range(n)]
    if name == "single":
        return [(0, 0)]
    if name == "staggered":
        k = int(spec.param("k", min(8, n)))
        gap = spec.param("gap", 0.5)
        if not 0 < k <= n:
            raise ValueError(f"staggered k={k} out of range for n={n}")
        if gap < 0:
            raise ValueError("staggered gap must be non-negative")
        return [(round(i * gap * TICKS_PER_UNIT), i) for i in range(k)]
    if name == "random-subset":
        p = spec.param("p", 0.5)
        if not 0 <= p <= 1:
            raise ValueError(f"random-subset p={p} out of range")
        return [(0, v) for v in range(n) if rng.random() < p]
    raise ValueError(f"unknown wake schedule {name!r}")


# === delay policies ==========================================================

def compile_delay(spec: Spec) -> tuple[int, int]:
    """Reduce a delay spec to the engine's (code, epsilon_ticks) form."""
    code = _DELAY_CODES.get(spec.name)
    if code is None:
        raise ValueError(f"unknown delay policy {spec.name!r}")
    eps = spec.param("eps", DEFAULT_EPSILON)
    if not 0 < eps <= 1:
        raise ValueError(f"delay epsilon {eps} outside (0, 1]")
    eps_ticks = max(1, round(eps * TICKS_PER_UNIT))
    return code, eps_ticks


# === referee sampling ========================================================

def sample_targets(rng: Random, n: int, self_id: int, k: int) -> list[int]:
    """Choose k distinct peers of self_id uniformly from the other n-1 nodes.

    Sampling is from the candidate's private stream, so two candidates' picks
    are independent and a rerun with the same seed repeats them exactly.
    """
    if k > n - 1:
        raise ValueError(f"cannot sample {k} of {n - 1} peers")
    picked = rng.sample(range(n - 1), k)
    return [v if v < self_id else v + 1 for v in picked]
