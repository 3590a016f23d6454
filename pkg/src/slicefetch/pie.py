"""PIE (prefetch injection entry) array: lifecycle state machine, feedback
counters, reset bookkeeping, and the disable policy.

Lifecycle:

    Active --qualified_hot_flaky--> Gen --walk_done--> Validate
    Validate --pass (until rounds)--> Trim --trim_done--> Armed
    Gen/Validate/Trim/Armed --fail(cause)--> reset -> Active (or Disabled
    once the entry has been reset more than `stale_reset_cap` times)

Armed and Disabled entries are protected from index-collision overwrite;
entries still under construction are dropped by a colliding key (a
hash_collision reset). Disabled entries may be overwritten by a different
key only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .context import ContextKey, FlakinessRecord


class PieState(Enum):
    ACTIVE = "Active"
    GEN = "Gen"
    VALIDATE = "Validate"
    TRIM = "Trim"
    ARMED = "Armed"
    DISABLED = "Disabled"


class ResetCause(Enum):
    INCONSISTENT = "inconsistent"
    TIMEOUT = "timeout"
    TOO_LONG = "too_long"
    COMPLEX_INSTRUCTION = "complex_instruction"
    TOO_MANY_TEMPS = "too_many_temps"
    HASH_COLLISION = "hash_collision"
    LOW_USEFULNESS = "low_usefulness"
    REPEAT_ADDRESS = "repeat_address"


# the four reported breakdown categories
CAUSE_CATEGORY = {
    ResetCause.HASH_COLLISION: "hash_collision",
    ResetCause.INCONSISTENT: "code_flow_variance",
    ResetCause.TOO_LONG: "code_flow_variance",
    ResetCause.COMPLEX_INSTRUCTION: "code_flow_variance",
    ResetCause.TOO_MANY_TEMPS: "code_flow_variance",
    ResetCause.TIMEOUT: "timeout",
    ResetCause.LOW_USEFULNESS: "too_many_failures",
    ResetCause.REPEAT_ADDRESS: "too_many_failures",
}

COUNTER_CAP = 64
LOOKAHEAD_MAX = 64


@dataclass
class PIE:
    key: ContextKey
    state: PieState = PieState.ACTIVE
    flakiness: FlakinessRecord = field(default_factory=FlakinessRecord)
    draft: Optional[object] = None            # slicing.SliceDraft while building
    slice_ops: Optional[list] = None          # final ops once armed
    annotations: Optional[list] = None
    draft_kinds: Optional[list[str]] = None   # generation-phase op kinds, for inspection
    lookahead: int = 1
    adaptive_lookahead: bool = True
    sent: int = 0
    useless: int = 0
    sent_events: int = 0
    shifted: bool = False
    resets: int = 0
    validations_passed: int = 0
    last_addr: Optional[int] = None
    repeat_count: int = 0
    hit_depth_ewma: Optional[float] = None
    hits_since_eval: int = 0
    reward_total: int = 0
    generation: int = 0
    encounters: int = 0
    armed_at_encounter: Optional[int] = None
    gen_start_cycle: Optional[int] = None

    def usefulness_steady(self) -> bool:
        return self.shifted or self.sent_events >= 32


class PieArray:
    def __init__(self, entries: int = 16, stale_reset_cap: int = 25):
        self.entries: list[Optional[PIE]] = [None] * entries
        self.stale_reset_cap = stale_reset_cap
        self.reset_causes: dict[str, int] = {
            "hash_collision": 0, "code_flow_variance": 0, "timeout": 0, "too_many_failures": 0
        }
        self.validation_failures = 0
        self.denied_allocations = 0
        self.starved_keys: set[tuple] = set()

    def lookup(self, key: ContextKey) -> Optional[PIE]:
        pie = self.entries[key.index % len(self.entries)]
        if pie is not None and pie.key.tag == key.tag:
            return pie
        return None

    def allocate(self, key: ContextKey) -> Optional[PIE]:
        """Allocate a fresh Active entry for `key`, applying the victim policy.
        Returns None when the slot is protected (armed, or disabled same-key)."""
        slot = key.index % len(self.entries)
        victim = self.entries[slot]
        if victim is not None:
            if victim.key.tag == key.tag:
                # same context: never reallocate over itself; Disabled stays dead
                return None
            if victim.state == PieState.ARMED:
                self.denied_allocations += 1
                self.starved_keys.add(key.tag)
                return None
            if victim.state != PieState.DISABLED:
                reset(victim, ResetCause.HASH_COLLISION, self)
        pie = PIE(key=key)
        self.entries[slot] = pie
        self.starved_keys.discard(key.tag)
        return pie

    def all_pies(self) -> list[PIE]:
        return [p for p in self.entries if p is not None]


_LEGAL = {
    (PieState.ACTIVE, "qualified_hot_flaky"): PieState.GEN,
    (PieState.GEN, "walk_done"): PieState.VALIDATE,
    (PieState.VALIDATE, "pass"): None,        # Validate until rounds complete, then Trim
    (PieState.TRIM, "trim_done"): PieState.ARMED,
}


def lifecycle_event(pie: PIE, event: str, rounds: int = 3) -> PieState:
    """Advance the PIE state machine; `fail` is handled by reset()."""
    if event == "fail":
        raise AssertionError("use reset() for failures")
    nxt = _LEGAL.get((pie.state, event), "illegal")
    if nxt == "illegal":
        raise AssertionError(f"illegal transition {pie.state} + {event}")
    if event == "pass":
        pie.validations_passed += 1
        pie.state = PieState.TRIM if pie.validations_passed >= rounds else PieState.VALIDATE
    else:
        pie.state = nxt
    return pie.state


def reset(pie: PIE, cause: ResetCause, array: Optional[PieArray] = None) -> None:
    """Discard the slice and counters; too many resets disable the entry."""
    pie.draft = None
    pie.slice_ops = None
    pie.annotations = None
    pie.sent = 0
    pie.useless = 0
    pie.sent_events = 0
    pie.shifted = False
    pie.validations_passed = 0
    pie.last_addr = None
    pie.repeat_count = 0
    pie.hit_depth_ewma = None
    pie.hits_since_eval = 0
    pie.gen_start_cycle = None
    pie.flakiness = FlakinessRecord(window_start=pie.flakiness.window_start)
    pie.generation += 1
    pie.resets += 1
    pie.state = PieState.DISABLED if pie.resets > (array.stale_reset_cap if array else 25) else PieState.ACTIVE
    if array is not None:
        array.reset_causes[CAUSE_CATEGORY[cause]] += 1
        if cause == ResetCause.INCONSISTENT:
            array.validation_failures += 1


def record_feedback(pie: PIE, outcome: str, usefulness_threshold: float = 0.10,
                    array: Optional[PieArray] = None) -> bool:
    """Apply a sent/useless/hit outcome to the counters. Returns True when the
    entry was reset for low usefulness."""
    if outcome == "sent":
        if pie.sent >= COUNTER_CAP:
            pie.sent >>= 1
            pie.useless >>= 1
            pie.shifted = True
        else:
            pie.sent += 1
        pie.sent_events += 1
    elif outcome == "useless":
        if pie.useless >= COUNTER_CAP:
            pie.sent >>= 1
            pie.useless >>= 1
            pie.shifted = True
        else:
            pie.useless = min(pie.useless + 1, pie.sent)
    else:
        raise AssertionError(outcome)
    if (
        pie.usefulness_steady()
        and pie.sent > 0
        and pie.useless / pie.sent > 1.0 - usefulness_threshold
    ):
        reset(pie, ResetCause.LOW_USEFULNESS, array)
        return True
    return False


def repeat_address_check(pie: PIE, addr: int, limit: int = 4,
                         array: Optional[PieArray] = None) -> str:
    """Track consecutive identical prefetch addresses; reset at the limit."""
    if pie.last_addr is not None and addr == pie.last_addr:
        pie.repeat_count += 1
    else:
        pie.repeat_count = 1
    pie.last_addr = addr
    if pie.repeat_count >= limit:
        reset(pie, ResetCause.REPEAT_ADDRESS, array)
        return "reset"
    return "ok"


def timeout_sweep(array: PieArray, now: int, timeout: int = 100_000) -> int:
    """Reset construction-phase entries that have not armed within `timeout`
    cycles of entering Gen. Active and Armed entries are exempt."""
    resets = 0
    for pie in array.entries:
        if pie is None or pie.gen_start_cycle is None:
            continue
        if pie.state in (PieState.GEN, PieState.VALIDATE, PieState.TRIM):
            if now - pie.gen_start_cycle > timeout:
                reset(pie, ResetCause.TIMEOUT, array)
                resets += 1
    return resets
