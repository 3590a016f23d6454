"""Experiment runner: wires the executor, cache hierarchy, and the selected
prefetcher; runs warmup + measured phases; builds the stats report.

The slice prefetcher operates strictly at retirement: every retired op is
pushed to the history ring; on a load, an armed context injects its forecast
slice immediately before the demand access, then the demand result feeds the
prefetch queue, the flakiness detector, and the walker state machines.
Program-visible execution is identical with the prefetcher on or off; only
timing and cache state differ.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional

from . import feedback as fb
from . import pie as pie_mod
from .baselines import NextLinePrefetcher, StridePrefetcher
from .config import RunConfig, SemanticConfig, to_flat_dict
from .context import ADVANCE_TO_GEN, ContextKey, context_of, observe_load, update_bhr
from .history import HistoryEntry, HistoryQueue
from .injector import execute_slice, try_trigger
from .isa import ArchState, Memory, OpKind, step
from .memsys import DEMAND_LOAD, DEMAND_STORE, PREFETCH, CacheHierarchy, line_of, mpki
from .pie import PIE, PieArray, PieState, ResetCause, lifecycle_event, reset
from .slicing import (
    AbortCause,
    SliceAbort,
    WalkerPool,
    check_slice,
    classify_values,
    format_slice_op,
    trim,
    validate_pass,
    walk_generate,
)
from .workloads import Oracle, generate

_ABORT_TO_RESET = {
    AbortCause.TOO_LONG: ResetCause.TOO_LONG,
    AbortCause.TOO_MANY_TEMPS: ResetCause.TOO_MANY_TEMPS,
    AbortCause.COMPLEX_INSTRUCTION: ResetCause.COMPLEX_INSTRUCTION,
    AbortCause.INCONSISTENT: ResetCause.INCONSISTENT,
}


@dataclass(slots=True)
class Injection:
    addr: int
    lookahead: int
    cost: int


class NoPrefetcher:
    name = "none"

    def record(self, ev) -> None: ...
    def on_branch(self, ev) -> None: ...
    def before_load(self, ev, state, now) -> Optional[Injection]:
        return None
    def after_load(self, ev, res, state, now) -> None: ...
    def reset_stats(self) -> None: ...


class BaselineAdapter(NoPrefetcher):
    """Shares the prefetch-queue plumbing so coverage and accuracy are
    measured the same way as for the slice prefetcher."""

    def __init__(self, name: str, impl, memsys: CacheHierarchy, queue_capacity: int):
        self.name = name
        self.impl = impl
        self.memsys = memsys
        self.queue = fb.PrefetchQueue(queue_capacity)

    def after_load(self, ev, res, state, now) -> None:
        addr = ev.eff_addr
        self.queue.match_demand(line_of(addr))
        if self.name == "nextline":
            issued = self.impl.on_demand(addr, res.hit_level != "L1")
        else:
            issued = self.impl.observe_and_issue(ev.op.ip, addr)
        for target in issued:
            self.memsys.access(target, PREFETCH, now)
            self.queue.enqueue(line_of(target), None, ev.op.ip, now)

    def reset_stats(self) -> None:
        self.queue.reset_stats()


class SemanticPrefetcher(NoPrefetcher):
    name = "semantic"

    def __init__(self, cfg: SemanticConfig, memsys: CacheHierarchy):
        self.cfg = cfg
        self.memsys = memsys
        self.bhr = 0
        self.context_mask = (1 << cfg.context_bits) - 1 if cfg.context_bits else 0
        self.history = HistoryQueue(cfg.history_capacity)
        self.pies = PieArray(cfg.pie_entries, cfg.stale_reset_cap)
        self.walkers = WalkerPool(cfg.walkers)
        self.queue = fb.PrefetchQueue(cfg.queue_capacity)
        self.injections = 0
        self.injected_ops = 0
        self.adapt_log: list[tuple[int, int, float, int]] = []  # (ip, encounters, ewma, L)
        self._entry: Optional[HistoryEntry] = None
        self._key: Optional[ContextKey] = None

    # -- retirement hooks ---------------------------------------------------

    def record(self, ev) -> None:
        entry = self.history.push(ev, self.bhr)
        if ev.op.kind == OpKind.LOAD:
            self._entry = entry
            self._key = context_of(ev.op.ip, self.bhr, self.cfg.context_bits,
                                   self.cfg.index_bits)

    def on_branch(self, ev) -> None:
        self.bhr = update_bhr(self.bhr, ev.op.ip, ev.taken)

    def before_load(self, ev, state, now) -> Optional[Injection]:
        pie = try_trigger(self._key, self.pies)
        if pie is None:
            return None
        result = execute_slice(pie.slice_ops, state, pie.lookahead, self.memsys,
                               now, self.cfg.injection_mode)
        self.injections += 1
        self.injected_ops += result.ops_executed
        lookahead = pie.lookahead
        pie_mod.record_feedback(pie, "sent", self.cfg.usefulness_threshold, self.pies)
        for old in self.queue.enqueue(line_of(result.prefetch_addr), pie, ev.op.ip, now):
            self._useless(old)
        if pie.state == PieState.ARMED:
            pie_mod.repeat_address_check(pie, result.prefetch_addr,
                                         self.cfg.repeat_limit, self.pies)
        return Injection(addr=result.prefetch_addr, lookahead=lookahead,
                         cost=result.cost_cycles)

    def after_load(self, ev, res, state, now) -> None:
        entry, key = self._entry, self._key
        m = self.queue.match_demand(line_of(ev.eff_addr))
        if m is not None:
            rec, depth = m
            pie = rec.pie
            if pie is not None and rec.pie_generation == pie.generation:
                pie.reward_total += fb.reward(depth, self.queue.capacity,
                                              self.cfg.band_low_frac, self.cfg.band_high_frac)
                fb.observe_hit(pie, depth, self.cfg.ewma_alpha)
                if pie.hits_since_eval >= self.cfg.adapt_period:
                    pie.hits_since_eval = 0
                    if pie.adaptive_lookahead:
                        fb.adapt_lookahead(pie, self.queue.capacity,
                                           self.cfg.band_low_frac, self.cfg.band_high_frac)
                    self.adapt_log.append((pie.key.ip, pie.encounters,
                                           round(pie.hit_depth_ewma, 3), pie.lookahead))

        missed = res.hit_level != "L1"
        decision = observe_load(self.pies, key, missed, ev.retire_index,
                                self.cfg.hot_threshold, self.cfg.flaky_threshold,
                                self.cfg.hotness_window)
        if decision == ADVANCE_TO_GEN:
            pie = self.pies.lookup(key)
            lifecycle_event(pie, "qualified_hot_flaky")
            pie.gen_start_cycle = now
            self._generation_walk(pie, entry, key, now)
            return
        pie = self.pies.lookup(key)
        if pie is None:
            return
        if pie.state == PieState.GEN:
            self._generation_walk(pie, entry, key, now)
        elif pie.state == PieState.VALIDATE:
            self._validation_walk(pie, entry, key, now)

    # -- walker work --------------------------------------------------------

    def _walk(self, entry: HistoryEntry, key: ContextKey, now: int):
        walker = self.walkers.acquire(now)
        if walker is None:
            return None, None
        try:
            draft = walk_generate(self.history, entry, key.bhr, self.context_mask,
                                  unroll=self.cfg.loop_unroll)
        except SliceAbort as abort:
            self.walkers.commit(walker, now, abort.scanned)
            return None, abort
        self.walkers.commit(walker, now, draft.scanned)
        return draft, None

    def _generation_walk(self, pie: PIE, entry, key, now) -> None:
        draft, abort = self._walk(entry, key, now)
        if abort is not None:
            reset(pie, _ABORT_TO_RESET[abort.cause], self.pies)
            return
        if draft is None:
            return  # all walkers busy; retry on the next encounter
        pie.draft = draft
        pie.draft_kinds = [op.kind.name for op in draft.ops]
        lifecycle_event(pie, "walk_done")

    def _validation_walk(self, pie: PIE, entry, key, now) -> None:
        fresh, abort = self._walk(entry, key, now)
        if abort is not None:
            reset(pie, _ABORT_TO_RESET[abort.cause], self.pies)
            return
        if fresh is None:
            return
        if not validate_pass(pie.draft, fresh):
            reset(pie, ResetCause.INCONSISTENT, self.pies)
            return
        lifecycle_event(pie, "pass", rounds=self.cfg.validation_rounds)
        if pie.state != PieState.TRIM:
            return
        annotations = classify_values(pie.draft.value_rounds)
        try:
            ops = trim(pie.draft, annotations)
            check_slice(ops)
        except SliceAbort as abort2:
            reset(pie, _ABORT_TO_RESET[abort2.cause], self.pies)
            return
        pie.slice_ops = ops
        pie.annotations = annotations
        lifecycle_event(pie, "trim_done")
        pie.armed_at_encounter = pie.encounters
        L, adaptive = self.cfg.initial_lookahead()
        pie.lookahead = L
        pie.adaptive_lookahead = adaptive

    def _useless(self, rec: fb.PrefetchRecord) -> None:
        pie = rec.pie
        if pie is not None and rec.pie_generation == pie.generation:
            pie_mod.record_feedback(pie, "useless", self.cfg.usefulness_threshold, self.pies)

    def sweep(self, now: int) -> None:
        pie_mod.timeout_sweep(self.pies, now, self.cfg.gen_timeout_cycles)

    def reset_stats(self) -> None:
        self.queue.reset_stats()
        self.injections = 0
        self.injected_ops = 0


@dataclass
class RunResult:
    report: dict
    state: ArchState
    prefetcher: object
    oracle: Oracle


def build_prefetcher(cfg: RunConfig, memsys: CacheHierarchy):
    if cfg.prefetcher == "none":
        return NoPrefetcher()
    if cfg.prefetcher == "nextline":
        return BaselineAdapter("nextline", NextLinePrefetcher(), memsys,
                               cfg.semantic.queue_capacity)
    if cfg.prefetcher == "stride":
        return BaselineAdapter("stride", StridePrefetcher(cfg.stride_degree), memsys,
                               cfg.semantic.queue_capacity)
    return SemanticPrefetcher(cfg.semantic, memsys)


def run(cfg: RunConfig) -> RunResult:
    cfg.validate()
    spec = replace(cfg.workload, seed=cfg.seed)
    gen = generate(spec)
    program = gen.program
    state = ArchState(entry_ip=program.entry_ip, mem=Memory(gen.image))
    memsys = CacheHierarchy(cfg.cache)
    pf = build_prefetcher(cfg, memsys)
    oracle = gen.oracle

    budget = cfg.warmup + cfg.measured
    demand_counts: dict[int, int] = {}
    oracle_checked = 0
    oracle_matched = 0
    measuring = cfg.warmup == 0
    cycles_at_measure = 0
    retired_at_measure = 0

    while not state.halted and state.retired < budget:
        now = state.cycle
        ev = step(state, program)
        pf.record(ev)
        cost = 1
        kind = ev.op.kind
        if kind == OpKind.LOAD:
            injection = pf.before_load(ev, state, now)
            if injection is not None:
                cost += injection.cost
                if measuring:
                    i = demand_counts.get(ev.op.ip, 0)
                    ok = oracle.check(injection.addr, ev.op.ip, i, injection.lookahead)
                    if ok is not None:
                        oracle_checked += 1
                        oracle_matched += 1 if ok else 0
            res = memsys.access(ev.eff_addr, DEMAND_LOAD, now, ip=ev.op.ip)
            cost += res.latency
            pf.after_load(ev, res, state, now)
            demand_counts[ev.op.ip] = demand_counts.get(ev.op.ip, 0) + 1
        elif kind == OpKind.STORE:
            res = memsys.access(ev.eff_addr, DEMAND_STORE, now, ip=ev.op.ip)
            cost += res.latency
        elif kind == OpKind.BR:
            pf.on_branch(ev)
        state.cycle += cost
        if isinstance(pf, SemanticPrefetcher) and state.retired % 1024 == 0:
            pf.sweep(state.cycle)
        if not measuring and state.retired >= cfg.warmup:
            measuring = True
            memsys.reset_stats()
            pf.reset_stats()
            cycles_at_measure = state.cycle
            retired_at_measure = state.retired

    report = _build_report(cfg, state, memsys, pf, oracle_checked, oracle_matched,
                           cycles_at_measure, retired_at_measure)
    return RunResult(report=report, state=state, prefetcher=pf, oracle=oracle)


def _arch_digest(state: ArchState) -> str:
    h = hashlib.sha256()
    h.update(repr(state.regs).encode())
    h.update(repr(state.ip).encode())
    h.update(repr(state.retired).encode())
    for addr in sorted(state.mem.words):
        v = state.mem.words[addr]
        if v:
            h.update(f"{addr}:{v};".encode())
    return h.hexdigest()


def _pie_row(idx: int, pie: PIE) -> dict:
    return {
        "index": idx,
        "ip": f"{pie.key.ip:#x}",
        "bhr": f"{pie.key.bhr:#x}",
        "state": pie.state.value,
        "lookahead": pie.lookahead,
        "sent": pie.sent,
        "useless": pie.useless,
        "resets": pie.resets,
        "validations_passed": pie.validations_passed,
        "encounters": pie.encounters,
        "armed_at_encounter": pie.armed_at_encounter,
        "slice_len": len(pie.slice_ops) if pie.slice_ops else 0,
        "draft_len": len(pie.draft_kinds) if pie.draft_kinds else 0,
        "hit_depth_ewma": round(pie.hit_depth_ewma, 3) if pie.hit_depth_ewma is not None else None,
    }


def _build_report(cfg, state, memsys, pf, oracle_checked, oracle_matched,
                  cycles_at_measure, retired_at_measure) -> dict:
    measured_retired = state.retired - retired_at_measure
    measured_cycles = state.cycle - cycles_at_measure
    cache = {
        lv.cfg.name: {k: s.to_dict() for k, s in lv.stats.items()}
        for lv in memsys.levels
    }
    l1_demand_misses = memsys.demand_l1_misses()
    covered = memsys.covered
    uncovered = memsys.uncovered_misses
    coverage = covered / (covered + uncovered) if (covered + uncovered) else 0.0

    queue = getattr(pf, "queue", None)
    qs = queue.stats if queue is not None else fb.QueueStats()
    sent = qs.sent
    accuracy = qs.useful / sent if sent else 0.0
    injected_ops = getattr(pf, "injected_ops", 0)
    injected_ratio = injected_ops / (injected_ops + measured_retired) if measured_retired else 0.0

    pies_report = []
    armed_sizes = []
    if isinstance(pf, SemanticPrefetcher):
        for idx, pie in enumerate(pf.pies.entries):
            if pie is None:
                continue
            pies_report.append(_pie_row(idx, pie))
            if pie.state == PieState.ARMED and pie.slice_ops:
                armed_sizes.append(len(pie.slice_ops))
        reset_causes = dict(pf.pies.reset_causes)
        validation_failures = pf.pies.validation_failures
        walkers = {
            "walks": pf.walkers.walks,
            "drops": pf.walkers.drops,
            "busy_cycles": pf.walkers.busy_cycles,
            "busy_fraction": pf.walkers.busy_cycles / state.cycle if state.cycle else 0.0,
        }
        detector = {
            "denied_allocations": pf.pies.denied_allocations,
            "starved_keys": len(pf.pies.starved_keys),
        }
    else:
        reset_causes = {"hash_collision": 0, "code_flow_variance": 0, "timeout": 0,
                        "too_many_failures": 0}
        validation_failures = 0
        walkers = {"walks": 0, "drops": 0, "busy_cycles": 0, "busy_fraction": 0.0}
        detector = {"denied_allocations": 0, "starved_keys": 0}

    size_hist: dict[str, int] = {}
    for n in armed_sizes:
        size_hist[str(n)] = size_hist.get(str(n), 0) + 1

    per_ip = {}
    for ip, rec in sorted(memsys.per_ip.items()):
        row = dict(rec)
        qrec = qs.per_ip.get(ip, {"sent": 0, "useful": 0})
        row["prefetch_sent"] = qrec["sent"]
        row["prefetch_useful"] = qrec["useful"]
        per_ip[f"{ip:#x}"] = row

    return {
        "schema_version": 1,
        "config": to_flat_dict(cfg),
        "retired": state.retired,
        "measured_retired": measured_retired,
        "simulated_cycles": state.cycle,
        "measured_cycles": measured_cycles,
        "arch_digest": _arch_digest(state),
        "cache": cache,
        "demand_mpki": mpki(l1_demand_misses, measured_retired) if measured_retired else 0.0,
        "prefetch": {
            "sent": sent,
            "useful": qs.useful,
            "useless": qs.useless,
            "accuracy": accuracy,
            "covered": covered,
            "uncovered_misses": uncovered,
            "coverage": coverage,
            "late": memsys.late_prefetches,
            "timeliness_histogram": {f"{8*b}-{8*b+7}": qs.depth_histogram.get(b, 0)
                                     for b in range(8)},
            "injected_ops": injected_ops,
            "injected_op_ratio": injected_ratio,
            "injections": getattr(pf, "injections", 0),
            "oracle_checked": oracle_checked,
            "oracle_matched": oracle_matched,
            "oracle_match_rate": oracle_matched / oracle_checked if oracle_checked else 0.0,
        },
        "per_ip": per_ip,
        "pies": pies_report,
        "reset_causes": reset_causes,
        "validation_failures": validation_failures,
        "armed_slices": len(armed_sizes),
        "slice_sizes": {
            "avg": sum(armed_sizes) / len(armed_sizes) if armed_sizes else 0.0,
            "histogram": size_hist,
        },
        "walkers": walkers,
        "detector": detector,
    }


def dump_slices(result: RunResult) -> tuple[str, list[dict]]:
    """Armed slices in ISA-like text plus a structured form."""
    lines = []
    structured = []
    pf = result.prefetcher
    if not isinstance(pf, SemanticPrefetcher):
        return "# no armed slices (prefetcher is not semantic)\n", []
    for idx, pie in enumerate(pf.pies.entries):
        if pie is None or pie.state != PieState.ARMED or not pie.slice_ops:
            continue
        header = (f"# slice for ip={pie.key.ip:#x} bhr={pie.key.bhr:#x} index={idx} "
                  f"L={pie.lookahead} sent={pie.sent} "
                  f"draft=[{','.join(pie.draft_kinds or [])}] ops={len(pie.slice_ops)}")
        lines.append(header)
        op_texts = [format_slice_op(op) for op in pie.slice_ops]
        lines.extend(op_texts)
        lines.append("")
        structured.append({
            "ip": f"{pie.key.ip:#x}",
            "bhr": f"{pie.key.bhr:#x}",
            "index": idx,
            "lookahead": pie.lookahead,
            "ops": op_texts,
            "kinds": [op.kind.name if op.stride is None else "STRIDE_ADD"
                      for op in pie.slice_ops],
            "annotations": [op.annotation for op in pie.slice_ops],
            "draft_kinds": list(pie.draft_kinds or []),
        })
    if not lines:
        return "# no armed slices\n", []
    return "\n".join(lines) + "\n", structured


def dump_program(cfg: RunConfig, include_image: bool = False) -> str:
    """The generated workload as ISA text (optionally with its memory image)."""
    cfg.validate()
    gen = generate(replace(cfg.workload, seed=cfg.seed))
    from .isa import format_program

    return format_program(gen.program, gen.image if include_image else None)


def compare(configs: list[RunConfig]) -> dict:
    """Run >=2 configs that differ only in prefetcher; report side by side."""
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    base = to_flat_dict(configs[0])
    base.pop("prefetcher")
    for other in configs[1:]:
        d = to_flat_dict(other)
        d.pop("prefetcher")
        if d != base:
            raise ValueError("compare configs must differ only in prefetcher")
    reports = {}
    ratios = {}
    first_cycles = None
    for c in configs:
        res = run(c)
        reports[c.prefetcher] = res.report
        cycles = res.report["measured_cycles"]
        if first_cycles is None:
            first_cycles = cycles
        ratios[c.prefetcher] = cycles / first_cycles if first_cycles else 0.0
    return {
        "schema_version": 1,
        "reports": reports,
        "cycle_ratio_vs_first": ratios,
    }
