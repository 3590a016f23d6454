"""Acceptance suite: one test per criterion, each printing a pass/fail line
per check (run with -s or look at captured output on failure). Run sizes stay
well under the desk-scale budget."""

from conftest import make_config
from slicefetch.context import ContextKey
from slicefetch.engine import dump_slices, run
from slicefetch.pie import (
    PIE,
    PieArray,
    PieState,
    ResetCause,
    record_feedback,
    repeat_address_check,
    reset,
    timeout_sweep,
)
from slicefetch.report import canonical_json


def check(criterion, name, cond):
    print(f"criterion {criterion:>2} {'PASS' if cond else 'FAIL'}: {name}")
    assert cond, f"criterion {criterion}: {name}"


# -- 1: double-dereference slice replication ---------------------------------

def test_criterion_1_double_deref_slice():
    res = run(make_config(kind="double_deref", iterations=1500, measured=9000))
    text, slices = dump_slices(res)
    check(1, "exactly one armed slice", len(slices) == 1)
    s = slices[0]
    check(1, "slice is exactly 3 operations", len(s["ops"]) == 3)
    check(1, "forms are {immediate move, stride add, load}",
          s["kinds"] == ["MOV_IMM", "STRIDE_ADD", "LOAD"])
    check(1, "generation draft excludes the unrelated multiply",
          "MUL" not in s["draft_kinds"] and len(s["draft_kinds"]) == 4)


# -- 2: lifecycle bound --------------------------------------------------------

def test_criterion_2_armed_by_eighth_encounter():
    res = run(make_config(iterations=1500, measured=6000))
    armed = [p for p in res.prefetcher.pies.all_pies() if p.state == PieState.ARMED]
    check(2, "steadily recurring flaky load arms", len(armed) == 1)
    check(2, f"armed at encounter {armed[0].armed_at_encounter} <= 8",
          armed[0].armed_at_encounter <= 8)


# -- 3: stride workload steady state ---------------------------------------------

def test_criterion_3_stride_steady_state():
    cfg = make_config(iterations=16000, warmup=40000, measured=20000)  # 10k-iter warmup
    r = run(cfg).report
    cov = r["prefetch"]["coverage"]
    acc = r["prefetch"]["accuracy"]
    oracle = r["prefetch"]["oracle_match_rate"]
    check(3, f"coverage {cov:.3f} >= 0.90", cov >= 0.90)
    check(3, f"accuracy {acc:.3f} >= 0.95", acc >= 0.95)
    check(3, f"oracle match rate {oracle:.4f} >= 0.99", oracle >= 0.99)


# -- 4: indirect A[B[i]] ----------------------------------------------------------

def test_criterion_4_indirect_random_index():
    base = dict(kind="indirect", elements=65536, iterations=8000,
                warmup=10000, measured=25000)
    sem = run(make_config(prefetcher="semantic", **base)).report
    st = run(make_config(prefetcher="stride", **base)).report
    critical = "0x206"
    oracle = sem["prefetch"]["oracle_match_rate"]
    check(4, f"semantic oracle accuracy {oracle:.3f} >= 0.90", oracle >= 0.90)
    dep = st["per_ip"][critical]
    sent = dep["prefetch_sent"]
    acc = dep["prefetch_useful"] / sent if sent else 0.0
    check(4, f"stride baseline accuracy {acc:.3f} <= 0.05 on the dependent load",
          acc <= 0.05)


# -- 5: bfs_csr depth-4 chain ------------------------------------------------------

def crit_coverage(report, ip):
    rec = report["per_ip"][ip]
    would_miss = rec["covered"] + rec["misses"] - rec["late_covered"]
    return rec["covered"] / would_miss if would_miss else 0.0


def test_criterion_5_bfs_csr():
    for seed in (1, 2):
        base = dict(kind="bfs_csr", nodes=8192, iterations=6000,
                    warmup=14000, measured=28000, seed=seed)
        sem = run(make_config(prefetcher="semantic", **base)).report
        st = run(make_config(prefetcher="stride", **base)).report
        none = run(make_config(prefetcher="none", **base)).report
        critical = "0x40b"
        sem_cov = crit_coverage(sem, critical)
        st_cov = crit_coverage(st, critical)
        reduction = 1.0 - sem["demand_mpki"] / none["demand_mpki"]
        check(5, f"seed {seed}: semantic critical coverage {sem_cov:.3f} >= 0.55",
              sem_cov >= 0.55)
        check(5, f"seed {seed}: stride critical coverage {st_cov:.3f} < 0.25",
              st_cov < 0.25)
        check(5, f"seed {seed}: MPKI reduction {reduction:.3f} >= 0.25",
              reduction >= 0.25)


# -- 6: lookahead controller --------------------------------------------------------

def test_criterion_6_lookahead_policies():
    coverages = {}
    for policy in ("dynamic_from_1", "dynamic_from_16", "fixed_32"):
        cfg = make_config(iterations=16000, warmup=4000, measured=44000)
        cfg.semantic.lookahead_policy = policy
        res = run(cfg)
        r = res.report
        coverages[policy] = r["prefetch"]["coverage"]
        check(6, f"{policy}: coverage {coverages[policy]:.3f} >= 0.85",
              coverages[policy] >= 0.85)
        log = res.prefetcher.adapt_log
        q = cfg.semantic.queue_capacity
        lo, hi = q / 8, 3 * q / 4
        in_band = [(enc, L) for (_, enc, ewma, L) in log if lo <= ewma <= hi]
        check(6, f"{policy}: hit-depth EWMA reaches [{lo:.0f},{hi:.0f}] band",
              bool(in_band))
        first_enc = in_band[0][0]
        check(6, f"{policy}: band entered at encounter {first_enc} <= 10000",
              first_enc <= 10_000)
        steady = in_band[-1][1]
        later = [L for (enc, L) in in_band]
        check(6, f"{policy}: L stays within 2x of steady value {steady}",
              all(steady / 2 <= L <= steady * 2 for L in later))
    check(6, "dynamic steady coverage >= fixed - 2 points",
          coverages["dynamic_from_1"] >= coverages["fixed_32"] - 0.02)


# -- 7: context sensitivity ------------------------------------------------------------

def test_criterion_7_context_sensitivity():
    def two_phase(bits):
        cfg = make_config(kind="nested_two_phase", iterations=4000, measured=30000)
        cfg.semantic.context_bits = bits
        return run(cfg).report

    with_ctx = two_phase(24)
    without = two_phase(0)
    check(7, f"failures with 24 bits ({with_ctx['validation_failures']}) < "
             f"with 0 bits ({without['validation_failures']})",
          with_ctx["validation_failures"] < without["validation_failures"])
    armed = [p for p in with_ctx["pies"] if p["state"] == "Armed"]
    check(7, "both contexts armed with 24 bits",
          len(armed) == 2 and len({p["bhr"] for p in armed}) == 2)
    check(7, "armed slices belong to the same load ip",
          len({p["ip"] for p in armed}) == 1)


# -- 8: counter and reset mechanics -----------------------------------------------------

def test_criterion_8_counter_and_reset_mechanics():
    # saturation shift preserves the ratio within 1/32 (all useless values)
    worst = 0.0
    for useless in range(0, 65):
        p = PIE(key=ContextKey(0x40, 0, 0))
        p.state = PieState.ARMED
        p.sent, p.useless = 64, useless
        before = useless / 64
        record_feedback(p, "sent", usefulness_threshold=0.0)
        worst = max(worst, abs(p.useless / p.sent - before))
    check(8, f"saturation shift ratio drift {worst:.4f} <= 1/32", worst <= 1 / 32)

    p = PIE(key=ContextKey(0x40, 0, 0))
    for n in range(26):
        p.state = PieState.GEN
        reset(p, ResetCause.INCONSISTENT)
        if n < 25:
            assert p.state == PieState.ACTIVE
    check(8, "disabled exactly after the 26th reset",
          p.resets == 26 and p.state == PieState.DISABLED)

    p = PIE(key=ContextKey(0x40, 0, 0))
    p.state = PieState.ARMED
    p.slice_ops = []
    outcomes = [repeat_address_check(p, 0xAA00) for _ in range(4)]
    check(8, "4 consecutive identical addresses trigger reset",
          outcomes == ["ok", "ok", "ok", "reset"])

    arr = PieArray()
    q = PIE(key=ContextKey(0x40, 0, 0))
    q.state = PieState.VALIDATE
    q.gen_start_cycle = 0
    arr.entries[0] = q
    check(8, "un-armed PIE resets at 100,001 cycles",
          timeout_sweep(arr, 100_000) == 0 and timeout_sweep(arr, 100_001) == 1)


# -- 9: transparency and determinism ------------------------------------------------------

def test_criterion_9_transparency_and_determinism():
    on = run(make_config(iterations=1500, measured=6000))
    off = run(make_config(iterations=1500, measured=6000, prefetcher="none"))
    check(9, "final architectural state identical with prefetcher on vs off",
          on.report["arch_digest"] == off.report["arch_digest"])
    check(9, "state objects bit-equal (registers, memory, ip, retired)",
          on.state.snapshot_equal(off.state))
    again = run(make_config(iterations=1500, measured=6000))
    check(9, "identical (config, seed) gives byte-identical reports",
          canonical_json(on.report) == canonical_json(again.report))


# -- 10: resource occupancy -----------------------------------------------------------------

BUNDLED = [
    ("stride", dict(iterations=2000, measured=8000), 1),
    ("indirect", dict(iterations=2000, elements=16384, measured=10000), 2),
    ("linked_list", dict(iterations=2000, nodes=4096, measured=6000), 1),
    ("bfs_csr", dict(iterations=2000, nodes=4096, measured=14000), 4),
    ("double_deref", dict(iterations=1500, measured=10000), 1),
    ("nested_two_phase", dict(iterations=2000, measured=15000), 2),
]


def test_criterion_10_walker_and_pie_occupancy():
    for kind, kw, expected_armed in BUNDLED:
        r = run(make_config(kind=kind, **kw)).report
        busy = r["walkers"]["busy_fraction"]
        check(10, f"{kind}: walker busy fraction {busy:.5f} <= 0.02", busy <= 0.02)
        check(10, f"{kind}: no qualified load starved",
              r["detector"]["starved_keys"] == 0)
        check(10, f"{kind}: expected armed slices present "
                  f"({r['armed_slices']}/{expected_armed})",
              r["armed_slices"] >= expected_armed)
