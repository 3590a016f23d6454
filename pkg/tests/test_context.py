from hypothesis import given, strategies as st

from slicefetch.context import (
    BHR_MASK,
    ContextKey,
    FlakinessRecord,
    context_of,
    fold_index,
    update_bhr,
)


def test_update_bhr_taken_xors_low_bit():
    bhr = update_bhr(0, branch_ip=0xAA, taken=True)  # low nibble 0b1010
    assert bhr & 0xF == 0b1011


def test_update_bhr_not_taken():
    bhr = update_bhr(0, branch_ip=0xAA, taken=False)
    assert bhr & 0xF == 0b1010


def test_seven_updates_shift_first_out():
    bhr = update_bhr(0, 0xF, True)  # nibble 0b1110
    first = bhr & 0xF
    for ip in range(6):
        bhr = update_bhr(bhr, ip, False)
    # 6 slots: the first nibble is gone
    nibbles = [(bhr >> (4 * i)) & 0xF for i in range(6)]
    assert first not in nibbles[1:] or (bhr >> 20) & 0xF != first
    assert bhr <= BHR_MASK
    # explicit: a seventh insert leaves only the last six
    expected = 0
    for ip in range(6):
        expected = ((expected << 4) | (ip & 0xF)) & BHR_MASK
    assert bhr == expected


def test_context_bits_zero_merges_histories():
    k1 = context_of(0x40, 0x123456, context_bits=0)
    k2 = context_of(0x40, 0xABCDEF, context_bits=0)
    assert k1 == k2


def test_context_bits_full_separates_last_outcome():
    base = 0x40F3
    h1 = update_bhr(0x5555, 0x7, True)
    h2 = update_bhr(0x5555, 0x7, False)
    k1 = context_of(base, h1, context_bits=24)
    k2 = context_of(base, h2, context_bits=24)
    assert k1 != k2
    assert k1.tag != k2.tag


def naive_fold(ip, masked_bhr, index_bits):
    # independent oracle: xor of all nibbles of ip ^ (bhr << 1)
    v = ip ^ (masked_bhr << 1)
    nibbles = []
    while v:
        nibbles.append(v & 0xF)
        v >>= 4
    out = 0
    for n in nibbles:
        out ^= n
    return out & ((1 << index_bits) - 1)


def test_fold_documented_example():
    idx = fold_index(0x40F3, 0x00ABCD, 4)
    assert idx == naive_fold(0x40F3, 0x00ABCD, 4)
    assert 0 <= idx <= 15


@given(ip=st.integers(0, (1 << 48) - 1), bhr=st.integers(0, BHR_MASK),
       bits=st.sampled_from([0, 8, 16, 24]))
def test_fold_matches_oracle_and_key_equality_is_tag_equality(ip, bhr, bits):
    k = context_of(ip, bhr, bits)
    masked = bhr & ((1 << bits) - 1) if bits else 0
    assert k.index == naive_fold(ip, masked, 4)
    k2 = context_of(ip, bhr, bits)
    assert k == k2 and hash((k.ip, k.bhr)) == hash((k2.ip, k2.bhr))


def test_collisions_do_not_merge_keys():
    # same table index, different tags: equality stays false
    k1 = ContextKey(ip=0x10, bhr=0, index=3)
    k2 = ContextKey(ip=0x20, bhr=0, index=3)
    assert k1 != k2
    assert k1.tag != k2.tag


def test_flakiness_window_expires_counters():
    rec = FlakinessRecord()
    rec.observe(True, retired_index=0, window=10_000)
    rec.observe(False, retired_index=5_000, window=10_000)
    assert rec.appearances == 2 and rec.misses == 1
    rec.observe(False, retired_index=20_001, window=10_000)
    assert rec.appearances == 1 and rec.misses == 0
    assert rec.window_start == 20_001


def test_flakiness_qualification_thresholds():
    rec = FlakinessRecord()
    rec.observe(True, 0, 10_000)
    assert not rec.qualified(2, 1)       # hot needs 2 appearances
    rec.observe(False, 1, 10_000)
    assert rec.qualified(2, 1)           # 2 appearances, 1 miss
    rec2 = FlakinessRecord()
    rec2.observe(False, 0, 10_000)
    rec2.observe(False, 1, 10_000)
    assert not rec2.qualified(2, 1)      # never missed: not flaky


def test_observe_load_decisions_match_detector_contract():
    from slicefetch.context import ADVANCE_TO_GEN, ALLOCATE_PIE, IGNORE, observe_load
    from slicefetch.pie import PieArray, PieState

    pies = PieArray()
    key = context_of(0x40, 0x123456, 24)

    # first encounter with a miss allocates
    assert observe_load(pies, key, l1_missed=True, retired_index=0) == ALLOCATE_PIE
    # second encounter, a hit, with one prior miss in the window: qualify
    assert observe_load(pies, key, l1_missed=False, retired_index=10) == ADVANCE_TO_GEN

    # a load that always hits is ignored forever
    hot_key = context_of(0x50, 0, 24)
    for i in range(50):
        assert observe_load(pies, hot_key, l1_missed=False, retired_index=i) == IGNORE
    assert pies.lookup(hot_key) is None

    # disabled entries never reallocate for the same key
    pie = pies.lookup(key)
    pie.state = PieState.DISABLED
    assert observe_load(pies, key, l1_missed=True, retired_index=20) == IGNORE
    assert pie.slice_ops is None
