import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bicmb.convcode import CodeSpec, build_trellis, encode, enumerate_error_events
from bicmb.interleaver import (
    InterleaverError, InterleaverSpec, alpha_vector, build_map, search_interleaver, verify,
    verify_ofdm, verify_single_carrier,
)

C57 = CodeSpec((5, 7), 3)
C133 = CodeSpec((0o133, 0o171), 7)


@pytest.fixture(scope="module")
def ev57():
    return enumerate_error_events(build_trellis(C57), 9)


@pytest.fixture(scope="module")
def ev133():
    return enumerate_error_events(build_trellis(C133), 14)


def slots(m):
    return [m.slot(i) for i in range(m.period)]


def test_round_robin_s2_b1():
    m = build_map(InterleaverSpec(2, 1, 4))
    assert slots(m) == [(1, 0, 0), (2, 0, 0), (1, 1, 0), (2, 1, 0)]
    assert m.slot(5) == (2, 2, 0)


def test_single_stream_identity():
    m = build_map(InterleaverSpec(1, 1, 6))
    assert [m.slot(i) for i in range(12)] == [(1, i, 0) for i in range(12)]


def test_round_robin_s2_b2():
    m = build_map(InterleaverSpec(2, 2, 8))
    assert m.slot(0) == (1, 0, 0)
    assert m.slot(2) == (1, 0, 1)
    assert m.slot(4) == (1, 1, 0)


def test_block_map():
    m = build_map(InterleaverSpec(2, 1, 8, kind="block"))
    assert [s[0] for s in slots(m)] == [1, 1, 1, 1, 2, 2, 2, 2]
    assert m.slot(8) == (1, 4, 0)


def test_ofdm_round_robin_fill():
    m = build_map(InterleaverSpec(2, 1, 16, mode="ofdm", num_subcarriers=4))
    # within a stream, subcarriers fill before symbol times
    assert [m.slot(i) for i in (0, 2, 4, 6, 8)] == [(1, 0, 0, 0), (1, 0, 0, 1), (1, 0, 0, 2),
                                                    (1, 0, 0, 3), (1, 1, 0, 0)]


def test_custom_table_duplicate_rejected():
    spec = InterleaverSpec(2, 1, 4, kind="custom", table=((1, 0, 0), (2, 0, 0), (1, 0, 0), (2, 1, 0)))
    with pytest.raises(InterleaverError, match=r"\(1, 0, 0\).*bits 0 and 2"):
        build_map(spec)


@pytest.mark.parametrize("kwargs", [
    dict(num_streams=2, bits_per_symbol=2, period=6),
    dict(num_streams=2, bits_per_symbol=1, period=4, kind="custom", table=((1, 0, 0),)),
    dict(num_streams=2, bits_per_symbol=1, period=4, kind="zigzag"),
    dict(num_streams=2, bits_per_symbol=1, period=4, mode="ofdm", num_subcarriers=4),
    dict(num_streams=2, bits_per_symbol=1, period=4, num_subcarriers=2),
])
def test_bad_specs(kwargs):
    with pytest.raises(InterleaverError):
        InterleaverSpec(**kwargs)


def test_custom_slot_out_of_grid():
    with pytest.raises(InterleaverError):
        build_map(InterleaverSpec(2, 1, 2, kind="custom", table=((1, 0, 0), (3, 0, 0))))


def test_text_roundtrip():
    text = "S=2 B=1 mode=sc kind=round-robin P=32"
    spec = InterleaverSpec.from_text(text)
    assert spec == InterleaverSpec(2, 1, 32)
    assert spec.to_text() == text
    custom = InterleaverSpec.from_text("# two streams\nS=2 B=1 kind=custom P=2 table=2:0:0,1:0:0")
    assert custom.table == ((2, 0, 0), (1, 0, 0))
    assert InterleaverSpec.from_text(custom.to_text()) == custom
    ofdm = InterleaverSpec(2, 1, 8, mode="ofdm", num_subcarriers=4)
    assert InterleaverSpec.from_text(ofdm.to_text()) == ofdm
    with pytest.raises(InterleaverError):
        InterleaverSpec.from_text("S=2 B=1 P=4 colour=red")


def test_alpha_examples(ev57):
    m = build_map(InterleaverSpec(2, 1, 4))
    e = ev57.events[0]
    assert alpha_vector(m, e, 0).alpha == (2, 3)
    assert alpha_vector(m, e, 1).alpha == (3, 2)
    one = build_map(InterleaverSpec(1, 1, 4))
    assert all(alpha_vector(one, x, 2).alpha == (x.d_H,) for x in ev57.events)
    with pytest.raises(ValueError):
        alpha_vector(m, e, 4)


def test_verify_sc_round_robin_passes(ev57):
    r = verify_single_carrier(build_map(InterleaverSpec(2, 1, 4)), ev57)
    assert r.passed and not r.violations
    assert r.events_checked == len(ev57.events) and r.phases_checked == 4
    assert any("structural argument" in n for n in r.notes)


def test_verify_sc_block_violates(ev57):
    r = verify_single_carrier(build_map(InterleaverSpec(2, 1, 12, kind="block")), ev57)
    assert not r.passed and r.verdicts == {1: True, 2: False}
    first = r.violations[0]
    assert (first.event_id, first.phase, first.criterion) == (0, 0, 2)
    assert first.witness["alpha"] == [5, 0]


def test_verify_identity_single_stream(ev57):
    r = verify_single_carrier(build_map(InterleaverSpec(1, 1, 1)), ev57)
    assert r.passed and r.notes


def test_verify_empty_enumeration():
    en = enumerate_error_events(build_trellis(C57), 4)
    r = verify_single_carrier(build_map(InterleaverSpec(2, 1, 2)), en)
    assert r.passed and r.events_checked == 0 and r.warnings


def test_criterion1_same_symbol(ev57):
    # B=2 with a single stream puts bits 2k and 2k+1 in one symbol
    r = verify_single_carrier(build_map(InterleaverSpec(1, 2, 2)), ev57)
    assert r.verdicts[1] is False and r.verdicts[2] is True
    w = r.violations[0].witness
    assert w["slots"][0][:2] == w["slots"][1][:2]


def test_verify_ofdm_examples(ev57):
    shared = build_map(InterleaverSpec(2, 1, 8, mode="ofdm", num_subcarriers=4))
    r = verify_ofdm(shared, ev57)
    assert r.verdicts[2] is False
    v = next(v for v in r.violations if v.criterion == 2)
    assert (v.phase, v.witness) == (0, {"positions": [0, 1], "subcarrier": 0})

    table = tuple((i % 2 + 1, i // 4, 0, i % 4) for i in range(8))
    ok = build_map(InterleaverSpec(2, 1, 8, kind="custom", mode="ofdm", num_subcarriers=4, table=table))
    assert verify_ofdm(ok, ev57).verdicts[2] is True

    one = build_map(InterleaverSpec(1, 1, 4, mode="ofdm", num_subcarriers=4))
    assert verify_ofdm(one, ev57).verdicts[3] is True


def test_mode_guards(ev57):
    with pytest.raises(InterleaverError):
        verify_ofdm(build_map(InterleaverSpec(2, 1, 2)), ev57)
    with pytest.raises(InterleaverError):
        verify_single_carrier(build_map(InterleaverSpec(2, 1, 8, mode="ofdm", num_subcarriers=4)), ev57)


def test_report_independent_of_workers(ev133):
    m = build_map(InterleaverSpec(2, 1, 128, kind="block"))
    assert verify(m, ev133, workers=1).to_json() == verify(m, ev133, workers=4).to_json()


def random_map(draw_seed, S, B, P):
    rng = np.random.default_rng(draw_seed)
    base = build_map(InterleaverSpec(S, B, P, kind="round-robin"))
    perm = rng.permutation(P)
    table = tuple(base.slot(int(i)) for i in perm)
    return build_map(InterleaverSpec(S, B, P, kind="custom", table=table))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 4), B=st.integers(1, 3),
       periods=st.integers(1, 4), event=st.integers(0, 241), phase=st.integers(0, 10**6))
def test_alpha_conservation(ev133, seed, S, B, periods, event, phase):
    P = S * B * periods
    m = random_map(seed, S, B, P)
    e = ev133.events[event]
    assert alpha_vector(m, e, phase % P).total == e.d_H


def test_pass_is_rechecked_by_direct_loop(ev133):
    m = build_map(InterleaverSpec(2, 1, 16))
    assert verify(m, ev133).passed
    for e in ev133.events:
        for p in range(m.period):
            assert not alpha_vector(m, e, p).has_zero


@pytest.mark.parametrize("spec", [InterleaverSpec(2, 1, 8), InterleaverSpec(3, 2, 12, kind="block"),
                                  InterleaverSpec(2, 1, 16, mode="ofdm", num_subcarriers=4)])
def test_bijection(spec):
    m = build_map(spec)
    assert len(set(slots(m))) == m.period


def test_round_robin_parity(ev133):
    m = build_map(InterleaverSpec(2, 1, 8))
    for e in ev133.events:
        cod = np.array(encode(C133, e.input_bits, terminate=False)[: 2 * e.length]).reshape(-1, 2)
        for p in (0, 2, 4):
            assert alpha_vector(m, e, p).alpha == (int(cod[:, 0].sum()), int(cod[:, 1].sum()))


def test_monotonicity(ev133):
    m = build_map(InterleaverSpec(2, 1, 64, kind="block"))
    small = enumerate_error_events(build_trellis(C133), 12)
    key = lambda r, en: {(en.events[v.event_id].coded_bits, v.phase, v.criterion) for v in r.violations}
    assert key(verify(m, small), small) <= key(verify(m, ev133), ev133)


def test_search_round_robin_first(ev133):
    res = search_interleaver(C133, InterleaverSpec(2, 1, 2), ev133, budget=10)
    assert res.passed and res.candidates_evaluated == 1 and res.map.spec.kind == "round-robin"


def test_search_block_fails(ev57):
    res = search_interleaver(C57, InterleaverSpec(2, 1, 24, kind="block"), ev57, budget=5, seed=7)
    assert not res.passed and res.candidates_evaluated == 5
    assert res.best_violation_count == len(res.report.violations) > 0
    assert any(ev57.events[v.event_id].d_H == 5 for v in res.report.violations)
    again = search_interleaver(C57, InterleaverSpec(2, 1, 24, kind="block"), ev57, budget=5, seed=7)
    assert again.report.to_json() == res.report.to_json()


def test_search_single_stream(ev57):
    assert search_interleaver(C57, InterleaverSpec(1, 1, 1), ev57, budget=1).passed


def test_search_finds_permuted_candidate(ev57):
    # the plain B=2 fill puts consecutive bits in one symbol; a shuffled fill can split them
    res = search_interleaver(C57, InterleaverSpec(1, 2, 8), ev57, budget=20, seed=0)
    assert res.passed and res.candidates_evaluated > 1 and res.map.spec.kind == "custom"
    assert verify(build_map(res.map.spec), ev57).passed


def test_search_preconditions(ev57):
    with pytest.raises(ValueError):
        search_interleaver(C57, InterleaverSpec(2, 1, 2), ev57, budget=0)
    with pytest.raises(ValueError):
        search_interleaver(C57, InterleaverSpec(2, 1, 2), enumerate_error_events(build_trellis(C57), 4), 3)
