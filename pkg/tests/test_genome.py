import itertools

import pytest
from hypothesis import given, strategies as st

from pibf.errors import CodecError
from pibf.genome import (
    MAX_DELETION,
    MAX_POSITION,
    NO_REFERENCE,
    CompressedGenome,
    EventKind,
    Range,
    VariantEvent,
    absolute_to_relative,
    apply_events,
    decode_item,
    deletion_events,
    diff_substitutions,
    event_to_item_id,
    format_events,
    insertion_events,
    item_id_to_event,
    parse_events,
    read_reference,
    reference_id,
    relative_to_absolute,
    restrict,
)
from pibf.ibf import Ibf, list_items, make_params, subtract

REF = "AACGACTAGTAATTTG"
SEQ = "CACGTCTAGTAATGTG"

bases = st.sampled_from("ACGT")
positions = st.integers(0, MAX_POSITION)


@st.composite
def events(draw, max_pos=MAX_POSITION):
    kind = draw(st.sampled_from(list(EventKind)))
    pos = draw(st.integers(0, max_pos))
    if kind is EventKind.SUBSTITUTION:
        return VariantEvent.sub(pos, draw(bases))
    if kind is EventKind.INSERTION:
        return VariantEvent.ins(pos, draw(st.text("ACGT", min_size=1, max_size=6)), draw(st.integers(0, 63)))
    length = draw(st.integers(1, MAX_DELETION - (pos == MAX_POSITION)))
    return VariantEvent.deletion(pos, length)


# diff_substitutions --------------------------------------------------------


def test_worked_example_substitutions():
    g = diff_substitutions(SEQ, REF)
    assert g.events == (VariantEvent.sub(0, "C"), VariantEvent.sub(4, "T"), VariantEvent.sub(13, "G"))
    # 1-based text form matches {(1,C), (5,T), (14,G)}
    assert format_events(g).splitlines()[1:] == ["S1C", "S5T", "S14G"]
    assert g.reference_id == reference_id(REF)


def test_identical_sequences_have_no_events():
    assert diff_substitutions(REF, REF).events == ()


def test_single_base():
    assert diff_substitutions("C", "A").events == (VariantEvent.sub(0, "C"),)


@pytest.mark.parametrize("seq, ref", [("ACG", "AC"), ("ACN", "ACG"), ("ACG", "ACX")])
def test_diff_rejects(seq, ref):
    with pytest.raises(CodecError):
        diff_substitutions(seq, ref)


@given(st.data())
def test_diff_round_trip(data):
    n = data.draw(st.integers(1, 60))
    ref = data.draw(st.text("ACGT", min_size=n, max_size=n))
    seq = data.draw(st.text("ACGT", min_size=n, max_size=n))
    g = diff_substitutions(seq, ref)
    assert len(g.events) == sum(a != b for a, b in zip(seq, ref))
    assert apply_events(ref, g) == seq


# relative coordinates ------------------------------------------------------


def test_relative_worked_example():
    gapped = [VariantEvent.sub(0, "C"), VariantEvent.sub(4, "T"), VariantEvent.sub(9, "G")]
    g = relative_to_absolute(gapped)
    assert [e.position for e in g.events] == [0, 4, 13]
    assert absolute_to_relative(g) == gapped


def test_relative_single_event():
    assert relative_to_absolute([VariantEvent.sub(0, "A")]).events[0].position == 0


def test_relative_zero_gap():
    g = relative_to_absolute([VariantEvent.sub(5, "A"), VariantEvent.ins(0, "GG")])
    assert [(e.position, e.kind) for e in g.events] == [(5, EventKind.SUBSTITUTION), (5, EventKind.INSERTION)]
    with pytest.raises(CodecError, match="duplicate"):
        relative_to_absolute([VariantEvent.sub(5, "A"), VariantEvent.sub(0, "A")])


def test_relative_overflow():
    with pytest.raises(CodecError, match="overflow"):
        relative_to_absolute([VariantEvent.sub(MAX_POSITION, "A"), VariantEvent.sub(1, "C")])


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=30))
def test_relative_is_prefix_sum(gaps):
    evs = [VariantEvent.deletion(g, 1) if i % 2 else VariantEvent.sub(g, "T") for i, g in enumerate(gaps)]
    try:
        g = relative_to_absolute(evs)
    except CodecError:
        return  # zero gap between two identical events
    expect = sorted(itertools.accumulate(gaps))
    assert [e.position for e in g.events] == expect


# apply_events --------------------------------------------------------------


def test_apply_worked_example():
    g = CompressedGenome.from_events([VariantEvent.sub(0, "C"), VariantEvent.sub(4, "T"), VariantEvent.sub(13, "G")])
    assert apply_events(REF, g) == SEQ


def test_apply_nothing():
    assert apply_events(REF, CompressedGenome(NO_REFERENCE)) == REF


def test_apply_full_deletion():
    assert apply_events(REF, CompressedGenome.from_events([VariantEvent.deletion(0, len(REF))])) == ""


def test_apply_indels():
    g = CompressedGenome.from_events(
        [
            VariantEvent.sub(0, "T"),
            *insertion_events(2, "GGGGGGCC"),
            VariantEvent.deletion(5, 3),
            VariantEvent.ins(len(REF), "A"),
        ]
    )
    assert apply_events(REF, g) == "TA" + "GGGGGGCC" + "CGA" + REF[8:] + "A"


def test_apply_insert_and_delete_same_position():
    g = CompressedGenome.from_events([VariantEvent.ins(2, "TT"), VariantEvent.deletion(2, 2)])
    assert apply_events("ACGTA", g) == "ACTTA"


@pytest.mark.parametrize(
    "evs",
    [
        [VariantEvent.sub(16, "A")],
        [VariantEvent.ins(17, "A")],
        [VariantEvent.deletion(10, 7)],
        [VariantEvent.sub(3, "A"), VariantEvent.sub(3, "C")],
        [VariantEvent.deletion(2, 4), VariantEvent.deletion(4, 1)],
        [VariantEvent.deletion(2, 4), VariantEvent.sub(3, "A")],
        [VariantEvent.deletion(2, 4), VariantEvent.ins(3, "A")],
        [VariantEvent.ins(3, "A", 1)],
    ],
)
def test_apply_conflicts(evs):
    with pytest.raises(CodecError):
        apply_events(REF, CompressedGenome.from_events(evs))


def test_apply_wrong_reference():
    g = diff_substitutions(SEQ, REF)
    with pytest.raises(CodecError, match="reference"):
        apply_events(SEQ, g)


# item ids ------------------------------------------------------------------


def test_minimal_substitution_id():
    assert event_to_item_id(VariantEvent.sub(0, "A")) == 1 << 59


def test_id_layout_fields():
    assert event_to_item_id(VariantEvent.sub(5, "T")) == (0b01 << 59) | (5 << 21) | 3
    assert event_to_item_id(VariantEvent.deletion(7, 100)) == (0b11 << 59) | (7 << 21) | 100
    # chunk 2, three bases "CGT" -> 01 10 11, left-aligned in 12 bits
    assert event_to_item_id(VariantEvent.ins(9, "CGT", 2)) == (0b10 << 59) | (9 << 21) | (2 << 15) | (3 << 12) | (
        0b011011 << 6
    )


@given(events())
def test_id_round_trip(e):
    x = event_to_item_id(e)
    assert 0 < x < 2**61 - 1
    assert item_id_to_event(x) == e


def test_ids_injective_on_grid():
    evs = [VariantEvent.sub(p, b) for p in range(8) for b in "ACGT"]
    evs += [VariantEvent.deletion(p, ln) for p in range(8) for ln in (1, 2, 3, MAX_DELETION)]
    evs += [
        VariantEvent.ins(p, "".join(s), c)
        for p in range(4)
        for c in range(3)
        for n in range(1, 4)
        for s in itertools.product("ACGT", repeat=n)
    ]
    ids = [event_to_item_id(e) for e in evs]
    assert len(set(ids)) == len(evs)


@given(events(), events())
def test_ids_order_preserving_in_position(a, b):
    if a.kind is b.kind and a.position < b.position:
        assert event_to_item_id(a) < event_to_item_id(b)


@pytest.mark.parametrize(
    "bad",
    [
        0,
        5,  # reserved tag 00
        (0b01 << 59) | 4,  # stray substitution bits
        (0b10 << 59) | (0 << 12),  # insertion with zero bases
        (0b10 << 59) | (7 << 12),  # seven bases
        (0b10 << 59) | (1 << 12) | 1,  # padding bits set
        (0b11 << 59),  # zero-length deletion
        2**61 - 1,
        2**62,
    ],
)
def test_malformed_ids(bad):
    with pytest.raises(CodecError):
        item_id_to_event(bad)


def test_decode_item_opaque():
    assert decode_item(12345) == 12345
    assert decode_item(1 << 59) == VariantEvent.sub(0, "A")


# events and genomes --------------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: VariantEvent.sub(-1, "A"),
        lambda: VariantEvent.sub(MAX_POSITION + 1, "A"),
        lambda: VariantEvent.sub(0, "N"),
        lambda: VariantEvent.ins(0, ""),
        lambda: VariantEvent.ins(0, "ACGTACG"),
        lambda: VariantEvent.ins(0, "A", 64),
        lambda: VariantEvent.deletion(0, 0),
        lambda: VariantEvent.deletion(0, MAX_DELETION + 1),
        lambda: VariantEvent.deletion(MAX_POSITION, MAX_DELETION),
        lambda: VariantEvent(0, 9, "A"),
        lambda: VariantEvent(0, EventKind.SUBSTITUTION, "A", chunk=1),
    ],
)
def test_invalid_events(make):
    with pytest.raises(CodecError):
        make()


def test_chunking_helpers():
    evs = insertion_events(4, "A" * 13)
    assert [(e.chunk, e.payload) for e in evs] == [(0, "AAAAAA"), (1, "AAAAAA"), (2, "A")]
    with pytest.raises(CodecError):
        insertion_events(0, "A" * 385)
    dels = deletion_events(10, MAX_DELETION + 5)
    assert [(e.position, e.payload) for e in dels] == [(10, MAX_DELETION), (10 + MAX_DELETION, 5)]


def test_genome_canonical_order():
    evs = [VariantEvent.deletion(3, 1), VariantEvent.sub(3, "A"), VariantEvent.ins(1, "C"), VariantEvent.sub(0, "G")]
    a = CompressedGenome.from_events(evs)
    b = CompressedGenome.from_events(reversed(evs))
    assert a == b and a.events == b.events
    assert [e.position for e in a.events] == [0, 1, 3, 3]
    assert a.events[2].kind is EventKind.SUBSTITUTION
    assert format_events(a) == format_events(b)
    p = make_params(10, 0.01, hash_seed=bytes(16))
    assert Ibf.from_items(p, a.item_ids()) == Ibf.from_items(p, b.item_ids())


def test_genome_rejects_duplicates_and_bad_ids():
    with pytest.raises(CodecError):
        CompressedGenome.from_events([VariantEvent.sub(1, "A")] * 2)
    with pytest.raises(CodecError):
        CompressedGenome.from_events([], opaque=[1 << 59])
    with pytest.raises(CodecError):
        CompressedGenome(b"short")


# restriction ---------------------------------------------------------------


def test_restrict_examples():
    g = diff_substitutions(SEQ, REF)
    assert restrict(g, Range(0, len(REF))) == g
    assert restrict(g, Range(5, 5)).events == ()
    assert [e.position for e in restrict(g, Range(1, 14)).events] == [4, 13]


@given(st.lists(st.integers(0, 200), unique=True), st.tuples(st.integers(0, 200), st.integers(0, 200)),
       st.tuples(st.integers(0, 200), st.integers(0, 200)))
def test_restrict_composes(ps, r1, r2):
    g = CompressedGenome.from_events(VariantEvent.sub(p, "A") for p in ps)
    R1, R2 = Range(min(r1), max(r1)), Range(min(r2), max(r2))
    twice = restrict(restrict(g, R1), R2)
    assert twice == restrict(g, R1.intersect(R2))
    assert twice.events == tuple(e for e in g.events if e.position in R1 and e.position in R2)


def test_range_parse():
    assert Range.parse("1..16") == Range(0, 16)
    assert Range.parse("5..5") == Range(4, 5)
    for bad in ("0..3", "3", "a..b", "5..2"):
        with pytest.raises(ValueError):
            Range.parse(bad)
    with pytest.raises(ValueError):
        Range(5, 4)


# symmetric difference through the IBF -------------------------------------


@given(st.sets(events(max_pos=500), max_size=25), st.sets(events(max_pos=500), max_size=25))
def test_ibf_difference_matches_set_oracle(a, b):
    p = make_params(60, 0.01, hash_seed=bytes(range(16)))
    ga, gb = CompressedGenome.from_events(a), CompressedGenome.from_events(b)
    res = list_items(subtract(Ibf.from_items(p, ga.item_ids()), Ibf.from_items(p, gb.item_ids())))
    assert res.complete
    assert {item_id_to_event(x) for x in res.positives} == a - b
    assert {item_id_to_event(x) for x in res.negatives} == b - a


# text format ---------------------------------------------------------------


def test_text_round_trip_and_one_based():
    g = CompressedGenome.from_events(
        [VariantEvent.sub(0, "C"), *insertion_events(9, "ACGTACGTA"), VariantEvent.deletion(20, 4)],
        reference_id(REF),
        opaque=[0xBEEF],
    )
    text = format_events(g)
    assert text.splitlines() == [
        f"#reference {reference_id(REF).hex()}",
        "S1C",
        "I10:ACGTAC",
        "I10.1:GTA",
        "D21:4",
        "Xbeef",
    ]
    assert parse_events(text) == g


def test_parse_splits_long_insertions():
    g = parse_events("I3:AAAAAACCC\n")
    assert [(e.chunk, e.payload) for e in g.events] == [(0, "AAAAAA"), (1, "CCC")]


@given(st.sets(events(max_pos=10**6), max_size=20))
def test_text_round_trip_property(evs):
    g = CompressedGenome.from_events(evs)
    assert parse_events(format_events(g)) == g


@pytest.mark.parametrize("text, line", [("S1C\nS0A\n", 2), ("S1C\nQ5\n", 2), ("I2.1:ACGTACG\n", 1), ("#reference zz\n", 1)])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(CodecError, match=f"f.txt:{line}"):
        parse_events(text, source="f.txt")


def test_read_reference_fasta():
    assert read_reference(">chrM test\nacgt\nACGT\n\n") == "ACGTACGT"
    assert read_reference("ACGT") == "ACGT"
    with pytest.raises(CodecError):
        read_reference(">x\nACGN\n")
