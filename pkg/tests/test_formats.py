import csv
import io
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import random_nfa, small_nfas
from nfaslim.charclass import CharClassError, format_symbols, parse_symbols
from nfaslim.core import ScoredNfa, State, Transition, make_nfa, node_stats
from nfaslim.formats import (NODES_HEADER, TRANSITIONS_HEADER, AnmlParseError, AnmlReferenceError,
                             CsvFormatError, FanoutViolation, config_record_size,
                             decode_config_vectors, emit_anml, export_config_vectors,
                             format_score, from_csv, parse_anml, quantize_q16, to_csv)
from nfaslim.generator import generate, profile_config

A, B = frozenset(b"a"), frozenset(b"b")


# -- character classes ---------------------------------------------------------

@pytest.mark.parametrize("syms,text", [
    (set(range(256)), "*"),
    ({ord("a")}, "a"),
    (set(b"ACGT"), "[ACGT]"),
    (set(range(ord("a"), ord("z") + 1)), "[a-z]"),
    ({0, 10, ord(",")}, "[\\x00\\x0a\\x2c]"),
    (set(), "[]"),
])
def test_format_symbols(syms, text):
    assert format_symbols(syms) == text
    assert parse_symbols(text) == frozenset(syms)


def test_parse_symbols_negation_and_errors():
    assert parse_symbols("[^a]") == frozenset(range(256)) - {ord("a")}
    for bad in ("", "ab", "[ab", "[z-a]", "\\xZZ"):
        with pytest.raises(CharClassError):
            parse_symbols(bad)
    with pytest.raises(CharClassError):
        parse_symbols("e", alphabet_size=4)


@given(st.frozensets(st.integers(0, 255)))
def test_charclass_roundtrip(syms):
    text = format_symbols(syms)
    assert parse_symbols(text) == syms
    assert not set(text) & set(",\"'<>&\n")


# -- ANML ---------------------------------------------------------------------

ONE_STE = """<?xml version="1.0"?>
<automata-network id="one">
  <state-transition-element id="s" symbol-set="a" start="start-of-data">
    <report-on-match/>
  </state-transition-element>
</automata-network>
"""

TWO_STE = """<anml><automata-network id="two">
  <state-transition-element id="ste_0" symbol-set="a" start="all-input">
    <activate-on-match element="ste_1" score="0.83"/>
  </state-transition-element>
  <state-transition-element id="ste_1" symbol-set="[bc]"/>
</automata-network></anml>"""


def test_parse_single_accepting_ste():
    nfa = parse_anml(ONE_STE)
    assert nfa.id == "one" and nfa.n_transitions == 0
    (s,) = nfa.states
    assert s.start and s.accept and s.symbols == A


def test_parse_scored_activation():
    nfa = parse_anml(TWO_STE)
    assert nfa.transitions == (Transition("ste_0", "ste_1", 0.83),)
    assert nfa.states[1].symbols == frozenset(b"bc")


def test_missing_score_defaults_to_one():
    doc = TWO_STE.replace(' score="0.83"', "")
    assert parse_anml(doc).transitions[0].score == 1.0


def test_parse_errors():
    with pytest.raises(AnmlParseError) as exc:
        parse_anml("<automata-network id='x'>\n<state-transition-element id='a'>\n</automata-network>")
    assert exc.value.line == 3
    with pytest.raises(AnmlReferenceError):
        parse_anml(TWO_STE.replace('element="ste_1"', 'element="ghost"'))
    with pytest.raises(AnmlParseError):
        parse_anml(TWO_STE.replace('"0.83"', '"high"'))
    with pytest.raises(AnmlParseError):
        parse_anml("<html/>")


@pytest.mark.parametrize("doc", [ONE_STE, TWO_STE])
def test_parse_emit_roundtrip_examples(doc):
    nfa = parse_anml(doc)
    assert parse_anml(emit_anml(nfa)).same_as(nfa)


def test_generated_1k_roundtrip():
    nfa = generate(profile_config("paper2025", 1024, seed=5))
    back = parse_anml(emit_anml(nfa))
    assert back.same_as(nfa)
    assert np.array_equal(back.scores, nfa.scores)


def test_emit_rejects_invalid():
    with pytest.raises(ValueError):
        emit_anml(make_nfa("bad", [State("a", A, True)], [("a", "zz", 0.1)]))


@given(small_nfas(alphabet=b"ab\x00,\"<"))
def test_anml_roundtrip_property(nfa):
    back = parse_anml(emit_anml(nfa))
    assert back.same_as(nfa) and back.id == nfa.id


def test_format_score():
    assert [format_score(x) for x in (0.0, 1.0, 0.5, 0.125, 0.8300000001, 12.0)] == \
        ["0", "1", "0.5", "0.125", "0.83", "12"]


# -- CSV ------------------------------------------------------------------------

def test_csv_empty_automaton():
    t, n = to_csv(ScoredNfa("e", []))
    assert t == ",".join(TRANSITIONS_HEADER) + "\n"
    assert n == ",".join(NODES_HEADER) + "\n"
    assert from_csv(t, n).n_states == 0


def test_csv_chain_row():
    nfa = make_nfa("c", [State("a", A, True), State("b", B, False, True)], [("a", "b", 0.4)])
    t, n = to_csv(nfa)
    assert t.splitlines()[1] == "a,b,b,0.4"
    back = from_csv(t, n, id="c")
    assert back.transitions == nfa.transitions
    assert back.states[1] == nfa.states[1]
    # "a" has no incoming edge, so no row carries its symbols: it reads back as "*"
    assert back.states[0].symbols == frozenset(range(256)) and back.states[0].start


def test_csv_nodes_match_node_stats():
    ids = ["x", "y", "z"]
    nfa = make_nfa("k3", [State(i, A, i == "x") for i in ids],
                   [(a, b, 0.5) for a in ids for b in ids if a != b])
    _, n = to_csv(nfa)
    rows = [r.split(",") for r in n.splitlines()[1:]]
    for row, s in zip(rows, node_stats(nfa)):
        assert row[0] == s.id
        assert (int(row[1]), int(row[2]), float(row[3])) == (s.in_degree, s.out_degree, s.total_score)
    assert from_csv(*to_csv(nfa), id="k3").same_as(nfa)


def test_csv_errors():
    nfa = make_nfa("c", [State("a", A, True), State("b", B)], [("a", "b", 0.4)])
    t, n = to_csv(nfa)
    with pytest.raises(CsvFormatError):
        from_csv(t.replace("from,to", "src,to"), n)
    with pytest.raises(CsvFormatError):
        from_csv(t.replace("0.4", "abc"), n)
    with pytest.raises(CsvFormatError):
        from_csv(t.replace("a,b,b", "a,q,b"), n)


def test_csv_roundtrip_generated():
    nfa = generate(profile_config("paper2025", 1024, seed=1))
    back = from_csv(*to_csv(nfa), id=nfa.id)
    # start states with no incoming edge have no symbol column; they come back as "*"
    assert [s.id for s in back.states] == [s.id for s in nfa.states]
    assert back.transitions == nfa.transitions


@given(small_nfas())
def test_csv_roundtrip_property(nfa):
    back = from_csv(*to_csv(nfa), id=nfa.id)
    assert back.transitions == nfa.transitions
    incoming = set(nfa.dst_index.tolist())
    for i, (a, b) in enumerate(zip(nfa.states, back.states)):
        assert (a.id, a.start, a.accept) == (b.id, b.start, b.accept)
        if i in incoming:
            assert a.symbols == b.symbols


# -- config vectors ---------------------------------------------------------------

def test_config_record_layout_single_state():
    nfa = make_nfa("one", [State("s", A, True, True)], [])
    data = export_config_vectors(nfa, 1)
    assert len(data) == config_record_size(1) == 32 + 1 + 1 + 2 + 4 + 2
    bitmap = data[:32]
    assert bitmap[ord("a") // 8] == 1 << (ord("a") % 8) and sum(bitmap) == bitmap[ord("a") // 8]
    assert data[32] == 0b11 and data[33] == 0
    assert struct.unpack_from("<H", data, 34)[0] == 0
    assert data[36:] == bytes(6)


def test_config_record_fanout_slots():
    states = [State(f"s{i}", A, i == 0) for i in range(4)]
    nfa = make_nfa("f", states, [("s0", "s1", 0.5), ("s0", "s2", 0.25), ("s0", "s3", 1.0)])
    data = export_config_vectors(nfa, 8)
    assert len(data) == 4 * config_record_size(8)
    rec = decode_config_vectors(data, 8)[0]
    assert rec["count"] == 3
    assert list(rec["dest"]) == [1, 2, 3, 0, 0, 0, 0, 0]
    assert list(rec["score"]) == [0x8000, 0x4000, 0xFFFF, 0, 0, 0, 0, 0]
    off = 36
    assert struct.unpack_from("<8I", data, off) == (1, 2, 3, 0, 0, 0, 0, 0)
    assert struct.unpack_from("<8H", data, off + 32)[0] == 0x8000


def test_q16_quantization():
    assert quantize_q16([0.5])[0] == 0x8000
    assert quantize_q16([0.0, 1.0, 7.0]).tolist() == [0, 0xFFFF, 0xFFFF]


def test_config_fanout_violation_names_state():
    nfa = make_nfa("f", [State("hub", A, True), State("x", A), State("y", A)],
                   [("hub", "x", 0.1), ("hub", "y", 0.2)])
    with pytest.raises(FanoutViolation) as exc:
        export_config_vectors(nfa, 1)
    assert "fanout violation" in str(exc.value) and "hub" in str(exc.value)


def test_config_export_deterministic_and_within_ulp():
    nfa = random_nfa(np.random.default_rng(3), 10, 25, decimals=6)
    f = max(1, nfa.max_out_degree())
    a, b = export_config_vectors(nfa, f), export_config_vectors(nfa, f)
    assert a == b
    rec = decode_config_vectors(a, f)
    for i in range(nfa.n_states):
        mine = np.flatnonzero(nfa.src_index == i)
        q = rec["score"][i][:len(mine)] / 65536.0
        assert np.all(np.abs(q - nfa.scores[mine]) <= 1 / 65536)
        assert list(rec["dest"][i][:len(mine)]) == nfa.dst_index[mine].tolist()


@given(small_nfas())
def test_transitions_csv_matches_csv_writer(nfa):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["from", "to", "symbol", "score"])
    for t in nfa.transitions:
        dst = nfa.states[nfa.index[t.dst]]
        w.writerow([t.src, t.dst, format_symbols(dst.symbols, nfa.alphabet_size),
                    format_score(t.score)])
    assert to_csv(nfa)[0] == buf.getvalue()
