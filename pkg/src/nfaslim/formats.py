"""Serialization: score-extended ANML XML, CSV working files, config vectors.

ANML subset understood here::

    <automata-network id="g">
      <state-transition-element id="ste_0" symbol-set="[ACGT]" start="start-of-data">
        <activate-on-match element="ste_1" score="0.83"/>
        <report-on-match/>
      </state-transition-element>
    </automata-network>

``score`` on ``activate-on-match`` is the extension attribute; a missing
score reads as 1.0.
"""

from __future__ import annotations

import csv
import io
from xml.parsers import expat
from xml.sax.saxutils import quoteattr

import numpy as np

from .charclass import CharClassError, format_symbols, parse_symbols
from .core import ALPHABET_SIZE, ScoredNfa, State, node_total_scores, require_valid

TRANSITIONS_HEADER = ["from", "to", "symbol", "score"]
NODES_HEADER = ["id", "in_degree", "out_degree", "total_score", "start", "accept"]
CONFIG_VECTOR_VERSION = 1
BITMAP_BYTES = 32
Q16_MAX = 0xFFFF


class FormatError(ValueError):
    pass


class AnmlParseError(FormatError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AnmlReferenceError(FormatError):
    pass


class CsvFormatError(FormatError):
    pass


class FanoutViolation(ValueError):
    def __init__(self, state_id: str, out_degree: int, max_fanout: int):
        self.state_id = state_id
        super().__init__(f"fanout violation: state {state_id!r} has {out_degree} "
                         f"activations but max_fanout is {max_fanout}")


def format_score(x: float) -> str:
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def _score_texts(nfa: ScoredNfa) -> list[str]:
    # both writers format the same scores; keep the strings with the automaton
    cached = nfa.__dict__.get("_score_text")
    if cached is None:
        cached = [format_score(x) for x in nfa.scores.tolist()]
        nfa.__dict__["_score_text"] = cached
    return cached


# -- ANML ------------------------------------------------------------------

def parse_anml(doc: str | bytes) -> ScoredNfa:
    """Parse a score-extended ANML document (streaming, via expat)."""
    parser = expat.ParserCreate()
    net: dict[str, str] = {}
    states: list[tuple[str, str, bool]] = []
    accepting: set[int] = set()
    src_pos: list[int] = []
    targets: list[str] = []
    raw_scores: list[str | None] = []
    # depth of the open element, and the depth of the open state (0 = none)
    depth = [0, 0]
    add_src, add_target, add_score = src_pos.append, targets.append, raw_scores.append

    def start(name, attrs):
        depth[0] += 1
        in_state = depth[1] == depth[0] - 1
        if name == "activate-on-match":
            if not in_state:
                raise AnmlParseError("activate-on-match outside a state", parser.CurrentLineNumber)
            add_src(len(states) - 1)
            add_target(attrs.get("element", ""))
            add_score(attrs.get("score"))
        elif name == "state-transition-element":
            sid = attrs.get("id")
            if not sid:
                raise AnmlParseError("state-transition-element without id", parser.CurrentLineNumber)
            is_start = attrs.get("start", "none") in ("start-of-data", "all-input")
            states.append((sid, attrs.get("symbol-set", "*"), is_start))
            depth[1] = depth[0]
        elif name == "report-on-match":
            if not in_state:
                raise AnmlParseError("report-on-match outside a state", parser.CurrentLineNumber)
            accepting.add(len(states) - 1)
        elif name == "automata-network":
            net.update(attrs)
        elif depth[0] == 1 and name != "anml":
            raise AnmlParseError(f"unexpected root element <{name}>", parser.CurrentLineNumber)

    def end(name):
        if depth[1] == depth[0]:
            depth[1] = 0
        depth[0] -= 1

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        parser.Parse(doc, True)
    except expat.ExpatError as exc:
        raise AnmlParseError(expat.ErrorString(exc.code), exc.lineno) from None
    if ":" in "".join(targets):
        targets = [t.split(":")[0] for t in targets]  # element="ste:port" form

    alphabet = int(net.get("alphabet-size", ALPHABET_SIZE))
    parsed: dict[str, frozenset[int]] = {}
    out_states = []
    for k, (sid, text, is_start) in enumerate(states):
        if text not in parsed:
            try:
                parsed[text] = parse_symbols(text, alphabet)
            except CharClassError as exc:
                raise AnmlParseError(f"state {sid}: {exc}") from None
        out_states.append(State(sid, parsed[text], is_start, k in accepting))
    index = {s.id: i for i, s in enumerate(out_states)}
    try:
        dst = np.array(list(map(index.__getitem__, targets)), dtype=np.int64)
    except KeyError:
        bad = next(k for k, t in enumerate(targets) if t not in index)
        raise AnmlReferenceError(f"activate-on-match in {states[src_pos[bad]][0]!r} refers to "
                                 f"unknown element {targets[bad]!r}") from None
    try:
        if None in raw_scores:
            raw_scores = [1.0 if sc is None else sc for sc in raw_scores]
        scores = np.array(raw_scores, dtype=np.float64)
    except ValueError:
        raise AnmlParseError("non-numeric score attribute") from None
    nfa = ScoredNfa.from_arrays(net.get("id", ""), out_states, np.array(src_pos, dtype=np.int64),
                                dst, scores, alphabet)
    require_valid(nfa)
    return nfa


def emit_anml(nfa: ScoredNfa) -> str:
    require_valid(nfa)
    out_edges: list[list[str]] = [[] for _ in nfa.states]
    targets = [f'    <activate-on-match element={quoteattr(s.id)} score="' for s in nfa.states]
    for a, b, sc in zip(nfa.src_index.tolist(), nfa.dst_index.tolist(), _score_texts(nfa)):
        out_edges[a].append(f'{targets[b]}{sc}"/>\n')
    alpha = "" if nfa.alphabet_size == ALPHABET_SIZE else f' alphabet-size="{nfa.alphabet_size}"'
    parts = ['<?xml version="1.0" encoding="UTF-8"?>\n',
             f"<automata-network id={quoteattr(nfa.id)}{alpha}>\n"]
    for s, edges in zip(nfa.states, out_edges):
        start = ' start="start-of-data"' if s.start else ""
        symbols = quoteattr(format_symbols(s.symbols, nfa.alphabet_size))
        parts.append(f"  <state-transition-element id={quoteattr(s.id)} symbol-set={symbols}{start}>\n")
        parts.extend(edges)
        if s.accept:
            parts.append("    <report-on-match/>\n")
        parts.append("  </state-transition-element>\n")
    parts.append("</automata-network>\n")
    return "".join(parts)


# -- CSV -------------------------------------------------------------------

_CSV_SPECIAL = frozenset(',"\r\n')


def to_csv(nfa: ScoredNfa) -> tuple[str, str]:
    """Return (transitions.csv text, nodes.csv text)."""
    require_valid(nfa)
    sym_text = [format_symbols(s.symbols, nfa.alphabet_size) for s in nfa.states]
    ids = [s.id for s in nfa.states]
    edges = zip(nfa.src_index.tolist(), nfa.dst_index.tolist(), _score_texts(nfa))
    tbuf = io.StringIO()
    if _CSV_SPECIAL.isdisjoint("".join(ids) + "".join(sym_text)):
        # nothing needs quoting, so plain joins produce exactly what csv.writer would
        tbuf.write(",".join(TRANSITIONS_HEADER) + "\n")
        tbuf.write("".join([f"{ids[a]},{ids[b]},{sym_text[b]},{sc}\n" for a, b, sc in edges]))
    else:
        w = csv.writer(tbuf, lineterminator="\n")
        w.writerow(TRANSITIONS_HEADER)
        w.writerows((ids[a], ids[b], sym_text[b], sc) for a, b, sc in edges)
    nbuf = io.StringIO()
    w = csv.writer(nbuf, lineterminator="\n")
    w.writerow(NODES_HEADER)
    ins, outs, totals = nfa.in_degrees(), nfa.out_degrees(), node_total_scores(nfa)
    w.writerows((s.id, int(i), int(o), format_score(t), int(s.start), int(s.accept))
                for s, i, o, t in zip(nfa.states, ins, outs, totals))
    return tbuf.getvalue(), nbuf.getvalue()


def _rows(text: str, header: list[str], what: str):
    reader = csv.reader(io.StringIO(text))
    got = next(reader, None)
    if got != header:
        raise CsvFormatError(f"{what}: bad header {got!r}, expected {','.join(header)}")
    return reader


def from_csv(transitions_text: str, nodes_text: str, id: str = "",
             alphabet_size: int = ALPHABET_SIZE) -> ScoredNfa:
    """Inverse of :func:`to_csv`.

    nodes.csv carries no symbol column, so states without incoming
    transitions come back with the full alphabet.
    """
    node_rows = []
    for lineno, row in enumerate(_rows(nodes_text, NODES_HEADER, "nodes.csv"), start=2):
        if len(row) != len(NODES_HEADER):
            raise CsvFormatError(f"nodes.csv line {lineno}: expected 6 fields")
        if row[4] not in ("0", "1") or row[5] not in ("0", "1"):
            raise CsvFormatError(f"nodes.csv line {lineno}: flags must be 0/1")
        node_rows.append((row[0], row[4] == "1", row[5] == "1"))
    index = {sid: i for i, (sid, _, _) in enumerate(node_rows)}
    symbols: dict[str, str] = {}
    src, dst, scores = [], [], []
    for lineno, row in enumerate(_rows(transitions_text, TRANSITIONS_HEADER, "transitions.csv"),
                                 start=2):
        if len(row) != 4:
            raise CsvFormatError(f"transitions.csv line {lineno}: expected 4 fields")
        a, b, sym, sc = row
        if a not in index or b not in index:
            raise CsvFormatError(f"transitions.csv line {lineno}: dangling id "
                                 f"{a if a not in index else b!r}")
        try:
            score = float(sc)
        except ValueError:
            raise CsvFormatError(f"transitions.csv line {lineno}: non-numeric score {sc!r}") from None
        if symbols.setdefault(b, sym) != sym:
            raise CsvFormatError(f"transitions.csv line {lineno}: conflicting symbol sets for {b!r}")
        src.append(index[a])
        dst.append(index[b])
        scores.append(score)
    full = frozenset(range(alphabet_size))
    parsed: dict[str, frozenset[int]] = {}
    states = []
    for sid, start, accept in node_rows:
        text = symbols.get(sid)
        if text is None:
            syms = full
        else:
            if text not in parsed:
                try:
                    parsed[text] = parse_symbols(text, alphabet_size)
                except CharClassError as exc:
                    raise CsvFormatError(f"state {sid}: {exc}") from None
            syms = parsed[text]
        states.append(State(sid, syms, start, accept))
    nfa = ScoredNfa.from_arrays(id, states, np.array(src, dtype=np.int64),
                                np.array(dst, dtype=np.int64),
                                np.array(scores, dtype=np.float64), alphabet_size)
    require_valid(nfa)
    return nfa


# -- configuration vectors ---------------------------------------------------

def config_record_dtype(max_fanout: int) -> np.dtype:
    return np.dtype([("bitmap", "u1", (BITMAP_BYTES,)), ("flags", "u1"), ("reserved", "u1"),
                     ("count", "<u2"), ("dest", "<u4", (max_fanout,)),
                     ("score", "<u2", (max_fanout,))])


def config_record_size(max_fanout: int) -> int:
    """Bytes per state record: 32 + 1 + 1 + 2 + 4*F + 2*F."""
    return BITMAP_BYTES + 4 + 6 * max_fanout


def quantize_q16(scores) -> np.ndarray:
    q = np.rint(np.asarray(scores, dtype=np.float64) * 65536.0)
    return np.clip(q, 0, Q16_MAX).astype(np.uint16)


def export_config_vectors(nfa: ScoredNfa, max_fanout: int) -> bytes:
    require_valid(nfa)
    if not 1 <= max_fanout <= 0xFFFF:
        raise ValueError(f"max_fanout must be in [1, 65535], got {max_fanout}")
    if nfa.alphabet_size > BITMAP_BYTES * 8:
        raise ValueError("config vectors hold at most a 256-symbol alphabet")
    outs = nfa.out_degrees()
    if nfa.n_transitions and outs.max() > max_fanout:
        worst = int(np.argmax(outs))
        raise FanoutViolation(nfa.states[worst].id, int(outs[worst]), max_fanout)
    rec = np.zeros(nfa.n_states, dtype=config_record_dtype(max_fanout))
    for i, s in enumerate(nfa.states):
        bits = np.zeros(BITMAP_BYTES * 8, dtype=np.uint8)
        if s.symbols:
            bits[list(s.symbols)] = 1
        rec["bitmap"][i] = np.packbits(bits, bitorder="little")
    rec["flags"] = nfa.start_mask.astype(np.uint8) | (nfa.accept_mask.astype(np.uint8) << 1)
    rec["count"] = outs
    if nfa.n_transitions:
        # slot position of each transition within its source, in declaration order
        order = np.argsort(nfa.src_index, kind="stable")
        src_sorted = nfa.src_index[order]
        first = np.searchsorted(src_sorted, src_sorted, side="left")
        slot = np.arange(len(order)) - first
        rec["dest"][src_sorted, slot] = nfa.dst_index[order]
        rec["score"][src_sorted, slot] = quantize_q16(nfa.scores[order])
    return rec.tobytes()


def decode_config_vectors(data: bytes, max_fanout: int) -> np.ndarray:
    dt = config_record_dtype(max_fanout)
    if len(data) % dt.itemsize:
        raise FormatError(f"{len(data)} bytes is not a whole number of {dt.itemsize}-byte records")
    return np.frombuffer(data, dtype=dt)
