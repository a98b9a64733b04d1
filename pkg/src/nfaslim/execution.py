"""Min-cost execution of scored NFAs and the brute-force path oracle.

A start state is active at offset 0 (cost 0) when it matches the first
symbol. A transition ``u -> v`` with score ``s`` carries an active ``u`` at
offset ``t`` to ``v`` at ``t + 1`` if ``v`` matches the next symbol, at cost
``cost(u) + s``. Every active accepting state reports a match with the
minimum cost over all paths reaching it.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .core import ScoredNfa, require_valid

BRUTE_FORCE_MAX_STATES = 12
BRUTE_FORCE_MAX_LEN = 6
# automata with more transitions than this step with numpy instead of dicts
VECTOR_STEP_THRESHOLD = 2048


class MatchRecord(NamedTuple):
    end_offset: int
    accept_state: str
    min_cost: float


def as_symbols(data, alphabet_size: int) -> list[int]:
    if isinstance(data, str):
        data = data.encode("latin-1")
    syms = list(data)
    bad = [s for s in syms if not 0 <= s < alphabet_size]
    if bad:
        raise ValueError(f"symbols outside the alphabet: {bad[:4]}")
    return syms


class Engine:
    """Frontier dynamic programming over one automaton.

    A frontier maps active state index -> minimum cost. Small automata use
    dict frontiers; large ones use dense cost vectors with +inf for inactive
    states. Both evaluate ``cost(u) + s`` in the same order, so the minima are
    bit-identical.
    """

    def __init__(self, nfa: ScoredNfa, all_offsets: bool = False, vectorized: bool | None = None):
        require_valid(nfa)
        self.nfa = nfa
        self.all_offsets = all_offsets
        self.vectorized = (nfa.n_transitions > VECTOR_STEP_THRESHOLD
                           if vectorized is None else vectorized)
        self.starts = [i for i, s in enumerate(nfa.states) if s.start]
        self.accepts = nfa.accept_mask
        self._sym_mask: dict[int, np.ndarray] = {}
        if self.vectorized:
            order = np.argsort(nfa.dst_index, kind="stable")
            self._src = nfa.src_index[order]
            self._dst = nfa.dst_index[order]
            self._sc = nfa.scores[order]
            self._dst_start = np.flatnonzero(np.r_[True, self._dst[1:] != self._dst[:-1]]) \
                if len(order) else np.empty(0, dtype=np.int64)
        else:
            self.out: list[list[tuple[int, float]]] = [[] for _ in nfa.states]
            for a, b, c in zip(nfa.src_index.tolist(), nfa.dst_index.tolist(),
                               nfa.scores.tolist()):
                self.out[a].append((b, c))

    def matches(self, state: int, symbol: int) -> bool:
        return symbol in self.nfa.states[state].symbols

    def symbol_mask(self, symbol: int) -> np.ndarray:
        m = self._sym_mask.get(symbol)
        if m is None:
            m = np.array([symbol in s.symbols for s in self.nfa.states], dtype=bool)
            self._sym_mask[symbol] = m
        return m

    # -- frontiers -----------------------------------------------------------

    def empty(self):
        return np.full(self.nfa.n_states, np.inf) if self.vectorized else {}

    def step(self, frontier, symbol: int, offset: int):
        """Advance ``frontier`` (active at offset - 1) over ``symbol`` at ``offset``."""
        if self.vectorized:
            new = np.full(self.nfa.n_states, np.inf)
            if offset > 0 and len(self._src):
                cand = frontier[self._src] + self._sc
                mins = np.minimum.reduceat(cand, self._dst_start)
                new[self._dst[self._dst_start]] = mins
                new[~self.symbol_mask(symbol)] = np.inf
            if offset == 0 or self.all_offsets:
                arm = [s for s in self.starts if self.matches(s, symbol)]
                new[arm] = np.minimum(new[arm], 0.0)
            return new
        new: dict[int, float] = {}
        if offset > 0:
            states = self.nfa.states
            for u, cu in frontier.items():
                for v, s in self.out[u]:
                    if symbol in states[v].symbols:
                        c = cu + s
                        if c < new.get(v, math.inf):
                            new[v] = c
        if offset == 0 or self.all_offsets:
            for s in self.starts:
                if self.matches(s, symbol) and new.get(s, math.inf) > 0.0:
                    new[s] = 0.0
        return new

    def reports(self, frontier, offset: int) -> list[MatchRecord]:
        ids = self.nfa.states
        if self.vectorized:
            hit = np.flatnonzero(np.isfinite(frontier) & self.accepts)
            return [MatchRecord(offset, ids[i].id, float(frontier[i])) for i in hit]
        return sorted(MatchRecord(offset, ids[i].id, c) for i, c in frontier.items()
                      if self.accepts[i])

    def is_dead(self, frontier) -> bool:
        if self.vectorized:
            return not np.isfinite(frontier).any()
        return not frontier

    def run(self, symbols: Sequence[int]) -> list[MatchRecord]:
        out: list[MatchRecord] = []
        frontier = self.empty()
        for t, sym in enumerate(symbols):
            frontier = self.step(frontier, sym, t)
            out.extend(self.reports(frontier, t))
            if not self.all_offsets and self.is_dead(frontier):
                break
        return sorted(out)


def simulate(nfa: ScoredNfa, data, all_offsets: bool = False) -> list[MatchRecord]:
    return Engine(nfa, all_offsets).run(as_symbols(data, nfa.alphabet_size))


def brute_force_matches(nfa: ScoredNfa, data, all_offsets: bool = False) -> list[MatchRecord]:
    """Enumerate every path explicitly. Exponential; guarded to small inputs."""
    require_valid(nfa)
    if nfa.n_states > BRUTE_FORCE_MAX_STATES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_STATES} states")
    symbols = as_symbols(data, nfa.alphabet_size)
    if len(symbols) > BRUTE_FORCE_MAX_LEN:
        raise ValueError(f"brute force limited to inputs of length {BRUTE_FORCE_MAX_LEN}")
    states = nfa.states
    edges = list(zip(nfa.src_index.tolist(), nfa.dst_index.tolist(), nfa.scores.tolist()))
    best: dict[tuple[int, int], float] = {}

    def walk(state: int, offset: int, cost: float) -> None:
        if states[state].accept:
            key = (offset, state)
            if cost < best.get(key, math.inf):
                best[key] = cost
        if offset + 1 == len(symbols):
            return
        nxt = symbols[offset + 1]
        for a, b, s in edges:
            if a == state and nxt in states[b].symbols:
                walk(b, offset + 1, cost + s)

    first_offsets = range(len(symbols)) if all_offsets else range(min(1, len(symbols)))
    for t in first_offsets:
        for i, st in enumerate(states):
            if st.start and symbols[t] in st.symbols:
                walk(i, t, 0.0)
    return sorted(MatchRecord(off, states[i].id, c) for (off, i), c in best.items())


def best_by_offset(records: Iterable[MatchRecord]) -> dict[int, float]:
    """Minimum cost per end offset, over all accepting states."""
    out: dict[int, float] = {}
    for r in records:
        if r.min_cost < out.get(r.end_offset, math.inf):
            out[r.end_offset] = r.min_cost
    return out


def matches_to_jsonl(input_id: str, records: Iterable[MatchRecord]) -> str:
    return "".join(json.dumps({"input_id": input_id, "end_offset": r.end_offset,
                               "accept_state": r.accept_state, "min_cost": r.min_cost}) + "\n"
                   for r in records)


# -- equivalence ---------------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    """Inputs to compare on: every string up to ``max_len`` over ``alphabet``
    (``exhaustive``), or ``samples`` random strings of length 1..max_len."""

    alphabet: Sequence[int] | int = 4
    max_len: int = 4
    exhaustive: bool = True
    samples: int = 1000
    seed: int = 0
    all_offsets: bool = False


@dataclass
class Counterexample:
    input: list[int]
    kind: str
    end_offset: int
    expected: float | None
    got: float | None


@dataclass
class EquivalenceReport:
    inputs_checked: int = 0
    subset_violations: int = 0
    completeness_violations: int = 0
    cost_mismatches: int = 0
    counterexamples: list[Counterexample] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.subset_violations + self.completeness_violations + self.cost_mismatches

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"inputs_checked": self.inputs_checked,
                "subset_violations": self.subset_violations,
                "completeness_violations": self.completeness_violations,
                "cost_mismatches": self.cost_mismatches,
                "counterexamples": [vars(c) for c in self.counterexamples]}


def resolve_alphabet(alphabet, *automata: ScoredNfa) -> list[int]:
    """An int picks that many symbols, preferring those the automata use."""
    if not isinstance(alphabet, int):
        return list(as_symbols(alphabet, automata[0].alphabet_size if automata else 256))
    size = automata[0].alphabet_size if automata else 256
    used = sorted(set().union(*(s.symbols for a in automata for s in a.states))) if automata else []
    if len(used) >= size:
        used = []
    picked = used[:alphabet]
    filler = (x for x in range(size) if x not in set(used))
    while len(picked) < alphabet:
        picked.append(next(filler))
    return picked


def iter_inputs(trial: TrialConfig, symbols: Sequence[int]) -> Iterator[tuple[int, ...]]:
    if trial.exhaustive:
        for n in range(trial.max_len + 1):
            yield from itertools.product(symbols, repeat=n)
    else:
        rng = np.random.default_rng(trial.seed)
        for _ in range(trial.samples):
            n = int(rng.integers(1, trial.max_len + 1))
            yield tuple(int(symbols[i]) for i in rng.integers(0, len(symbols), n))


def _restricted(nfa: ScoredNfa, floor: float) -> ScoredNfa:
    return nfa.subgraph(keep_transitions=nfa.scores > floor)


def _compare(inp, orig: dict, pruned: dict, full_hi: dict, report: EquivalenceReport,
             max_examples: int) -> None:
    def note(kind, off, exp, got):
        if len(report.counterexamples) < max_examples:
            report.counterexamples.append(Counterexample(list(inp), kind, off, exp, got))

    for off, c in pruned.items():
        if off not in orig:
            report.subset_violations += 1
            note("subset", off, None, c)
        elif c < orig[off]:
            report.cost_mismatches += 1
            note("cost-below-original", off, orig[off], c)
    for off, c in full_hi.items():
        if orig.get(off) != c:
            continue  # the cheapest original path uses a low-score edge
        if off not in pruned:
            report.completeness_violations += 1
            note("completeness", off, c, None)
        elif pruned[off] != c:
            report.cost_mismatches += 1
            note("cost", off, c, pruned[off])


def check_equivalence(original: ScoredNfa, pruned: ScoredNfa, theta: float,
                      trial: TrialConfig = TrialConfig(), delta: float = 0.0,
                      max_examples: int = 20) -> EquivalenceReport:
    """Compare per-offset best matches of ``pruned`` against ``original``.

    (a) every offset the pruned automaton reports is reported by the original,
    never more cheaply; (b) every original match whose cheapest path uses only
    transitions scoring above ``theta + delta`` is reported by the pruned
    automaton at the same cost.
    """
    require_valid(original)
    require_valid(pruned)
    symbols = resolve_alphabet(trial.alphabet, original, pruned)
    hi = _restricted(original, theta + delta)
    engines = [Engine(a, trial.all_offsets) for a in (original, pruned, hi)]
    report = EquivalenceReport()
    if trial.exhaustive:
        _walk_trie(engines, symbols, trial.max_len, report, max_examples)
    else:
        for inp in iter_inputs(trial, symbols):
            o, p, h = (best_by_offset(e.run(inp)) for e in engines)
            report.inputs_checked += 1
            _compare(inp, o, p, h, report, max_examples)
    return report


def _walk_trie(engines: list[Engine], symbols: Sequence[int], max_len: int,
               report: EquivalenceReport, max_examples: int) -> None:
    """Exhaustive comparison sharing frontiers between inputs with a common prefix."""
    # the empty input has no matches anywhere
    report.inputs_checked += 1

    def rec(prefix: list[int], frontiers, found: list[dict]):
        t = len(prefix)
        for sym in symbols:
            nxt = [e.step(f, sym, t) for e, f in zip(engines, frontiers)]
            seen = []
            for e, f, prev in zip(engines, nxt, found):
                cur = dict(prev)
                for r in e.reports(f, t):
                    if r.min_cost < cur.get(r.end_offset, math.inf):
                        cur[r.end_offset] = r.min_cost
                seen.append(cur)
            inp = prefix + [sym]
            report.inputs_checked += 1
            _compare(inp, seen[0], seen[1], seen[2], report, max_examples)
            if t + 1 < max_len:
                rec(inp, nxt, seen)

    if max_len > 0:
        rec([], [e.empty() for e in engines], [{}, {}, {}])
