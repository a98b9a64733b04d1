"""In-memory scored NFA: states carry symbol sets, transitions carry scores.

Homogeneous convention: a state's symbol set is tested when the state is
entered, so the symbol attached to a transition is the one of its target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ALPHABET_SIZE = 256


class ValidationError(ValueError):
    """Raised when an operation needs a valid automaton and got one that is not."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"invalid automaton: {head}{more}")


@dataclass(frozen=True)
class State:
    id: str
    symbols: frozenset[int]
    start: bool = False
    accept: bool = False

    def matches(self, symbol: int) -> bool:
        return symbol in self.symbols


class Transition(NamedTuple):
    src: str
    dst: str
    score: float


class NodeStats(NamedTuple):
    id: str
    in_degree: int
    out_degree: int
    total_score: float


@dataclass(frozen=True)
class Violation:
    kind: str
    locus: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.locus}: {self.message}"


class ScoredNfa:
    """Immutable scored automaton.

    ``transitions`` holds (src, dst, score) records in declaration order.
    Index-based numpy views (``src_index``, ``dst_index``, ``scores``) are
    derived lazily and only exist for automata without dangling endpoints.
    Automata built with :meth:`from_arrays` materialise the records on demand.
    """

    def __init__(self, id: str, states: Iterable[State], transitions: Iterable[Transition] = (),
                 alphabet_size: int = ALPHABET_SIZE):
        self.id = id
        self.states = tuple(states)
        self._records: tuple[Transition, ...] | None = tuple(transitions)
        self.alphabet_size = alphabet_size
        self._arrays: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_arrays(cls, id: str, states: Sequence[State], src: np.ndarray,
                    dst: np.ndarray, scores: np.ndarray,
                    alphabet_size: int = ALPHABET_SIZE) -> "ScoredNfa":
        src = np.array(src, dtype=np.int64)
        dst = np.array(dst, dtype=np.int64)
        scores = np.array(scores, dtype=np.float64)
        if not len(src) == len(dst) == len(scores):
            raise ValueError("src, dst and scores must have equal length")
        n = len(states)
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("transition index outside the state range")
        for a in (src, dst, scores):
            a.flags.writeable = False
        nfa = cls(id, states, (), alphabet_size)
        nfa._records = None
        nfa._arrays = (src, dst, scores)
        return nfa

    def renamed(self, id: str) -> "ScoredNfa":
        if self._arrays is not None:
            return ScoredNfa.from_arrays(id, self.states, *self._arrays, self.alphabet_size)
        return ScoredNfa(id, self.states, self.transitions, self.alphabet_size)

    def __setattr__(self, name, value):
        if name in self.__dict__ and name in ("id", "states", "alphabet_size"):
            raise AttributeError(f"ScoredNfa is immutable; cannot set {name}")
        super().__setattr__(name, value)

    def __repr__(self) -> str:
        return (f"ScoredNfa(id={self.id!r}, states={self.n_states}, "
                f"transitions={self.n_transitions})")

    @property
    def transitions(self) -> tuple[Transition, ...]:
        if self._records is None:
            src, dst, scores = self._arrays
            ids = [s.id for s in self.states]
            self._records = tuple(map(Transition, [ids[i] for i in src.tolist()],
                                      [ids[j] for j in dst.tolist()], scores.tolist()))
        return self._records

    # -- lookups -----------------------------------------------------------

    @cached_property
    def index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.states)}

    def _views(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._arrays is None:
            index = self.index
            try:
                src = np.fromiter((index[t.src] for t in self.transitions), np.int64,
                                  len(self.transitions))
                dst = np.fromiter((index[t.dst] for t in self.transitions), np.int64,
                                  len(self.transitions))
            except KeyError:
                raise ValidationError(validate(self)) from None
            scores = np.fromiter((t.score for t in self.transitions), np.float64,
                                 len(self.transitions))
            for a in (src, dst, scores):
                a.flags.writeable = False
            self._arrays = (src, dst, scores)
        return self._arrays

    @property
    def src_index(self) -> np.ndarray:
        return self._views()[0]

    @property
    def dst_index(self) -> np.ndarray:
        return self._views()[1]

    @property
    def scores(self) -> np.ndarray:
        return self._views()[2]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        if self._arrays is not None:
            return len(self._arrays[0])
        return len(self._records)

    @cached_property
    def start_mask(self) -> np.ndarray:
        return np.array([s.start for s in self.states], dtype=bool)

    @cached_property
    def accept_mask(self) -> np.ndarray:
        return np.array([s.accept for s in self.states], dtype=bool)

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.src_index, minlength=self.n_states)

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst_index, minlength=self.n_states)

    def max_out_degree(self) -> int:
        return int(self.out_degrees().max()) if self.n_transitions else 0

    def subgraph(self, keep_states: np.ndarray | None = None,
                 keep_transitions: np.ndarray | None = None,
                 id: str | None = None) -> "ScoredNfa":
        """Restrict to a boolean state mask and/or transition mask."""
        src, dst, scores = self._views()
        tmask = np.ones(len(src), dtype=bool) if keep_transitions is None \
            else np.asarray(keep_transitions, dtype=bool)
        if keep_states is None:
            keep_states = np.ones(self.n_states, dtype=bool)
        keep_states = np.asarray(keep_states, dtype=bool)
        tmask = tmask & keep_states[src] & keep_states[dst]
        remap = np.cumsum(keep_states) - 1
        states = [s for s, k in zip(self.states, keep_states) if k]
        out = ScoredNfa.from_arrays(id or self.id, states, remap[src[tmask]],
                                    remap[dst[tmask]], scores[tmask], self.alphabet_size)
        if self.__dict__.get("_violations") == []:
            # restricting a valid automaton cannot introduce a violation
            out.__dict__["_violations"] = []
        return out

    def same_as(self, other: "ScoredNfa") -> bool:
        """Structural identity: states (by id) and the transition multiset."""
        if {s.id: s for s in self.states} != {s.id: s for s in other.states}:
            return False
        return sorted(self.transitions) == sorted(other.transitions)


def validate(nfa: ScoredNfa) -> list[Violation]:
    """Every invariant violation, with its locus. Never raises."""
    cached = nfa.__dict__.get("_violations")
    if cached is None:
        cached = _validate(nfa)
        nfa.__dict__["_violations"] = cached
    return list(cached)


def _validate(nfa: ScoredNfa) -> list[Violation]:
    out: list[Violation] = []
    seen: set[str] = set()
    for s in nfa.states:
        if s.id in seen:
            out.append(Violation("duplicate-state", s.id, "state id declared twice"))
        seen.add(s.id)
        bad = [x for x in s.symbols if not 0 <= x < nfa.alphabet_size]
        if bad:
            out.append(Violation("symbol-range", s.id, f"symbols outside alphabet: {sorted(bad)[:4]}"))
    if nfa._arrays is not None and len(seen) == nfa.n_states:
        out.extend(_validate_arrays(nfa))
        has_incoming = np.zeros(nfa.n_states, dtype=bool)
        has_incoming[nfa.dst_index] = True
    else:
        out.extend(_validate_records(nfa, seen))
        incoming = {t.dst for t in nfa.transitions}
        has_incoming = np.array([s.id in incoming for s in nfa.states], dtype=bool)
    for s, inc in zip(nfa.states, has_incoming):
        if not s.symbols and (s.start or inc):
            out.append(Violation("empty-symbol-set", s.id, "reachable state matches nothing"))
    return out


def _validate_records(nfa: ScoredNfa, ids: set[str]) -> list[Violation]:
    out = []
    triples: set[tuple[str, str, float]] = set()
    for k, t in enumerate(nfa.transitions):
        locus = f"transition[{k}] {t.src}->{t.dst}"
        for end in (t.src, t.dst):
            if end not in ids:
                out.append(Violation("dangling-endpoint", locus, f"unknown state id {end!r}"))
        if not isinstance(t.score, (int, float)) or not math.isfinite(t.score):
            out.append(Violation("non-finite-score", locus, f"score {t.score!r}"))
        elif t.score < 0:
            out.append(Violation("negative-score", locus, f"score {t.score!r} < 0"))
        if t in triples:
            out.append(Violation("duplicate-transition", locus, "same (from, to, score) repeated"))
        triples.add(t)
    return out


def _validate_arrays(nfa: ScoredNfa) -> list[Violation]:
    src, dst, scores = nfa._arrays
    out = []

    def locus(k):
        t = nfa.transitions[k]
        return f"transition[{k}] {t.src}->{t.dst}"

    for k in np.flatnonzero(~np.isfinite(scores)):
        out.append(Violation("non-finite-score", locus(k), f"score {scores[k]!r}"))
    for k in np.flatnonzero(scores < 0):
        out.append(Violation("negative-score", locus(k), f"score {scores[k]!r} < 0"))
    if len(src) > 1:
        order = np.lexsort((scores, dst, src))
        s, d, c = src[order], dst[order], scores[order]
        same = (s[1:] == s[:-1]) & (d[1:] == d[:-1]) & (c[1:] == c[:-1])
        for k in np.sort(order[1:][same]):
            out.append(Violation("duplicate-transition", locus(k), "same (from, to, score) repeated"))
    return out


def require_valid(nfa: ScoredNfa) -> None:
    violations = validate(nfa)
    if violations:
        raise ValidationError(violations)


def node_stats(nfa: ScoredNfa) -> list[NodeStats]:
    require_valid(nfa)
    ins = nfa.in_degrees()
    outs = nfa.out_degrees()
    total = node_total_scores(nfa)
    return [NodeStats(s.id, int(i), int(o), float(t))
            for s, i, o, t in zip(nfa.states, ins, outs, total)]


def node_total_scores(nfa: ScoredNfa) -> np.ndarray:
    n = nfa.n_states
    return (np.bincount(nfa.src_index, weights=nfa.scores, minlength=n)
            + np.bincount(nfa.dst_index, weights=nfa.scores, minlength=n))


def avg_transitions_per_node(nfa: ScoredNfa) -> float:
    if nfa.n_states == 0:
        raise ZeroDivisionError("average transitions per node is undefined for zero states")
    return nfa.n_transitions / nfa.n_states


def make_nfa(id: str, states: Iterable[State], transitions: Iterable[tuple],
             alphabet_size: int = ALPHABET_SIZE) -> ScoredNfa:
    """Convenience constructor accepting plain tuples for transitions."""
    return ScoredNfa(id, tuple(states), tuple(Transition(a, b, float(c)) for a, b, c in transitions),
                     alphabet_size)
