"""Small random automata shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

from nfaslim.core import ScoredNfa, State

ALPHA = b"abcd"


def random_nfa(rng, n_states=8, n_edges=14, alphabet=ALPHA, decimals=2, id="r",
               start_p=0.3, accept_p=0.3):
    """At least one start state; scores on a coarse grid so ties happen."""
    alphabet = list(alphabet)
    states = []
    for i in range(n_states):
        k = int(rng.integers(1, len(alphabet) + 1))
        syms = frozenset(int(x) for x in rng.choice(alphabet, size=k, replace=False))
        states.append(State(f"q{i}", syms, bool(i == 0 or rng.random() < start_p),
                            bool(rng.random() < accept_p)))
    edges = set()
    for _ in range(n_edges):
        edges.add((int(rng.integers(n_states)), int(rng.integers(n_states)),
                   float(np.round(rng.random(), decimals))))
    edges = sorted(edges)
    src = [e[0] for e in edges]
    dst = [e[1] for e in edges]
    sc = [e[2] for e in edges]
    return ScoredNfa.from_arrays(id, states, src, dst, sc)


def with_duplicates(rng, nfa, n_dups):
    """Append copies of random states: same symbols, flags and outgoing edges;
    each copy also receives the incoming edges of its original so it is live."""
    states = list(nfa.states)
    src, dst, sc = (list(a) for a in (nfa.src_index.tolist(), nfa.dst_index.tolist(),
                                      nfa.scores.tolist()))
    base = list(zip(src, dst, sc))
    for k in range(n_dups):
        u = int(rng.integers(len(nfa.states)))
        v = len(states)
        o = nfa.states[u]
        states.append(State(f"d{k}", o.symbols, o.start, o.accept))
        for a, b, c in base:
            if a == u:
                src.append(v); dst.append(b); sc.append(c)
            if b == u and a != u:
                src.append(a); dst.append(v); sc.append(c)
    return ScoredNfa.from_arrays(nfa.id, states, src, dst, sc)


@st.composite
def small_nfas(draw, max_states=10, alphabet=ALPHA):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_states))
    m = draw(st.integers(0, 3 * n))
    return random_nfa(np.random.default_rng(seed), n, m, alphabet)
