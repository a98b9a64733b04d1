"""The deterministic random-automaton suite used by the semantic checks."""

import itertools

import numpy as np

from helpers import random_nfa, with_duplicates

SUITE_SIZE = 500
SUITE_ALPHABET = b"abcd"
SUITE_MAX_LEN = 5
THETAS = (0.2, 0.35, 0.5, 0.7)


def semantic_suite(n=SUITE_SIZE, seed=2025):
    """``n`` automata with at most 10 states over a 4-symbol alphabet; every
    third one carries injected duplicate states."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        if k % 3 == 2:
            base = random_nfa(rng, int(rng.integers(2, 8)), int(rng.integers(1, 14)), id=f"s{k}")
            nfa = with_duplicates(rng, base, int(rng.integers(1, 11 - base.n_states)))
        else:
            size = int(rng.integers(1, 11))
            nfa = random_nfa(rng, size, int(rng.integers(0, 3 * size + 1)), id=f"s{k}")
        out.append((nfa, THETAS[k % len(THETAS)]))
    return out


def all_inputs(max_len=SUITE_MAX_LEN, alphabet=SUITE_ALPHABET):
    return [bytes(p) for n in range(max_len + 1) for p in itertools.product(alphabet, repeat=n)]
