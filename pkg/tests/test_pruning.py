import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import random_nfa, small_nfas, with_duplicates
from suites import all_inputs
from nfaslim.core import ScoredNfa, State, make_nfa, validate
from nfaslim.execution import TrialConfig, best_by_offset, check_equivalence, simulate
from nfaslim.features import FEATURE_NAMES, MaskMismatchError
from nfaslim.forest import ConstantModel, RfConfig, ThresholdModel
from nfaslim.generator import generate, profile_config
from nfaslim.pruning import (EmptyLanguageWarning, NoStartStateError, PruneConfig, live_states,
                             merge_duplicates, merge_with_map, prune, remove_unreachable,
                             threshold_estimate)

A, B = frozenset(b"a"), frozenset(b"b")


def same_language(x, y, max_len=4, alphabet=b"abcd", all_offsets=False):
    for w in all_inputs(max_len, alphabet):
        if best_by_offset(simulate(x, w, all_offsets)) != best_by_offset(simulate(y, w, all_offsets)):
            return False
    return True


# -- estimate -------------------------------------------------------------------------

def test_threshold_estimate_examples():
    nfa = make_nfa("e", [State("a", A, True), State("b", A)],
                   [("a", "b", 0.2), ("a", "b", 0.5), ("a", "b", 0.9)])
    est = threshold_estimate(nfa, 0.5)
    assert est.estimated_kept_transitions == 1 and est.estimated_ratio == pytest.approx(1 / 3)
    assert threshold_estimate(nfa, 0.1).estimated_kept_transitions == 3


def test_threshold_estimate_uniform_10k():
    rng = np.random.default_rng(0)
    n = 10_000
    states = [State(f"s{i}", A, i == 0) for i in range(100)]
    src = rng.integers(0, 100, n)
    dst = rng.integers(0, 100, n)
    nfa = ScoredNfa.from_arrays("u", states, src, dst, rng.random(n))
    assert abs(threshold_estimate(nfa, 0.35).estimated_ratio - 0.65) <= 0.02


# -- reachability ----------------------------------------------------------------------

def test_isolated_node_removed():
    nfa = make_nfa("c", [State("s", A, True), State("t", B, False, True), State("iso", A)],
                   [("s", "t", 0.5)])
    out = remove_unreachable(nfa)
    assert [s.id for s in out.states] == ["s", "t"] and out.n_transitions == 1


def test_dead_end_removed():
    nfa = make_nfa("d", [State("s", A, True), State("t", B, False, True), State("dead", B)],
                   [("s", "t", 0.5), ("s", "dead", 0.5)])
    assert [s.id for s in remove_unreachable(nfa).states] == ["s", "t"]


def test_fully_live_is_identity():
    nfa = make_nfa("c", [State("s", A, True), State("t", B, False, True)], [("s", "t", 0.5)])
    assert remove_unreachable(nfa).same_as(nfa)


def test_reachability_errors():
    with pytest.raises(NoStartStateError):
        remove_unreachable(make_nfa("n", [State("s", A, False, True)], []))
    nfa = make_nfa("n", [State("s", A, True), State("t", B)], [("s", "t", 0.5)])
    with pytest.warns(EmptyLanguageWarning):
        out = remove_unreachable(nfa)
    assert out.n_states == 0 and out.n_transitions == 0


@pytest.mark.parametrize("seed", range(5))
def test_reachability_preserves_language_50_states(seed):
    rng = np.random.default_rng(seed)
    nfa = random_nfa(rng, 50, 70, start_p=0.05, accept_p=0.15)
    out = remove_unreachable(nfa)
    assert out.n_states < nfa.n_states
    assert live_states(out).all()
    assert same_language(nfa, out, 4)


# -- merge --------------------------------------------------------------------------------

def dup_pair_example():
    """s -> {d1, d2} with the same score, both leading to the accept state."""
    states = [State("s", A, True), State("d1", B), State("d2", B), State("acc", A, False, True)]
    return make_nfa("dups", states, [("s", "d1", 0.6), ("s", "d2", 0.6),
                                     ("d1", "acc", 0.3), ("d2", "acc", 0.3)])


def test_duplicate_pair_merged():
    out, absorbed = merge_with_map(dup_pair_example())
    assert [s.id for s in out.states] == ["s", "d1", "acc"]
    assert absorbed == {"d2": "d1"}
    assert sorted(out.transitions) == sorted([("s", "d1", 0.6), ("d1", "acc", 0.3)])
    assert same_language(dup_pair_example(), out, 4, b"ab")


def test_no_duplicates_is_identity():
    nfa = make_nfa("c", [State("s", A, True), State("t", B, False, True)], [("s", "t", 0.5)])
    out, absorbed = merge_with_map(nfa)
    assert out is nfa and absorbed == {}


def test_merge_reaches_fixpoint():
    # d1/d2 become equal only after their successors e1/e2 merge
    states = [State("s", A, True), State("d1", B), State("d2", B), State("e1", A), State("e2", A),
              State("acc", B, False, True)]
    nfa = make_nfa("fx", states, [("s", "d1", 0.1), ("s", "d2", 0.2), ("d1", "e1", 0.3),
                                  ("d2", "e2", 0.3), ("e1", "acc", 0.4), ("e2", "acc", 0.4)])
    out, absorbed = merge_with_map(nfa)
    assert absorbed == {"e2": "e1", "d2": "d1"}
    assert out.n_states == 4 and validate(out) == []
    assert merge_duplicates(out) is out
    assert same_language(nfa, out, 4, b"ab")


@pytest.mark.parametrize("seed", range(6))
def test_merge_30_states_with_duplicates(seed):
    rng = np.random.default_rng(100 + seed)
    nfa = with_duplicates(rng, random_nfa(rng, 22, 45), 8)
    assert nfa.n_states == 30
    out = merge_duplicates(nfa)
    # copies that point at each other never become identical under the
    # outgoing-multiset rule, so not every copy is absorbed
    assert out.n_states < nfa.n_states
    assert same_language(nfa, out, 4)
    assert same_language(nfa, out, 3, all_offsets=True)


# -- prune --------------------------------------------------------------------------------

def test_constant_one_without_cleanup_is_identity():
    nfa = random_nfa(np.random.default_rng(1), 10, 20)
    cfg = PruneConfig(0.5, enable_merge=False, enable_reachability=False)
    out, rep = prune(nfa, ConstantModel(1), cfg)
    assert out.same_as(nfa) and rep.prune_ratio == 0.0
    assert rep.classifier_kept == nfa.n_transitions


def test_constant_zero_empties_everything():
    nfa = dup_pair_example()
    out, rep = prune(nfa, ConstantModel(0), PruneConfig(0.5))
    assert out.n_transitions == 0 and out.n_states == 0
    assert rep.accept_states_preserved is False and rep.prune_ratio == 1.0
    assert rep.nodes_after == 0 and rep.edge_coverage == 0.0


def test_prune_leaves_original_untouched():
    nfa = dup_pair_example()
    before = (nfa.transitions, nfa.states)
    prune(nfa, ThresholdModel(0.5), PruneConfig(0.5))
    assert (nfa.transitions, nfa.states) == before


def test_prune_mask_mismatch():
    with pytest.raises(MaskMismatchError):
        prune(dup_pair_example(), ConstantModel(1), PruneConfig(0.5, mask=FEATURE_NAMES))


def test_prune_report_fields():
    out, rep = prune(dup_pair_example(), ThresholdModel(0.25), PruneConfig(0.25))
    assert rep.merged_states == 1 and rep.accept_states_preserved
    assert rep.nodes_before == 4 and rep.nodes_after == 3 and rep.transitions_after == 2
    assert rep.edge_coverage == pytest.approx(0.9 / 1.8)
    assert rep.model_accuracy == 1.0 and rep.wall_time_ms >= 0
    assert set(rep.to_dict()) >= {"prune_ratio", "model_accuracy", "accept_states_before",
                                  "accept_states_after", "edge_coverage", "wall_time_ms"}
    quiet = prune(dup_pair_example(), ThresholdModel(0.5), PruneConfig(0.5, record_timing=False))[1]
    assert quiet.wall_time_ms is None


def test_uniform_8k_ratio_band():
    nfa = generate(profile_config("paper2025", 8192, seed=12))
    out, rep = prune(nfa, ThresholdModel(0.35), PruneConfig(0.35))
    assert 0.30 <= rep.prune_ratio <= 0.40
    assert live_states(out).all()


def test_theta_must_be_finite():
    with pytest.raises(ValueError):
        PruneConfig(float("inf"))


# -- properties ------------------------------------------------------------------------

def _flip_model(seed):
    """An arbitrary (wrong) classifier: soundness must not depend on accuracy."""
    class Random:
        degenerate = False
        mask = ("score",)

        def predict_features(self, fm):
            return np.random.default_rng(seed).integers(0, 2, len(fm)).astype(np.int8)
    return Random()


@given(small_nfas(), st.sampled_from([0.2, 0.35, 0.5, 0.8]), st.integers(0, 99))
def test_soundness_and_completeness(nfa, theta, seed):
    trial = TrialConfig(alphabet=4, max_len=4)
    pruned, _ = prune(nfa, ThresholdModel(theta), PruneConfig(theta))
    assert check_equivalence(nfa, pruned, theta, trial).ok
    wild, _ = prune(nfa, _flip_model(seed), PruneConfig(theta))
    rep = check_equivalence(nfa, wild, theta, trial)
    assert rep.subset_violations == 0


@given(small_nfas())
def test_monotone_ratio_under_oracle(nfa):
    ratios = [prune(nfa, ThresholdModel(t), PruneConfig(t))[1].prune_ratio
              for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert ratios == sorted(ratios)


@given(small_nfas(), st.sampled_from([0.2, 0.5]))
def test_idempotent(nfa, theta):
    cfg = PruneConfig(theta)
    once, _ = prune(nfa, ThresholdModel(theta), cfg)
    if once.n_states == 0:
        return
    twice, rep = prune(once, ThresholdModel(theta), cfg)
    assert twice.same_as(once) and rep.prune_ratio == 0.0


@given(small_nfas(), st.sampled_from([0.2, 0.5]))
def test_avg_density_drops_when_nodes_kept(nfa, theta):
    cfg = PruneConfig(theta, enable_merge=False, enable_reachability=False)
    _, rep = prune(nfa, ThresholdModel(theta), cfg)
    assert rep.nodes_after == rep.nodes_before
    assert rep.avg_transitions_after <= rep.avg_transitions_before
    if rep.prune_ratio > 0:
        assert rep.avg_transitions_after < rep.avg_transitions_before
