# %% [markdown]
# # Running automata and checking that pruning is safe
#
# `simulate` is the min-cost frontier DP, `brute_force_matches` enumerates
# paths. On small graphs they must agree exactly, and a pruned graph may
# lose matches only where the cheapest path used a low-score edge.

# %%
from nfaslim import (PruneConfig, State, ThresholdModel, TrialConfig, brute_force_matches,
                     check_equivalence, make_nfa, prune, simulate)

A, B, C = (frozenset(s) for s in (b"a", b"b", b"c"))
nfa = make_nfa("demo", [State("s0", A, True), State("s1", B), State("s2", C, False, True),
                        State("s3", B)],
               [("s0", "s1", 0.9), ("s1", "s2", 0.8), ("s0", "s3", 0.1), ("s3", "s2", 0.05)])
print(simulate(nfa, "abc"))
print(brute_force_matches(nfa, "abc"))

# %% [markdown]
# The cheap path through `s3` sits under the threshold, so it goes; the
# remaining match costs more but is still reported.

# %%
pruned, rep = prune(nfa, ThresholdModel(0.35), PruneConfig(0.35, record_timing=False))
print([s.id for s in pruned.states], pruned.n_transitions)
print(simulate(pruned, "abc"))

# %%
report = check_equivalence(nfa, pruned, 0.35, TrialConfig(alphabet=b"abc", max_len=5))
print(report.inputs_checked, "inputs,", report.violations, "violations")

# %%
# streaming mode re-arms the start states at every offset
print(simulate(nfa, "xxabc", all_offsets=True))
