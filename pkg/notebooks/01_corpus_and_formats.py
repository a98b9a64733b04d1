# %% [markdown]
# # Synthetic automata and their file formats
#
# Generate one graph from the `paper2025` density profile, look at its shape,
# then push it through ANML, CSV and the binary config-vector layout.

# %%
import numpy as np

from nfaslim import emit_anml, export_config_vectors, from_csv, generate, parse_anml, profile_config, to_csv
from nfaslim.core import avg_transitions_per_node

cfg = profile_config("paper2025", 1024, seed=7)
nfa = generate(cfg)
print(nfa)
print("avg out-degree", round(avg_transitions_per_node(nfa), 1), "max", nfa.max_out_degree(),
      "provisioned fanout", cfg.max_fanout)

# %% [markdown]
# Density falls off geometrically with size.

# %%
for n in (1024, 2048, 4096, 8192, 65536):
    c = profile_config("paper2025", n)
    print(f"{n:>6} nodes: avg {c.avg_out_degree:6.1f}  fanout {c.max_fanout}")

# %%
# ANML round trip keeps everything
back = parse_anml(emit_anml(nfa))
print("anml round trip identical:", back.same_as(nfa))

# CSV has no column for start-state symbol sets, so compare structure only
t_csv, n_csv = to_csv(nfa)
print(t_csv.splitlines()[0], "|", n_csv.splitlines()[0])
csv_back = from_csv(t_csv, n_csv)
print("csv edges identical:", np.array_equal(csv_back.scores, nfa.scores))

# %%
blob = export_config_vectors(nfa, cfg.max_fanout)
print(len(blob), "bytes =", nfa.n_states, "records x", len(blob) // nfa.n_states)
