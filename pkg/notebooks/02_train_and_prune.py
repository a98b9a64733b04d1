# %% [markdown]
# # Learning the threshold rule and pruning with it
#
# The forest only ever sees the transition score, so the best it can do is
# rediscover `score > theta`. The interesting parts are how close it gets and
# what the structural cleanup adds on top.

# %%
import numpy as np

from nfaslim import (PruneConfig, ThresholdModel, cross_validate, extract_features, generate,
                     label_dataset, profile_config, prune, threshold_estimate, train_forest)

theta = 0.35
nfa = generate(profile_config("paper2025", 2048, seed=3))
D = label_dataset(extract_features(nfa), theta)
print(len(D), "labelled transitions, positive rate", D.labels.mean().round(3))

# %%
model = train_forest(D)
cv = cross_validate(D.subset(np.arange(20_000)), 5)
print("5-fold accuracy", round(cv.mean_accuracy, 5))
print("first tree depth", model.trees[0].depth)

# %% [markdown]
# Pruning with the forest against pruning with the exact rule.

# %%
cfg = PruneConfig(theta, record_timing=False)
est = threshold_estimate(nfa, theta)
for name, m in (("forest", model), ("oracle", ThresholdModel(theta))):
    out, rep = prune(nfa, m, cfg)
    print(f"{name:>6}: kept {rep.classifier_kept} (estimate {est.estimated_kept_transitions}), "
          f"ratio {rep.prune_ratio:.3f}, avg/node {rep.avg_transitions_before:.1f} -> "
          f"{rep.avg_transitions_after:.1f}, merged {rep.merged_states}, "
          f"dead {rep.unreachable_removed}")

# %%
# higher thresholds drop more
for t in (0.2, 0.35, 0.5, 0.7):
    _, rep = prune(nfa, ThresholdModel(t), PruneConfig(t, record_timing=False))
    print(t, round(rep.prune_ratio, 3), round(rep.edge_coverage, 3))
