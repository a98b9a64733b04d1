# %% [markdown]
# # What pruning buys in the hardware model
#
# LUTs and registers scale with states times provisioned fanout slots, so the
# win comes mostly from being able to provision a much narrower fanout after
# pruning. Memory follows the config-vector record size.

# %%
from nfaslim import (PruneConfig, ThresholdModel, cost_profile, estimate_resources, fanout_sweep,
                     generate, profile_config, prune)
from nfaslim.hwcost import provisioned_fanout

p = cost_profile("paper2025-hw")
cfg = profile_config("paper2025", 16384, seed=2)
nfa = generate(cfg)
pruned, _ = prune(nfa, ThresholdModel(0.35), PruneConfig(0.35, record_timing=False))

before = estimate_resources(nfa, cfg.max_fanout, p, input_len=1000)
after = estimate_resources(pruned, provisioned_fanout(pruned), p, input_len=1000)
print("before", before)
print("after ", after)
print("LUT ratio", round(after.luts / before.luts, 3),
      "register ratio", round(after.registers / before.registers, 3),
      "URAM ratio", round(after.uram_blocks / before.uram_blocks, 3))

# %% [markdown]
# Widening the fanout costs logic and adds routing delay but removes
# serialization.

# %%
g = generate(profile_config("paper2025", 8192, seed=8))
for row in fanout_sweep(g, [94, 187, 375, 700], p, input_len=1000):
    e = row.estimate
    print(row.fanout, e.luts, e.registers, e.uram_blocks, e.min_latency_cycles, e.max_latency_cycles)
