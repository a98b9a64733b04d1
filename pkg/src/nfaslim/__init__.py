"""Score-aware pruning of homogeneous NFAs.

Typical use::

    from nfaslim import generate, profile_config, prune, PruneConfig, ThresholdModel
    nfa = generate(profile_config("paper2025", 1024, seed=1))
    pruned, report = prune(nfa, ThresholdModel(0.35), PruneConfig(0.35))
"""

from .core import ScoredNfa, State, Transition, ValidationError, make_nfa, validate
from .execution import MatchRecord, TrialConfig, brute_force_matches, check_equivalence, simulate
from .features import FeatureMatrix, TrainingSet, extract_features, label_dataset
from .forest import ForestModel, RfConfig, ThresholdModel, cross_validate, train_forest
from .formats import (FanoutViolation, FormatError, emit_anml, export_config_vectors, from_csv,
                      parse_anml, to_csv)
from .generator import GenConfig, generate, generate_corpus, profile_config
from .hwcost import CostParams, ResourceEstimate, cost_profile, estimate_resources, fanout_sweep
from .pipeline import run_pipeline
from .pruning import (PruneConfig, PruneReport, merge_duplicates, prune, remove_unreachable,
                      threshold_estimate)

__version__ = "0.1.0"
