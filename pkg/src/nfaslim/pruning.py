"""Classifier-driven transition pruning plus structural cleanup."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .core import ScoredNfa, require_valid
from .features import DEFAULT_MASK, extract_features, normalize_mask, threshold_labels
from .forest import RfConfig


class NoStartStateError(ValueError):
    pass


class EmptyLanguageWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PruneConfig:
    theta: float
    mask: tuple[str, ...] = DEFAULT_MASK
    rf: RfConfig = RfConfig()
    enable_merge: bool = True
    enable_reachability: bool = True
    train_fraction: float = 0.7
    # corpus-level options
    cv_folds: int = 5
    train_max_samples: int | None = 50000
    cv_max_samples: int | None = 20000
    oracle_only: bool = False
    shared_model: bool = False
    record_timing: bool = True

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "mask", normalize_mask(self.mask))


@dataclass(frozen=True)
class EstimateReport:
    estimated_kept_transitions: int
    estimated_ratio: float  # kept / total


@dataclass
class PruneReport:
    theta: float
    nodes_before: int
    nodes_after: int
    transitions_before: int
    transitions_after: int
    classifier_kept: int
    prune_ratio: float
    model_accuracy: float | None
    accept_states_before: int
    accept_states_after: int
    accept_states_preserved: bool
    edge_coverage: float
    avg_transitions_before: float | None
    avg_transitions_after: float | None
    merged_states: int = 0
    unreachable_removed: int = 0
    degenerate_model: bool = False
    empty_language: bool = False
    holdout_accuracy: float | None = None
    wall_time_ms: float | None = None
    file: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_estimate(nfa: ScoredNfa, theta: float) -> EstimateReport:
    """What the exact threshold rule alone would keep."""
    require_valid(nfa)
    kept = int(np.count_nonzero(nfa.scores > theta))
    total = nfa.n_transitions
    return EstimateReport(kept, kept / total if total else 1.0)


# -- reachability ----------------------------------------------------------------

def _reached(n: int, src: np.ndarray, dst: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """States reachable from any seed (seeds included), via a virtual root."""
    seed_idx = np.flatnonzero(seeds)
    rows = np.concatenate([src, np.full(len(seed_idx), n)])
    cols = np.concatenate([dst, seed_idx])
    g = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n + 1, n + 1)).tocsr()
    order = breadth_first_order(g, n, directed=True, return_predecessors=False)
    out = np.zeros(n + 1, dtype=bool)
    out[order] = True
    return out[:n]


def live_states(nfa: ScoredNfa) -> np.ndarray:
    """Mask of states reachable from a start state and co-reachable to an accept state."""
    n = nfa.n_states
    fwd = _reached(n, nfa.src_index, nfa.dst_index, nfa.start_mask)
    bwd = _reached(n, nfa.dst_index, nfa.src_index, nfa.accept_mask)
    return fwd & bwd


def remove_unreachable(nfa: ScoredNfa) -> ScoredNfa:
    require_valid(nfa)
    if nfa.n_states == 0:
        return nfa
    if not nfa.start_mask.any():
        raise NoStartStateError(f"automaton {nfa.id!r} has no start state")
    if not nfa.accept_mask.any():
        warnings.warn(f"automaton {nfa.id!r} has no accept state; result is empty",
                      EmptyLanguageWarning, stacklevel=2)
    keep = live_states(nfa)
    if keep.all():
        return nfa
    return nfa.subgraph(keep_states=keep)


# -- duplicate merging -------------------------------------------------------------

def _dedupe_edges(src, dst, sc):
    """Drop repeated (src, dst, score) triples, keeping first occurrences in order."""
    if not len(src):
        return src, dst, sc
    order = np.lexsort((np.arange(len(src)), sc, dst, src))
    s, d, c = src[order], dst[order], sc[order]
    dup = np.r_[False, (s[1:] == s[:-1]) & (d[1:] == d[:-1]) & (c[1:] == c[:-1])]
    keep = np.ones(len(src), dtype=bool)
    keep[order[dup]] = False
    return src[keep], dst[keep], sc[keep]


def merge_with_map(nfa: ScoredNfa) -> tuple[ScoredNfa, dict[str, str]]:
    """Merge duplicate states to a fixpoint.

    Returns the merged automaton and a map from every removed state id to the
    id of the state that absorbed it.
    """
    require_valid(nfa)
    states = list(nfa.states)
    src, dst, sc = (np.array(a) for a in (nfa.src_index, nfa.dst_index, nfa.scores))
    absorbed: dict[str, str] = {}
    while True:
        n = len(states)
        order = np.lexsort((sc, dst, src))
        s_sorted, d_sorted, c_sorted = src[order], dst[order], sc[order]
        bounds = np.searchsorted(s_sorted, np.arange(n + 1))
        groups: dict[tuple, int] = {}
        rep = np.arange(n)
        for i, st in enumerate(states):
            a, b = bounds[i], bounds[i + 1]
            key = (st.symbols, st.start, st.accept,
                   d_sorted[a:b].tobytes(), c_sorted[a:b].tobytes())
            first = groups.setdefault(key, i)
            if first != i:
                rep[i] = first
        merged = rep != np.arange(n)
        if not merged.any():
            break
        for v in np.flatnonzero(merged):
            absorbed[states[v].id] = states[rep[v]].id
        # merged states' outgoing edges duplicate their representative's
        keep_edge = ~merged[src]
        src, dst, sc = src[keep_edge], rep[dst[keep_edge]], sc[keep_edge]
        src, dst, sc = _dedupe_edges(src, dst, sc)
        remap = np.cumsum(~merged) - 1
        src, dst = remap[src], remap[dst]
        states = [st for st, m in zip(states, merged) if not m]
    # resolve chains (a -> b when b was itself absorbed later)
    for k in list(absorbed):
        v = absorbed[k]
        while v in absorbed:
            v = absorbed[v]
        absorbed[k] = v
    if not absorbed:
        return nfa, {}
    out = ScoredNfa.from_arrays(nfa.id, states, src, dst, sc, nfa.alphabet_size)
    out.__dict__["_violations"] = []  # merging a valid automaton keeps it valid
    return out, absorbed


def merge_duplicates(nfa: ScoredNfa) -> ScoredNfa:
    return merge_with_map(nfa)[0]


# -- classify and prune ----------------------------------------------------------

def prune(nfa: ScoredNfa, model, cfg: PruneConfig,
          model_accuracy: float | None = None) -> tuple[ScoredNfa, PruneReport]:
    """Drop transitions the model labels 0, then merge and remove dead states.

    ``model_accuracy`` defaults to the model's agreement with the threshold
    labels on this automaton's own transitions.
    """
    t0 = time.perf_counter()
    require_valid(nfa)
    fm = extract_features(nfa, cfg.mask)
    keep = model.predict_features(fm).astype(bool)
    if model_accuracy is None and len(fm):
        model_accuracy = float(np.mean(keep == threshold_labels(fm.scores, cfg.theta)))
    out = nfa.subgraph(keep_transitions=keep)
    absorbed: dict[str, str] = {}
    removed = 0
    empty_language = False
    # removing dead states can expose new duplicates, so alternate to a joint fixpoint
    while True:
        size = (out.n_states, out.n_transitions)
        if cfg.enable_merge:
            out, step = merge_with_map(out)
            absorbed = {k: step.get(v, v) for k, v in absorbed.items()} | step
        if cfg.enable_reachability and out.n_states:
            before = out.n_states
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                out = remove_unreachable(out)
            empty_language |= any(issubclass(w.category, EmptyLanguageWarning) for w in caught)
            removed += before - out.n_states
        if (out.n_states, out.n_transitions) == size or not (cfg.enable_merge and cfg.enable_reachability):
            break

    surviving = {s.id for s in out.states}
    accepts = [s.id for s in nfa.states if s.accept]
    preserved = all(absorbed.get(a, a) in surviving for a in accepts)
    mass_before = float(nfa.scores.sum())
    mass_after = float(out.scores.sum())
    t_before, t_after = nfa.n_transitions, out.n_transitions
    report = PruneReport(
        theta=cfg.theta,
        nodes_before=nfa.n_states, nodes_after=out.n_states,
        transitions_before=t_before, transitions_after=t_after,
        classifier_kept=int(keep.sum()),
        prune_ratio=1.0 - t_after / t_before if t_before else 0.0,
        model_accuracy=model_accuracy,
        accept_states_before=len(accepts),
        accept_states_after=int(out.accept_mask.sum()) if out.n_states else 0,
        accept_states_preserved=preserved,
        edge_coverage=mass_after / mass_before if mass_before > 0 else 1.0,
        avg_transitions_before=t_before / nfa.n_states if nfa.n_states else None,
        avg_transitions_after=t_after / out.n_states if out.n_states else None,
        merged_states=len(absorbed),
        unreachable_removed=removed,
        degenerate_model=bool(getattr(model, "degenerate", False)),
        empty_language=empty_language,
    )
    if cfg.record_timing:
        report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return out, report
