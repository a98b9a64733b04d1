"""Synthetic scored-automata corpora.

Edges are drawn with a locality bias (mostly to nearby state indices) and a
small fraction of states are exact duplicates of others, so that both the
reachability and the merge cleanups have work to do.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ALPHABET_SIZE, ScoredNfa, State
from .formats import emit_anml

DEFAULT_SYMBOL_POOL = b"ACGT"


@dataclass(frozen=True)
class ScoreDistribution:
    """``uniform01``, ``exponential`` (rate ``lam``, clipped to [0, 1]) or
    ``bimodal`` (probability ``p`` of the high mode)."""

    kind: str = "uniform01"
    lam: float = 3.0
    p: float = 0.5
    lo: float = 0.2
    hi: float = 0.8
    spread: float = 0.05

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform01":
            x = rng.random(n)
        elif self.kind == "exponential":
            x = np.minimum(rng.exponential(1.0 / self.lam, n), 1.0)
        elif self.kind == "bimodal":
            centre = np.where(rng.random(n) < self.p, self.hi, self.lo)
            x = np.clip(centre + rng.normal(0.0, self.spread, n), 0.0, 1.0)
        else:
            raise ValueError(f"unknown score distribution {self.kind!r}")
        # six decimals so XML/CSV text round-trips exactly
        return np.round(x, 6)

    @classmethod
    def parse(cls, text: str) -> "ScoreDistribution":
        """``uniform01``, ``exponential:3``, ``bimodal:0.5,0.2,0.8``."""
        name, _, args = text.partition(":")
        vals = [float(v) for v in args.split(",")] if args else []
        if name == "uniform01" and not vals:
            return cls()
        if name == "exponential" and len(vals) <= 1:
            return cls("exponential", lam=vals[0] if vals else 3.0)
        if name == "bimodal" and len(vals) in (0, 3):
            return cls("bimodal", *([3.0] + vals if vals else []))
        raise ValueError(f"bad score distribution spec {text!r}")


@dataclass(frozen=True)
class GenConfig:
    n_nodes: int
    avg_out_degree: float
    max_fanout: int
    score_distribution: ScoreDistribution = ScoreDistribution()
    start_fraction: float = 0.01
    accept_fraction: float = 0.05
    duplicate_fraction: float = 0.02
    locality: float = 0.8
    window: int | None = None
    symbol_pool: bytes = DEFAULT_SYMBOL_POOL
    seed: int = 0

    def check(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.avg_out_degree < 0:
            raise ValueError("avg_out_degree must be non-negative")
        if self.max_fanout < 1:
            raise ValueError("max_fanout must be >= 1")
        if self.avg_out_degree > self.max_fanout:
            raise ValueError(f"unsatisfiable density: avg_out_degree {self.avg_out_degree} "
                             f"> max_fanout {self.max_fanout}")
        if self.avg_out_degree > self.n_nodes:
            raise ValueError("avg_out_degree cannot exceed n_nodes (distinct destinations)")
        for name in ("start_fraction", "accept_fraction"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if not 0 <= self.duplicate_fraction < 0.5:
            raise ValueError("duplicate_fraction must be in [0, 0.5)")
        if not 0 <= self.locality <= 1:
            raise ValueError("locality must be in [0, 1]")
        if not self.symbol_pool:
            raise ValueError("symbol_pool must be non-empty")


# Reference density profile: ~180 transitions/node at 1K decaying
# geometrically to ~8 at 64K.
DENSITY_ANCHORS = ((1024, 180.0), (65536, 8.0))
MIN_PROFILE_FANOUT = 256


def paper2025_density(n_nodes: int) -> float:
    (n0, d0), (n1, d1) = DENSITY_ANCHORS
    t = (math.log2(n_nodes) - math.log2(n0)) / (math.log2(n1) - math.log2(n0))
    return float(d0 * (d1 / d0) ** t)


def paper2025_fanout(n_nodes: int) -> int:
    need = math.ceil(2 * paper2025_density(n_nodes))
    return max(MIN_PROFILE_FANOUT, 1 << (need - 1).bit_length())


PROFILES = {"paper2025"}


def profile_config(profile: str, n_nodes: int, seed: int = 0, **overrides) -> GenConfig:
    if profile != "paper2025":
        raise ValueError(f"unknown generator profile {profile!r}")
    density = round(min(paper2025_density(n_nodes), n_nodes), 3)
    cfg = GenConfig(n_nodes=n_nodes, avg_out_degree=density,
                    max_fanout=paper2025_fanout(n_nodes), seed=seed)
    return replace(cfg, **overrides) if overrides else cfg


def _out_degrees(cfg: GenConfig, rng, dup_of: np.ndarray) -> np.ndarray:
    """Per-state out-degree, uniform around the mean and summing exactly to
    round(n * avg); duplicates copy their original's degree."""
    n = cfg.n_nodes
    cap = min(cfg.max_fanout, n)
    avg = cfg.avg_out_degree
    lo = max(0, int(math.floor(avg * 0.5)))
    hi = min(cap, int(math.ceil(avg * 1.5)))
    deg = rng.integers(lo, hi + 1, n)
    is_dup = dup_of >= 0
    deg[is_dup] = deg[dup_of[is_dup]]
    free = np.flatnonzero(~is_dup & ~np.isin(np.arange(n), dup_of[is_dup]))
    target = int(round(n * avg))
    diff = target - int(deg.sum())
    while diff != 0 and len(free):
        step = 1 if diff > 0 else -1
        ok = free[(deg[free] < cap) if step > 0 else (deg[free] > 0)]
        if not len(ok):
            break
        take = rng.choice(ok, size=min(abs(diff), len(ok)), replace=False)
        deg[take] += step
        diff -= step * len(take)
    # step an original together with its copies when single states cannot close the gap
    group = {int(u): np.flatnonzero(dup_of == u) for u in np.unique(dup_of[is_dup])}
    progress = True
    while diff != 0 and progress:
        progress = False
        step = 1 if diff > 0 else -1
        for u in rng.permutation(sorted(group)):
            members = np.r_[u, group[int(u)]]
            if len(members) <= abs(diff) and 0 <= deg[u] + step <= cap:
                deg[members] += step
                diff -= step * len(members)
                progress = True
                if diff == 0:
                    break
    return deg


def _destinations(rng, src: int, k: int, n: int, window: int, locality: float) -> np.ndarray:
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return rng.permutation(n)[:k]
    chosen = np.empty(0, dtype=np.int64)
    want = k
    while True:
        m = 2 * want + 8
        local = rng.random(m) < locality
        near = src + rng.integers(-window, window + 1, m)
        near = np.clip(near, 0, n - 1)
        far = rng.integers(0, n, m)
        cand = np.concatenate([chosen, np.where(local, near, far)])
        _, first = np.unique(cand, return_index=True)
        chosen = cand[np.sort(first)]
        if len(chosen) >= k:
            return chosen[:k]
        want = k - len(chosen)
        # a narrow window may not hold enough distinct targets
        window = min(n, window * 2)


def generate(cfg: GenConfig) -> ScoredNfa:
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_nodes
    pool = sorted(set(cfg.symbol_pool))

    n_dup = int(round(cfg.duplicate_fraction * n)) if n >= 4 else 0
    dup_of = np.full(n, -1, dtype=np.int64)
    if n_dup:
        perm = rng.permutation(n)
        dups, originals = perm[:n_dup], perm[n_dup:]
        dup_of[dups] = rng.choice(originals, size=n_dup)

    sym_choice = rng.integers(0, len(pool), n)
    wide = rng.random(n) < 0.1
    extra = rng.integers(0, len(pool), n)
    symbol_sets = [frozenset({pool[a], pool[b]} if w else {pool[a]})
                   for a, b, w in zip(sym_choice, extra, wide)]

    n_start = max(1, int(round(cfg.start_fraction * n)))
    n_accept = max(1, int(round(cfg.accept_fraction * n)))
    start = np.zeros(n, dtype=bool)
    accept = np.zeros(n, dtype=bool)
    # flags go on originals; duplicates copy them below, so none is lost
    is_dup = dup_of >= 0
    pick_from = np.flatnonzero(~is_dup)
    start[rng.choice(pick_from, min(n_start, len(pick_from)), replace=False)] = True
    accept[rng.choice(pick_from, min(n_accept, len(pick_from)), replace=False)] = True

    for v in np.flatnonzero(is_dup):
        u = dup_of[v]
        symbol_sets[v] = symbol_sets[u]
        start[v], accept[v] = start[u], accept[u]

    deg = _out_degrees(cfg, rng, dup_of)
    window = cfg.window or max(32, int(2 * cfg.avg_out_degree))
    dests: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * n
    scores: list[np.ndarray] = [np.empty(0)] * n
    for u in range(n):
        if is_dup[u]:
            continue
        dests[u] = _destinations(rng, u, int(deg[u]), n, window, cfg.locality)
        scores[u] = cfg.score_distribution.sample(rng, int(deg[u]))
    for v in np.flatnonzero(is_dup):
        dests[v], scores[v] = dests[dup_of[v]], scores[dup_of[v]]

    src = np.repeat(np.arange(n), deg)
    dst = np.concatenate(dests) if n else np.empty(0, dtype=np.int64)
    sc = np.concatenate(scores) if n else np.empty(0)
    width = len(str(n - 1))
    states = [State(f"ste_{i:0{width}d}", symbol_sets[i], bool(start[i]), bool(accept[i]))
              for i in range(n)]
    return ScoredNfa.from_arrays(f"g{n}_s{cfg.seed}", states, src, dst.astype(np.int64), sc,
                                 ALPHABET_SIZE)


# -- corpora ---------------------------------------------------------------

def corpus_seed(base_seed: int, size: int, index: int) -> int:
    ss = np.random.SeedSequence([base_seed, size, index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_corpus(cfg_template, sizes, files_per_size: int = 10, out_dir=".",
                    base_seed: int = 0) -> list[dict]:
    """Write ``g{size}_{index}.anml`` files and ``manifest.json``.

    ``cfg_template`` is either a profile name or a callable ``(size, seed) ->
    GenConfig``. Returns the manifest entries; failures are recorded in the
    entry under ``error`` rather than aborting the corpus.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(cfg_template, str):
        profile = cfg_template
        make = lambda size, seed: profile_config(profile, size, seed=seed)  # noqa: E731
    else:
        make = cfg_template
    manifest = []
    for size in sizes:
        for index in range(files_per_size):
            seed = corpus_seed(base_seed, size, index)
            name = f"g{size}_{index}.anml"
            entry = {"path": name, "size": int(size), "seed": seed}
            try:
                nfa = generate(make(size, seed))
                nfa = nfa.renamed(f"g{size}_{index}")
                (out / name).write_text(emit_anml(nfa), encoding="utf-8", newline="\n")
                entry.update(n_states=nfa.n_states, n_transitions=nfa.n_transitions)
            except (OSError, ValueError) as exc:
                entry["error"] = str(exc)
            manifest.append(entry)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
