"""Random Forest of CART trees (Gini impurity, axis-aligned midpoint splits).

Bootstrap resamples are represented as integer row weights, so every tree
shares one presort of the training matrix. Trees grow level by level; the
per-feature sorted row lists are kept partitioned by node, which makes each
level a handful of vectorised passes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import (DEFAULT_MASK, FeatureMatrix, FeatureVector, MaskMismatchError,
                       TrainingSet, normalize_mask)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 32
    max_depth: int = 8
    min_leaf: int = 5
    sample_fraction: float = 1.0
    features_per_split: int | None = None
    seed: int = 0

    def check(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("n_trees, max_depth and min_leaf must be positive")
        if not self.sample_fraction > 0:
            raise ValueError("sample_fraction must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")


@dataclass
class Tree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray  # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray     # (n_nodes, 2) weighted class counts

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaf_labels(self) -> np.ndarray:
        # ties go to 1 (keep)
        return (self.counts[:, 1] >= self.counts[:, 0]).astype(np.int8)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_labels()[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["counts"], dtype=np.int64).reshape(-1, 2))


@dataclass
class ForestModel:
    trees: list[Tree]
    config: RfConfig
    mask: tuple[str, ...] = DEFAULT_MASK
    degenerate: bool = False
    constant: int | None = None
    theta: float | None = None
    n_samples: int = 0

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, len(self.mask))
        if self.constant is not None:
            return np.full(len(X), self.constant, dtype=np.int8)
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        # majority vote, exact ties keep the transition
        return (2 * votes >= len(self.trees)).astype(np.int8)

    def predict_features(self, fm: FeatureMatrix) -> np.ndarray:
        if fm.mask != self.mask:
            raise MaskMismatchError(f"model trained on {self.mask}, got features {fm.mask}")
        return self.predict_matrix(fm.matrix())

    def to_json(self) -> str:
        doc = {"format": "nfaslim-forest", "version": MODEL_FORMAT_VERSION,
               "config": asdict(self.config), "mask": list(self.mask),
               "degenerate": self.degenerate, "constant": self.constant, "theta": self.theta,
               "n_samples": self.n_samples, "trees": [t.to_dict() for t in self.trees]}
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        doc = json.loads(text)
        if doc.get("format") != "nfaslim-forest" or doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("not a version-1 forest model document")
        return cls([Tree.from_dict(t) for t in doc["trees"]], RfConfig(**doc["config"]),
                   tuple(doc["mask"]), doc["degenerate"], doc["constant"], doc["theta"],
                   doc["n_samples"])


@dataclass
class ThresholdModel:
    """The exact labelling rule used as a stand-in classifier."""

    theta: float
    mask: tuple[str, ...] = field(default=DEFAULT_MASK)
    degenerate: bool = False

    def predict_features(self, fm: FeatureMatrix) -> np.ndarray:
        return (fm.scores > self.theta).astype(np.int8)

    def to_json(self) -> str:
        return json.dumps({"format": "nfaslim-threshold", "version": MODEL_FORMAT_VERSION,
                           "theta": self.theta}, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ConstantModel:
    label: int
    mask: tuple[str, ...] = DEFAULT_MASK
    degenerate: bool = True

    def predict_features(self, fm: FeatureMatrix) -> np.ndarray:
        if fm.mask != self.mask:
            raise MaskMismatchError(f"model trained on {self.mask}, got features {fm.mask}")
        return np.full(len(fm), self.label, dtype=np.int8)

    def to_json(self) -> str:
        return json.dumps({"format": "nfaslim-constant", "version": MODEL_FORMAT_VERSION,
                           "label": self.label, "mask": list(self.mask)}, sort_keys=True) + "\n"


def predict(model, v: FeatureVector) -> int:
    """Classify one transition; 1 means keep."""
    if v.mask != model.mask:
        raise MaskMismatchError(f"model trained on {model.mask}, got a vector with {v.mask}")
    fm = FeatureMatrix(np.array([[v.score, v.src_out_degree, v.dst_in_degree,
                                  v.src_total_score, v.dst_total_score]]), v.mask)
    return int(model.predict_features(fm)[0])


# -- training ----------------------------------------------------------------

def _grow_tree(X: np.ndarray, y: np.ndarray, w: np.ndarray, orders: list[np.ndarray],
               cfg: RfConfig, rng: np.random.Generator) -> Tree:
    n, k = X.shape
    yw = (w * y).astype(np.float64)
    w = w.astype(np.float64)
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    counts = [(int(w.sum() - yw.sum()), int(yw.sum()))]
    node_of = np.where(w > 0, 0, -1)
    orders = [o[w[o] > 0] for o in orders]
    frontier = [0]
    k_split = k if cfg.features_per_split is None else min(k, cfg.features_per_split)

    for depth in range(cfg.max_depth):
        if not frontier:
            break
        n_front = len(frontier)
        tot = np.array([counts[nid][0] + counts[nid][1] for nid in frontier], dtype=np.float64)
        pos_w = np.array([counts[nid][1] for nid in frontier], dtype=np.float64)
        splittable = (tot >= 2 * cfg.min_leaf) & (pos_w > 0) & (pos_w < tot)
        if not splittable.any():
            break
        parent_score = np.where(tot > 0, (pos_w ** 2 + (tot - pos_w) ** 2) / np.maximum(tot, 1), 0)
        if k_split < k:
            allowed = np.zeros((n_front, k), dtype=bool)
            for p in range(n_front):
                allowed[p, rng.choice(k, k_split, replace=False)] = True
        else:
            allowed = np.ones((n_front, k), dtype=bool)

        best_score = parent_score + 1e-12 * np.maximum(tot, 1)
        best_feat = np.full(n_front, -1, dtype=np.int64)
        best_thr = np.zeros(n_front)
        best_split = np.zeros((n_front, 4))  # wl, pl, wr, pr of the chosen cut
        node_pos_lookup = np.full(len(feature), -1, dtype=np.int64)
        node_pos_lookup[frontier] = np.arange(n_front)

        for f in range(k):
            o = orders[f]
            if not len(o):
                continue
            p_of = node_pos_lookup[node_of[o]]
            xv = X[o, f]
            wv = w[o]
            pv = yw[o]
            cw = np.cumsum(wv)
            cp = np.cumsum(pv)
            # segment boundaries (orders are grouped by node, in frontier order)
            seg_start = np.flatnonzero(np.r_[True, p_of[1:] != p_of[:-1]])
            seg_len = np.diff(np.r_[seg_start, len(o)])
            seg_id = np.repeat(np.arange(len(seg_start)), seg_len)
            base_w = np.r_[0.0, cw][seg_start][seg_id]
            base_p = np.r_[0.0, cp][seg_start][seg_id]
            wl = cw - base_w
            pl = cp - base_p
            seg_p = p_of[seg_start][seg_id]
            wr = tot[seg_p] - wl
            pr = pos_w[seg_p] - pl
            last = np.zeros(len(o), dtype=bool)
            last[seg_start + seg_len - 1] = True
            nxt = np.r_[xv[1:], np.inf]
            valid = (~last & (xv < nxt) & (wl >= cfg.min_leaf) & (wr >= cfg.min_leaf)
                     & splittable[seg_p] & allowed[seg_p, f])
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                score = (pl ** 2 + (wl - pl) ** 2) / wl + (pr ** 2 + (wr - pr) ** 2) / wr
            score = np.where(valid, score, -np.inf)
            seg_max = np.maximum.reduceat(score, seg_start)
            hit = np.flatnonzero(valid & (score == seg_max[seg_id]))
            segs, first = np.unique(seg_id[hit], return_index=True)
            at = hit[first]
            pp = seg_p[at]
            better = seg_max[segs] > best_score[pp]
            pp, at = pp[better], at[better]
            best_score[pp] = seg_max[segs][better]
            best_feat[pp] = f
            lo, hi = xv[at], nxt[at]
            thr = (lo + hi) / 2.0
            best_thr[pp] = np.where(thr >= hi, lo, thr)
            best_split[pp] = np.column_stack([wl[at], pl[at], wr[at], pr[at]])

        if (best_feat < 0).all():
            break
        # create children
        child_of = np.full((n_front, 2), -1, dtype=np.int64)
        for p in np.flatnonzero(best_feat >= 0):
            nid = frontier[p]
            feature[nid] = int(best_feat[p])
            threshold[nid] = float(best_thr[p])
            for side in (0, 1):
                child_of[p, side] = len(feature)
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                counts.append((0, 0))
            left[nid], right[nid] = int(child_of[p, 0]), int(child_of[p, 1])

        active = np.flatnonzero(node_of >= 0)
        ap = node_pos_lookup[node_of[active]]
        f_row = best_feat[ap]
        split_rows = f_row >= 0
        new_node = np.full(len(active), -1, dtype=np.int64)
        sr = active[split_rows]
        go_right = X[sr, f_row[split_rows]] > best_thr[ap[split_rows]]
        new_node[split_rows] = child_of[ap[split_rows], go_right.astype(np.int64)]
        node_of[active] = new_node
        for p in np.flatnonzero(best_feat >= 0):
            wl_, pl_, wr_, pr_ = best_split[p]
            counts[child_of[p, 0]] = (int(round(wl_ - pl_)), int(round(pl_)))
            counts[child_of[p, 1]] = (int(round(wr_ - pr_)), int(round(pr_)))
        frontier = [int(c) for c in child_of[best_feat >= 0].ravel()]
        # regroup each feature's sorted rows by child node, keeping value order
        for f in range(k):
            o = orders[f]
            o = o[node_of[o] >= 0]
            key = node_of[o]
            key = (key - key.min()).astype(np.int16) if len(key) and key.max() - key.min() < 32767 else key
            orders[f] = o[np.argsort(key, kind="stable")]

    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, 2))


def train_forest(D: TrainingSet, cfg: RfConfig = RfConfig()) -> ForestModel:
    """Fit a forest on ``D``. A single-class ``D`` yields a flagged constant model."""
    cfg.check()
    if len(D) == 0:
        raise ValueError("cannot train on an empty training set")
    mask = normalize_mask(D.mask)
    y = np.asarray(D.labels, dtype=np.int64)
    if y.min() == y.max():
        return ForestModel([], cfg, mask, degenerate=True, constant=int(y[0]), theta=D.theta,
                           n_samples=len(D))
    X = D.X
    n = len(X)
    orders = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
    m = max(1, int(round(cfg.sample_fraction * n)))
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, t]))
        w = np.bincount(rng.integers(0, n, m), minlength=n).astype(np.int64)
        trees.append(_grow_tree(X, y, w, orders, cfg, rng))
    return ForestModel(trees, cfg, mask, theta=D.theta, n_samples=n)


# -- evaluation ----------------------------------------------------------------

@dataclass(frozen=True)
class CvResult:
    mean_accuracy: float
    fold_accuracies: tuple[float, ...]


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5F0D]))
    fold = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


def accuracy(model, D: TrainingSet) -> float:
    if len(D) == 0:
        return float("nan")
    return float(np.mean(model.predict_features(D.features) == D.labels))


def cross_validate(D: TrainingSet, k: int = 5, cfg: RfConfig = RfConfig()) -> CvResult:
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(D):
        raise ValueError(f"k={k} folds exceed the {len(D)} samples")
    fold = stratified_folds(D.labels, k, cfg.seed)
    accs = []
    for i in range(k):
        model = train_forest(D.subset(fold != i), cfg)
        accs.append(accuracy(model, D.subset(fold == i)))
    return CvResult(float(np.mean(accs)), tuple(accs))


def train_test_split(D: TrainingSet, train_fraction: float, seed: int
                     ) -> tuple[TrainingSet, TrainingSet]:
    """Stratified split; each class contributes ``train_fraction`` of its rows."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A1]))
    train = np.zeros(len(D), dtype=bool)
    for c in np.unique(D.labels):
        idx = rng.permutation(np.flatnonzero(D.labels == c))
        train[idx[:int(round(train_fraction * len(idx)))]] = True
    if not train.any():
        train[0] = True
    return D.subset(train), D.subset(~train)
