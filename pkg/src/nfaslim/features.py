"""Per-transition feature vectors and threshold labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ScoredNfa, node_total_scores, require_valid

FEATURE_NAMES = ("score", "src_out_degree", "dst_in_degree", "src_total_score", "dst_total_score")
DEFAULT_MASK = ("score",)


class MaskMismatchError(ValueError):
    pass


def normalize_mask(mask) -> tuple[str, ...]:
    if isinstance(mask, str):
        mask = [m for m in mask.split(",") if m]
    mask = tuple(mask)
    unknown = [m for m in mask if m not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown feature(s) {unknown}; choose from {FEATURE_NAMES}")
    if not mask:
        raise ValueError("feature mask must enable at least one feature")
    # canonical order so equal masks compare equal
    return tuple(f for f in FEATURE_NAMES if f in mask)


@dataclass(frozen=True)
class FeatureVector:
    score: float
    src_out_degree: int
    dst_in_degree: int
    src_total_score: float
    dst_total_score: float
    mask: tuple[str, ...] = DEFAULT_MASK

    def values(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, f)) for f in self.mask)


class FeatureMatrix(Sequence):
    """All features for every transition of one automaton, index-aligned with
    its transitions. ``data`` always holds the full column set; ``mask``
    selects the columns the classifier sees."""

    def __init__(self, data: np.ndarray, mask=DEFAULT_MASK):
        self.data = np.asarray(data, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
        self.mask = normalize_mask(mask)

    def __len__(self) -> int:
        return len(self.data)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return FeatureMatrix(self.data[i], self.mask)
        row = self.data[i]
        return FeatureVector(float(row[0]), int(row[1]), int(row[2]), float(row[3]),
                             float(row[4]), self.mask)

    @property
    def scores(self) -> np.ndarray:
        return self.data[:, 0]

    def matrix(self) -> np.ndarray:
        cols = [FEATURE_NAMES.index(f) for f in self.mask]
        return self.data[:, cols]

    @classmethod
    def from_scores(cls, scores) -> "FeatureMatrix":
        """Score-only rows (structural columns zero) for training on bare score samples."""
        scores = np.asarray(scores, dtype=np.float64).ravel()
        data = np.zeros((len(scores), len(FEATURE_NAMES)))
        data[:, 0] = scores
        return cls(data)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        masks = {v.mask for v in vectors}
        if len(masks) > 1:
            raise MaskMismatchError("feature vectors carry different masks")
        data = np.array([[v.score, v.src_out_degree, v.dst_in_degree, v.src_total_score,
                          v.dst_total_score] for v in vectors], dtype=np.float64)
        return cls(data, masks.pop() if masks else DEFAULT_MASK)


def extract_features(nfa: ScoredNfa, mask=DEFAULT_MASK) -> FeatureMatrix:
    require_valid(nfa)
    src, dst = nfa.src_index, nfa.dst_index
    outs = nfa.out_degrees()
    ins = nfa.in_degrees()
    total = node_total_scores(nfa)
    data = np.column_stack([nfa.scores, outs[src], ins[dst], total[src], total[dst]]) \
        if len(src) else np.empty((0, len(FEATURE_NAMES)))
    return FeatureMatrix(data, mask)


@dataclass(frozen=True)
class TrainingSet:
    features: FeatureMatrix
    labels: np.ndarray
    theta: float

    @property
    def mask(self) -> tuple[str, ...]:
        return self.features.mask

    @property
    def X(self) -> np.ndarray:
        return self.features.matrix()

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "TrainingSet":
        return TrainingSet(FeatureMatrix(self.features.data[idx], self.mask), self.labels[idx],
                           self.theta)

    @staticmethod
    def concat(parts: Sequence["TrainingSet"]) -> "TrainingSet":
        if not parts:
            raise ValueError("nothing to concatenate")
        if len({p.mask for p in parts}) > 1 or len({p.theta for p in parts}) > 1:
            raise MaskMismatchError("training sets differ in mask or threshold")
        data = np.concatenate([p.features.data for p in parts])
        return TrainingSet(FeatureMatrix(data, parts[0].mask),
                           np.concatenate([p.labels for p in parts]), parts[0].theta)


def threshold_labels(scores, theta: float) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) > theta).astype(np.int8)


def label_dataset(features, theta: float) -> TrainingSet:
    """Label each transition 1 iff its score is strictly above ``theta``."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if not isinstance(features, FeatureMatrix):
        features = FeatureMatrix.from_vectors(list(features))
    return TrainingSet(features, threshold_labels(features.scores, theta), float(theta))
