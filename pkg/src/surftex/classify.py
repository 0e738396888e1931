"""L1-distance k-nearest-neighbor classification.

The distance between two comparable feature vectors (same method, same
dimension) is the sum of absolute coordinate differences, accumulated in
index order i = 0..n-1 into a float64. That accumulation order is part of
the contract: the vectorized batch path below performs the identical
per-element operation sequence, so distances are bit-for-bit reproducible
against a plain sequential loop.

Determinism rules:

* neighbor selection orders candidates by (distance, source id, label),
  so ties at the k-boundary resolve identically under any permutation of
  the training list;
* a vote tie between classes goes to the class with the smallest summed
  distance among its voting neighbors, then to the lexicographically
  smallest class tag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureVector, LabeledFeature


def _require_comparable(a: FeatureVector, b: FeatureVector) -> None:
    if a.method != b.method:
        raise ValueError(f"feature methods differ: {a.method!r} vs {b.method!r}")
    if a.dim != b.dim:
        raise ValueError(f"feature dims differ: {a.dim} vs {b.dim}")


def l1_distance(a: FeatureVector, b: FeatureVector) -> float:
    """Sum of |a(i) - b(i)|, accumulated in index order."""
    _require_comparable(a, b)
    total = 0.0
    for x, y in zip(a.values.tolist(), b.values.tolist()):
        total += abs(x - y)
    return total


def _l1_to_all(columns: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Distances from q to every row of the training matrix.

    ``columns`` holds the training matrix transposed, (dim, m). One
    dimension is accumulated at a time so every row sees the same add
    sequence as the scalar loop in l1_distance.
    """
    acc = np.zeros(columns.shape[1])
    for i in range(columns.shape[0]):
        acc += np.abs(columns[i] - q[i])
    return acc


@dataclass
class KnnModel:
    """Immutable-after-construction training set plus neighbor count."""

    train: list[LabeledFeature]
    k: int = 1

    def __post_init__(self):
        if not self.train:
            raise ValueError("training set must be non-empty")
        first = self.train[0].feature
        for f in self.train:
            _require_comparable(first, f.feature)
        if not (1 <= self.k <= len(self.train)):
            raise ValueError(f"k must be in [1, {len(self.train)}], got {self.k}")
        self._columns = np.ascontiguousarray(
            np.stack([f.feature.values for f in self.train]).T
        )

    @property
    def method(self) -> str:
        return self.train[0].feature.method

    @property
    def dim(self) -> int:
        return self.train[0].feature.dim


@dataclass(frozen=True)
class Prediction:
    label: str
    neighbor_ids: tuple[str, ...]
    distances: tuple[float, ...]


def classify(model: KnnModel, q: FeatureVector) -> Prediction:
    """Majority vote among the k nearest training samples under L1."""
    _require_comparable(model.train[0].feature, q)
    dists = _l1_to_all(model._columns, q.values)
    order = sorted(
        range(len(model.train)),
        key=lambda i: (dists[i], model.train[i].source, model.train[i].label),
    )
    top = order[: model.k]

    votes: dict[str, int] = {}
    summed: dict[str, float] = {}
    for i in top:
        lab = model.train[i].label
        votes[lab] = votes.get(lab, 0) + 1
        summed[lab] = summed.get(lab, 0.0) + float(dists[i])
    best = max(votes.values())
    tied = [lab for lab, c in votes.items() if c == best]
    label = min(tied, key=lambda lab: (summed[lab], lab))

    return Prediction(
        label=label,
        neighbor_ids=tuple(model.train[i].source for i in top),
        distances=tuple(float(dists[i]) for i in top),
    )


def classify_batch(model: KnnModel, queries: list[FeatureVector]) -> list[Prediction]:
    """Elementwise identical to calling classify per query."""
    out = []
    for idx, q in enumerate(queries):
        try:
            out.append(classify(model, q))
        except ValueError as exc:
            raise ValueError(f"query {idx}: {exc}") from exc
    return out
