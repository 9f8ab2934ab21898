"""Ground-truth clustering holder and query accounting.

The oracle answers label queries ("which cluster?") and same-cluster queries
("same cluster?") against an immutable latent clustering, counting every
invocation.  Each interface can emulate the other: a same-cluster query costs
two label queries; a label costs at most k same-cluster queries against known
representatives, and is then only meaningful up to a relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Clustering:
    """Assignment of point indices to cluster ids 1..k; clusters may be empty."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.labels, dtype=int))
        if arr.ndim != 1:
            raise ValueError("labels must be a 1-d integer array")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if arr.size and (arr.min() < 1 or arr.max() > self.k):
            raise ValueError("labels must lie in 1..k")
        object.__setattr__(self, "labels", arr)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def members(self, cluster_id: int) -> np.ndarray:
        return np.nonzero(self.labels == cluster_id)[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k + 1)[1:]

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def same_up_to_permutation(self, other: "Clustering") -> bool:
        """True if the two clusterings differ only by renaming cluster ids."""
        if not isinstance(other, Clustering) or self.n != other.n:
            return False
        mapping: dict[int, int] = {}
        used: set[int] = set()
        for a, b in zip(self.labels.tolist(), other.labels.tolist()):
            if a in mapping:
                if mapping[a] != b:
                    return False
            else:
                if b in used:
                    return False
                mapping[a] = b
                used.add(b)
        return True


class LabelOracle:
    """Query counterized access to a latent clustering.

    All truth access used by recovery algorithms goes through ``label_query``
    and ``same_cluster_query`` and is counted.  ``audit_labels`` exposes the
    truth for verification and reporting only and never touches the counters.
    """

    def __init__(self, truth: Clustering):
        self._truth = truth
        self._label_queries = 0
        self._scq_queries = 0

    @property
    def k(self) -> int:
        return self._truth.k

    @property
    def n(self) -> int:
        return self._truth.n

    @property
    def label_queries(self) -> int:
        return self._label_queries

    @property
    def scq_queries(self) -> int:
        return self._scq_queries

    @property
    def audit_labels(self) -> np.ndarray:
        """Uncounted read-only view of the truth; for verification only."""
        return self._truth.labels

    def _check_index(self, x: int):
        if not 0 <= x < self._truth.n:
            raise IndexError(f"point index {x} out of range")

    def label_query(self, x: int) -> int:
        self._check_index(x)
        self._label_queries += 1
        return int(self._truth.labels[x])

    def same_cluster_query(self, x: int, y: int) -> bool:
        self._check_index(x)
        self._check_index(y)
        self._scq_queries += 1
        return bool(self._truth.labels[x] == self._truth.labels[y])


def scq_via_labels(oracle: LabelOracle, x: int, y: int) -> bool:
    """Emulate a same-cluster query with exactly two label queries."""
    return oracle.label_query(x) == oracle.label_query(y)


def label_via_scq(oracle: LabelOracle, x: int, representatives) -> int:
    """Recovered id of x using at most k same-cluster queries.

    ``representatives[i]`` is a known member of recovered cluster i+1, in the
    order the clusters were first seen.  Returns an existing id, or
    ``len(representatives) + 1`` when x opens a new cluster (the caller then
    records x as its representative).  Ids match the truth up to a fixed
    permutation.
    """
    for pos, rep in enumerate(representatives):
        if oracle.same_cluster_query(x, rep):
            return pos + 1
    return len(representatives) + 1


def recover_via_scq(n: int, oracle: LabelOracle) -> Clustering:
    """Label every point through the SCQ interface only."""
    reps: list[int] = []
    labels = np.zeros(n, dtype=int)
    for x in range(n):
        got = label_via_scq(oracle, x, reps)
        if got == len(reps) + 1:
            reps.append(x)
        labels[x] = got
    return Clustering(labels=labels, k=max(oracle.k, len(reps)))
