"""Exact cluster recovery from label queries.

Two algorithms, both built on boosting a one-sided-error learner:

* ``cheatr`` (convex hull expansion): each round queries the labels of a
  uniform sample, and for every label inflates the hull of the sampled
  points by 1+gamma about an approximate centroid.  Under a convex hull
  margin gamma, the inflated hull cannot reach another cluster, so every
  point it captures is labeled correctly, and with enough samples it
  captures a constant fraction of the cluster.

* ``mrecur`` (one-versus-all margin): each round queries a sample and, per
  label, grows the sampled set to the smallest margin-consistent superset by
  a greedy closure; the closure is a subset of the true cluster whenever the
  margin holds.

Both remove what they labeled and repeat; a round cap plus an exhaustive
query fallback makes termination and exactness unconditional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import geometry
from .geometry import Pseudometric
from .oracle import Clustering, LabelOracle
from .sampling import RandomSource, WalkConfig, sample_without_replacement

CLOSURE_SLACK_REL = 1e-12
CLOSURE_SLACK_ABS = 1e-12


def default_sample_size(m: int, gamma: float, c_s: float = 10.0,
                        paper_formula: bool = False) -> int:
    """Per-cluster sample size for the hull expansion round.

    The desk-scale default drops the m^5 factor of the theoretical bound;
    ``paper_formula`` restores it.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    base = (1.0 + 1.0 / gamma) ** m
    if paper_formula:
        return max(1, math.ceil(c_s * m ** 5 * base * math.log(1.0 + 1.0 / gamma)))
    return max(1, math.ceil(c_s * base * math.log(math.e + 1.0 / gamma)))


@dataclass
class CheatrConfig:
    gamma: float
    s: int | None = None            # per-cluster sample size; None = formula
    c_s: float = 10.0
    paper_s: bool = False
    walk: WalkConfig = field(default_factory=WalkConfig)
    round_cap: int | None = None    # None = 8 * ceil(log2(n + 1))
    tol: float = 1e-8
    audit: bool = True

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be >= 1")
        if self.round_cap is not None and self.round_cap < 1:
            raise ValueError("round_cap must be >= 1")

    def resolve_s(self, m: int) -> int:
        if self.s is not None:
            return self.s
        return default_sample_size(m, self.gamma, self.c_s, self.paper_s)


@dataclass
class MrecurConfig:
    gamma: float
    metrics: list[Pseudometric]
    sample_multiplier: float = 1.0
    m_override: int | None = None   # packing bound; None = estimate from X
    round_cap: int | None = None
    audit: bool = True

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.sample_multiplier <= 0:
            raise ValueError("sample_multiplier must be positive")
        if self.m_override is not None and self.m_override < 1:
            raise ValueError("m_override must be >= 1")


@dataclass
class RecoveryReport:
    """Outcome of one recovery run."""

    labels: Clustering
    label_queries: int
    scq_queries: int
    rounds: int
    per_round: list[tuple[int, int, int]]   # (sampled, newly labeled, remaining)
    exact: bool
    misclassified_ever: int
    fallback_queries: int = 0


def _default_round_cap(n: int) -> int:
    return 8 * max(1, math.ceil(math.log2(n + 1)))


# ---------------------------------------------------------------------------
# Convex hull expansion trick
# ---------------------------------------------------------------------------

class HullTrickRegion:
    """Predicate for membership in the sampled hull inflated by 1+gamma.

    The inflation center is an approximate centroid of the hull, so by the
    expansion trick the region captures a large chunk of the cluster while
    never crossing the margin to other clusters.
    """

    def __init__(self, points: np.ndarray, gamma: float, center: np.ndarray,
                 tol: float):
        self.points = points
        self.gamma = gamma
        self.center = center
        self.tol = tol

    def contains_many(self, X) -> np.ndarray:
        return geometry.scaled_hull_contains_many(
            self.points, self.center, self.gamma, X, tol=self.tol)

    def __call__(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(self.contains_many(x[None, :])[0])


def hull_trick(S_points, gamma: float, walk: WalkConfig, rng: RandomSource,
               tol: float = 1e-8) -> HullTrickRegion:
    """Build the inflated-hull predicate for one sampled cluster."""
    P = geometry.as_points(S_points)
    if P.shape[0] == 0:
        raise ValueError("hull trick needs a nonempty sample")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    from .sampling import approx_centroid
    z = approx_centroid(P, walk, rng)
    return HullTrickRegion(points=P, gamma=gamma, center=z, tol=tol)


def _empty_report(k: int) -> RecoveryReport:
    return RecoveryReport(labels=Clustering(labels=np.zeros(0, dtype=int), k=k),
                          label_queries=0, scq_queries=0, rounds=0,
                          per_round=[], exact=True, misclassified_ever=0)


def cheatr(X, oracle: LabelOracle, cfg: CheatrConfig,
           rng: RandomSource) -> RecoveryReport:
    """Exact recovery under a convex hull margin of at least cfg.gamma.

    One-sided on margin-valid inputs: no point is ever assigned a label
    other than its true one.  On inputs violating the margin the round cap
    and query fallback still label everything, but exactness of predicted
    (non-queried) labels is no longer guaranteed.
    """
    P = geometry.as_points(X)
    n = P.shape[0]
    k = oracle.k
    if n == 0:
        return _empty_report(k)
    if oracle.n != n:
        raise ValueError("oracle and point set disagree on n")
    m = P.shape[1]
    s = cfg.resolve_s(m)
    round_cap = cfg.round_cap if cfg.round_cap is not None else _default_round_cap(n)
    truth = oracle.audit_labels if cfg.audit else None

    assigned = np.zeros(n, dtype=int)
    remaining = np.arange(n)
    per_round: list[tuple[int, int, int]] = []
    misclassified = 0
    rounds = 0

    while remaining.size > 0 and rounds < round_cap:
        round_rng = rng.fork(("round", rounds))
        take = min(remaining.size, k * s)
        sample = sample_without_replacement(remaining, take, round_rng)
        sample_labels = np.array([oracle.label_query(int(x)) for x in sample])
        assigned[sample] = sample_labels
        newly = sample.size

        still = assigned[remaining] == 0
        pool = remaining[still]
        for label in range(1, k + 1):
            S_i = sample[sample_labels == label]
            if S_i.size == 0 or pool.size == 0:
                continue
            region = hull_trick(P[S_i], cfg.gamma, cfg.walk,
                                round_rng.fork(("hull", label)), tol=cfg.tol)
            accept = region.contains_many(P[pool])
            hit = pool[accept]
            if truth is not None:
                misclassified += int((truth[hit] != label).sum())
            assigned[hit] = label
            newly += hit.size
            pool = pool[~accept]
        remaining = pool
        rounds += 1
        per_round.append((int(take), int(newly), int(remaining.size)))

    fallback = remaining.size
    for x in remaining:
        assigned[x] = oracle.label_query(int(x))
    if fallback:
        per_round.append((int(fallback), int(fallback), 0))

    exact = bool(np.array_equal(assigned, oracle.audit_labels))
    return RecoveryReport(
        labels=Clustering(labels=assigned, k=k),
        label_queries=oracle.label_queries,
        scq_queries=oracle.scq_queries,
        rounds=rounds,
        per_round=per_round,
        exact=exact,
        misclassified_ever=misclassified,
        fallback_queries=int(fallback),
    )


# ---------------------------------------------------------------------------
# Smallest consistent hypothesis in a margin class
# ---------------------------------------------------------------------------

def _closure_threshold(gamma: float, diam: float) -> float:
    return gamma * diam * (1.0 + CLOSURE_SLACK_REL) + CLOSURE_SLACK_ABS


def smallest_consistent(X, S_indices, d: Pseudometric, gamma: float) -> np.ndarray:
    """Smallest margin-consistent superset of S within X, by greedy closure.

    Grows C from S by absorbing every point within gamma * diam(C) of C (plus
    a conservative strictness slack) until a fixed point; the fixed point is
    the unique minimal member of {C : d(X \\ C, C) > gamma diam(C)} containing
    S.  Worst case the closure is all of X, which always qualifies.
    """
    P = geometry.as_points(X)
    S = np.unique(np.asarray(list(S_indices), dtype=int))
    if S.size == 0:
        return S
    if S.min() < 0 or S.max() >= P.shape[0]:
        raise ValueError("seed indices out of range")
    T = d.transform(P)
    n = P.shape[0]
    in_C = np.zeros(n, dtype=bool)
    in_C[S] = True
    if T.shape[1] == 0:
        return np.arange(n)  # zero seminorm: everything at distance 0
    from scipy.spatial.distance import cdist
    dist_to_C = cdist(T, T[S]).min(axis=1)
    dist_to_C[S] = 0.0
    members = T[S]
    diam = float(cdist(members, members).max(initial=0.0))
    while True:
        thr = _closure_threshold(gamma, diam)
        new = (~in_C) & (dist_to_C <= thr)
        if not new.any():
            break
        new_idx = np.nonzero(new)[0]
        in_C[new_idx] = True
        block = cdist(T, T[new_idx])
        dist_to_C = np.minimum(dist_to_C, block.min(axis=1))
        cross = cdist(T[new_idx], T[in_C])
        diam = max(diam, float(cross.max(initial=0.0)))
    return np.nonzero(in_C)[0]


def _in_margin_class(D: np.ndarray, mask: np.ndarray, gamma: float) -> bool:
    """Membership of the masked subset in the (slacked) margin class."""
    if mask.all():
        return True
    inside = np.nonzero(mask)[0]
    outside = np.nonzero(~mask)[0]
    if inside.size == 0:
        return True
    sub = D[np.ix_(inside, inside)]
    diam = float(sub.max(initial=0.0))
    dist = float(D[np.ix_(outside, inside)].min())
    return dist > _closure_threshold(gamma, diam)


def brute_force_smallest_consistent(X, S_indices, d: Pseudometric,
                                    gamma: float) -> np.ndarray:
    """Test oracle: intersection of all margin-class supersets of S.

    Enumerates every superset of S (so n <= 20), keeps the margin-consistent
    ones, and intersects them; the intersection is itself consistent because
    the class is closed under intersection.
    """
    P = geometry.as_points(X)
    n = P.shape[0]
    if n > 20:
        raise ValueError("brute force capped at 20 points")
    S = np.unique(np.asarray(list(S_indices), dtype=int))
    if S.size == 0:
        return S
    T = d.transform(P)
    if T.shape[1] == 0:
        return np.arange(n)
    from scipy.spatial.distance import cdist
    D = cdist(T, T)
    base = np.zeros(n, dtype=bool)
    base[S] = True
    free = np.nonzero(~base)[0]
    meet = np.ones(n, dtype=bool)
    found = False
    for r in range(free.size + 1):
        for extra in combinations(free.tolist(), r):
            mask = base.copy()
            if extra:
                mask[list(extra)] = True
            if _in_margin_class(D, mask, gamma):
                meet &= mask
                found = True
    if not found:  # unreachable: the full set is always in the class
        raise RuntimeError("no consistent superset found")
    assert _in_margin_class(D, meet, gamma)
    return np.nonzero(meet)[0]


# ---------------------------------------------------------------------------
# MRECUR
# ---------------------------------------------------------------------------

def mrecur(X, oracle: LabelOracle, cfg: MrecurConfig,
           rng: RandomSource) -> RecoveryReport:
    """Exact recovery under a one-versus-all margin of at least cfg.gamma.

    Per round, queries a sample of size ~ M k ln k and assigns each label's
    smallest consistent hypothesis over the still-unlabeled pool; M is the
    packing estimate for the instance unless overridden.
    """
    P = geometry.as_points(X)
    n = P.shape[0]
    k = oracle.k
    if len(cfg.metrics) != k:
        raise ValueError(f"need {k} metrics, got {len(cfg.metrics)}")
    if n == 0:
        return _empty_report(k)
    if oracle.n != n:
        raise ValueError("oracle and point set disagree on n")

    if cfg.m_override is not None:
        M = cfg.m_override
    else:
        from .margins import packing_estimate
        M = max(packing_estimate(P, cfg.gamma, d) for d in cfg.metrics)
        M = min(max(M, 1), n)
    sample_size = max(1, math.ceil(cfg.sample_multiplier * M * k *
                                   math.log(max(k, 2))))
    round_cap = cfg.round_cap if cfg.round_cap is not None else _default_round_cap(n)
    truth = oracle.audit_labels if cfg.audit else None

    assigned = np.zeros(n, dtype=int)
    remaining = np.arange(n)
    per_round: list[tuple[int, int, int]] = []
    misclassified = 0
    rounds = 0

    while remaining.size > 0 and rounds < round_cap:
        round_rng = rng.fork(("round", rounds))
        take = min(remaining.size, sample_size)
        sample = sample_without_replacement(remaining, take, round_rng)
        sample_labels = np.array([oracle.label_query(int(x)) for x in sample])

        pool = remaining  # closures are computed over the round-start pool
        pos_in_pool = {int(g): i for i, g in enumerate(pool)}
        hats: dict[int, np.ndarray] = {}
        for label in range(1, k + 1):
            S_i = sample[sample_labels == label]
            if S_i.size == 0:
                continue
            seed = [pos_in_pool[int(g)] for g in S_i]
            local = smallest_consistent(P[pool], seed, cfg.metrics[label - 1],
                                        cfg.gamma)
            hats[label] = pool[local]

        newly = 0
        for label in sorted(hats):
            hit = hats[label]
            hit = hit[assigned[hit] == 0]
            if truth is not None:
                misclassified += int((truth[hit] != label).sum())
            assigned[hit] = label
            newly += hit.size
        # sampled points are known exactly; never leave them mispredicted
        assigned[sample] = sample_labels
        remaining = remaining[assigned[remaining] == 0]
        rounds += 1
        per_round.append((int(take), int(newly), int(remaining.size)))

    fallback = remaining.size
    for x in remaining:
        assigned[x] = oracle.label_query(int(x))
    if fallback:
        per_round.append((int(fallback), int(fallback), 0))

    exact = bool(np.array_equal(assigned, oracle.audit_labels))
    return RecoveryReport(
        labels=Clustering(labels=assigned, k=k),
        label_queries=oracle.label_queries,
        scq_queries=oracle.scq_queries,
        rounds=rounds,
        per_round=per_round,
        exact=exact,
        misclassified_ever=misclassified,
        fallback_queries=int(fallback),
    )
