"""Margin measurement and verification, packing-number estimation, and the
center-proximity margin bound.

Two margin notions are measured.  The one-versus-all margin of a cluster is
the distance from the rest of the points to the cluster itself, relative to
the cluster diameter; the convex hull margin replaces the cluster by its
convex hull.  Conventions for degenerate clusters: an empty cluster (or an
empty complement) has margin infinity, a zero-diameter cluster at positive
distance has margin infinity, and distance zero gives margin zero.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry
from .geometry import Pseudometric, STRICT_SLACK
from .oracle import Clustering


def _ratio(dist: float, diam: float) -> float:
    if dist == 0.0:
        return 0.0
    if math.isinf(dist):
        return float("inf")
    if diam == 0.0:
        return float("inf")
    return dist / diam


def _cluster_split(X: np.ndarray, clustering: Clustering, cluster_id: int):
    mask = clustering.labels == cluster_id
    return X[mask], X[~mask]


def ova_margin(X, clustering: Clustering, metrics) -> tuple[list[float], float]:
    """Per-cluster one-versus-all margins and their minimum.

    ``metrics[i]`` is the pseudometric attached to cluster id i+1; exactly k
    metrics are required.
    """
    X = geometry.as_points(X)
    metrics = list(metrics)
    if len(metrics) != clustering.k:
        raise ValueError(f"need {clustering.k} metrics, got {len(metrics)}")
    per_cluster = []
    for i, d in enumerate(metrics, start=1):
        inside, outside = _cluster_split(X, clustering, i)
        dist = geometry.set_distance(d, outside, inside)
        diam = geometry.diameter(d, inside)
        per_cluster.append(_ratio(dist, diam))
    return per_cluster, min(per_cluster, default=float("inf"))


def convex_hull_margin(X, clustering: Clustering, metrics) -> tuple[list[float], float]:
    """Per-cluster convex-hull margins d_i(X \\ C_i, conv(C_i)) / diam(C_i)."""
    X = geometry.as_points(X)
    metrics = list(metrics)
    if len(metrics) != clustering.k:
        raise ValueError(f"need {clustering.k} metrics, got {len(metrics)}")
    per_cluster = []
    for i, d in enumerate(metrics, start=1):
        inside, outside = _cluster_split(X, clustering, i)
        if inside.shape[0] == 0 or outside.shape[0] == 0:
            per_cluster.append(float("inf"))
            continue
        dist = float(geometry.hull_distances(d, inside, outside).min())
        diam = geometry.diameter(d, inside)
        per_cluster.append(_ratio(dist, diam))
    return per_cluster, min(per_cluster, default=float("inf"))


def verify_convex_hull_margin(X, clustering: Clustering, metrics, gamma: float,
                              strict_slack: float = STRICT_SLACK):
    """Check d_i(X \\ C_i, conv(C_i)) > gamma * diam_i for every cluster.

    Returns (satisfied, per-cluster slack), slack_i = dist_i - gamma * diam_i;
    ``strict_slack`` absorbs float noise on the strict inequality.
    """
    X = geometry.as_points(X)
    metrics = list(metrics)
    if len(metrics) != clustering.k:
        raise ValueError(f"need {clustering.k} metrics, got {len(metrics)}")
    slacks = []
    for i, d in enumerate(metrics, start=1):
        inside, outside = _cluster_split(X, clustering, i)
        if inside.shape[0] == 0 or outside.shape[0] == 0:
            slacks.append(float("inf"))
            continue
        dist = float(geometry.hull_distances(d, inside, outside).min())
        diam = geometry.diameter(d, inside)
        slacks.append(dist - gamma * diam)
    ok = all(s > -strict_slack for s in slacks)
    return ok, slacks


# ---------------------------------------------------------------------------
# Packing numbers
# ---------------------------------------------------------------------------

def _greedy_packing_size(D: np.ndarray, threshold: float) -> int:
    """Greedy packing (index order) of the points behind distance matrix D."""
    n = D.shape[0]
    chosen: list[int] = []
    for j in range(n):
        if all(D[j, c] > threshold for c in chosen):
            chosen.append(j)
    return len(chosen)


def _exact_packing_size(D: np.ndarray, threshold: float) -> int:
    """Exhaustive max packing; exponential, for <= 10 points."""
    n = D.shape[0]
    conflict = D <= threshold
    np.fill_diagonal(conflict, False)
    conflict_masks = [int(sum(1 << j for j in range(n) if conflict[i, j]))
                      for i in range(n)]
    best = 0
    for subset in range(1 << n):
        if bin(subset).count("1") <= best:
            continue
        ok = True
        rest = subset
        while rest:
            i = (rest & -rest).bit_length() - 1
            if conflict_masks[i] & subset:
                ok = False
                break
            rest &= rest - 1
        if ok:
            best = bin(subset).count("1")
    return best


def packing_estimate(X, gamma: float, d: Pseudometric,
                     max_points: int = 512) -> int:
    """Instance-restricted estimate of the ball packing quantity.

    Scans balls B(x, r) with centers in X and radii equal to distances from
    x, and packs X within each ball at separation > gamma * r.  The result is
    a valid packing, hence a lower bound on the true supremum over all balls
    of the space; it is exact for |X| <= 10 (exhaustive search per ball).
    Sets larger than ``max_points`` are strided down first.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    P = geometry.as_points(X)
    n = P.shape[0]
    if n == 0:
        return 0
    if n > max_points:
        stride = -(-n // max_points)
        P = P[::stride]
        n = P.shape[0]
    T = d.transform(P)
    if T.shape[1] == 0:
        return 1
    from scipy.spatial.distance import squareform, pdist
    D = squareform(pdist(T)) if n > 1 else np.zeros((1, 1))
    exact = n <= 10
    best = 1
    for center in range(n):
        order = np.argsort(D[center], kind="stable")
        radii = D[center][order]
        for j in range(n):
            r = radii[j]
            if r <= 0.0:
                continue
            ball = order[: j + 1]
            if ball.shape[0] <= best:
                continue
            sub = D[np.ix_(ball, ball)]
            size = (_exact_packing_size(sub, gamma * r) if exact
                    else _greedy_packing_size(sub, gamma * r))
            best = max(best, size)
    return best


# ---------------------------------------------------------------------------
# Center proximity
# ---------------------------------------------------------------------------

def center_proximity_alpha(X, clustering: Clustering, centers,
                           d: Pseudometric) -> float:
    """Largest alpha with d(x, c_j) > alpha * d(x, c_i) for all x, j != i.

    Returns the minimum ratio over points and foreign centers (infinity when
    there are no such pairs); a value <= 1 means the clustering is not
    center-based for these centers.
    """
    X = geometry.as_points(X)
    centers = geometry.as_points(centers)
    if centers.shape[0] != clustering.k:
        raise ValueError(f"need {clustering.k} centers, got {centers.shape[0]}")
    if clustering.k == 1 or X.shape[0] == 0:
        return float("inf")
    dist = geometry.pairwise_distances(d, X, centers)
    own = dist[np.arange(X.shape[0]), clustering.labels - 1]
    foreign = dist.copy()
    foreign[np.arange(X.shape[0]), clustering.labels - 1] = np.inf
    nearest_foreign = foreign.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(own > 0.0, nearest_foreign / own,
                          np.where(nearest_foreign > 0.0, np.inf, 0.0))
    return float(ratios.min(initial=np.inf))


def proximity_margin_bound(alpha: float) -> float:
    """One-versus-all margin guaranteed by alpha-center proximity."""
    if not alpha > 1.0:
        raise ValueError("alpha must exceed 1")
    if math.isinf(alpha):
        return float("inf")
    return (alpha - 1.0) ** 2 / (2.0 * (alpha + 1.0))
