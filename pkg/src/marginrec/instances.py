"""Seeded generators for margin-controlled instances and the lower-bound
constructions.

Every generator measures its own margin claim with the margins module before
returning; an instance whose certificate does not re-verify is a bug, so
generators raise rather than emit one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry, margins
from .geometry import PointSet, Pseudometric
from .oracle import Clustering
from .sampling import GENERATOR_ALGORITHM, RandomSource

CERT_TOL = 1e-9


@dataclass
class Instance:
    """Points with a latent clustering, metric metadata, and margin
    certificates that the margins module re-verifies."""

    points: PointSet
    truth: Clustering
    metrics: list[Pseudometric] | None
    certified: dict[str, float]
    provenance: dict

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def m(self) -> int:
        return self.points.dim

    @property
    def k(self) -> int:
        return self.truth.k


def _provenance(name: str, params: dict, seed: int) -> dict:
    return {
        "generator": name,
        "params": params,
        "seed": seed,
        "rng": {"algorithm": GENERATOR_ALGORITHM, "numpy": np.__version__},
    }


def _simplex_vertices(count: int, dim: int) -> np.ndarray:
    """``count`` points in R^dim at equal pairwise distances, centered at 0,
    circumradius 1.  Requires count <= dim + 1."""
    if count > dim + 1:
        raise ValueError("a regular simplex needs count <= dim + 1")
    base = np.eye(count)
    base -= base.mean(axis=0)
    # orthonormal basis of the (count-1)-dim span, embedded into R^dim
    _, svals, vt = np.linalg.svd(base, full_matrices=False)
    coords = base @ vt[: count - 1].T if count > 1 else np.zeros((1, 0))
    out = np.zeros((count, dim))
    out[:, : max(count - 1, 0)] = coords
    radius = np.linalg.norm(out, axis=1).max(initial=0.0)
    if radius > 0:
        out /= radius
    return out


def _spread_centers(k: int, m: int, spacing: float, rng: RandomSource) -> np.ndarray:
    """k centers with pairwise distances >= spacing (equal when k <= m+1)."""
    if k <= m + 1:
        centers = _simplex_vertices(k, m)
        if k > 1:
            edge = np.linalg.norm(centers[0] - centers[1])
            centers *= spacing / edge
    else:
        centers = np.zeros((k, m))
        centers[:, 0] = spacing * np.arange(k)
    # random rotation keeps all pairwise distances
    gauss = rng.fork("rotation").generator.standard_normal((m, m))
    q, r = np.linalg.qr(gauss)
    q *= np.sign(np.diag(r))
    return centers @ q.T


def _uniform_ball(count: int, dim: int, radius: float, gen) -> np.ndarray:
    dirs = gen.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * gen.random(count) ** (1.0 / dim)
    return dirs * radii[:, None]


def _round_robin_sizes(n: int, k: int) -> np.ndarray:
    sizes = np.full(k, n // k, dtype=int)
    sizes[: n % k] += 1
    return sizes


def gen_convex_margin(m: int, k: int, n: int, gamma: float,
                      rng: RandomSource) -> Instance:
    """Clusters of uniform points in unit-diameter balls, far enough apart
    that the convex hull margin verifiably exceeds ``gamma``."""
    if m < 1 or k < 1 or n < k:
        raise ValueError("need m >= 1, k >= 1, n >= k")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    spacing = 1.0 + gamma + 0.2
    centers = _spread_centers(k, m, spacing, rng)
    sizes = _round_robin_sizes(n, k)
    blocks, labels = [], []
    for i in range(k):
        gen = rng.fork(("cluster", i)).generator
        blocks.append(centers[i] + _uniform_ball(sizes[i], m, 0.5, gen))
        labels.append(np.full(sizes[i], i + 1, dtype=int))
    points = PointSet(np.vstack(blocks))
    truth = Clustering(labels=np.concatenate(labels), k=k)
    metrics = [Pseudometric.euclidean()] * k

    ok, _ = margins.verify_convex_hull_margin(points, truth, metrics, gamma)
    if not ok:
        raise RuntimeError("generated instance failed margin verification")
    _, achieved = margins.convex_hull_margin(points, truth, metrics)
    if not achieved >= gamma - CERT_TOL:
        raise RuntimeError("certificate below requested margin")
    return Instance(points=points, truth=truth, metrics=metrics,
                    certified={"convex_hull": achieved},
                    provenance=_provenance(
                        "convex-margin",
                        {"m": m, "k": k, "n": n, "gamma": gamma}, rng.seed))


def gen_packing_instance(size: int, gamma: float, rng: RandomSource,
                         singleton: int | None = None) -> Instance:
    """Scaled regular simplex split into a random singleton vs the rest.

    ``size`` points at pairwise distance > 2*gamma*r inside a ball of radius
    r = 1, so the singleton clustering has one-versus-all margin > gamma.
    Realizable only while 2*gamma stays below the simplex edge ~ sqrt(2).
    """
    if size < 2:
        raise ValueError("need at least two points")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    edge = math.sqrt(2.0 * size / (size - 1.0))
    if 2.0 * gamma >= edge:
        raise ValueError(
            f"gamma={gamma} not realizable: needs 2*gamma < {edge:.4f}")
    m = size - 1
    pts = _simplex_vertices(size, m)
    if singleton is None:
        singleton = int(rng.fork("singleton").generator.integers(size))
    if not 0 <= singleton < size:
        raise ValueError("singleton index out of range")
    labels = np.full(size, 2, dtype=int)
    labels[singleton] = 1
    points = PointSet(pts)
    truth = Clustering(labels=labels, k=2)
    metrics = [Pseudometric.euclidean()] * 2

    per, achieved = margins.ova_margin(points, truth, metrics)
    if not achieved >= gamma - CERT_TOL:
        raise RuntimeError("packing instance failed margin verification")
    return Instance(points=points, truth=truth, metrics=metrics,
                    certified={"ova": achieved},
                    provenance=_provenance(
                        "packing",
                        {"size": size, "gamma": gamma, "singleton": singleton},
                        rng.seed))


def gen_svm_vs_ova(eta: float, a: float, rng: RandomSource) -> Instance:
    """Four points with unbounded one-versus-all margin but SVM margin
    shrinking with ``eta``: one cluster along each axis, with the axis-
    projection pseudometrics."""
    if not 0 < eta < a:
        raise ValueError("need 0 < eta < a")
    pts = np.array([[eta, 0.0], [a, 0.0], [0.0, eta], [0.0, a]])
    labels = np.array([1, 1, 2, 2])
    points = PointSet(pts)
    truth = Clustering(labels=labels, k=2)
    metrics = [Pseudometric.projection([[0.0, 1.0]]),
               Pseudometric.projection([[1.0, 0.0]])]

    per, achieved = margins.ova_margin(points, truth, metrics)
    if not math.isinf(achieved):
        raise RuntimeError("svm-vs-ova instance should have infinite margin")
    d_euclid = Pseudometric.euclidean()
    svm_upper = (eta * math.sqrt(2.0)) / geometry.diameter(d_euclid, pts)
    return Instance(points=points, truth=truth, metrics=metrics,
                    certified={"ova": achieved, "svm_ratio_upper": svm_upper},
                    provenance=_provenance(
                        "svm-vs-ova", {"eta": eta, "a": a}, rng.seed))


def gen_sphere_coslice(m: int, size: int, rng: RandomSource) -> Instance:
    """Packing of a small sphere poking just out of a large ball.

    All packing points lie inside the ball except one, so the singleton
    clustering is realizable by very simple concepts yet its one-versus-all
    margin shrinks as the packing grows.  The circle construction is placed
    in a random 2-plane of R^m.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    if size < 3:
        raise ValueError("need size >= 3")
    r, r_small = 1.0, 0.01
    # choose the overshoot so the outside cap spans angle < the point spacing
    theta_star = 0.9 * (2.0 * math.pi / size)
    cos_t = math.cos(theta_star)
    a = -r_small * cos_t + math.sqrt((r_small * cos_t) ** 2 + r * r - r_small ** 2)
    rho = a + r_small - r
    if rho <= 0:
        raise RuntimeError("degenerate overshoot")
    center_small = np.zeros(m)
    center_small[0] = a
    angles = 2.0 * math.pi * np.arange(size) / size
    ring = np.zeros((size, m))
    ring[:, 0] = a + r_small * np.cos(angles)
    ring[:, 1] = r_small * np.sin(angles)
    eta = 2.0 * r_small * math.sin(theta_star / 2.0)
    gauss = rng.fork("rotation").generator.standard_normal((m, m))
    q, rr = np.linalg.qr(gauss)
    q *= np.sign(np.diag(rr))
    pts = ring @ q.T  # rotation about the origin keeps the ball B in place

    labels = np.full(size, 2, dtype=int)
    labels[0] = 1  # the point outside the ball
    points = PointSet(pts)
    truth = Clustering(labels=labels, k=2)
    metrics = [Pseudometric.euclidean()] * 2
    per, achieved = margins.ova_margin(points, truth, metrics)
    return Instance(points=points, truth=truth, metrics=metrics,
                    certified={"ova": achieved},
                    provenance=_provenance(
                        "sphere-coslice",
                        {"m": m, "size": size, "r": r, "r_small": r_small,
                         "rho": rho, "eta": eta}, rng.seed))


def gen_center_proximity(m: int, k: int, n: int, alpha: float,
                         rng: RandomSource) -> Instance:
    """Center-based clusters whose measured center proximity exceeds alpha.

    Centers at mutual distance 1, points within radius rho of their center
    with (1 - rho)/rho = 1.1 * alpha, so every point is at least 1.1*alpha
    times closer to its own center.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if m < 1 or k < 1 or n < k:
        raise ValueError("need m >= 1, k >= 1, n >= k")
    rho = 1.0 / (1.1 * alpha + 1.0)
    centers = _spread_centers(k, m, 1.0, rng)
    sizes = _round_robin_sizes(n, k)
    blocks, labels = [], []
    for i in range(k):
        gen = rng.fork(("cluster", i)).generator
        blocks.append(centers[i] + _uniform_ball(sizes[i], m, rho, gen))
        labels.append(np.full(sizes[i], i + 1, dtype=int))
    points = PointSet(np.vstack(blocks))
    truth = Clustering(labels=np.concatenate(labels), k=k)
    d = Pseudometric.euclidean()

    measured = margins.center_proximity_alpha(points, truth, centers, d)
    if not measured >= alpha - CERT_TOL:
        raise RuntimeError("center proximity below target")
    metrics = [d] * k
    _, ova = margins.ova_margin(points, truth, metrics)
    bound = margins.proximity_margin_bound(measured)
    if not ova >= bound - CERT_TOL:
        raise RuntimeError("measured margin below the proximity bound")
    return Instance(points=points, truth=truth, metrics=metrics,
                    certified={"center_alpha": measured, "ova": ova},
                    provenance=_provenance(
                        "center-proximity",
                        {"m": m, "k": k, "n": n, "alpha": alpha,
                         "centers": centers.tolist()}, rng.seed))


GENERATORS = {
    "convex-margin": gen_convex_margin,
    "packing": gen_packing_instance,
    "svm-vs-ova": gen_svm_vs_ova,
    "sphere-coslice": gen_sphere_coslice,
    "center-proximity": gen_center_proximity,
}
