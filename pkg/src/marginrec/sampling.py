"""Seeded randomness and uniform sampling over convex hulls.

The random source wraps numpy's PCG64 bit generator behind a forkable
interface: children are derived from the parent seed plus a label, so
concurrent walks and trials reproduce independently of scheduling.  The
hit-and-run walk runs many walkers at once; each step draws a direction
uniformly on the sphere of the hull's affine span, finds the chord through
the current point with two ray-exit programs, and jumps to a uniform point
of the chord.  Every position is an explicit convex combination, so walkers
can never leave the hull.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from ._simplex import ChordSolver

GENERATOR_ALGORITHM = "numpy-PCG64"


def _label_word(label) -> int:
    digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


class RandomSource:
    """Deterministic random stream: same seed, same platform, same numbers.

    Backed by ``numpy.random.Generator(PCG64(SeedSequence(...)))``.  Forked
    children extend the spawn key with a hash of the label, so a child's
    stream depends only on (seed, chain of labels).
    """

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed)
        self._key = tuple(_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self._key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def fork(self, label) -> "RandomSource":
        return RandomSource(self.seed, self._key + (_label_word(label),))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, key={self._key})"


@dataclass(frozen=True)
class WalkConfig:
    """Hit-and-run budget: steps per sample, sample count, uniformity gap.

    Unset fields resolve per hull rank r: eps = 1/(8(r+1)), N = 50(r+1)^2,
    and t = max(200, 25 r^2) by default.  ``paper_steps`` switches the step
    count to ``step_const * r^4 * ln(r/eps)`` instead.
    """

    steps: int | None = None
    samples: int | None = None
    eps: float | None = None
    paper_steps: bool = False
    step_const: float = 1.0

    def __post_init__(self):
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.samples is not None and self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.eps is not None and not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    def resolve_eps(self, rank: int) -> float:
        return self.eps if self.eps is not None else 1.0 / (8.0 * (rank + 1))

    def resolve_steps(self, rank: int) -> int:
        if self.steps is not None:
            return self.steps
        r = max(rank, 1)
        if self.paper_steps:
            eps = self.resolve_eps(rank)
            return max(1, math.ceil(self.step_const * r ** 4 * math.log(r / eps)))
        return max(200, 25 * r * r)

    def resolve_samples(self, rank: int) -> int:
        if self.samples is not None:
            return self.samples
        return 50 * (rank + 1) ** 2


def sample_without_replacement(indices, size: int, rng: RandomSource) -> np.ndarray:
    """min(size, n) distinct entries of ``indices``, uniformly, seeded."""
    idx = np.asarray(indices, dtype=int)
    if size < 0:
        raise ValueError("size must be nonnegative")
    take = min(size, idx.shape[0])
    if take == 0:
        return np.zeros(0, dtype=int)
    picked = rng.generator.choice(idx.shape[0], size=take, replace=False)
    return idx[picked]


# ---------------------------------------------------------------------------
# Hit-and-run
# ---------------------------------------------------------------------------

def _walk_batch(Y: np.ndarray, starts: np.ndarray, normals: np.ndarray,
                unifs: np.ndarray) -> np.ndarray:
    """Run W simultaneous hit-and-run walks inside conv(Y) (full-rank coords).

    ``normals`` is (W, t, r) driving the directions, ``unifs`` is (W, t)
    driving the chord positions.  Returns the final (W, r) positions.
    """
    W, t, r = normals.shape
    Y = geometry.extreme_points(Y, cutoff=16)  # same hull, fewer columns
    h = Y.shape[0]
    G = np.vstack([Y.T, np.ones((1, h))])
    solver = ChordSolver(G)
    pos = np.array(starts, dtype=float, copy=True)
    ones = np.ones((W, 1))
    for step in range(t):
        u = normals[:, step, :]
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        u = np.where(norms > 1e-300, u / np.maximum(norms, 1e-300),
                     np.eye(r)[0][None, :])
        b = np.hstack([pos, ones])
        # max alpha with pos + alpha*u (resp. -u) still inside the hull
        extra = np.hstack([-u, np.zeros((W, 1))])
        a_fwd, a_bwd, _ = solver.exits(b, extra)
        beta = -a_bwd + unifs[:, step] * (a_fwd + a_bwd)
        pos = pos + beta[:, None] * u
    return pos


def _per_walk_randomness(rng: RandomSource, count: int, steps: int, rank: int):
    normals = np.empty((count, steps, rank))
    unifs = np.empty((count, steps))
    for i in range(count):
        child = rng.fork(("walk", i))
        normals[i] = child.generator.standard_normal((steps, rank))
        unifs[i] = child.generator.random(steps)
    return normals, unifs


def hit_and_run_samples(V, start, t: int, count: int, rng: RandomSource,
                        tol: float = 1e-7) -> np.ndarray:
    """``count`` independent hit-and-run walks of ``t`` steps from ``start``.

    Directions are uniform on the sphere of the affine span of V; each walk
    uses its own forked child stream.  Returns (count, m) final positions.
    """
    if t < 1:
        raise ValueError("step count must be >= 1")
    if count < 1:
        raise ValueError("need at least one walk")
    P = geometry.as_points(V)
    start = np.asarray(start, dtype=float)
    c0, B, rank = geometry.affine_span(P)
    if rank == 0:
        if np.linalg.norm(start - P[0]) > tol:
            raise ValueError("start lies outside the hull")
        return np.tile(P[0], (count, 1))
    span_resid = np.linalg.norm((start - c0) - B @ (B.T @ (start - c0)))
    if span_resid > tol:
        raise ValueError("start lies outside the hull's affine span")
    Y = (P - c0) @ B
    y0 = B.T @ (start - c0)
    if not geometry.hull_contains_many(Y, y0[None, :], tol=max(tol, 1e-9))[0]:
        raise ValueError("start lies outside the hull")
    normals, unifs = _per_walk_randomness(rng, count, t, rank)
    starts = np.tile(y0, (count, 1))
    pos = _walk_batch(Y, starts, normals, unifs)
    return c0[None, :] + pos @ B.T


def hit_and_run_sample(V, start, t: int, rng: RandomSource,
                       tol: float = 1e-7) -> np.ndarray:
    """Position of a single hit-and-run walk after ``t`` steps."""
    return hit_and_run_samples(V, start, t, 1, rng, tol=tol)[0]


def approx_centroid(V, cfg: WalkConfig, rng: RandomSource) -> np.ndarray:
    """Approximate centroid of conv(V): mean of N near-uniform samples.

    The hull is first mapped to near-isotropic position (MVEE to unit ball);
    walks start at the MVEE center, which the map sends to the origin.  The
    mean is mapped back, so the result is a convex combination of hull points.
    """
    P = geometry.as_points(V)
    if P.shape[0] == 0:
        raise ValueError("centroid of an empty set is undefined")
    amap, Y = geometry.isotropic_transform(P)
    rank = amap.rank
    if rank == 0:
        return P.mean(axis=0)
    t = cfg.resolve_steps(rank)
    n_samples = cfg.resolve_samples(rank)
    normals, unifs = _per_walk_randomness(rng, n_samples, t, rank)
    starts = np.zeros((n_samples, rank))
    pos = _walk_batch(Y, starts, normals, unifs)
    return amap.invert(pos.mean(axis=0))
