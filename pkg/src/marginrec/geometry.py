"""Geometric primitives: seminorm pseudometrics, convex-hull queries via
linear feasibility, minimum-volume enclosing ellipsoids, and near-isotropic
affine transforms.

Hulls are always handled through their vertex description.  Membership and
ray-exit questions are linear programs over convex-combination weights
(solved by the batched simplex in ``_simplex``); hull distances under a
seminorm are convex quadratics over the weight simplex (solved by pairwise
Frank-Wolfe).  Facet enumerations are never built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import QhullError, ConvexHull
from scipy.spatial.distance import cdist, pdist

from ._simplex import feasibility_residuals, ray_exit_lengths

MEMBERSHIP_TOL = 1e-8
HULL_DISTANCE_TOL = 1e-6
RANK_RTOL = 1e-9
MVEE_EPS = 1e-3
STRICT_SLACK = 1e-9

_EXTREME_CUTOFF = 1024  # above this, reduce big vertex sets to extreme points


class ConvergenceError(RuntimeError):
    """Iterative routine hit its cap; ``best`` carries the best value seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def as_points(V) -> np.ndarray:
    """Coerce a PointSet or array-like to a (n, m) float array."""
    arr = np.asarray(getattr(V, "coords", V), dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d point array, got shape {arr.shape}")
    return arr


def _check_finite(arr, what="points"):
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} must be finite (no NaN/inf)")


@dataclass(frozen=True)
class PointSet:
    """Finite indexed set of m-dimensional points; indices 0..n-1 are stable."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.coords, dtype=float))
        if arr.ndim != 2:
            raise ValueError("PointSet needs an (n, m) array")
        _check_finite(arr)
        object.__setattr__(self, "coords", arr)
        self.coords.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __getitem__(self, idx):
        return self.coords[idx]

    def subset(self, indices) -> np.ndarray:
        return self.coords[np.asarray(indices, dtype=int)]


# ---------------------------------------------------------------------------
# Pseudometrics induced by seminorms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pseudometric:
    """Distance induced by a seminorm: euclidean, sqrt of a PSD quadratic
    form, or euclidean after orthogonal projection onto a subspace.

    All three evaluate as ||F (x - y)||_2 for a factor matrix F, so two
    distinct points may sit at distance zero.
    """

    kind: str
    matrix: np.ndarray | None = None   # mahalanobis: PSD m x m
    basis: np.ndarray | None = None    # projection: (q, m), orthonormal rows
    _factor: np.ndarray | None = field(default=None, repr=False)

    SYM_TOL = 1e-9
    PSD_TOL = -1e-9
    ORTHO_TOL = 1e-9

    @staticmethod
    def euclidean() -> "Pseudometric":
        return Pseudometric(kind="euclidean")

    @staticmethod
    def mahalanobis(W) -> "Pseudometric":
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("mahalanobis matrix must be square")
        _check_finite(W, "matrix")
        if np.abs(W - W.T).max(initial=0.0) > Pseudometric.SYM_TOL:
            raise ValueError("mahalanobis matrix must be symmetric")
        W = 0.5 * (W + W.T)
        evals, evecs = np.linalg.eigh(W)
        if evals.min(initial=0.0) < Pseudometric.PSD_TOL:
            raise ValueError("mahalanobis matrix must be positive semidefinite")
        factor = np.sqrt(np.clip(evals, 0.0, None))[:, None] * evecs.T
        return Pseudometric(kind="mahalanobis", matrix=W, _factor=factor)

    @staticmethod
    def projection(basis) -> "Pseudometric":
        B = np.asarray(basis, dtype=float)
        if B.ndim == 1:
            B = B[None, :]
        _check_finite(B, "basis")
        gram = B @ B.T
        if np.abs(gram - np.eye(B.shape[0])).max(initial=0.0) > Pseudometric.ORTHO_TOL:
            raise ValueError("projection basis must have orthonormal rows")
        return Pseudometric(kind="projection", basis=B, _factor=B)

    @property
    def dim(self) -> int | None:
        """Ambient dimension, or None for the dimension-free euclidean kind."""
        if self.kind == "mahalanobis":
            return self.matrix.shape[0]
        if self.kind == "projection":
            return self.basis.shape[1]
        return None

    def check_dim(self, m: int):
        if self.dim is not None and self.dim != m:
            raise ValueError(f"pseudometric expects dimension {self.dim}, got {m}")

    def transform(self, X) -> np.ndarray:
        """Map points so that this distance becomes plain euclidean."""
        X = np.asarray(X, dtype=float)
        if self.kind == "euclidean":
            return X
        self.check_dim(X.shape[-1])
        return X @ self._factor.T


def distance(d: Pseudometric, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("points must be 1-d and share a dimension")
    _check_finite(x)
    _check_finite(y)
    d.check_dim(x.shape[0])
    return float(np.linalg.norm(d.transform((x - y)[None, :])[0]))


def pairwise_distances(d: Pseudometric, A, B) -> np.ndarray:
    """(len(A), len(B)) distance matrix under ``d``."""
    A = d.transform(as_points(A))
    B = d.transform(as_points(B))
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    return cdist(A, B)


def extreme_points(P, cutoff: int = _EXTREME_CUTOFF) -> np.ndarray:
    """Extreme points of conv(P): the same hull on fewer vertices.

    A pure vertex-set reduction (no facet structure is kept); used to shrink
    large vertex sets before membership, walk, and distance computations.
    Falls back to the full set when the hull is degenerate or above 3-d.
    """
    P = as_points(P)
    n, q = P.shape
    if n <= cutoff:
        return P
    c0, B, rank = affine_span(P)
    if rank == 0:
        return P[:1]
    Y = (P - c0) @ B
    if rank == 1:
        return P[[int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))]]
    if rank > 3:
        return P
    try:
        hull = ConvexHull(Y)
    except QhullError:
        return P
    return P[np.sort(np.asarray(hull.vertices, dtype=int))]


_extreme_subset = extreme_points


def diameter(d: Pseudometric, S) -> float:
    """Max pairwise distance; 0 on the empty set and on singletons."""
    S = as_points(S)
    if S.shape[0] <= 1:
        return 0.0
    P = d.transform(S)
    if P.shape[1] == 0:
        return 0.0
    P = _extreme_subset(P)
    n = P.shape[0]
    if n <= 4096:
        return float(pdist(P).max(initial=0.0))
    best = 0.0
    step = 1024
    for i in range(0, n, step):
        block = cdist(P[i:i + step], P)
        best = max(best, float(block.max()))
    return best


def set_distance(d: Pseudometric, U, S) -> float:
    """Min cross-pair distance; infinity when either side is empty."""
    U = as_points(U)
    S = as_points(S)
    if U.shape[0] == 0 or S.shape[0] == 0:
        return float("inf")
    A = d.transform(U)
    B = d.transform(S)
    if A.shape[1] == 0:
        return 0.0
    best = np.inf
    step = max(1, int(4e6) // max(1, B.shape[0]))
    for i in range(0, A.shape[0], step):
        block = cdist(A[i:i + step], B)
        best = min(best, float(block.min()))
    return best


# ---------------------------------------------------------------------------
# Affine span
# ---------------------------------------------------------------------------

def affine_span(V, rtol: float = RANK_RTOL):
    """Affine span of a point set.

    Returns ``(origin, basis, rank)`` with ``basis`` of shape (m, rank),
    orthonormal columns; every point satisfies v = origin + basis @ y.
    """
    P = as_points(V)
    if P.shape[0] == 0:
        raise ValueError("empty point set has no affine span")
    c0 = P.mean(axis=0)
    D = P - c0
    if P.shape[0] == 1:
        return c0, np.zeros((P.shape[1], 0)), 0
    _, svals, vt = np.linalg.svd(D, full_matrices=False)
    top = svals.max(initial=0.0)
    rank = int((svals > rtol * max(top, 1e-300)).sum()) if top > 0 else 0
    return c0, vt[:rank].T.copy(), rank


# ---------------------------------------------------------------------------
# Hull membership / ray exit via linear feasibility
# ---------------------------------------------------------------------------

def _conditioned(V: np.ndarray):
    c = V.mean(axis=0)
    scale = max(1.0, float(np.abs(V - c).max(initial=0.0)))
    return c, scale


def _membership_residuals(V: np.ndarray, X: np.ndarray):
    """Scaled phase-1 residuals plus the scale used (decision: resid <= tol/scale)."""
    c, scale = _conditioned(V)
    Vs = (V - c) / scale
    Xs = (X - c) / scale
    h = Vs.shape[0]
    G = np.vstack([Vs.T, np.ones((1, h))])
    b = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    return feasibility_residuals(G, b), scale


def hull_contains_many(V, X, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Vectorized convex-hull membership for the rows of ``X``."""
    V = as_points(V)
    X = as_points(X)
    if V.shape[0] == 0:
        raise ValueError("membership in the hull of an empty set is undefined")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if V.shape[1] != X.shape[1]:
        raise ValueError("dimension mismatch between hull and query points")
    _check_finite(V)
    _check_finite(X)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if V.shape[0] > 64:
        V = extreme_points(V, cutoff=64)
    resid, scale = _membership_residuals(V, X)
    return resid <= tol / scale


def hull_contains(V, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """True iff x is a convex combination of V within ``tol``."""
    x = np.asarray(x, dtype=float)
    return bool(hull_contains_many(V, x[None, :], tol=tol)[0])


def scaled_hull_contains_many(V, z, gamma: float, X,
                              tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Membership in the homothetic copy of conv(V) about z with ratio 1+gamma.

    Implemented by mapping each query point back: x is in z + (1+gamma)(K - z)
    iff z + (x - z)/(1 + gamma) is in K.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    z = np.asarray(z, dtype=float)
    _check_finite(z, "scaling center")
    X = as_points(X)
    mapped = z[None, :] + (X - z[None, :]) / (1.0 + gamma)
    return hull_contains_many(V, mapped, tol=tol)


def scaled_hull_contains(V, z, gamma: float, x,
                         tol: float = MEMBERSHIP_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(scaled_hull_contains_many(V, z, gamma, x[None, :], tol=tol)[0])


def ray_hull_exit(V, x, u, tol: float = MEMBERSHIP_TOL) -> float:
    """Largest alpha >= 0 with x + alpha*u still inside conv(V).

    Requires x inside the hull and ||u|| = 1.  A direction along which the
    hull is flat returns 0.
    """
    V = as_points(V)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if V.shape[0] == 0:
        raise ValueError("empty hull")
    _check_finite(V)
    _check_finite(x)
    _check_finite(u, "direction")
    nrm = float(np.linalg.norm(u))
    if abs(nrm - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    u = u / nrm
    c, scale = _conditioned(V)
    Vs = (V - c) / scale
    xs = (x - c) / scale
    h = Vs.shape[0]
    G = np.vstack([Vs.T, np.ones((1, h))])
    b = np.hstack([xs, [1.0]])[None, :]
    extra = np.hstack([-u, [0.0]])[None, :]
    alpha, resid = ray_exit_lengths(G, b, extra)
    if resid[0] > tol / scale:
        raise ValueError("ray origin lies outside the hull")
    return float(alpha[0] * scale)


# ---------------------------------------------------------------------------
# Minimum-volume enclosing ellipsoid (Khachiyan rounding with away steps)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid { x in span : (x-c)^T A (x-c) <= 1 } inside an affine span.

    ``basis`` has orthonormal columns spanning the (translated) span; for a
    full-rank set it is the identity.  ``shape`` is rank x rank positive
    definite.  A rank-0 ellipsoid is a single point.
    """

    center: np.ndarray
    shape: np.ndarray
    basis: np.ndarray
    rank: int

    def span_residuals(self, X) -> np.ndarray:
        X = as_points(X)
        D = X - self.center[None, :]
        back = D @ self.basis @ self.basis.T
        return np.linalg.norm(D - back, axis=1)

    def quadratic(self, X) -> np.ndarray:
        """(x-c)^T A (x-c) evaluated inside the span (0 for rank 0)."""
        X = as_points(X)
        if self.rank == 0:
            return np.zeros(X.shape[0])
        Y = (X - self.center[None, :]) @ self.basis
        return np.einsum("ij,jk,ik->i", Y, self.shape, Y)

    def contains(self, X, tol: float = 1e-7) -> np.ndarray:
        X = as_points(X)
        ok_span = self.span_residuals(X) <= tol
        return ok_span & (self.quadratic(X) <= 1.0 + tol)

    def semiaxis_lengths(self) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(0)
        evals = np.linalg.eigvalsh(self.shape)
        return 1.0 / np.sqrt(np.clip(evals, 1e-300, None))

    def boundary_points(self, count: int, gen, shrink: float = 1.0) -> np.ndarray:
        """Sample ``count`` points on the boundary of the shrunk ellipsoid.

        ``gen`` is a numpy Generator; ``shrink`` rescales radii about the
        center (e.g. 1/rank for the inscribed John ellipsoid).
        """
        if self.rank == 0:
            return np.tile(self.center, (count, 1))
        dirs = gen.standard_normal((count, self.rank))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        evals, evecs = np.linalg.eigh(self.shape)
        root_inv = evecs / np.sqrt(np.clip(evals, 1e-300, None))
        Y = dirs @ root_inv.T * shrink
        return self.center[None, :] + Y @ self.basis.T


def _khachiyan_weights(Y: np.ndarray, eps: float, max_iter: int = 200000):
    """Wolfe-Atwood (add + away/drop steps) Khachiyan weights on rows of Y."""
    h, r = Y.shape
    n = r + 1
    Q = np.hstack([Y, np.ones((h, 1))])
    u = np.full(h, 1.0 / h)
    target = min(eps, 1e-9)

    def recompute():
        M = Q.T @ (u[:, None] * Q)
        Minv = np.linalg.inv(M)
        kappa = np.einsum("ij,jk,ik->i", Q, Minv, Q)
        return Minv, kappa

    Minv, kappa = recompute()
    for it in range(max_iter):
        jmax = int(np.argmax(kappa))
        eps_plus = kappa[jmax] / n - 1.0
        support = u > 0.0
        kappa_support = np.where(support, kappa, np.inf)
        jmin = int(np.argmin(kappa_support))
        eps_minus = 1.0 - kappa[jmin] / n
        if max(eps_plus, eps_minus) <= target:
            return u
        if eps_plus >= eps_minus:
            j = jmax
            k = kappa[j]
            beta = (k - n) / (n * (k - 1.0))
        else:
            j = jmin
            k = kappa[j]
            cap = -u[j] / (1.0 - u[j]) if u[j] < 1.0 else 0.0
            beta = cap if k <= 1.0 + 1e-12 else max((k - n) / (n * (k - 1.0)), cap)
        q = Q[j]
        g = Q @ (Minv @ q)
        denom = 1.0 - beta + beta * kappa[j]
        kappa = (kappa - (beta / denom) * g * g) / (1.0 - beta)
        Mq = Minv @ q
        Minv = (Minv - (beta / denom) * np.outer(Mq, Mq)) / (1.0 - beta)
        u *= (1.0 - beta)
        u[j] += beta
        np.clip(u, 0.0, None, out=u)
        if (it + 1) % 2000 == 0:
            Minv, kappa = recompute()
    raise ConvergenceError("MVEE rounding did not reach its tolerance", best=u)


def _mvee_span(Y: np.ndarray, eps: float):
    """Center and shape matrix of the (1+eps)-MVEE of full-rank rows Y."""
    u = _khachiyan_weights(Y, eps)
    c = u @ Y
    D = Y - c
    Sigma = D.T @ (u[:, None] * D)
    vals = np.einsum("ij,ij->i", D, np.linalg.solve(Sigma, D.T).T)
    rho = float(vals.max())
    A = np.linalg.inv(Sigma) / rho
    return c, 0.5 * (A + A.T)


def mvee(V, eps: float = MVEE_EPS) -> Ellipsoid:
    """(1+eps)-approximate minimum-volume enclosing ellipsoid of V.

    Computed inside the affine span of V; all points end up inside the
    returned ellipsoid, and the copy shrunk by the rank stays inside conv(V)
    (John's theorem; the rounding is polished well past ``eps`` so this holds
    to ~1e-8).
    """
    P = as_points(V)
    if P.shape[0] == 0:
        raise ValueError("MVEE of an empty set is undefined")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    _check_finite(P)
    c0, B, rank = affine_span(P)
    if rank == 0:
        return Ellipsoid(center=P[0].copy(), shape=np.zeros((0, 0)),
                         basis=np.zeros((P.shape[1], 0)), rank=0)
    Y = (P - c0) @ B
    c_r, A = _mvee_span(Y, eps)
    return Ellipsoid(center=c0 + B @ c_r, shape=A, basis=B, rank=rank)


# ---------------------------------------------------------------------------
# Near-isotropic transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """Affine map y = linear @ x + offset with a precomputed right inverse."""

    linear: np.ndarray
    offset: np.ndarray
    rank: int
    inv_linear: np.ndarray
    inv_offset: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Y = np.atleast_2d(X) @ self.linear.T + self.offset[None, :]
        return Y[0] if single else Y

    def invert(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        single = Y.ndim == 1
        X = np.atleast_2d(Y) @ self.inv_linear.T + self.inv_offset[None, :]
        return X[0] if single else X


def isotropic_transform(V, eps: float = MVEE_EPS):
    """Map V into its affine span and send the MVEE to the unit ball.

    Returns ``(amap, transformed)``: the transformed points live in R^rank,
    inside the unit ball, with the MVEE center at the origin.
    """
    P = as_points(V)
    if P.shape[0] == 0:
        raise ValueError("cannot transform an empty set")
    c0, B, rank = affine_span(P)
    m = P.shape[1]
    if rank == 0:
        amap = AffineMap(linear=np.zeros((0, m)), offset=np.zeros(0), rank=0,
                         inv_linear=np.zeros((m, 0)), inv_offset=c0.copy())
        return amap, np.zeros((P.shape[0], 0))
    Y = (P - c0) @ B
    c_r, A = _mvee_span(Y, eps)
    evals, evecs = np.linalg.eigh(A)
    evals = np.clip(evals, 1e-300, None)
    root = (evecs * np.sqrt(evals)) @ evecs.T
    root_inv = (evecs / np.sqrt(evals)) @ evecs.T
    linear = root @ B.T
    offset = -root @ (B.T @ c0 + c_r)
    inv_linear = B @ root_inv
    inv_offset = c0 + B @ c_r
    amap = AffineMap(linear=linear, offset=offset, rank=rank,
                     inv_linear=inv_linear, inv_offset=inv_offset)
    return amap, amap.apply(P)


# ---------------------------------------------------------------------------
# Distance to a convex hull under a pseudometric (pairwise Frank-Wolfe)
# ---------------------------------------------------------------------------

def hull_distances(d: Pseudometric, V, X, tol: float = HULL_DISTANCE_TOL,
                   max_iter: int | None = None) -> np.ndarray:
    """Distance from each row of X to conv(V) under ``d``.

    Minimizes ||F(V^T lam - x)||^2 over the weight simplex with pairwise
    Frank-Wolfe and exact line search, to relative duality gap ``tol``.
    """
    V = as_points(V)
    X = as_points(X)
    if V.shape[0] == 0:
        raise ValueError("distance to the hull of an empty set is undefined")
    if V.shape[1] != X.shape[1]:
        raise ValueError("dimension mismatch")
    _check_finite(V)
    _check_finite(X)
    W = X.shape[0]
    if W == 0:
        return np.zeros(0)
    Vt = d.transform(V)
    Xt = d.transform(X)
    if Vt.shape[1] == 0:
        return np.zeros(W)
    Vt = _extreme_subset(Vt)
    h = Vt.shape[0]
    if max_iter is None:
        max_iter = max(2000, 40 * h)

    start = np.argmin(cdist(Xt, Vt), axis=1)
    lam = np.zeros((W, h))
    lam[np.arange(W), start] = 1.0
    y = Vt[start]

    active = np.arange(W)
    out = np.zeros(W)
    for _ in range(max_iter):
        if active.size == 0:
            return np.sqrt(np.maximum(out, 0.0))
        g = y[active] - Xt[active]
        f = np.einsum("ij,ij->i", g, g)
        scores = g @ Vt.T
        s = np.argmin(scores, axis=1)
        gap = 2.0 * (np.einsum("ij,ij->i", g, y[active]) -
                     scores[np.arange(active.size), s])
        done = (gap <= tol * np.maximum(f, 1e-30)) | (gap <= 1e-18) | (f <= 1e-24)
        out[active] = f
        if done.any():
            still = ~done
            active = active[still]
            if active.size == 0:
                return np.sqrt(np.maximum(out, 0.0))
            g, f, scores, s = g[still], f[still], scores[still], s[still]
        rows = np.arange(active.size)
        masked = np.where(lam[active] > 0.0, scores, -np.inf)
        a = np.argmax(masked, axis=1)
        dvec = Vt[s] - Vt[a]
        denom = np.einsum("ij,ij->i", dvec, dvec)
        step_raw = -np.einsum("ij,ij->i", g, dvec) / np.maximum(denom, 1e-300)
        step = np.clip(step_raw, 0.0, lam[active, a])
        step = np.where(denom <= 1e-300, 0.0, step)
        lam[active, s] += step
        lam[active, a] -= step
        y[active] = y[active] + step[:, None] * dvec
    out_active = np.einsum("ij,ij->i", y[active] - Xt[active], y[active] - Xt[active])
    out[active] = out_active
    raise ConvergenceError("hull distance iteration cap exceeded",
                           best=np.sqrt(np.maximum(out, 0.0)))


def hull_distance(d: Pseudometric, V, x, tol: float = HULL_DISTANCE_TOL,
                  max_iter: int | None = None) -> float:
    """Distance from one point to conv(V) under ``d``."""
    x = np.asarray(x, dtype=float)
    return float(hull_distances(d, V, x[None, :], tol=tol, max_iter=max_iter)[0])
