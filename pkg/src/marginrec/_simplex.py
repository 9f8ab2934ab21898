"""Batched dense simplex solver for hull membership and ray-exit programs.

All hull queries in this package reduce to tiny linear programs over convex
combination weights: a feasibility program (is x a convex combination of the
columns?) and a ray program (how far can x move along u while staying one?).
Both are solved with a two-phase primal simplex, batch-first: one call
solves the same program for many right-hand sides (many query points, or
many hit-and-run walkers) with vectorized pivots, dropping items as they
reach optimality.

Pricing uses Dantzig's rule and falls back to Bland's rule (smallest index)
after a per-call pivot budget, which rules out cycling while keeping the
typical pivot count near the minimum.  The basis inverse is maintained with
eta updates and refactorized periodically; bases are at most (m+1) x (m+1).

Column layout per item: ``n_shared`` shared structural columns, one optional
per-item extra column (the ray direction), then ``r`` artificial columns
used by phase 1.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-11
STABILITY_TOL = 1e-9     # small pivot elements trigger refactorization
REFACTOR_EVERY = 64
DEFAULT_MAX_PIVOTS = 20000


class SimplexError(RuntimeError):
    """Pivot cap exceeded or a basis became numerically singular."""


class _BatchLP:
    """A batch of LPs sharing the structural matrix ``G`` (r x n_shared).

    Variables per item: shared structural columns, an optional per-item
    ``extra`` column, and r artificial columns whose signs match b.
    """

    def __init__(self, G, b, extra=None):
        self.G = np.ascontiguousarray(G, dtype=float)
        self.b = np.ascontiguousarray(b, dtype=float)
        self.r, self.n_shared = self.G.shape
        self.W = self.b.shape[0]
        self.extra = None if extra is None else np.ascontiguousarray(extra, dtype=float)
        self.n_struct = self.n_shared + (0 if extra is None else 1)
        self.n_cols = self.n_struct + self.r
        sigma = np.sign(self.b)
        sigma[sigma == 0.0] = 1.0
        self.sigma = sigma
        # all-artificial start: B = diag(sigma) is its own inverse
        self.basis = np.tile(np.arange(self.n_struct, self.n_cols), (self.W, 1))
        eye = np.eye(self.r)
        self.Binv = sigma[:, :, None] * eye[None, :, :]
        self.xB = np.abs(self.b).copy()

    def rebase(self, new_b) -> None:
        """Move to new right-hand sides, keeping bases where still feasible.

        Items whose current basis prices the new b with nonnegative basics
        keep it (their phase 1 then terminates in zero pivots); the rest are
        reset to the all-artificial start.
        """
        if self.extra is not None:
            raise ValueError("rebase is only supported without an extra column")
        self.b = np.ascontiguousarray(new_b, dtype=float)
        xB = np.einsum("wij,wj->wi", self.Binv, self.b)
        has_artificial = (self.basis >= self.n_struct).any(axis=1)
        stale = has_artificial | (xB.min(axis=1) < -1e-12)
        self.xB = np.maximum(xB, 0.0)
        if stale.any():
            idx = np.nonzero(stale)[0]
            sigma = np.sign(self.b[idx])
            sigma[sigma == 0.0] = 1.0
            self.sigma[idx] = sigma
            self.basis[idx] = np.arange(self.n_struct, self.n_cols)[None, :]
            self.Binv[idx] = sigma[:, :, None] * np.eye(self.r)[None, :, :]
            self.xB[idx] = np.abs(self.b[idx])

    @classmethod
    def warm_from(cls, other: "_BatchLP", extra, repeat: int = 1) -> "_BatchLP":
        """New program with an extra column, warm-started from ``other``'s
        final bases (optionally repeating every item ``repeat`` times)."""
        if other.extra is not None:
            raise ValueError("warm start source must not have an extra column")
        self = cls.__new__(cls)
        self.G = other.G
        self.r, self.n_shared = other.r, other.n_shared
        self.W = other.W * repeat
        rep = (lambda a: np.repeat(a, repeat, axis=0)) if repeat > 1 else (lambda a: a.copy())
        self.b = rep(other.b)
        self.extra = np.ascontiguousarray(extra, dtype=float)
        self.n_struct = self.n_shared + 1
        self.n_cols = self.n_struct + self.r
        self.sigma = rep(other.sigma)
        basis = rep(other.basis)
        # artificial indices shift by one to make room for the extra column
        self.basis = np.where(basis >= self.n_shared, basis + 1, basis)
        self.Binv = rep(other.Binv)
        self.xB = rep(other.xB)
        return self

    # -- assembly helpers --------------------------------------------------

    def _gather_columns(self, idx, cols):
        """Constraint columns (w, r) for per-item column indices ``cols``."""
        out = np.empty((idx.size, self.r))
        shared = cols < self.n_shared
        if shared.any():
            out[shared] = self.G[:, cols[shared]].T
        if self.extra is not None:
            ext = cols == self.n_shared
            if ext.any():
                out[ext] = self.extra[idx[ext]]
        art = cols >= self.n_struct
        if art.any():
            wi = np.nonzero(art)[0]
            row = cols[art] - self.n_struct
            out[wi] = 0.0
            out[wi, row] = self.sigma[idx[wi], row]
        return out

    def _refactor(self, idx):
        """Recompute Binv and xB from scratch on the items ``idx``."""
        w = idx.size
        B = np.empty((w, self.r, self.r))
        basis = self.basis[idx]
        for slot in range(self.r):
            B[:, :, slot] = self._gather_columns(idx, basis[:, slot])
        try:
            self.Binv[idx] = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SimplexError("singular basis encountered") from exc
        self.xB[idx] = np.einsum("wij,wj->wi", self.Binv[idx], self.b[idx])

    def _basis_costs(self, idx, c_struct, c_extra, c_art):
        basis = self.basis[idx]
        cB = np.full(basis.shape, c_struct)
        if self.extra is not None:
            cB = np.where(basis == self.n_shared, c_extra, cB)
        return np.where(basis >= self.n_struct, c_art, cB)

    # -- the simplex loop ---------------------------------------------------

    def _phase(self, c_extra, c_art, allow_enter_art, guard_artificials,
               max_pivots=DEFAULT_MAX_PIVOTS, bland_after=200):
        """Primal simplex on the whole batch (structural costs are 0).

        Dantzig pricing for the first ``bland_after`` pivots of the call,
        Bland's smallest-index rule afterwards (anti-cycling).  With
        ``guard_artificials`` a basic artificial is forced out by a
        degenerate pivot whenever an entering direction would increase it.
        """
        active = np.arange(self.W)
        int_max = np.iinfo(np.int64).max
        since_refactor = 0
        for it in range(max_pivots):
            if active.size == 0:
                return
            w = active.size
            rows = np.arange(w)
            Binv = self.Binv[active]
            cB = self._basis_costs(active, 0.0, c_extra, c_art)
            y = np.einsum("wik,wi->wk", Binv, cB)

            # price in pieces; structural reduced costs are -(y @ G)
            scores = y @ self.G
            basis = self.basis[active]
            for slot in range(self.r):
                bcol = basis[:, slot]
                ok = bcol < self.n_shared
                scores[rows[ok], bcol[ok]] = 0.0
            if self.extra is not None:
                rc_extra = c_extra - np.einsum("wr,wr->w", y, self.extra[active])
                rc_extra[(basis == self.n_shared).any(axis=1)] = 0.0
            if allow_enter_art:
                rc_art = c_art - y * self.sigma[active]
                art_basic = basis >= self.n_struct
                if art_basic.any():
                    wi, si = np.nonzero(art_basic)
                    rc_art[wi, basis[wi, si] - self.n_struct] = 0.0

            if it < bland_after:
                # Dantzig: most negative reduced cost across the pieces
                j_struct = np.argmax(scores, axis=1)
                best_rc = -scores[rows, j_struct]
                enter = j_struct
                if self.extra is not None:
                    better = rc_extra < best_rc
                    enter = np.where(better, self.n_shared, enter)
                    best_rc = np.where(better, rc_extra, best_rc)
                if allow_enter_art:
                    j_art = np.argmin(rc_art, axis=1)
                    v_art = rc_art[rows, j_art]
                    better = v_art < best_rc
                    enter = np.where(better, self.n_struct + j_art, enter)
                    best_rc = np.where(better, v_art, best_rc)
                has_enter = best_rc < -PIVOT_TOL
            else:
                # Bland: smallest improving column index, pieces in order
                imp_struct = scores > PIVOT_TOL
                enter = np.argmax(imp_struct, axis=1)
                has_enter = imp_struct.any(axis=1)
                if self.extra is not None:
                    imp_e = rc_extra < -PIVOT_TOL
                    enter = np.where(~has_enter & imp_e, self.n_shared, enter)
                    has_enter = has_enter | imp_e
                if allow_enter_art:
                    imp_art = rc_art < -PIVOT_TOL
                    any_art = imp_art.any(axis=1)
                    j_art = np.argmax(imp_art, axis=1)
                    enter = np.where(~has_enter & any_art,
                                     self.n_struct + j_art, enter)
                    has_enter = has_enter | any_art
            if not has_enter.any():
                return
            sub = np.nonzero(has_enter)[0]
            idx = active[sub]
            col = self._gather_columns(idx, enter[sub])
            d = np.einsum("wij,wj->wi", Binv[sub], col)
            xBs = self.xB[idx]
            bas = basis[sub]

            pos = d > PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(pos, np.maximum(xBs, 0.0) / d, np.inf)
            theta = ratio.min(axis=1)
            eligible = pos & (ratio <= theta[:, None] * (1.0 + 1e-12) + 1e-300)

            if guard_artificials:
                art_grow = (bas >= self.n_struct) & (d < -PIVOT_TOL)
                forced = art_grow.any(axis=1)
                if forced.any():
                    theta = np.where(forced, 0.0, theta)
                    eligible = np.where(forced[:, None], art_grow, eligible)

            if not eligible.any(axis=1).all():
                raise SimplexError("unbounded pivot direction")

            key = np.where(eligible, bas, int_max)
            leave = np.argmin(key, axis=1)  # ties: smallest basic index
            d_piv = d[np.arange(sub.size), leave]

            shaky = np.abs(d_piv).min(initial=np.inf) < STABILITY_TOL
            if since_refactor > 0 and (shaky or since_refactor >= REFACTOR_EVERY):
                self._refactor(active)
                since_refactor = 0
                continue  # re-price against the clean factorization
            since_refactor += 1

            # pivot: update basics, basis index, and the inverse (eta update)
            new_xB = xBs - theta[:, None] * d
            new_xB[np.arange(sub.size), leave] = theta
            self.xB[idx] = np.maximum(new_xB, 0.0)
            self.basis[idx, leave] = enter[sub]
            factor = d.copy()
            factor[np.arange(sub.size), leave] -= 1.0
            factor /= d_piv[:, None]
            Binv_leave = self.Binv[idx, leave, :]
            self.Binv[idx] -= factor[:, :, None] * Binv_leave[:, None, :]

            active = active[has_enter]
        raise SimplexError("pivot cap exceeded")

    # -- results ------------------------------------------------------------

    def phase1(self, **kw):
        """Minimize the L1 residual; returns it per item (~0 iff feasible)."""
        self._phase(c_extra=0.0, c_art=1.0, allow_enter_art=True,
                    guard_artificials=False, **kw)
        self._refactor(np.arange(self.W))
        art = self.basis >= self.n_struct
        return np.where(art, np.maximum(self.xB, 0.0), 0.0).sum(axis=1)

    def phase2_max_extra(self, **kw):
        """Maximize the extra variable from the current feasible bases."""
        if self.extra is None:
            raise ValueError("program has no extra column")
        self._phase(c_extra=-1.0, c_art=0.0, allow_enter_art=False,
                    guard_artificials=True, **kw)
        self._refactor(np.arange(self.W))
        is_extra = self.basis == self.n_shared
        return np.maximum(np.where(is_extra, self.xB, 0.0).sum(axis=1), 0.0)

    def structural_solution(self):
        """Weights (W, n_struct) of the current basic solution."""
        out = np.zeros((self.W, self.n_struct))
        struct = self.basis < self.n_struct
        wi, si = np.nonzero(struct)
        out[wi, self.basis[wi, si]] = np.maximum(self.xB[wi, si], 0.0)
        return out


def feasibility_residuals(G, b, return_weights=False):
    """Minimal L1 residual of {G lam = b_w, lam >= 0} for each row of ``b``."""
    prog = _BatchLP(G, b)
    resid = prog.phase1()
    if return_weights:
        return resid, prog.structural_solution()
    return resid


def ray_exit_lengths(G, b, extra):
    """Solve max alpha s.t. G lam + extra_w * alpha = b_w, lam, alpha >= 0.

    Returns (alpha, residual): ``residual`` is the phase-1 L1 residual (how
    badly b_w fails to be reachable at all); alpha is only meaningful where
    the residual is ~0.  Per-item columns ``extra`` are (W, r).
    """
    prog = _BatchLP(G, b, extra=extra)
    resid = prog.phase1()
    alpha = prog.phase2_max_extra()
    return alpha, resid


class ChordSolver:
    """Reusable both-direction chord exits for a fixed hull.

    Feasibility is established once per walker and shared by both
    directions; across successive calls (hit-and-run steps) each walker's
    feasibility basis is kept whenever it still covers the new position.
    """

    def __init__(self, G):
        self.G = np.ascontiguousarray(G, dtype=float)
        self._base: _BatchLP | None = None

    def exits(self, b, directions):
        """(alpha_fwd, alpha_bwd, residual) for columns ``directions[w]``."""
        if self._base is None or self._base.W != b.shape[0]:
            self._base = _BatchLP(self.G, b)
        else:
            self._base.rebase(b)
        resid = self._base.phase1()
        dirs = np.ascontiguousarray(directions, dtype=float)
        both = np.empty((2 * dirs.shape[0], dirs.shape[1]))
        both[0::2] = dirs
        both[1::2] = -dirs
        prog = _BatchLP.warm_from(self._base, both, repeat=2)
        alpha = prog.phase2_max_extra()
        return alpha[0::2], alpha[1::2], resid


def chord_exit_pairs(G, b, directions):
    """One-shot both-direction chord exits (see ChordSolver)."""
    return ChordSolver(G).exits(b, directions)
