"""Certified integration of max-affine functions over polytopes.

The driver subdivides a triangulation of the domain.  On each simplex the
convexity sandwich gives rigorous bounds: the max-affine dominates each of its
pieces, and lies below the affine interpolant of its vertex values.  Where the
gap is not already at floating-point level, the simplex is split exactly along
a crease {piece_j = piece_k}; each side then loses a piece to domination
pruning, so the recursion bottoms out in exact single-piece cells.  A visit
budget caps the work, after which remaining gaps are surrendered into the
error bound (flagged by error_bound > tol).
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .convexfn import MaxAffine, infimum, maximum
from .polytope import Polytope, Simplex, _simplex_volume

#: Hard cap on simplex visits per integrate() call.
SUBDIVISION_BUDGET = 2_000_000

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class IntegralResult(NamedTuple):
    value: float
    error_bound: float


def default_tol(dim: int) -> float:
    return 1e-9 if dim <= 2 else 1e-6


def integrate_affine_simplex(slope, intercept: float, simplex: Simplex) -> float:
    """Exact integral of an affine function over a simplex: volume times vertex mean."""
    vals = simplex.vertices @ np.asarray(slope, dtype=float) + intercept
    return simplex.volume * float(vals.mean())


# -- exact splitting machinery -------------------------------------------------


def _split_cells(verts: np.ndarray, vals: np.ndarray, d: np.ndarray, cut: float):
    """Split a simplex along the hyperplane {d = 0}, d given by its vertex values.

    ``vals`` rows are carried along by exact linear interpolation.  Returns
    leaves with no strict sign change in d.
    """
    out = []
    stack = [(verts, vals, d)]
    while stack:
        v, w, dd = stack.pop()
        pos = np.nonzero(dd > cut)[0]
        neg = np.nonzero(dd < -cut)[0]
        if len(pos) == 0 or len(neg) == 0:
            out.append((v, w, dd))
            continue
        i, j = int(pos[0]), int(neg[0])
        t = dd[i] / (dd[i] - dd[j])
        cv = v[i] + t * (v[j] - v[i])
        cw = w[:, i] + t * (w[:, j] - w[:, i])
        va, wa, da = v.copy(), w.copy(), dd.copy()
        va[j], wa[:, j], da[j] = cv, cw, 0.0
        vb, wb, db = v.copy(), w.copy(), dd.copy()
        vb[i], wb[:, i], db[i] = cv, cw, 0.0
        stack.append((va, wa, da))
        stack.append((vb, wb, db))
    return out


def below_volume(verts: np.ndarray, d: np.ndarray) -> float:
    """Volume of {x in simplex : d(x) <= 0} for affine d given by vertex values."""
    cut = 1e-14 * max(1.0, float(np.abs(d).max()))
    empty = np.empty((0, len(d)))
    vol = 0.0
    for v, _, dd in _split_cells(verts, empty, d, cut):
        if not np.any(dd > cut):
            vol += _simplex_volume(v)
    return vol


def _prune(vals: np.ndarray, slack: float) -> np.ndarray:
    """Keep-mask after dropping pieces dominated by a single other piece on the cell."""
    p = vals.shape[0]
    ge = (vals[:, None, :] >= vals[None, :, :] - slack).all(axis=-1)  # ge[k, j]: k >= j
    keep = np.ones(p, dtype=bool)
    for j in range(p):
        for k in range(p):
            if k == j or not keep[k] or not ge[k, j]:
                continue
            if not ge[j, k] or k < j:  # strict domination, or tie resolved by index
                keep[j] = False
                break
    return keep


def integrate(f: MaxAffine, P: Polytope, tol: float | None = None) -> IntegralResult:
    """Integral of a max-affine function over P with a certified error bound.

    Guarantees |value - true| <= error_bound, and error_bound <= tol unless the
    subdivision budget is exhausted (then the bound honestly exceeds tol).
    """
    if tol is None:
        tol = default_tol(P.dim)
    if tol <= 0:
        raise ValueError("tol must be positive")
    vol_p = P.volume
    stack = [(s.vertices, f.piece_values(s.vertices).T) for s in P.triangulation]
    total = 0.0
    err = 0.0
    visited = 0
    scale_global = 1.0
    while stack:
        v, w = stack.pop()
        visited += 1
        vol = _simplex_volume(v)
        if vol <= 0.0:
            continue
        scale = max(1.0, float(np.abs(w).max()))
        scale_global = max(scale_global, scale)
        slack = 1e-14 * scale
        if w.shape[0] > 1:
            w = w[_prune(w, slack)]
        if w.shape[0] == 1:
            total += vol * float(w[0].mean())
            continue
        col_max = w.max(axis=0)
        ub = vol * float(col_max.mean())
        lb = vol * float(w.mean(axis=1).max())
        gap = ub - lb
        if gap <= max(1e-13 * scale * vol, tol * vol / vol_p) or visited >= SUBDIVISION_BUDGET:
            total += 0.5 * (ub + lb)
            err += 0.5 * gap
            continue
        col_arg = w.argmax(axis=0)
        j = int(col_arg[0])
        k = int(col_arg[np.argmax(col_arg != j)])
        d = w[j] - w[k]
        for cv, cw, _ in _split_cells(v, w, d, slack):
            stack.append((cv, cw))
    return IntegralResult(total, err + 1e-14 * scale_global * vol_p)


def integrate_abs(f: MaxAffine, P: Polytope, tol: float | None = None) -> IntegralResult:
    """Integral of |f| over P via the max-affine identity |f| = 2 max(f, 0) - f."""
    if tol is None:
        tol = default_tol(P.dim)
    plus = f.with_piece(np.zeros(f.dim), 0.0)
    v_plus, e_plus = integrate(plus, P, tol=tol / 3.0)
    v_f, e_f = integrate(f, P, tol=tol / 3.0)
    return IntegralResult(2.0 * v_plus - v_f, 2.0 * e_plus + e_f)


# -- cross-checking routes -------------------------------------------------------


def layer_cake(f: MaxAffine, P: Polytope, levels: int, *, seed: int = 0,
               n_samples: int = 200_000) -> float:
    """Integral of a nonnegative f via trapezoid quadrature of t -> mu{f >= t}.

    The superlevel measures come from the exact slab slicer when f is a single
    affine piece, and from one shared uniform sample otherwise.  The caller is
    responsible for shifting f by -inf first.
    """
    if levels < 1:
        raise ValueError("levels must be a positive integer")
    inf_val, _ = infimum(f, P)
    sup_val, _ = maximum(f, P)
    if inf_val < -1e-8 * max(1.0, abs(sup_val)):
        raise ValueError(f"layer_cake needs f >= 0 on P; inf is {inf_val:.3e}")
    mu = P.volume
    if sup_val - max(inf_val, 0.0) <= 1e-14 * max(1.0, abs(sup_val)):
        return sup_val * mu  # constant function
    t = np.linspace(0.0, sup_val, levels + 1)
    if f.n_pieces == 1:
        slope, intercept = f.slopes[0], float(f.intercepts[0])
        tri = [(s.vertices, s.vertices @ slope + intercept) for s in P.triangulation]
        superlevel = np.empty(levels + 1)
        superlevel[0] = mu
        for i in range(1, levels + 1):
            below = sum(below_volume(v, vals - t[i]) for v, vals in tri)
            superlevel[i] = mu - below
    else:
        vals = np.sort(f(P.sample(seed, n_samples)))
        counts = n_samples - np.searchsorted(vals, t, side="left")
        superlevel = mu * counts / n_samples
        superlevel[0] = mu
    return float(_trapezoid(superlevel, t))


def layer_cake_tolerance(f: MaxAffine, P: Polytope, levels: int,
                         n_samples: int = 200_000) -> float:
    """A priori agreement tolerance for layer_cake vs integrate.

    Trapezoid error for the nonincreasing superlevel function is at most
    (step * mu(P)) / 2; the Monte Carlo path adds three shared-sample standard
    errors of the mean.
    """
    sup_val, _ = maximum(f, P)
    mu = P.volume
    tol = (sup_val / levels) * mu / 2.0
    if f.n_pieces > 1:
        tol += 3.0 * mu * sup_val / math.sqrt(n_samples)
    return tol


def monte_carlo(f: MaxAffine, P: Polytope, seed: int, n_samples: int) -> tuple[float, float]:
    """Sample-mean integral over P with its standard error; deterministic per seed."""
    pts = P.sample(seed, n_samples)
    vals = f(pts)
    mu = P.volume
    value = mu * float(vals.mean())
    stderr = mu * float(vals.std(ddof=1)) / math.sqrt(n_samples)
    return value, stderr


class GridIntegral(NamedTuple):
    value: float
    error_estimate: float
    rigorous: bool


def integrate_grid(values: np.ndarray, mask: np.ndarray, cell_volume: float,
                   step: float) -> GridIntegral:
    """Midpoint-rule integral of gridded data over masked nodes.

    The O(step) error estimate is a heuristic, not a certificate; the flag in
    the result says so.
    """
    sel = values[mask]
    value = cell_volume * float(sel.sum())
    spread = float(sel.max() - sel.min()) if sel.size else 0.0
    estimate = step * (abs(value) + spread * cell_volume * sel.size)
    return GridIntegral(value, estimate, False)
