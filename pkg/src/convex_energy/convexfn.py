"""Convex functions on polytopes: max-of-affine representation and elementary queries.

A finite max of affine pieces is the canonical test function here: it is convex
by construction, dense among convex functions, and every integral against it is
piecewise exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .polytope import Polytope

#: Absolute tolerance guaranteed by :func:`infimum`.
INFIMUM_TOL = 1e-8


class MaxAffine:
    """phi(x) = max_i (<slopes[i], x> + intercepts[i])."""

    __slots__ = ("slopes", "intercepts")

    def __init__(self, slopes, intercepts) -> None:
        a = np.atleast_2d(np.asarray(slopes, dtype=float))
        b = np.atleast_1d(np.asarray(intercepts, dtype=float))
        if a.shape[0] != b.shape[0] or a.shape[0] == 0:
            raise ValueError("need one intercept per slope and at least one piece")
        self.slopes = a
        self.intercepts = b

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[0]

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    def piece_values(self, points) -> np.ndarray:
        """All affine piece values; shape (..., n_pieces)."""
        return np.asarray(points, dtype=float) @ self.slopes.T + self.intercepts

    def __call__(self, points):
        vals = self.piece_values(points).max(axis=-1)
        return float(vals) if vals.ndim == 0 else vals

    def shifted(self, c: float) -> "MaxAffine":
        return MaxAffine(self.slopes, self.intercepts + c)

    def scaled(self, t: float) -> "MaxAffine":
        if t <= 0:
            raise ValueError("scaling a max-affine by t <= 0 breaks convexity")
        return MaxAffine(self.slopes * t, self.intercepts * t)

    def translated(self, shift) -> "MaxAffine":
        """The function x -> phi(x - shift), for moving along with a translated domain."""
        t = np.asarray(shift, dtype=float)
        return MaxAffine(self.slopes, self.intercepts - self.slopes @ t)

    def with_piece(self, slope, intercept: float) -> "MaxAffine":
        return MaxAffine(
            np.vstack([self.slopes, np.atleast_2d(np.asarray(slope, dtype=float))]),
            np.concatenate([self.intercepts, [float(intercept)]]),
        )

    def to_dict(self) -> dict:
        return {
            "kind": "maxaffine",
            "pieces": [
                {"a": a.tolist(), "b": float(b)}
                for a, b in zip(self.slopes, self.intercepts)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MaxAffine":
        pieces = data["pieces"]
        return cls([p["a"] for p in pieces], [p["b"] for p in pieces])

    def __repr__(self) -> str:  # pragma: no cover
        return f"MaxAffine(dim={self.dim}, pieces={self.n_pieces})"


@dataclass(frozen=True)
class PiecewiseDecl:
    """Guarded piecewise-affine declaration, evaluated first-match.

    Each guard is (conditions, slope, intercept) where conditions is a list of
    (g, h) meaning the region <g, x> + h < 0; an empty condition list matches
    everywhere.  Only used to ingest case-split formulas before converting them
    to the max-affine form.
    """

    guards: tuple

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        for conditions, slope, intercept in self.guards:
            if all(float(np.dot(g, x)) + h < 0 for g, h in conditions):
                return float(np.dot(slope, x)) + intercept
        raise ValueError("no guard matched; declaration must end with a catch-all")

    def to_maxaffine(self, domain: Polytope, seed: int = 0, n_check: int = 1000,
                     tol: float = 1e-12) -> MaxAffine:
        """Convert to a max of the guard formulas, validated at random sample points."""
        f = MaxAffine([g[1] for g in self.guards], [g[2] for g in self.guards])
        pts = domain.sample(seed, n_check)
        declared = np.array([self(x) for x in pts])
        err = np.abs(f(pts) - declared).max()
        if err > tol:
            raise ValueError(
                f"max-of-pieces disagrees with the declaration by {err:.3e} > {tol:.1e}; "
                "the declared function is not the max of its formulas"
            )
        return f


def steep_decl(n: int, m: int) -> PiecewiseDecl:
    """The 1D steep ramp phi_m(x1) = 2m-1-2m^2*x1 for x1 < 1/m, else -1, lifted to R^n."""
    e1 = np.zeros(n)
    e1[0] = 1.0
    ramp = np.zeros(n)
    ramp[0] = -2.0 * m * m
    return PiecewiseDecl(
        guards=(
            (((e1, -1.0 / m),), ramp, 2.0 * m - 1.0),
            ((), np.zeros(n), -1.0),
        )
    )


# -- infimum / maximum -------------------------------------------------------


def infimum(f: MaxAffine, P: Polytope, tol: float = INFIMUM_TOL) -> tuple[float, np.ndarray]:
    """Infimum of f over the closure of P and a minimizer.

    Single affine pieces attain their minimum at a vertex (exact).  Otherwise
    the epigraph LP ``min t s.t. <a_i,x> + b_i <= t, x in P`` is solved and the
    result is polished against the vertex values, so the returned value is well
    within ``tol`` of the true infimum.
    """
    vertex_vals = f(P.vertices)
    k = int(np.argmin(vertex_vals))
    best_val, best_arg = float(vertex_vals[k]), P.vertices[k]
    if f.n_pieces == 1:
        return best_val, best_arg

    n = P.dim
    normals, offsets = P.halfspaces
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.vstack(
        [
            np.hstack([f.slopes, -np.ones((f.n_pieces, 1))]),
            np.hstack([-normals, np.zeros((normals.shape[0], 1))]),
        ]
    )
    b_ub = np.concatenate([-f.intercepts, -offsets])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * (n + 1), method="highs")
    if res.status == 0 and res.fun <= best_val:
        return float(res.fun), res.x[:n]
    if res.status != 0:  # pragma: no cover - LP failure is not expected at desk scale
        return _grid_infimum(f, P, tol, best_val, best_arg)
    return best_val, best_arg


def _grid_infimum(f: MaxAffine, P: Polytope, tol: float, best_val: float,
                  best_arg: np.ndarray, points_per_axis: int = 33,
                  rounds: int = 12) -> tuple[float, np.ndarray]:
    """Nested grid refinement fallback (shrink factor 1/4 per round); sound by convexity."""
    box = P.bounding_box.copy()
    for _ in range(rounds):
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in box]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
        inside = P.contains(grid)
        if np.any(inside):
            pts = grid[inside]
            vals = f(pts)
            j = int(np.argmin(vals))
            if vals[j] < best_val:
                best_val, best_arg = float(vals[j]), pts[j]
        width = (box[:, 1] - box[:, 0]) / 4.0
        box = np.stack([best_arg - width / 2.0, best_arg + width / 2.0], axis=1)
    return best_val, best_arg


def maximum(f: MaxAffine, P: Polytope) -> tuple[float, np.ndarray]:
    """Maximum of f over the closure of P; attained at a vertex since f is convex."""
    vals = f(P.vertices)
    k = int(np.argmax(vals))
    return float(vals[k]), P.vertices[k]


# -- mean and normalization ---------------------------------------------------


def mean(f: MaxAffine, P: Polytope, tol: float | None = None) -> float:
    """(1 / mu(P)) * integral of f over P."""
    from . import integrate as _integrate

    value, _ = _integrate.integrate(f, P, tol=tol)
    return value / P.volume


def normalize_mean_zero(f: MaxAffine, P: Polytope, tol: float | None = None) -> MaxAffine:
    """Shift f so its mean over P vanishes."""
    return f.shifted(-mean(f, P, tol=tol))


# -- sublevel volumes ----------------------------------------------------------


class SublevelVolume(NamedTuple):
    value: float
    stderr: float
    exact: bool


def sublevel_volume(f: MaxAffine, P: Polytope, a: float, *, seed: int = 0,
                    n_samples: int = 200_000) -> SublevelVolume:
    """Measure of the sublevel set {x in P : f(x) <= a}.

    Exact (halfspace slab slicing of the triangulation) when f is a single
    affine piece; uniform Monte Carlo with reported standard error otherwise.
    """
    if f.n_pieces == 1:
        from . import integrate as _integrate

        vol = 0.0
        slope, intercept = f.slopes[0], float(f.intercepts[0])
        for simplex in P.triangulation:
            d = simplex.vertices @ slope + intercept - a
            vol += _integrate.below_volume(simplex.vertices, d)
        return SublevelVolume(vol, 0.0, True)

    pts = P.sample(seed, n_samples)
    frac = float(np.mean(f(pts) <= a))
    mu = P.volume
    stderr = mu * math.sqrt(frac * (1.0 - frac) / n_samples)
    return SublevelVolume(mu * frac, stderr, False)
