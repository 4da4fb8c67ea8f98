"""Bounded convex polytopes: representation, membership, volume, triangulation, sampling.

The vertex representation is the source of truth.  Half-spaces are derived on
demand via facet enumeration (Qhull) and normalized so that each constraint
reads ``l_j(s) = <s, normal_j> - offset_j >= 0`` with a unit normal, which
makes the absolute membership tolerance meaningful for O(1) coordinates.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

#: Absolute tolerance on the affine constraint values l_j(x) used by membership tests.
MEMBERSHIP_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Raised when a vertex set fails to span a full-dimensional body."""


def _simplex_volume(vertices: np.ndarray) -> float:
    n = vertices.shape[1]
    diff = vertices[1:] - vertices[0]
    return abs(float(np.linalg.det(diff))) / math.factorial(n)


class Simplex:
    """A full-dimensional simplex in R^n with exactly n + 1 vertices."""

    __slots__ = ("vertices",)

    def __init__(self, vertices) -> None:
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.shape[0] != v.shape[1] + 1:
            raise ValueError(f"a simplex in R^{v.shape[1]} needs {v.shape[1] + 1} vertices")
        self.vertices = v

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def volume(self) -> float:
        vol = _simplex_volume(self.vertices)
        if vol <= 0.0:
            raise DegenerateGeometryError("simplex has zero volume")
        return vol

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Simplex(dim={self.dim}, volume={_simplex_volume(self.vertices):.6g})"


class Polytope:
    """Bounded convex polytope given by its extreme points.

    Every input vertex must be extreme (no point inside the hull of the
    others) and the set must span R^n; violations raise ``ValueError`` or
    ``DegenerateGeometryError``.  Use :meth:`hull_of` to build a polytope
    from an arbitrary point cloud.
    """

    def __init__(self, vertices, halfspaces=None) -> None:
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.ndim != 2 or v.shape[0] < v.shape[1] + 1:
            raise DegenerateGeometryError(
                f"need at least n+1 vertices in R^n, got shape {v.shape}"
            )
        n = v.shape[1]
        rank = np.linalg.matrix_rank(v - v[0], tol=1e-10 * max(1.0, np.abs(v).max()))
        if rank < n:
            raise DegenerateGeometryError(f"vertex set has affine rank {rank} < {n}")
        self._hull: ConvexHull | None = None
        if n == 1:
            if v.shape[0] != 2 or v[0, 0] == v[1, 0]:
                raise ValueError("an interval is given by exactly two distinct endpoints")
            v = v[np.argsort(v[:, 0])]
        else:
            self._hull = ConvexHull(v)
            if len(self._hull.vertices) != v.shape[0]:
                raise ValueError(
                    "vertex list is not closed under convex hull "
                    f"({v.shape[0]} points, {len(self._hull.vertices)} extreme); "
                    "use Polytope.hull_of for raw point clouds"
                )
        self.vertices = v
        self.dim = n
        if halfspaces is not None:
            self._check_user_halfspaces(halfspaces)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def hull_of(cls, points) -> "Polytope":
        """Polytope spanned by an arbitrary point cloud (extreme points kept)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        n = p.shape[1]
        if n == 1:
            lo, hi = p.min(), p.max()
            if lo == hi:
                raise DegenerateGeometryError("all points coincide")
            return cls([[lo], [hi]])
        try:
            hull = ConvexHull(p)
        except QhullError as exc:
            raise DegenerateGeometryError(f"degenerate point cloud: {exc}") from exc
        return cls(p[hull.vertices])

    @classmethod
    def box(cls, bounds) -> "Polytope":
        """Axis-aligned box from per-axis (lo, hi) pairs."""
        b = np.asarray(bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
            raise ValueError("bounds must be rows (lo, hi) with lo < hi")
        n = b.shape[0]
        if n == 1:
            return cls(b.reshape(2, 1))
        corners = np.stack(np.meshgrid(*[b[k] for k in range(n)], indexing="ij"), axis=-1)
        return cls(corners.reshape(-1, n))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Polytope":
        return cls([[lo], [hi]])

    # -- representations -----------------------------------------------------

    @cached_property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(normals, offsets) with unit normals, so l_j(s) = normals @ s - offsets >= 0."""
        if self.dim == 1:
            lo, hi = self.vertices[0, 0], self.vertices[1, 0]
            return np.array([[1.0], [-1.0]]), np.array([lo, -hi])
        eqs = self._hull.equations  # rows: normal . x + offset <= 0, |normal| = 1
        uniq = np.unique(np.round(eqs, 12), axis=0)
        return -uniq[:, :-1], uniq[:, -1]

    def constraint_values(self, points) -> np.ndarray:
        """Values l_j(x) for each half-space j; shape (..., n_halfspaces)."""
        normals, offsets = self.halfspaces
        pts = np.asarray(points, dtype=float)
        return pts @ normals.T - offsets

    def contains(self, points, tol: float = MEMBERSHIP_TOL):
        """True where all l_j(x) >= -tol.  Scalar for a single point, array for batches."""
        vals = self.constraint_values(points)
        inside = (vals >= -tol).all(axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def bounding_box(self) -> np.ndarray:
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)], axis=1)

    # -- measure -------------------------------------------------------------

    @cached_property
    def volume(self) -> float:
        """Lebesgue measure via centroid-fan triangulation and simplex determinants."""
        return float(sum(s.volume for s in self.triangulation))

    @cached_property
    def triangulation(self) -> tuple[Simplex, ...]:
        """Partition into simplices with disjoint interiors (centroid fan over facets)."""
        v = self.vertices
        n = self.dim
        if v.shape[0] == n + 1:
            return (Simplex(v),)
        if n == 1:
            return (Simplex(v),)
        hull = ConvexHull(v, qhull_options="Qt")
        apex = v.mean(axis=0)
        tiny = 1e-15 * max(1.0, float(np.abs(v).max())) ** n
        out = []
        for facet in hull.simplices:
            verts = np.vstack([apex[None, :], v[facet]])
            if _simplex_volume(verts) > tiny:
                out.append(Simplex(verts))
        total = sum(s.volume for s in out)
        if not math.isclose(total, hull.volume, rel_tol=1e-9):  # pragma: no cover
            raise RuntimeError("fan triangulation volume mismatch; degenerate facets?")
        return tuple(out)

    def triangulate(self) -> tuple[Simplex, ...]:
        return self.triangulation

    # -- sampling ------------------------------------------------------------

    def sample(self, seed: int, count: int) -> np.ndarray:
        """Uniform points on the polytope; deterministic for a given seed.

        A simplex is chosen with probability proportional to its volume, then a
        point is drawn with barycentric weights from ordered-uniform spacings.
        """
        rng = np.random.default_rng(seed)
        tris = self.triangulation
        vols = np.array([s.volume for s in tris])
        n = self.dim
        if count == 0:
            return np.empty((0, n))
        idx = rng.choice(len(tris), size=count, p=vols / vols.sum())
        u = np.sort(rng.random((count, n)), axis=1)
        w = np.diff(np.concatenate([np.zeros((count, 1)), u, np.ones((count, 1))], axis=1), axis=1)
        verts = np.stack([s.vertices for s in tris])  # (T, n+1, n)
        return np.einsum("ck,ckn->cn", w, verts[idx])

    # -- affine images ---------------------------------------------------------

    def scaled(self, c: float) -> "Polytope":
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return Polytope(self.vertices * c)

    def translated(self, shift) -> "Polytope":
        t = np.asarray(shift, dtype=float)
        return Polytope(self.vertices + t)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Polytope":
        p = cls(data["vertices"])
        if "dim" in data and int(data["dim"]) != p.dim:
            raise ValueError(f"declared dim {data['dim']} does not match vertices ({p.dim})")
        if "halfspaces" in data:
            hs = [(h["normal"], h["offset"]) for h in data["halfspaces"]]
            p._check_user_halfspaces(hs)
        return p

    def _check_user_halfspaces(self, halfspaces) -> None:
        normals = np.array([np.asarray(h[0], dtype=float) for h in halfspaces])
        offsets = np.array([float(h[1]) for h in halfspaces])
        scale = np.linalg.norm(normals, axis=1)
        if np.any(scale == 0):
            raise ValueError("half-space normal must be nonzero")
        vals = (self.vertices @ normals.T - offsets) / scale
        if vals.min() < -MEMBERSHIP_TOL:
            raise ValueError("a declared half-space excludes a vertex")
        tight = (np.abs(vals) <= 1e-7).sum(axis=0)
        if np.any(tight < self.dim):
            raise ValueError("a declared half-space is tight at fewer than n vertices")

    def __repr__(self) -> str:  # pragma: no cover
        return f"Polytope(dim={self.dim}, nvertices={len(self.vertices)})"


def corner_simplex(n: int, edge: float) -> Polytope:
    """Simplex with vertices {0, edge * e_1, ..., edge * e_n}."""
    v = np.vstack([np.zeros((1, n)), edge * np.eye(n)])
    return Polytope(v)
