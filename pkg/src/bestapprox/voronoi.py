"""Spherical Delaunay/Voronoi structure on S^2 and covering-radius estimates."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import EmbeddedSet, orthodromic

MERGE_TOL = 1e-9


class VoronoiError(ValueError):
    """Degenerate input for the spherical diagram."""


@dataclass(eq=False)
class SphericalVoronoi:
    samples: np.ndarray
    delaunay_facets: np.ndarray     # (F, 3) sample indices
    facet_vertex: np.ndarray        # (F,) index into voronoi_vertices
    voronoi_vertices: np.ndarray    # (V, 3) unit vectors
    region_vertices: list[list[int]]
    # interior maxima of Voronoi edges: (point, sample a, sample b); only non-empty
    # when some empty circumcap is wider than a hemisphere
    edge_maxima: list[tuple[np.ndarray, int, int]] = field(default_factory=list)
    edge_candidates: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class AlphaEstimate:
    value: float
    N: int
    method: str
    is_upper_bound_estimate: bool
    embedding: str = ""
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "alpha": self.value, "N": self.N, "method": self.method,
            "is_upper_bound_estimate": self.is_upper_bound_estimate,
            "embedding": self.embedding, "degenerate": self.degenerate,
        }


def _chord_to_angle(d):
    return 2 * np.arcsin(np.clip(d / 2, 0.0, 1.0))


def _ang(u, v):
    # atan2 form stays accurate for nearly parallel vectors
    return np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1), np.sum(u * v, axis=-1))


def _check_unit(points, atol=1e-8):
    if np.any(np.abs(np.linalg.norm(points, axis=1) - 1) > atol):
        raise VoronoiError("points must be unit vectors")


def spherical_delaunay(points) -> SphericalVoronoi:
    """Delaunay facets from the convex hull; Voronoi vertices from outward facet normals.

    On the sphere the plane of a hull facet cuts out the circumcircle of its
    three samples and no sample lies beyond it, so the outward unit normal is
    the centre of the empty circumcap even when the samples fill less than a
    hemisphere.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 3:
        raise VoronoiError("spherical Delaunay needs points in R^3")
    if len(P) < 4:
        raise VoronoiError("need at least 4 points")
    _check_unit(P)
    if cKDTree(P).query_pairs(1e-12):
        raise VoronoiError("duplicate points")
    if np.linalg.matrix_rank(P, tol=1e-10) < 3:
        raise VoronoiError("points do not span R^3")
    try:
        hull = ConvexHull(P)
    except QhullError as exc:
        raise VoronoiError(f"hull construction failed: {exc}") from None
    if len(hull.vertices) != len(P):
        raise VoronoiError("some samples are not hull vertices (near-duplicate points?)")

    normals = hull.equations[:, :3]
    normals = normals / np.linalg.norm(normals, axis=1)[:, None]
    # coplanar facets (cocircular samples) share one circumcentre
    tree = cKDTree(normals)
    label = np.full(len(normals), -1)
    verts = []
    for f in range(len(normals)):
        if label[f] >= 0:
            continue
        group = tree.query_ball_point(normals[f], MERGE_TOL)
        label[group] = len(verts)
        verts.append(normals[f])
    verts = np.array(verts)

    regions: list[set[int]] = [set() for _ in range(len(P))]
    for f, tri in enumerate(hull.simplices):
        for i in tri:
            regions[i].add(int(label[f]))
    cands, maxima = _edge_maxima(P, hull, normals)
    return SphericalVoronoi(P, hull.simplices.copy(), label, verts, [sorted(r) for r in regions],
                            maxima, cands)


def _edge_maxima(P, hull, normals):
    """Farthest points from ``a`` and ``b`` on their bisector, ``-(a + b)/|a + b|``.

    Along a Voronoi edge the distance to its two samples peaks there; the peak
    lies inside the edge (the minor arc between the two facet normals) only
    for caps wider than a hemisphere, otherwise the edge maximum is a vertex.
    """
    simp, nb = hull.simplices, hull.neighbors
    f = np.repeat(np.arange(len(simp)), 3)
    k = np.tile(np.arange(3), len(simp))
    g = nb[f, k]
    keep = g > f
    f, k, g = f[keep], k[keep], g[keep]
    a = simp[f, (k + 1) % 3]
    b = simp[f, (k + 2) % 3]
    s = P[a] + P[b]
    ns = np.linalg.norm(s, axis=1)
    ok = ns > 1e-12
    f, g, a, b = f[ok], g[ok], a[ok], b[ok]
    m = -s[ok] / ns[ok][:, None]
    n1, n2 = normals[f], normals[g]
    on_arc = _ang(n1, m) + _ang(m, n2) <= _ang(n1, n2) + 1e-12
    maxima = [(m[i], int(a[i]), int(b[i])) for i in np.flatnonzero(on_arc)]
    return m, maxima


def alpha_per_region(sv: SphericalVoronoi) -> float:
    """``max_delta max_{v in V_delta} d(delta, v)``, plus interior edge maxima."""
    best = 0.0
    for i, vs in enumerate(sv.region_vertices):
        if vs:
            best = max(best, float(orthodromic(sv.samples[i], sv.voronoi_vertices[vs]).max()))
    for m, a, _ in sv.edge_maxima:
        best = max(best, float(orthodromic(sv.samples[a], m)))
    return best


def alpha_vertex_sweep(sv: SphericalVoronoi) -> float:
    """``max_v min_j d(v, sample_j)`` over all Voronoi vertices and bisector peaks."""
    pts = sv.voronoi_vertices
    if sv.edge_candidates is not None and len(sv.edge_candidates):
        pts = np.vstack([pts, sv.edge_candidates])
    d, _ = cKDTree(sv.samples).query(pts)
    return float(_chord_to_angle(d).max())


def alpha_from_voronoi(sv: SphericalVoronoi, embedding: str = "bloch", tol: float = 1e-9) -> AlphaEstimate:
    a = alpha_per_region(sv)
    b = alpha_vertex_sweep(sv)
    if abs(a - b) > tol:
        raise VoronoiError(f"region and vertex-sweep evaluations disagree: {a} vs {b}")
    return AlphaEstimate(b, sv.N, "voronoi_exact", True, embedding)


def alpha_small(points, embedding: str = "") -> AlphaEstimate:
    """Exact covering radius on S^2 for one to three samples."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    _check_unit(P)
    N = len(P)
    if N == 1:
        return AlphaEstimate(pi, 1, "analytic", True, embedding, degenerate=True)
    if N == 2:
        t = float(orthodromic(P[0], P[1]))
        return AlphaEstimate(pi - t / 2, 2, "analytic", True, embedding, degenerate=True)
    if N == 3:
        n = np.cross(P[1] - P[0], P[2] - P[0])
        if np.linalg.norm(n) < 1e-12:
            raise VoronoiError("degenerate sample triple")
        n /= np.linalg.norm(n)
        a = max(float(orthodromic(n, P[0])), float(orthodromic(-n, P[0])))
        return AlphaEstimate(a, 3, "analytic", True, embedding, degenerate=True)
    raise ValueError("alpha_small handles at most three samples")


def alpha_monte_carlo(samples: EmbeddedSet | np.ndarray, n_test: int, seed: int = 0,
                      batch: int = 200_000) -> AlphaEstimate:
    """Max over random test points of the distance to the nearest sample (a lower estimate)."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    emb = samples.embedding if isinstance(samples, EmbeddedSet) else ""
    P = samples.points if isinstance(samples, EmbeddedSet) else np.atleast_2d(samples)
    _check_unit(P)
    rng = np.random.default_rng(seed)
    tree = cKDTree(P)
    best = 0.0
    done = 0
    while done < n_test:
        m = min(batch, n_test - done)
        x = rng.standard_normal((m, P.shape[1]))
        x /= np.linalg.norm(x, axis=1)[:, None]
        d, _ = tree.query(x)
        best = max(best, float(_chord_to_angle(d).max()))
        done += m
    return AlphaEstimate(best, len(P), f"monte_carlo({n_test},{seed})", False, emb, len(P) == 1)


def estimate_alpha(embedded: EmbeddedSet, method: str = "voronoi", n_test: int = 100_000,
                   seed: int = 0) -> AlphaEstimate:
    """Exact Voronoi on S^2, Monte Carlo otherwise (or on request)."""
    P = embedded.points
    if method == "voronoi" and embedded.D == 3:
        uniq = np.unique(np.round(P, 14), axis=0)
        if len(uniq) < 4:
            return alpha_small(uniq, embedded.embedding)
        return alpha_from_voronoi(spherical_delaunay(uniq), embedded.embedding)
    if method not in ("voronoi", "mc"):
        raise ValueError(f"unknown method {method!r}")
    return alpha_monte_carlo(embedded, n_test, seed)


def fit_rate(series) -> tuple[float, float]:
    """Least-squares fit ``alpha = c N^rho`` in log-log space; returns ``(c, rho)``."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise ValueError("need at least three (N, alpha) pairs")
    if np.any(arr <= 0):
        raise ValueError("N and alpha must be positive")
    rho, icpt = np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)
    return float(np.exp(icpt)), float(rho)
