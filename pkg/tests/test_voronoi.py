from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bestapprox.circuit import bloch_circuit
from bestapprox.geometry import EmbeddedSet, embed_samples, orthodromic, sample_circuit
from bestapprox.voronoi import (
    VoronoiError,
    alpha_from_voronoi,
    alpha_monte_carlo,
    alpha_small,
    estimate_alpha,
    fit_rate,
    spherical_delaunay,
)
from bestapprox.volume import alpha_opt
from sphere_checks import check_diagram, random_sphere

OCTA = np.vstack([np.eye(3), -np.eye(3)])
TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
ACOS_INV_SQRT3 = 0.955316618124509278  # mpmath
ACOS_THIRD = 1.230959417340774682      # mpmath


def test_octahedron():
    sv = spherical_delaunay(OCTA)
    assert len(sv.delaunay_facets) == 8
    corners = np.array([[a, b, c] for a in (1, -1) for b in (1, -1) for c in (1, -1)]) / np.sqrt(3)
    assert len(sv.voronoi_vertices) == 8
    for v in corners:
        assert np.min(np.linalg.norm(sv.voronoi_vertices - v, axis=1)) < 1e-12
    assert alpha_from_voronoi(sv).value == pytest.approx(ACOS_INV_SQRT3, abs=1e-12)


def test_tetrahedron():
    sv = spherical_delaunay(TETRA)
    assert len(sv.delaunay_facets) == 4 and len(sv.voronoi_vertices) == 4
    for v in sv.voronoi_vertices:
        assert np.min(np.linalg.norm(-TETRA - v, axis=1)) < 1e-12
    assert alpha_from_voronoi(sv).value == pytest.approx(ACOS_THIRD, abs=1e-12)


def test_cocircular_facets_merge():
    # cube corners: each square face splits into two triangles with one circumcentre
    cube = np.array([[a, b, c] for a in (1, -1) for b in (1, -1) for c in (1, -1)]) / np.sqrt(3)
    sv = spherical_delaunay(cube)
    assert len(sv.delaunay_facets) == 12 and len(sv.voronoi_vertices) == 6
    assert all(len(r) == 3 for r in sv.region_vertices)
    assert alpha_from_voronoi(sv).value == pytest.approx(ACOS_INV_SQRT3, abs=1e-12)


def test_wide_caps_use_edge_maxima():
    # four samples in one hemisphere: the farthest point sits inside a Voronoi edge
    P = random_sphere(4, 184)
    sv = spherical_delaunay(P)
    assert sv.edge_maxima
    x = random_sphere(200_000, 0)
    near = np.arccos(np.clip(x @ P.T, -1, 1)).min(axis=1).max()
    a = alpha_from_voronoi(sv).value
    assert near <= a + 1e-9 and near > a - 0.01


def test_hemisphere_cluster_orientation():
    # samples confined to a small cap: the far side of the sphere is the worst point
    pts = random_sphere(50, 3)
    pts[:, 2] = np.abs(pts[:, 2]) + 3
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    a = alpha_from_voronoi(spherical_delaunay(pts)).value
    south = np.array([0, 0, -1.0])
    assert a >= orthodromic(np.tile(south, (50, 1)), pts).min() - 1e-12
    assert a > pi / 2


def test_errors():
    with pytest.raises(VoronoiError):
        spherical_delaunay(OCTA[:3])
    with pytest.raises(VoronoiError):
        spherical_delaunay(np.vstack([OCTA, OCTA[:1]]))
    with pytest.raises(VoronoiError):
        spherical_delaunay(np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0.0]]))
    with pytest.raises(VoronoiError):
        spherical_delaunay(2 * OCTA)


def test_bloch_1024_in_bracket():
    # scrambled Sobol' samples sit near 3.46 N^-0.46 (about 0.1425 at N = 1024),
    # roughly 1.5 times the ideal alpha_opt
    c = bloch_circuit()
    emb = embed_samples(c, sample_circuit(c, 1024, 0))
    a = estimate_alpha(emb).value
    ref = 3.46 * 1024 ** -0.46
    assert abs(a - ref) <= 0.35 * ref
    assert 0.8 <= a / alpha_opt(1024, 3) <= 1.8
    mc = alpha_monte_carlo(emb, 200_000, 1).value
    assert mc <= a + 1e-9 and mc > 0.8 * a


def test_small_sets():
    assert alpha_small([[0, 0, 1.0]]).value == pytest.approx(pi)
    assert alpha_small([[0, 0, 1.0], [0, 0, -1.0]]).value == pytest.approx(pi / 2)
    tri = np.eye(3)
    a = alpha_small(tri).value
    assert a == pytest.approx(np.arccos(-1 / np.sqrt(3)))
    assert alpha_monte_carlo(tri, 100_000, 0).value <= a + 1e-9


def test_monte_carlo_single_sample():
    for n in (10, 100_000):
        v = alpha_monte_carlo(np.array([[0, 0, 1.0]]), n, 0).value
        assert v <= pi
    assert alpha_monte_carlo(np.array([[0, 0, 1.0]]), 100_000, 0).value > pi - 0.02


def test_monte_carlo_great_circle():
    t = 2 * pi * np.arange(64) / 64
    pts = np.stack([np.sin(t), 0 * t, np.cos(t)], axis=1)
    assert alpha_monte_carlo(pts, 100_000, 0).value >= pi / 2 - 0.02


def test_monte_carlo_octahedron():
    mc = alpha_monte_carlo(OCTA, 10 ** 6, 0)
    assert abs(mc.value - ACOS_INV_SQRT3) < 0.01
    assert not mc.is_upper_bound_estimate


def test_monte_carlo_high_dimension():
    emb = EmbeddedSet(np.eye(5), 5, "explicit")
    assert estimate_alpha(emb).method.startswith("monte_carlo")


def test_fit_rate():
    N = np.array([64, 128, 256, 512])
    c, rho = fit_rate(np.stack([N, 2 * N ** -0.5], axis=1))
    assert c == pytest.approx(2, abs=1e-12) and rho == pytest.approx(-0.5, abs=1e-12)
    c, rho = fit_rate(np.stack([N, np.full(4, 0.3)], axis=1))
    assert rho == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 1)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 0), (3, 1)])


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 512), st.integers(0, 2 ** 32 - 1))
def test_voronoi_properties(n, seed):
    check_diagram(random_sphere(n, seed), seed + 1)
