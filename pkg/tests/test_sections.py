"""Convex-section geometry: ellipsoid fits, invariance, localization."""

import warnings

import numpy as np
import pytest

from amce import (
    ScalarField,
    TooCloseToBoundaryError,
    extract_section,
    fit_john_ellipsoid,
    localization_scan,
    maximal_height,
    mvee,
    normalize_section,
    quadratic_separation,
)
from amce.errors import DegenerateSectionError


# ---------------------------------------------------------------------------
# minimum-volume ellipsoid engine
# ---------------------------------------------------------------------------


def test_mvee_free_recovers_ellipse():
    t = np.linspace(0.0, 2.0 * np.pi, 257)[:-1]
    pts = np.stack([2.0 * np.cos(t) + 0.3, 0.5 * np.sin(t) - 0.1], axis=1)
    c, M, _, viol = mvee(pts, tol=1e-9)
    np.testing.assert_allclose(c, [0.3, -0.1], atol=1e-9)
    np.testing.assert_allclose(M, np.diag([0.25, 4.0]), atol=1e-8)
    assert viol < 1e-9


def test_mvee_pinned_half_disk_is_full_disk():
    """Pinned at the flat edge's midpoint, the minimal ellipsoid of a half
    disk is the full unit disk — the property behind the boundary-section
    volume normalization."""
    th = np.linspace(0.0, np.pi, 129)
    pts = np.vstack(
        [np.stack([np.cos(th), np.sin(th)], axis=1), [[1.0, 0.0], [-1.0, 0.0]]]
    )
    _, M, _, viol = mvee(pts, tol=1e-9, center=[0.0, 0.0])
    np.testing.assert_allclose(M, np.eye(2), atol=1e-9)
    assert viol < 1e-9


def test_mvee_rejects_degenerate_input():
    with pytest.raises(DegenerateSectionError):
        mvee(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))  # collinear


def test_mvee_away_steps_converge_on_arc_hulls():
    """Dense near-circular hulls are the slow case for plain Frank-Wolfe;
    away steps must still reach the tolerance (symmetric input -> no tilt)."""
    t = np.linspace(0.05, np.pi - 0.05, 400)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    pts = np.vstack([pts, [[0.9, 0.02], [-0.9, 0.02]]])
    _, M, iters, viol = mvee(pts, tol=1e-9, center=[0.0, 0.0])
    assert viol <= 1e-9
    assert abs(M[0, 1]) < 1e-7 * abs(M[0, 0])


# ---------------------------------------------------------------------------
# section extraction
# ---------------------------------------------------------------------------


def test_section_membership_matches_gap_sign(paraboloid64_exact):
    u = paraboloid64_exact
    grid = u.grid
    x = np.array([0.1, -0.2])
    h = 0.04
    sec = extract_section(u, x, h)
    # u = |p|^2/2: gap = |p - x|^2/2, members satisfy |p - x| < sqrt(2h)
    r = np.linalg.norm(grid.nodes[sec.node_ids] - x, axis=1)
    assert r.max() < np.sqrt(2.0 * h) + 1e-12
    outside = np.setdiff1d(np.arange(grid.n_nodes), sec.node_ids)
    r_out = np.linalg.norm(grid.nodes[outside] - x, axis=1)
    assert r_out.min() > np.sqrt(2.0 * h) - 1e-12


def test_section_affine_invariance_under_rotation(grid32):
    """A 90-degree rotation is unimodular and maps lattice and disk to
    themselves: section node sets must map exactly."""
    from amce import get_fixture

    exact = get_fixture("sheared_half", theta=0.25)
    u = ScalarField.from_callable(grid32, exact.u)
    v = ScalarField.from_callable(
        grid32, lambda p: exact.u(np.stack([p[:, 1], -p[:, 0]], axis=1))
    )
    x0 = np.array([0.3, 0.1])
    h = 0.05
    su = extract_section(u, x0, h)
    sv = extract_section(v, np.array([-x0[1], x0[0]]), h)
    pu = grid32.nodes[su.node_ids]
    rot = np.stack([-pu[:, 1], pu[:, 0]], axis=1)
    set_u = {(round(a, 9), round(b, 9)) for a, b in rot}
    set_v = {(round(a, 9), round(b, 9)) for a, b in grid32.nodes[sv.node_ids]}
    assert set_u == set_v


def test_tiny_section_warns_and_has_no_hull(paraboloid64_exact):
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        sec = extract_section(paraboloid64_exact, np.array([0.05, 0.05]), 1e-9)
    assert sec.hull_points is None or sec.n_nodes <= 2
    assert rec  # emptiness / degeneracy warned, not silently dropped


# ---------------------------------------------------------------------------
# quadratic separation and maximal heights
# ---------------------------------------------------------------------------


def test_quadratic_separation_exact_on_paraboloid(paraboloid64_exact):
    rep = quadratic_separation(paraboloid64_exact)
    assert rep.rho_low == pytest.approx(0.5, abs=1e-6)
    assert rep.rho_high == pytest.approx(0.5, abs=1e-6)
    assert rep.n_pairs > 100


def test_quadratic_separation_positive_on_solved_field(mild32):
    _, u, _, _ = mild32
    rep = quadratic_separation(u)
    assert rep.rho_low > 0.0
    assert rep.rho_high >= rep.rho_low


def test_maximal_height_exact_values(paraboloid64_exact):
    h0, _ = maximal_height(paraboloid64_exact, np.array([0.0, 0.0]))
    h5, touch = maximal_height(paraboloid64_exact, np.array([0.5, 0.0]))
    assert h0 == pytest.approx(0.5, rel=1e-6)
    assert h5 == pytest.approx(0.125, rel=1e-6)
    # the touching point is the nearest boundary point (1, 0)
    np.testing.assert_allclose(touch, [1.0, 0.0], atol=0.05)


def test_maximal_height_ratio_interval(paraboloid64_exact):
    """sqrt(hbar)/dist is constant 1/sqrt(2) for the paraboloid."""
    rng = np.random.default_rng(3)
    ratios = []
    while len(ratios) < 50:
        r = rng.uniform(0.3, 0.9)
        a = rng.uniform(0.0, 2.0 * np.pi)
        y = np.array([r * np.cos(a), r * np.sin(a)])
        hb, _ = maximal_height(paraboloid64_exact, y)
        ratios.append(np.sqrt(hb) / (1.0 - r))
    ratios = np.array(ratios)
    k_fit = max(ratios.max(), 1.0 / ratios.min())
    assert k_fit < 1.5  # exact value sqrt(2)
    np.testing.assert_allclose(ratios, 2.0**-0.5, atol=5e-3)


def test_maximal_height_rejects_boundary_point(paraboloid64_exact):
    with pytest.raises(TooCloseToBoundaryError):
        maximal_height(paraboloid64_exact, np.array([0.999, 0.0]))


# ---------------------------------------------------------------------------
# localization scans and normalization
# ---------------------------------------------------------------------------


def test_boundary_scan_centered_quadratic_no_tilt(r2_64_exact):
    """tau vanishes to fit tolerance at every height for u = |x|^2."""
    scan = localization_scan(
        r2_64_exact, np.array([0.0, -1.0]), [2.0**-k for k in range(3, 7)]
    )
    for row in scan.rows:
        assert not row["skipped"]
        assert abs(row["tau"]) < 1e-6
        assert row["vol_ratio"] == pytest.approx(1.0, abs=0.01)
        assert row["k_outer"] >= 1.0 - 1e-9
        assert row["k_inner"] <= 1.0 + 1e-9


def test_boundary_scan_recovers_shear(grid64):
    from amce import get_fixture

    exact = get_fixture("sheared_half", theta=0.25)
    u = ScalarField.from_callable(grid64, exact.u)
    scan = localization_scan(u, np.array([0.0, -1.0]), [2.0**-k for k in range(3, 7)])
    taus = [row["tau"] for row in scan.kept_rows()]
    np.testing.assert_allclose(taus, 0.5, atol=0.01)


def test_interior_fit_unimodular_shape(paraboloid64_exact):
    sec = extract_section(paraboloid64_exact, np.array([0.0, 0.0]), 0.125)
    fit = fit_john_ellipsoid(sec)
    assert np.linalg.det(fit.A) == pytest.approx(1.0, abs=1e-9)
    assert fit.h_eff == pytest.approx(0.25, rel=1e-3)  # 2h for u = |x|^2/2
    assert abs(fit.tau) < 1e-9


def test_norm_product_log_growth_recorded(mild32):
    """||A|| * ||A^{-1}|| at maximal sections, against |log hbar|^2.

    The fitted constant is recorded (printed), not asserted against any
    particular value: the claim under test is only finiteness and that the
    product does not explode faster than the log-squared envelope.
    """
    _, u, _, _ = mild32
    rng = np.random.default_rng(7)
    prods, envs = [], []
    while len(prods) < 25:
        r = rng.uniform(0.3, 0.9)
        a = rng.uniform(0.0, 2.0 * np.pi)
        y = np.array([r * np.cos(a), r * np.sin(a)])
        try:
            hb, _ = maximal_height(u, y)
            sec = extract_section(u, y, 0.999 * hb)
            fit = fit_john_ellipsoid(sec)
        except (TooCloseToBoundaryError, DegenerateSectionError):
            continue
        prod = np.linalg.norm(fit.A, 2) * np.linalg.norm(np.linalg.inv(fit.A), 2)
        prods.append(prod)
        envs.append(max(1.0, np.log(1.0 / hb) ** 2))
    c_fit = float(np.max(np.asarray(prods) / np.asarray(envs)))
    print(f"norm-product envelope constant: {c_fit:.4f}")
    assert np.isfinite(c_fit)
    assert max(prods) < 50.0


def test_normalize_section_round_shape(r2_64_exact):
    """For u = |x|^2 the maximal section at (1/2, 0) renormalizes to the
    unit disk: inner and outer ball radii both approach 1."""
    ns = normalize_section(r2_64_exact, np.array([0.5, 0.0]))
    assert ns.c_inner == pytest.approx(1.0, rel=0.02)
    assert ns.c_outer == pytest.approx(1.0, rel=0.02)
    np.testing.assert_allclose(ns.grad_at_center, 0.0, atol=1e-3)
    lo0, hi0 = ns.det_range_original
    lo1, hi1 = ns.det_range_normalized
    assert lo1 == pytest.approx(lo0, rel=0.05)
    assert hi1 == pytest.approx(hi0, rel=0.05)
