"""Finite-difference operators: quadratic exactness, Poisson, local fits."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amce import (
    Disk,
    ScalarField,
    build_grid,
    discrete_gradient,
    discrete_hessian,
    local_quadratic_fit,
    solve_poisson,
    value_and_gradient_at,
)

coef = st.floats(-2.0, 2.0)


@given(coef, coef, coef, coef, coef)
def test_hessian_exact_on_quadratics(grid16, a, b, c, d, e):
    """Second differences reproduce constant Hessians at EVERY node,
    including cut cells next to the boundary."""
    u = ScalarField.from_callable(
        grid16,
        lambda p: a * p[:, 0] ** 2 + b * p[:, 0] * p[:, 1] + c * p[:, 1] ** 2
        + d * p[:, 0] + e * p[:, 1],
    )
    H = discrete_hessian(u)
    np.testing.assert_allclose(H.hxx, 2.0 * a, atol=5e-9)
    np.testing.assert_allclose(H.hyy, 2.0 * c, atol=5e-9)
    np.testing.assert_allclose(H.hxy, b, atol=5e-9)


def test_gradient_exact_on_affine(grid16):
    u = ScalarField.from_callable(grid16, lambda p: 3.0 * p[:, 0] - 2.0 * p[:, 1])
    grad = discrete_gradient(u)
    np.testing.assert_allclose(grad[:, 0], 3.0, atol=1e-10)
    np.testing.assert_allclose(grad[:, 1], -2.0, atol=1e-10)


def test_poisson_solver_second_order():
    """lap u = -2 sin x sin y with exact Dirichlet data, sup error O(h^2)."""
    exact = lambda p: np.sin(p[:, 0]) * np.sin(p[:, 1])
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = build_grid(Disk(radius=1.0), h)
        rhs = -2.0 * np.sin(g.nodes[:, 0]) * np.sin(g.nodes[:, 1])
        vals = solve_poisson(g, rhs, exact(g.hit_points))
        errs.append(np.abs(vals - exact(g.nodes)).max())
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert errs[-1] < 2e-4
    assert min(rates) > 1.7


def test_local_quadratic_fit_recovers_coefficients(grid32):
    u = ScalarField.from_callable(
        grid32, lambda p: 1.0 + p[:, 0] + 0.5 * p[:, 0] ** 2 + 0.25 * p[:, 1] ** 2
    )
    val, grad, hess = local_quadratic_fit(u, np.array([0.21, -0.13]))
    assert val == pytest.approx(
        1.0 + 0.21 + 0.5 * 0.21**2 + 0.25 * 0.13**2, abs=1e-9
    )
    np.testing.assert_allclose(grad, [1.0 + 0.21, -0.5 * 0.13], atol=1e-8)
    np.testing.assert_allclose(hess, [[1.0, 0.0], [0.0, 0.5]], atol=1e-7)


def test_value_and_gradient_at_boundary_point(grid32):
    u = ScalarField.from_callable(grid32, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    val, grad = value_and_gradient_at(u, np.array([0.0, -1.0]))
    assert val == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(grad, [0.0, -2.0], atol=1e-8)


def test_hessian_det_and_eigenvalues(grid16):
    u = ScalarField.from_callable(
        grid16, lambda p: p[:, 0] ** 2 + 0.5 * p[:, 0] * p[:, 1] + p[:, 1] ** 2
    )
    H = discrete_hessian(u)
    np.testing.assert_allclose(H.det(), 4.0 - 0.25, atol=1e-8)
    lo, hi = H.eigenvalues()
    np.testing.assert_allclose(lo, 1.5, atol=1e-8)
    np.testing.assert_allclose(hi, 2.5, atol=1e-8)
